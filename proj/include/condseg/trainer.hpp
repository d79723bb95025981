#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "condseg/model.hpp"
#include "condseg/types.hpp"

namespace condseg {

enum class Monitor { val_dice, val_loss };

struct TrainConfig {
    double learning_rate = 1e-4;
    double focal_gamma = 0.5;
    int max_epochs = 500;
    int patience = 100;  // epochs without improvement of the monitored metric
    int batch_size = 16;
    uint64_t seed = 0;
    Monitor monitor = Monitor::val_dice;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_dice = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    int stopped_epoch = 0;
    double best_score = 0.0;  // monitored metric at best_epoch
};

// Trains with Adam + focal loss, validates volume-wise mean Dice after every
// epoch, stops early after `patience` epochs without improvement, and leaves
// the model holding the best epoch's weights (including batch-norm running
// statistics). Deterministic given cfg.seed.
TrainHistory train(SegmentationModel& model, const std::vector<SliceSample>& train_slices,
                   const std::vector<std::vector<SliceSample>>& val_volumes, const TrainConfig& cfg,
                   std::ostream* log = nullptr);

void write_history(const std::string& path, const TrainHistory& h);
TrainHistory read_history(const std::string& path);

}  // namespace condseg
