#pragma once

#include <string>
#include <utility>
#include <vector>

#include "condseg/model.hpp"
#include "condseg/types.hpp"

namespace condseg {

// Volumetric Dice for one class: 2|P∩G| / (|P|+|G|). Both-empty convention:
// returns 1.0 when the class is absent from both volumes.
double dice_score(const MaskVolume3D& pred, const MaskVolume3D& gt, int class_id);

struct DiceRecord {
    std::string subject;
    Phase phase = Phase::ED;
    double rv = 0.0;
    double myo = 0.0;
    double lv = 0.0;
    double mean_dice = 0.0;
};

DiceRecord make_dice_record(const std::string& subject, Phase phase, const MaskVolume3D& pred,
                            const MaskVolume3D& gt);

// Per (subject, phase) test volume: predict slice-wise, stack, score the
// three structures on the preprocessed grid, and average.
std::vector<DiceRecord> evaluate_model(SegmentationModel& model,
                                       const std::vector<std::vector<SliceSample>>& volumes,
                                       int batch_size = 8);

// Ground-truth volume stacked from a slice list.
MaskVolume3D stack_labels(const std::vector<SliceSample>& slices);

// Mean and sample standard deviation of mean_dice over the records.
std::pair<double, double> aggregate(const std::vector<DiceRecord>& records);

void write_dice_records(const std::string& path, const std::vector<DiceRecord>& records);
std::vector<DiceRecord> read_dice_records(const std::string& path);

}  // namespace condseg
