#include "condseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "condseg/error.hpp"
#include "condseg/loss.hpp"
#include "condseg/metrics.hpp"
#include "condseg/optim.hpp"
#include "condseg/rng.hpp"

namespace condseg {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (focal_gamma < 0.0) throw ConfigError("train: focal_gamma must be >= 0");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
    if (patience < 1 || patience > max_epochs)
        throw ConfigError("train: patience must be in [1, max_epochs]");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

namespace {

void fill_batch(const std::vector<SliceSample>& slices, const std::vector<size_t>& order,
                size_t start, size_t end, Tensor& images, Tensor& z,
                std::vector<uint8_t>& targets) {
    const int h = slices[order[start]].image.h, w = slices[order[start]].image.w;
    const int n = static_cast<int>(end - start);
    images = Tensor({n, 1, h, w});
    z = Tensor({n, 3});
    targets.resize(static_cast<size_t>(n) * h * w);
    for (int i = 0; i < n; ++i) {
        const SliceSample& s = slices[order[start + static_cast<size_t>(i)]];
        std::memcpy(images.data() + images.idx4(i, 0, 0, 0), s.image.v.data(),
                    sizeof(float) * s.image.v.size());
        z.at2(i, 0) = static_cast<float>(s.z.rv);
        z.at2(i, 1) = static_cast<float>(s.z.myo);
        z.at2(i, 2) = static_cast<float>(s.z.lv);
        std::memcpy(targets.data() + static_cast<size_t>(i) * s.labels.v.size(),
                    s.labels.v.data(), s.labels.v.size());
    }
}

double validation_loss(SegmentationModel& model,
                       const std::vector<std::vector<SliceSample>>& val_volumes, double gamma,
                       int batch_size) {
    double sum = 0.0;
    long count = 0;
    std::vector<size_t> order;
    for (const auto& vol : val_volumes) {
        order.resize(vol.size());
        for (size_t i = 0; i < vol.size(); ++i) order[i] = i;
        for (size_t start = 0; start < vol.size(); start += static_cast<size_t>(batch_size)) {
            const size_t end = std::min(vol.size(), start + static_cast<size_t>(batch_size));
            Tensor images, z;
            std::vector<uint8_t> targets;
            fill_batch(vol, order, start, end, images, z, targets);
            const double l = focal_loss(model.forward(images, z, false), targets, gamma);
            sum += l * static_cast<double>(end - start);
            count += static_cast<long>(end - start);
        }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

double validation_dice(SegmentationModel& model,
                       const std::vector<std::vector<SliceSample>>& val_volumes, int batch_size) {
    const auto records = evaluate_model(model, val_volumes, batch_size);
    double sum = 0.0;
    for (const auto& r : records) sum += r.mean_dice;
    return sum / static_cast<double>(records.size());
}

}  // namespace

TrainHistory train(SegmentationModel& model, const std::vector<SliceSample>& train_slices,
                   const std::vector<std::vector<SliceSample>>& val_volumes, const TrainConfig& cfg,
                   std::ostream* log) {
    cfg.validate();
    if (train_slices.empty()) throw InputError("train: empty training set");
    if (val_volumes.empty()) throw InputError("train: empty validation set");

    AdamConfig acfg;
    acfg.lr = cfg.learning_rate;
    Adam opt(model.params(), acfg);

    const bool maximize = cfg.monitor == Monitor::val_dice;
    TrainHistory hist;
    hist.best_score = maximize ? -1.0 : std::numeric_limits<double>::infinity();
    std::vector<float> best_state;

    std::vector<size_t> order(train_slices.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(hash_u64(hash_u64(cfg.seed, "epoch"), static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        long sample_count = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            Tensor images, z;
            std::vector<uint8_t> targets;
            fill_batch(train_slices, order, start, end, images, z, targets);

            model.zero_grad();
            Tensor logits = model.forward(images, z, true);
            Tensor dlogits;
            const double loss = focal_loss_with_grad(logits, targets, cfg.focal_gamma, dlogits);
            if (!std::isfinite(loss)) {
                std::ostringstream dump;
                dump << "non-finite loss at epoch " << epoch << " batch starting " << start
                     << "; last epoch losses:";
                for (const auto& e : hist.epochs) dump << " " << e.train_loss;
                throw TrainingDivergedError("training diverged: non-finite loss", dump.str());
            }
            model.backward(dlogits);
            opt.step();
            loss_sum += loss * static_cast<double>(end - start);
            sample_count += static_cast<long>(end - start);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(sample_count);
        rec.val_loss = validation_loss(model, val_volumes, cfg.focal_gamma, cfg.batch_size);
        rec.val_dice = validation_dice(model, val_volumes, cfg.batch_size);
        hist.epochs.push_back(rec);
        hist.stopped_epoch = epoch;

        const double score = maximize ? rec.val_dice : rec.val_loss;
        const bool improved = maximize ? score > hist.best_score : score < hist.best_score;
        if (improved) {
            hist.best_score = score;
            hist.best_epoch = epoch;
            best_state = model.snapshot_state();
        }
        if (log) {
            char line[160];
            std::snprintf(line, sizeof(line),
                          "epoch %3d  train_loss %.6f  val_loss %.6f  val_dice %.4f  best %.4f @%d",
                          epoch, rec.train_loss, rec.val_loss, rec.val_dice, hist.best_score,
                          hist.best_epoch);
            *log << line << "\n";
        }
        if (epoch - hist.best_epoch >= cfg.patience) break;
    }

    if (!best_state.empty()) model.restore_state(best_state);
    return hist;
}

void write_history(const std::string& path, const TrainHistory& h) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write history: " + path);
    os << "# best_epoch=" << h.best_epoch << " stopped_epoch=" << h.stopped_epoch << "\n";
    os << "epoch,train_loss,val_loss,val_dice\n";
    char buf[128];
    for (const auto& e : h.epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g", e.epoch, e.train_loss, e.val_loss,
                      e.val_dice);
        os << buf << "\n";
    }
}

TrainHistory read_history(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read history: " + path);
    TrainHistory h;
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("# best_epoch=", 0) == 0) {
            std::sscanf(line.c_str(), "# best_epoch=%d stopped_epoch=%d", &h.best_epoch,
                        &h.stopped_epoch);
            continue;
        }
        if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
        EpochRecord e;
        std::stringstream ss(line);
        std::string f;
        std::getline(ss, f, ',');
        e.epoch = std::stoi(f);
        std::getline(ss, f, ',');
        e.train_loss = std::stod(f);
        std::getline(ss, f, ',');
        e.val_loss = std::stod(f);
        std::getline(ss, f, ',');
        e.val_dice = std::stod(f);
        h.epochs.push_back(e);
    }
    return h;
}

}  // namespace condseg
