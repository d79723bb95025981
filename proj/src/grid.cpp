#include "condseg/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "condseg/error.hpp"
#include "condseg/rng.hpp"
#include "condseg/splits.hpp"
#include "condseg/trainer.hpp"

namespace fs = std::filesystem;

namespace condseg {

namespace {

std::string format_fraction(double f) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", f * 100.0);
    std::string s(buf);
    std::replace(s.begin(), s.end(), '.', 'p');
    return s;
}

fs::path cell_dir(const ExperimentConfig& cfg, const GridCell& cell) {
    return fs::path(cfg.output_dir) / "cells" / run_id(cell);
}

struct CellData {
    std::vector<SliceSample> train_slices;
    std::vector<std::vector<SliceSample>> val_volumes;
    std::vector<std::vector<SliceSample>> test_volumes;
};

CellData assemble_cell_data(const ExperimentConfig& cfg, const GridCell& cell) {
    const std::string cache = cfg.resolved_cache_dir();
    const auto manifest = read_manifest(cache);
    const auto subjects = manifest_subjects(manifest);
    auto plans = make_splits(subjects, cfg.repeats, cfg.seed);
    if (cell.repeat < 0 || cell.repeat >= static_cast<int>(plans.size()))
        throw ConfigError("cell repeat outside grid.repeats");
    const SplitPlan plan = subsample_training(plans[static_cast<size_t>(cell.repeat)], cell.fraction);

    CellData data;
    for (const auto& sid : plan.effective_train_subjects)
        for (Phase phase : {Phase::ED, Phase::ES}) {
            auto slices = load_volume_slices(cache, manifest, sid, phase);
            data.train_slices.insert(data.train_slices.end(),
                                     std::make_move_iterator(slices.begin()),
                                     std::make_move_iterator(slices.end()));
        }
    for (const auto& sid : plan.val_subjects)
        for (Phase phase : {Phase::ED, Phase::ES}) {
            auto slices = load_volume_slices(cache, manifest, sid, phase);
            if (!slices.empty()) data.val_volumes.push_back(std::move(slices));
        }
    for (const auto& sid : plan.test_subjects)
        for (Phase phase : {Phase::ED, Phase::ES}) {
            auto slices = load_volume_slices(cache, manifest, sid, phase);
            if (!slices.empty()) data.test_volumes.push_back(std::move(slices));
        }
    return data;
}

void write_cell_meta(const fs::path& path, const ExperimentConfig& cfg, const GridCell& cell,
                     uint64_t seed, int best_epoch) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write cell meta: " + path.string());
    char frac[32];
    std::snprintf(frac, sizeof(frac), "%.17g", cell.fraction);
    os << "architecture = " << cell.architecture << "\n"
       << "variant = " << cell.variant << "\n"
       << "fraction = " << frac << "\n"
       << "repeat = " << cell.repeat << "\n"
       << "seed = " << seed << "\n"
       << "epoch = " << best_epoch << "\n"
       << "depth = " << cfg.backbone.depth << "\n"
       << "base_channels = " << cfg.backbone.base_channels << "\n";
}

}  // namespace

std::string run_id(const GridCell& cell) {
    return cell.architecture + "__" + cell.variant + "__f" + format_fraction(cell.fraction) +
           "__r" + std::to_string(cell.repeat);
}

uint64_t cell_seed(uint64_t global_seed, const GridCell& cell) {
    uint64_t h = hash_u64(global_seed, cell.architecture);
    h = hash_u64(h, cell.variant);
    h = hash_u64(h, static_cast<uint64_t>(std::llround(cell.fraction * 1e6)));
    h = hash_u64(h, static_cast<uint64_t>(cell.repeat));
    return h;
}

std::vector<GridCell> enumerate_cells(const ExperimentConfig& cfg) {
    std::vector<GridCell> cells;
    for (const auto& arch : cfg.architectures)
        for (const auto& variant : cfg.variants)
            for (double f : cfg.fractions)
                for (int r = 0; r < cfg.repeats; ++r) cells.push_back({arch, variant, f, r});
    return cells;
}

bool cell_matches(const std::string& id, const std::string& filter) {
    if (filter.empty()) return true;
    // comma-separated glob alternatives
    std::stringstream ss(filter);
    std::string pat;
    while (std::getline(ss, pat, ',')) {
        if (pat.empty()) continue;
        // iterative glob match with * and ?
        size_t pi = 0, si = 0, star_p = std::string::npos, star_s = 0;
        bool matched = true;
        while (si < id.size()) {
            if (pi < pat.size() && (pat[pi] == '?' || pat[pi] == id[si])) {
                ++pi;
                ++si;
            } else if (pi < pat.size() && pat[pi] == '*') {
                star_p = pi++;
                star_s = si;
            } else if (star_p != std::string::npos) {
                pi = star_p + 1;
                si = ++star_s;
            } else {
                matched = false;
                break;
            }
        }
        while (matched && pi < pat.size() && pat[pi] == '*') ++pi;
        if (matched && pi == pat.size()) return true;
    }
    return false;
}

bool cell_is_complete(const ExperimentConfig& cfg, const GridCell& cell) {
    return fs::exists(cell_dir(cfg, cell) / "DONE");
}

CellOutcome run_cell(const ExperimentConfig& cfg, const GridCell& cell, std::ostream* log) {
    CellOutcome outcome;
    outcome.cell = cell;
    outcome.id = run_id(cell);
    const fs::path dir = cell_dir(cfg, cell);
    try {
        if (cell_is_complete(cfg, cell)) {
            outcome.ok = true;
            outcome.skipped = true;
            return outcome;
        }
        fs::create_directories(dir);

        const CellData data = assemble_cell_data(cfg, cell);
        const uint64_t seed = cell_seed(cfg.seed, cell);
        SegmentationModel model(cfg.backbone, FusionSpec::parse(cell.architecture, cell.variant),
                                seed);
        TrainConfig tc = cfg.train;
        tc.seed = seed;
        const TrainHistory hist = train(model, data.train_slices, data.val_volumes, tc, log);

        const auto records = evaluate_model(model, data.test_volumes, tc.batch_size);

        model.save_weights((dir / "checkpoint.bin").string());
        write_cell_meta(dir / "meta.txt", cfg, cell, seed, hist.best_epoch);
        write_history((dir / "history.csv").string(), hist);
        write_dice_records((dir / "dice_records.csv").string(), records);
        std::ofstream done(dir / "DONE");
        done << "ok\n";
        outcome.ok = true;
    } catch (const std::exception& e) {
        outcome.ok = false;
        outcome.error = e.what();
        std::error_code ec;
        fs::create_directories(dir, ec);
        std::ofstream err(dir / "error.txt");
        err << e.what() << "\n";
        if (const auto* diverged = dynamic_cast<const TrainingDivergedError*>(&e))
            err << diverged->dump_info << "\n";
    }
    return outcome;
}

GridSummary run_grid(const ExperimentConfig& cfg, const std::string& cell_filter,
                     std::ostream* log) {
    const auto all = enumerate_cells(cfg);
    std::vector<GridCell> selected;
    for (const auto& c : all)
        if (cell_matches(run_id(c), cell_filter)) selected.push_back(c);
    if (selected.empty()) throw ConfigError("cell filter matched no cells: " + cell_filter);

    GridSummary summary;
    summary.outcomes.resize(selected.size());
    std::mutex log_mutex;
    std::atomic<size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= selected.size()) return;
            const GridCell& cell = selected[i];
            {
                std::lock_guard<std::mutex> lk(log_mutex);
                if (log) *log << "[" << run_id(cell) << "] start\n";
            }
            std::ostringstream cell_log;
            CellOutcome out = run_cell(cfg, cell, &cell_log);
            {
                std::lock_guard<std::mutex> lk(log_mutex);
                if (log) {
                    *log << cell_log.str();
                    *log << "[" << out.id << "] "
                         << (out.skipped ? "already complete" : (out.ok ? "done" : "FAILED: " + out.error))
                         << "\n";
                }
            }
            summary.outcomes[i] = std::move(out);
        }
    };

    const int jobs = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(selected.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(jobs));
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (const auto& o : summary.outcomes) {
        if (o.skipped)
            ++summary.skipped;
        else if (o.ok)
            ++summary.completed;
        else
            ++summary.failed;
    }
    return summary;
}

std::vector<DiceRecord> reevaluate_cell(const ExperimentConfig& cfg, const GridCell& cell) {
    const fs::path dir = cell_dir(cfg, cell);
    if (!cell_is_complete(cfg, cell))
        throw InputError("cell not complete: " + run_id(cell));
    const CheckpointMeta meta = read_checkpoint_meta((dir / "meta.txt").string());
    BackboneConfig bc = cfg.backbone;
    bc.depth = meta.depth;
    bc.base_channels = meta.base_channels;
    SegmentationModel model(bc, FusionSpec::parse(meta.architecture, meta.variant), meta.seed);
    model.load_weights((dir / "checkpoint.bin").string());
    const CellData data = assemble_cell_data(cfg, cell);
    return evaluate_model(model, data.test_volumes, cfg.train.batch_size);
}

}  // namespace condseg
