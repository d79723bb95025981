// condseg command-line driver: dataset preparation, grid training and
// reporting for the conditioning experiments.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "condseg/cache.hpp"
#include "condseg/config.hpp"
#include "condseg/error.hpp"
#include "condseg/grid.hpp"
#include "condseg/metrics.hpp"
#include "condseg/report.hpp"
#include "condseg/synthetic.hpp"

namespace fs = std::filesystem;
using namespace condseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

struct CommonArgs {
    std::string config_path;
    std::string output;
    long seed = -1;
    int jobs = 0;
    std::string cells;
};

void add_common(CLI::App* app, CommonArgs& args) {
    app->add_option("--config", args.config_path, "configuration file (key = value lines)");
    app->add_option("--output", args.output, "output directory (overrides config)");
    app->add_option("--seed", args.seed, "global seed (overrides config)");
    app->add_option("--jobs", args.jobs, "parallel grid cells (overrides config)");
    app->add_option("--cells", args.cells, "run-id filter, comma-separated globs");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    ExperimentConfig cfg = args.config_path.empty() ? ExperimentConfig()
                                                    : ExperimentConfig::load(args.config_path);
    if (!args.output.empty()) cfg.output_dir = args.output;
    if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
    if (args.jobs > 0) cfg.jobs = args.jobs;
    cfg.validate();
    return cfg;
}

int cmd_synth_data(const CommonArgs& args, int subjects, int slices) {
    ExperimentConfig cfg = resolve_config(args);
    if (subjects > 0) cfg.synth.n_subjects = subjects;
    if (slices > 0) cfg.synth.slices_per_volume = slices;
    cfg.synth.seed = cfg.seed;
    const std::string root =
        cfg.dataset_root.empty() ? (fs::path(cfg.output_dir) / "synthetic").string()
                                 : cfg.dataset_root;
    write_synthetic_dataset(root, cfg.synth);
    std::cout << "wrote synthetic dataset: " << root << " (" << cfg.synth.n_subjects
              << " subjects, " << cfg.synth.slices_per_volume << " slices/volume)\n";
    return kExitOk;
}

int cmd_prepare_data(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    std::string root = cfg.dataset_root;
    if (root.empty() && cfg.dataset_kind == DatasetKind::synthetic)
        root = (fs::path(cfg.output_dir) / "synthetic").string();
    if (root.empty()) throw ConfigError("dataset.root is required for prepare-data");
    const PrepareResult res = prepare_data(root, cfg.resolved_cache_dir(), cfg.prepare, &std::cout);
    if (!res.subject_errors.empty()) {
        std::cout << res.subject_errors.size() << " subject(s) failed:\n";
        for (const auto& e : res.subject_errors) std::cout << "  " << e << "\n";
    }
    return kExitOk;
}

int cmd_grid(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    const GridSummary summary = run_grid(cfg, args.cells, &std::cout);
    std::cout << "grid: " << summary.completed << " completed, " << summary.skipped
              << " already done, " << summary.failed << " failed\n";
    if (summary.failed > 0) {
        for (const auto& o : summary.outcomes)
            if (!o.ok) std::cout << "  failed: " << o.id << ": " << o.error << "\n";
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_train(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    const auto all = enumerate_cells(cfg);
    std::vector<GridCell> selected;
    for (const auto& c : all)
        if (cell_matches(run_id(c), args.cells)) selected.push_back(c);
    if (selected.size() != 1) {
        std::cerr << "train expects --cells to select exactly one cell; matched "
                  << selected.size() << "\n";
        for (const auto& c : selected) std::cerr << "  " << run_id(c) << "\n";
        return kExitFatal;
    }
    const CellOutcome out = run_cell(cfg, selected[0], &std::cout);
    if (out.skipped) {
        std::cout << out.id << ": already complete\n";
        return kExitOk;
    }
    if (!out.ok) {
        std::cerr << out.id << " failed: " << out.error << "\n";
        return kExitPartial;
    }
    std::cout << out.id << ": done\n";
    return kExitOk;
}

int cmd_evaluate(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    const auto all = enumerate_cells(cfg);
    int evaluated = 0, mismatched = 0;
    for (const auto& c : all) {
        if (!cell_matches(run_id(c), args.cells)) continue;
        if (!cell_is_complete(cfg, c)) continue;
        const auto fresh = reevaluate_cell(cfg, c);
        const fs::path dir = fs::path(cfg.output_dir) / "cells" / run_id(c);
        write_dice_records((dir / "dice_records_reeval.csv").string(), fresh);
        const auto stored = read_dice_records((dir / "dice_records.csv").string());
        bool same = stored.size() == fresh.size();
        for (size_t i = 0; same && i < stored.size(); ++i)
            same = stored[i].mean_dice == fresh[i].mean_dice;
        const auto [mean, stdev] = aggregate(fresh);
        std::cout << run_id(c) << ": mean dice " << mean << " +/- " << stdev
                  << (same ? " (matches stored records)" : " (DIFFERS from stored records)")
                  << "\n";
        ++evaluated;
        if (!same) ++mismatched;
    }
    if (evaluated == 0) {
        std::cerr << "no completed cells matched\n";
        return kExitFatal;
    }
    return mismatched == 0 ? kExitOk : kExitPartial;
}

int cmd_report(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    const ReportOutcome out = write_reports(cfg.output_dir, &std::cout);
    std::cout << "wrote " << out.tables_written << " table(s), " << out.warnings
              << " warning(s)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditioned segmentation experiment driver"};
    app.require_subcommand(1);

    CommonArgs args;
    int synth_subjects = 0, synth_slices = 0;

    CLI::App* synth = app.add_subcommand("synth-data", "generate the synthetic phantom dataset");
    add_common(synth, args);
    synth->add_option("--subjects", synth_subjects, "number of subjects");
    synth->add_option("--slices", synth_slices, "slices per volume");

    CLI::App* prepare = app.add_subcommand("prepare-data", "preprocess a dataset into the slice cache");
    add_common(prepare, args);

    CLI::App* train = app.add_subcommand("train", "train a single grid cell (--cells selects it)");
    add_common(train, args);

    CLI::App* grid = app.add_subcommand("grid", "run the full experiment grid");
    add_common(grid, args);

    CLI::App* evaluate = app.add_subcommand("evaluate", "re-evaluate completed cells from checkpoints");
    add_common(evaluate, args);

    CLI::App* report = app.add_subcommand("report", "emit per-architecture result tables");
    add_common(report, args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth_data(args, synth_subjects, synth_slices);
        if (prepare->parsed()) return cmd_prepare_data(args);
        if (train->parsed()) return cmd_train(args);
        if (grid->parsed()) return cmd_grid(args);
        if (evaluate->parsed()) return cmd_evaluate(args);
        if (report->parsed()) return cmd_report(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
