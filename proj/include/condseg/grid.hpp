#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "condseg/config.hpp"
#include "condseg/metrics.hpp"

namespace condseg {

struct GridCell {
    std::string architecture;
    std::string variant;
    double fraction = 1.0;
    int repeat = 0;
};

// Directory-safe, injective id: <arch>__<variant>__f<percent>__r<repeat>.
std::string run_id(const GridCell& cell);

// Per-cell seed derived from the global seed and the cell coordinates, so
// adding or removing cells never perturbs the others.
uint64_t cell_seed(uint64_t global_seed, const GridCell& cell);

// All configured cells, deterministic order.
std::vector<GridCell> enumerate_cells(const ExperimentConfig& cfg);

// Glob-style filter over run ids ('*' and '?'), comma-separated alternatives.
bool cell_matches(const std::string& id, const std::string& filter);

struct CellOutcome {
    GridCell cell;
    std::string id;
    bool ok = false;
    bool skipped = false;  // already complete
    std::string error;
};

struct GridSummary {
    std::vector<CellOutcome> outcomes;
    int completed = 0;
    int skipped = 0;
    int failed = 0;
};

// Runs one cell end to end: split -> subsample -> train -> evaluate on the
// repeat's test subjects -> persist checkpoint/history/dice records. A DONE
// marker makes completion detectable for crash-safe resumption.
CellOutcome run_cell(const ExperimentConfig& cfg, const GridCell& cell, std::ostream* log);

// Runs every selected cell (optionally filtered), skipping completed ones,
// with up to cfg.jobs cells in flight.
GridSummary run_grid(const ExperimentConfig& cfg, const std::string& cell_filter,
                     std::ostream* log);

bool cell_is_complete(const ExperimentConfig& cfg, const GridCell& cell);

// Re-evaluates a completed cell's checkpoint on its test subjects.
std::vector<DiceRecord> reevaluate_cell(const ExperimentConfig& cfg, const GridCell& cell);

}  // namespace condseg
