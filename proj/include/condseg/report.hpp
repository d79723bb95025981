#pragma once

#include <iosfwd>
#include <string>

namespace condseg {

struct ReportOutcome {
    int tables_written = 0;
    int warnings = 0;  // rows without a baseline, unreadable cells
};

// Builds the per-architecture result tables from persisted cell artifacts
// under <results_dir>/cells: rows = training fractions, columns = the nine
// variants, cells = pooled mean +/- std of per-volume mean Dice across
// repeats, with a significance marker from the paired t-test against the
// row's baseline under the 8-way Bonferroni correction. Emits
// <results_dir>/reports/<architecture>.{txt,csv}. Cells without results
// render as an em dash; rows lacking a baseline are reported unmarked.
ReportOutcome write_reports(const std::string& results_dir, std::ostream* log = nullptr);

}  // namespace condseg
