#include "condseg/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <vector>

#include "condseg/config.hpp"
#include "condseg/error.hpp"
#include "condseg/metrics.hpp"
#include "condseg/model.hpp"
#include "condseg/stats.hpp"

namespace fs = std::filesystem;

namespace condseg {

namespace {

struct CellResults {
    // per repeat: (subject, phase) -> volume mean dice
    std::map<int, std::map<std::string, double>> by_repeat;
    std::vector<double> pooled;
};

struct TableCell {
    bool present = false;
    bool failed = false;
    int n = 0;
    double mean = 0.0, stdev = 0.0;
    bool has_test = false;
    double t = 0.0, p = 1.0;
    bool significant = false;
    bool best = false;
};

std::string volume_key(const DiceRecord& r) {
    return r.subject + "/" + phase_name(r.phase);
}

constexpr int kFamilySize = 8;  // the eight conditioning variants per baseline

}  // namespace

ReportOutcome write_reports(const std::string& results_dir, std::ostream* log) {
    ReportOutcome outcome;
    const fs::path cells_dir = fs::path(results_dir) / "cells";
    if (!fs::is_directory(cells_dir))
        throw InputError("no cells directory under " + results_dir);

    // arch -> fraction -> variant -> results
    std::map<std::string, std::map<double, std::map<std::string, CellResults>,
                                   std::greater<double>>>
        grid;
    std::map<std::string, std::map<double, std::map<std::string, bool>, std::greater<double>>>
        failed;

    for (const auto& entry : fs::directory_iterator(cells_dir)) {
        if (!entry.is_directory()) continue;
        const fs::path meta_path = entry.path() / "meta.txt";
        if (!fs::exists(meta_path)) continue;
        KeyValueFile meta;
        try {
            meta = KeyValueFile::parse_file(meta_path.string());
        } catch (const std::exception&) {
            ++outcome.warnings;
            continue;
        }
        const std::string arch = meta.get("architecture", "");
        const std::string variant = meta.get("variant", "");
        const double fraction = meta.get_double("fraction", 0.0);
        const int repeat = static_cast<int>(meta.get_int("repeat", 0));
        if (arch.empty() || variant.empty()) {
            ++outcome.warnings;
            continue;
        }
        if (!fs::exists(entry.path() / "DONE")) {
            failed[arch][fraction][variant] = true;
            continue;
        }
        std::vector<DiceRecord> recs;
        try {
            recs = read_dice_records((entry.path() / "dice_records.csv").string());
        } catch (const std::exception&) {
            ++outcome.warnings;
            continue;
        }
        CellResults& cr = grid[arch][fraction][variant];
        for (const auto& r : recs) {
            cr.by_repeat[repeat][volume_key(r)] = r.mean_dice;
            cr.pooled.push_back(r.mean_dice);
        }
    }

    if (grid.empty()) throw InputError("no completed cells under " + results_dir);

    const fs::path reports_dir = fs::path(results_dir) / "reports";
    fs::create_directories(reports_dir);
    const auto& variants = FusionSpec::variant_ids();

    for (const auto& [arch, rows] : grid) {
        std::ofstream txt(reports_dir / (arch + ".txt"));
        std::ofstream csv(reports_dir / (arch + ".csv"));
        if (!txt || !csv) throw IoError("cannot write reports under " + reports_dir.string());

        csv << "architecture,fraction,variant,n,mean,std,t_statistic,p_value,significant,best\n";

        txt << "Results: " << arch << "\n";
        txt << "cells: mean +/- std of per-volume mean Dice, pooled over repeats\n";
        txt << "[ ] best in row; * significant vs baseline (paired t-test, Bonferroni alpha = 0.05/"
            << kFamilySize << ")\n\n";
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-10s", "fraction");
        txt << buf;
        for (const auto& v : variants) {
            std::snprintf(buf, sizeof(buf), " %-20s", v.c_str());
            txt << buf;
        }
        txt << "\n";

        for (const auto& [fraction, row] : rows) {
            std::map<std::string, TableCell> cells;
            const auto base_it = row.find("baseline");
            const bool have_baseline = base_it != row.end();
            if (!have_baseline) {
                ++outcome.warnings;
                if (log)
                    *log << "warning: " << arch << " fraction " << fraction
                         << ": baseline missing, significance not evaluated\n";
            }

            for (const auto& v : variants) {
                TableCell cell;
                const auto it = row.find(v);
                if (it != row.end() && !it->second.pooled.empty()) {
                    cell.present = true;
                    cell.n = static_cast<int>(it->second.pooled.size());
                    const auto [m, s] = mean_and_sample_std(it->second.pooled);
                    cell.mean = m;
                    cell.stdev = s;
                    if (have_baseline && v != "baseline") {
                        // pair per (repeat, subject, phase) volumes shared with the baseline
                        std::vector<double> a, b;
                        for (const auto& [rep, vols] : it->second.by_repeat) {
                            const auto brep = base_it->second.by_repeat.find(rep);
                            if (brep == base_it->second.by_repeat.end()) continue;
                            for (const auto& [key, dice] : vols) {
                                const auto bit = brep->second.find(key);
                                if (bit != brep->second.end()) {
                                    a.push_back(dice);
                                    b.push_back(bit->second);
                                }
                            }
                        }
                        if (a.size() >= 2) {
                            const TTestResult tr = paired_ttest(a, b);
                            cell.has_test = true;
                            cell.t = tr.t;
                            cell.p = tr.p;
                            cell.significant = bonferroni_decide(tr.p, kFamilySize).significant;
                        }
                    }
                } else if (failed.count(arch) && failed[arch].count(fraction) &&
                           failed[arch][fraction].count(v)) {
                    cell.failed = true;
                }
                cells[v] = cell;
            }

            // best cell per row by mean, ties to the lowest column index
            double best_mean = -1.0;
            std::string best_variant;
            for (const auto& v : variants) {
                const TableCell& c = cells[v];
                if (c.present && c.mean > best_mean) {
                    best_mean = c.mean;
                    best_variant = v;
                }
            }
            if (!best_variant.empty()) cells[best_variant].best = true;

            std::snprintf(buf, sizeof(buf), "%g%%", fraction * 100.0);
            std::string frac_label(buf);
            std::snprintf(buf, sizeof(buf), "%-10s", frac_label.c_str());
            txt << buf;
            for (const auto& v : variants) {
                const TableCell& c = cells[v];
                std::string s;
                if (!c.present) {
                    s = c.failed ? "failed" : "-";
                } else {
                    char val[64];
                    std::snprintf(val, sizeof(val), "%.3f+/-%.3f%s", c.mean, c.stdev,
                                  c.significant ? "*" : "");
                    s = c.best ? "[" + std::string(val) + "]" : val;
                }
                std::snprintf(buf, sizeof(buf), " %-20s", s.c_str());
                txt << buf;

                char frac_csv[32];
                std::snprintf(frac_csv, sizeof(frac_csv), "%.17g", fraction);
                if (c.present) {
                    char line[256];
                    std::snprintf(line, sizeof(line), "%s,%s,%s,%d,%.17g,%.17g,%.17g,%.17g,%d,%d",
                                  arch.c_str(), frac_csv, v.c_str(), c.n, c.mean, c.stdev,
                                  c.has_test ? c.t : 0.0, c.has_test ? c.p : 1.0,
                                  c.significant ? 1 : 0, c.best ? 1 : 0);
                    csv << line << "\n";
                } else {
                    csv << arch << "," << frac_csv << "," << v << ",0,,,,,0,0\n";
                }
            }
            txt << "\n";
        }
        ++outcome.tables_written;
        if (log) *log << "wrote reports/" << arch << ".txt and .csv\n";
    }
    return outcome;
}

}  // namespace condseg
