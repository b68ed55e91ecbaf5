#pragma once

#include "sdd/error.hpp"
#include "sdd/metrics.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>

// JSON and CSV serialization of MetricsReport. The LISI and W1 conventions
// are declared inside the report so downstream consumers don't have to guess.

namespace sdd {

inline nlohmann::json histogram_to_json(const SparsityHistogram& h) {
    nlohmann::json j;
    j["bins"] = SparsityHistogram::kBins;
    j["counts"] = h.counts;
    j["mean"] = h.mean;
    j["n"] = h.n;
    return j;
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    if (r.has_w1) {
        j["w1_stat"] = r.w1_stat;
        j["w1_convention"] = "quantile_coupling_normalized_by_reference_std";
    }
    if (r.has_mmd) {
        j["mmd"] = r.mmd;
        j["mmd_convention"] = "unbiased_rbf_median_heuristic_floored_at_0";
    }
    if (r.has_corr) {
        j["scc"] = r.scc;
        j["pcc"] = r.pcc;
        j["corr_convention"] = "per_dimension_mean_vectors";
    }
    if (r.has_lisi) {
        j["lisi"] = r.lisi;
        j["lisi_k"] = r.lisi_k;
        j["lisi_convention"] = "exact_knn_inverse_simpson_rescaled_0_1";
    }
    j["sparsity_w1"] = r.sparsity_w1;
    j["sparsity_hist_real"] = histogram_to_json(r.sparsity_real);
    j["sparsity_hist_gen"] = histogram_to_json(r.sparsity_gen);
    return j;
}

// Flat single-row CSV of the scalar metrics.
inline void write_report_csv(const std::string& path, const MetricsReport& r) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open report csv: " + path);
    out << "w1_stat,mmd,scc,pcc,lisi,sparsity_w1,sparsity_mean_real,sparsity_mean_gen\n";
    char buf[320];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.w1_stat,
                  r.mmd, r.scc, r.pcc, r.lisi, r.sparsity_w1, r.sparsity_real.mean,
                  r.sparsity_gen.mean);
    out << buf;
    if (!out) throw FormatError("report csv write failed: " + path);
}

// Histogram rows as (bin-left, bin-right, count) for external plotting.
inline void write_histogram_csv(const std::string& path, const std::vector<std::size_t>& counts,
                                double lo, double hi) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open histogram csv: " + path);
    out << "bin_left,bin_right,count\n";
    const double w = (hi - lo) / static_cast<double>(counts.size());
    char buf[128];
    for (std::size_t i = 0; i < counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%zu\n", lo + w * static_cast<double>(i),
                      lo + w * static_cast<double>(i + 1), counts[i]);
        out << buf;
    }
    if (!out) throw FormatError("histogram csv write failed: " + path);
}

}  // namespace sdd
