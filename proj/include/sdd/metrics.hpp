#pragma once

#include "sdd/codec.hpp"
#include "sdd/error.hpp"
#include "sdd/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

// =============================================================================
// Two-sample evaluation suite: exact 1-D Wasserstein on summary statistics,
// RBF-kernel MMD, mean-expression rank/linear correlations, kNN label-mixing
// (LISI), and the sparsity / SB-logit histograms.
// =============================================================================

namespace sdd {

// Exact W1 between empirical distributions via the quantile coupling; the
// samples may have different sizes. With normalize, divides by the population
// standard deviation of `a` (the reference sample).
inline double wasserstein1(std::vector<double> a, std::vector<double> b, bool normalize = false) {
    if (a.empty() || b.empty()) throw DomainError("wasserstein1: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double w = 0.0, q = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double qa = static_cast<double>(i + 1) / na;
        const double qb = static_cast<double>(j + 1) / nb;
        const double qn = std::min(qa, qb);
        w += (qn - q) * std::fabs(a[i] - b[j]);
        q = qn;
        if (qa <= qn) ++i;
        if (qb <= qn) ++j;
    }
    if (normalize) {
        double mean = 0.0;
        for (double x : a) mean += x;
        mean /= na;
        double var = 0.0;
        for (double x : a) var += (x - mean) * (x - mean);
        var /= na;
        const double sd = std::sqrt(var);
        if (sd == 0.0) throw DomainError("wasserstein1: reference sample has zero variance");
        w /= sd;
    }
    return w;
}

// Per-row sum of all entries (total deposited intensity).
inline std::vector<double> pt_statistic(const DataBatch& batch) {
    std::vector<double> s(batch.n());
    for (std::size_t i = 0; i < batch.n(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < batch.d(); ++j) acc += batch.values(i, j);
        s[i] = acc;
    }
    return s;
}

enum class MmdEstimator { unbiased, biased };

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        s += diff * diff;
    }
    return s;
}

}  // namespace detail

// Median of pairwise Euclidean distances over the pooled sample (even count:
// mean of the two central order statistics).
inline double median_heuristic_bandwidth(const DataBatch& x, const DataBatch& y) {
    if (x.d() != y.d()) throw ShapeError("median bandwidth: dimension mismatch");
    std::vector<const double*> rows;
    for (std::size_t i = 0; i < x.n(); ++i) rows.push_back(x.values.row(i));
    for (std::size_t i = 0; i < y.n(); ++i) rows.push_back(y.values.row(i));
    std::vector<double> dists;
    dists.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j)
            dists.push_back(std::sqrt(detail::sq_dist(rows[i], rows[j], x.d())));
    if (dists.empty()) return 1.0;
    std::sort(dists.begin(), dists.end());
    const std::size_t m = dists.size();
    const double med = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    return med > 0.0 ? med : 1.0;
}

// Squared-MMD estimate with Gaussian kernel k(a,b) = exp(-|a-b|^2 / 2 sigma^2).
// The unbiased U-statistic may be slightly negative; see mmd_rbf for the
// floored reporting value. bandwidth <= 0 selects the median heuristic.
inline double mmd_rbf_raw(const DataBatch& x, const DataBatch& y, double bandwidth = 0.0,
                          MmdEstimator est = MmdEstimator::unbiased) {
    if (x.d() != y.d()) throw ShapeError("mmd: dimension mismatch");
    if (x.n() < 2 || y.n() < 2) throw DomainError("mmd: need at least 2 rows per sample");
    const double sigma = bandwidth > 0.0 ? bandwidth : median_heuristic_bandwidth(x, y);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const std::size_t n = x.n(), m = y.n(), d = x.d();

    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (est == MmdEstimator::unbiased && i == j) continue;
            kxx += std::exp(-detail::sq_dist(x.values.row(i), x.values.row(j), d) * inv);
        }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (est == MmdEstimator::unbiased && i == j) continue;
            kyy += std::exp(-detail::sq_dist(y.values.row(i), y.values.row(j), d) * inv);
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            kxy += std::exp(-detail::sq_dist(x.values.row(i), y.values.row(j), d) * inv);

    const double nn = static_cast<double>(n), mm = static_cast<double>(m);
    const double sxx = est == MmdEstimator::unbiased ? kxx / (nn * (nn - 1.0)) : kxx / (nn * nn);
    const double syy = est == MmdEstimator::unbiased ? kyy / (mm * (mm - 1.0)) : kyy / (mm * mm);
    return sxx + syy - 2.0 * kxy / (nn * mm);
}

// Reporting value, floored at 0.
inline double mmd_rbf(const DataBatch& x, const DataBatch& y, double bandwidth = 0.0,
                      MmdEstimator est = MmdEstimator::unbiased) {
    return std::max(0.0, mmd_rbf_raw(x, y, bandwidth, est));
}

namespace detail {

// Average ranks (ties get the mean of their positions, 1-based).
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw DomainError("correlation: zero-variance vector, correlation undefined");
    return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> column_means(const DataBatch& b) {
    std::vector<double> mu(b.d(), 0.0);
    for (std::size_t i = 0; i < b.n(); ++i)
        for (std::size_t j = 0; j < b.d(); ++j) mu[j] += b.values(i, j);
    for (double& m : mu) m /= static_cast<double>(b.n());
    return mu;
}

}  // namespace detail

// Correlations between the per-dimension mean vectors of the two batches:
// (Spearman on average ranks, Pearson).
inline std::pair<double, double> mean_expression_correlations(const DataBatch& real,
                                                              const DataBatch& gen) {
    if (real.d() != gen.d()) throw ShapeError("correlations: dimension mismatch");
    if (real.d() < 2) throw DomainError("correlations: need d >= 2");
    const auto mu_r = detail::column_means(real);
    const auto mu_g = detail::column_means(gen);
    const double pcc = detail::pearson(mu_r, mu_g);
    const double scc =
        detail::pearson(detail::average_ranks(mu_r), detail::average_ranks(mu_g));
    return {scc, pcc};
}

// Mean inverse Simpson's index of the real/generated label mix in exact
// k-nearest-neighborhoods, rescaled from [1, 2] to [0, 1]. 1 means locally
// interleaved samples, 0 means fully separated.
inline double lisi(const DataBatch& real, const DataBatch& gen, std::size_t k = 30) {
    if (real.d() != gen.d()) throw ShapeError("lisi: dimension mismatch");
    const std::size_t n0 = real.n(), n = n0 + gen.n();
    if (k < 1 || k >= n) throw DomainError("lisi: require 1 <= k < pooled sample size");
    const std::size_t d = real.d();

    const auto row_of = [&](std::size_t i) {
        return i < n0 ? real.values.row(i) : gen.values.row(i - n0);
    };

    // Per-point inverse Simpson from integer neighbor counts, accumulated per
    // group; swapping the labels permutes (p0, p1) and the two partial sums,
    // so the result is exactly symmetric.
    double acc_real = 0.0, acc_gen = 0.0;
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            dist[m++] = {detail::sq_dist(row_of(i), row_of(j), d), j};
        }
        // Exact kNN; ties broken by pooled index for determinism.
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                          dist.begin() + static_cast<std::ptrdiff_t>(m));
        std::size_t real_neighbors = 0;
        for (std::size_t t = 0; t < k; ++t)
            if (dist[t].second < n0) ++real_neighbors;
        const double p0 = static_cast<double>(real_neighbors) / static_cast<double>(k);
        const double p1 = static_cast<double>(k - real_neighbors) / static_cast<double>(k);
        (i < n0 ? acc_real : acc_gen) += 1.0 / (p0 * p0 + p1 * p1);
    }
    const double mean_isi = (acc_real + acc_gen) / static_cast<double>(n);
    return mean_isi - 1.0;  // (mean - 1) / (2 - 1)
}

struct SparsityHistogram {
    static constexpr std::size_t kBins = 20;
    std::vector<std::size_t> counts = std::vector<std::size_t>(kBins, 0);
    double mean = 0.0;
    std::size_t n = 0;
};

// 20 equal-width bins over [0, 1], last bin right-closed.
inline SparsityHistogram sparsity_histogram(const DataBatch& batch) {
    SparsityHistogram h;
    const auto s = sparsity_per_row(batch);
    h.n = s.size();
    for (double v : s) {
        const auto bin = std::min<std::size_t>(
            SparsityHistogram::kBins - 1,
            static_cast<std::size_t>(v * static_cast<double>(SparsityHistogram::kBins)));
        ++h.counts[bin];
        h.mean += v;
    }
    if (h.n > 0) h.mean /= static_cast<double>(h.n);
    return h;
}

struct LogitHistogram {
    std::vector<std::size_t> counts;
    std::size_t n = 0;
    double first_bin_mass = 0.0;
    double last_bin_mass = 0.0;
};

// Histogram of SB logits over [-1, 1] after clamping. Both first- and
// last-bin masses are reported, since dataset sparsity shows up in one
// extreme bin depending on logit orientation.
inline LogitHistogram sb_logit_histogram(const Matrix& logits, std::size_t bins = 50) {
    if (bins < 2) throw DomainError("sb_logit_histogram: need >= 2 bins");
    LogitHistogram h;
    h.counts.assign(bins, 0);
    h.n = logits.size();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = std::clamp(logits.data()[i], -1.0, 1.0);
        const auto bin = std::min<std::size_t>(
            bins - 1, static_cast<std::size_t>((z + 1.0) * 0.5 * static_cast<double>(bins)));
        ++h.counts[bin];
    }
    if (h.n > 0) {
        h.first_bin_mass = static_cast<double>(h.counts.front()) / static_cast<double>(h.n);
        h.last_bin_mass = static_cast<double>(h.counts.back()) / static_cast<double>(h.n);
    }
    return h;
}

// W1 between two binned distributions over [0, 1]: CDF-difference sum times
// the bin width. Both histograms must use the same binning.
inline double histogram_w1(const SparsityHistogram& a, const SparsityHistogram& b) {
    if (a.n == 0 || b.n == 0) throw DomainError("histogram_w1: empty histogram");
    const double bin_w = 1.0 / static_cast<double>(SparsityHistogram::kBins);
    double cdf_a = 0.0, cdf_b = 0.0, w = 0.0;
    for (std::size_t i = 0; i < SparsityHistogram::kBins; ++i) {
        cdf_a += static_cast<double>(a.counts[i]) / static_cast<double>(a.n);
        cdf_b += static_cast<double>(b.counts[i]) / static_cast<double>(b.n);
        w += std::fabs(cdf_a - cdf_b) * bin_w;
    }
    return w;
}

struct MetricsReport {
    double w1_stat = 0.0;   // normalized W1 between per-row intensity sums
    double mmd = 0.0;
    double scc = 0.0;
    double pcc = 0.0;
    double lisi = 0.0;
    std::size_t lisi_k = 30;
    SparsityHistogram sparsity_real;
    SparsityHistogram sparsity_gen;
    double sparsity_w1 = 0.0;
    bool has_w1 = false, has_mmd = false, has_corr = false, has_lisi = false;
};

struct MetricsOptions {
    bool w1 = true;
    bool mmd = true;
    bool corr = true;
    bool lisi = true;
    std::size_t lisi_k = 30;
    double mmd_bandwidth = 0.0;  // <= 0: median heuristic
};

inline MetricsReport compute_report(const DataBatch& real, const DataBatch& gen,
                                    const MetricsOptions& opt = {}) {
    if (real.d() != gen.d()) throw ShapeError("metrics: dimension mismatch between samples");
    MetricsReport r;
    r.sparsity_real = sparsity_histogram(real);
    r.sparsity_gen = sparsity_histogram(gen);
    r.sparsity_w1 = histogram_w1(r.sparsity_real, r.sparsity_gen);
    if (opt.w1) {
        r.w1_stat = wasserstein1(pt_statistic(real), pt_statistic(gen), /*normalize=*/true);
        r.has_w1 = true;
    }
    if (opt.mmd) {
        r.mmd = mmd_rbf(real, gen, opt.mmd_bandwidth);
        r.has_mmd = true;
    }
    if (opt.corr) {
        const auto [scc, pcc] = mean_expression_correlations(real, gen);
        r.scc = scc;
        r.pcc = pcc;
        r.has_corr = true;
    }
    if (opt.lisi) {
        r.lisi = lisi(real, gen, opt.lisi_k);
        r.lisi_k = opt.lisi_k;
        r.has_lisi = true;
    }
    return r;
}

}  // namespace sdd
