#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "flowml/errors.hpp"
#include "flowml/linalg.hpp"
#include "flowml/preprocess.hpp"

namespace flowml {

struct MiReport {
    std::vector<std::pair<std::string, double>> scores; // descending, nats
    int bins = 0;
    std::size_t n_rows = 0;
};

struct PcaModel {
    std::vector<double> mean;
    std::vector<double> eigenvalues; // descending
    Mat components;                  // d x d, row i = principal axis i
    std::vector<double> explained_variance_ratio;
};

// Equal-frequency discretization. Distinct values never straddle a bin
// boundary; when the column has at most `bins` distinct values each value
// keeps its own bin, so already-discrete data passes through unchanged.
inline std::vector<int> equal_frequency_bins(const std::vector<double>& values, int bins) {
    const std::size_t n = values.size();
    std::vector<int> ids(n, 0);
    if (n == 0) return ids;

    std::set<double> distinct(values.begin(), values.end());
    if (distinct.size() <= static_cast<std::size_t>(bins)) {
        std::map<double, int> rank;
        int r = 0;
        for (double v : distinct) rank[v] = r++;
        for (std::size_t i = 0; i < n; ++i) ids[i] = rank[values[i]];
        return ids;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    int prev_bin = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int bin = static_cast<int>(i * static_cast<std::size_t>(bins) / n);
        if (i > 0 && values[order[i]] == values[order[i - 1]]) bin = prev_bin; // ties collapse
        ids[order[i]] = bin;
        prev_bin = bin;
    }
    return ids;
}

// MI of a discretized column against integer labels, in nats:
// sum over the joint histogram of p(x,y) ln[p(x,y) / (p(x) p(y))]
inline double mutual_information(const std::vector<double>& column, const std::vector<int>& labels,
                                 int bins) {
    if (column.size() != labels.size())
        throw ArgumentError("mutual_information: column and labels differ in length");
    if (column.empty()) throw ArgumentError("mutual_information: empty input");
    if (bins < 2) throw ArgumentError("mutual_information: bins must be >= 2");

    const std::vector<int> xs = equal_frequency_bins(column, bins);
    std::map<std::pair<int, int>, std::size_t> joint;
    std::map<int, std::size_t> px, py;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        joint[{xs[i], labels[i]}]++;
        px[xs[i]]++;
        py[labels[i]]++;
    }
    const double n = static_cast<double>(xs.size());
    double mi = 0.0;
    for (const auto& [xy, cnt] : joint) {
        const double pxy = static_cast<double>(cnt) / n;
        const double marg = (static_cast<double>(px[xy.first]) / n) *
                            (static_cast<double>(py[xy.second]) / n);
        mi += pxy * std::log(pxy / marg);
    }
    return std::max(0.0, mi);
}

// Per-feature MI against the binary label, sorted descending with
// lexicographic tie-breaking, truncated to the top k names.
inline MiReport rank_features_mi(const FeatureMatrix& m, int bins, std::size_t k) {
    if (k > m.cols) throw ArgumentError("rank_features_mi: k exceeds feature count");
    if (k == 0) throw ArgumentError("rank_features_mi: k must be >= 1");

    MiReport report;
    report.bins = bins;
    report.n_rows = m.rows;
    std::vector<double> col(m.rows);
    for (std::size_t j = 0; j < m.cols; ++j) {
        for (std::size_t i = 0; i < m.rows; ++i) col[i] = m.at(i, j);
        report.scores.emplace_back(m.feature_names[j], mutual_information(col, m.labels, bins));
    }
    std::sort(report.scores.begin(), report.scores.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    report.scores.resize(k);
    return report;
}

// Center by column means, eigendecompose the sample covariance (divisor
// n-1), sort descending, normalize eigenvalues into variance ratios.
inline PcaModel pca_fit(const FeatureMatrix& m) {
    if (m.rows < 2) throw EmptyInput("pca_fit: need at least 2 rows");
    const std::size_t n = m.rows, d = m.cols;

    PcaModel model;
    model.mean.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) model.mean[j] += m.at(i, j);
    for (double& v : model.mean) v /= static_cast<double>(n);

    Mat cov(d, d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = m.at(i, a) - model.mean[a];
            if (xa == 0.0) continue;
            for (std::size_t b = a; b < d; ++b)
                cov.at(a, b) += xa * (m.at(i, b) - model.mean[b]);
        }
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov.at(a, b) /= static_cast<double>(n - 1);
            cov.at(b, a) = cov.at(a, b);
        }

    EigenDecomposition eig = jacobi_eigen_symmetric(cov);
    model.eigenvalues = std::move(eig.values);
    model.components = std::move(eig.vectors);

    double total = 0.0;
    for (double v : model.eigenvalues) total += v;
    model.explained_variance_ratio.assign(d, 0.0);
    if (total > 0.0)
        for (std::size_t i = 0; i < d; ++i)
            model.explained_variance_ratio[i] = model.eigenvalues[i] / total;
    return model;
}

inline std::vector<double> cumulative_explained_variance(const PcaModel& p) {
    std::vector<double> out(p.explained_variance_ratio.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        acc += p.explained_variance_ratio[i];
        out[i] = acc;
    }
    return out;
}

// project centered rows onto the top-k principal axes
inline FeatureMatrix pca_transform(const PcaModel& p, const FeatureMatrix& m, std::size_t k) {
    const std::size_t d = p.mean.size();
    if (k < 1 || k > d) throw ArgumentError("pca_transform: k out of range");
    if (m.cols != d) throw ShapeError("pca_transform: column count mismatch");

    FeatureMatrix out;
    out.rows = m.rows;
    out.cols = k;
    out.data.resize(out.rows * out.cols);
    out.labels = m.labels;
    out.class_labels = m.class_labels;
    out.class_names = m.class_names;
    for (std::size_t j = 0; j < k; ++j)
        out.feature_names.push_back("pc" + std::to_string(j + 1));

    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c)
                s += p.components.at(j, c) * (m.at(i, c) - p.mean[c]);
            out.at(i, j) = s;
        }
    return out;
}

} // namespace flowml
