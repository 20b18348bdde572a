#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "flowml/errors.hpp"

namespace flowml {

// k x k count matrix, rows = truth, cols = predicted; for the binary case
// class 1 (attack) is the positive class
struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<long long> counts; // row-major

    long long at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
    long long& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }

    long long total() const {
        long long t = 0;
        for (long long c : counts) t += c;
        return t;
    }

    bool is_binary() const { return k == 2; }
    long long tp() const { return at(1, 1); }
    long long fp() const { return at(0, 1); }
    long long fn() const { return at(1, 0); }
    long long tn() const { return at(0, 0); }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& truth,
                                        const std::vector<int>& predicted) {
    if (truth.size() != predicted.size())
        throw LengthMismatch("confusion_matrix: truth and predicted lengths differ");
    if (truth.empty()) throw LengthMismatch("confusion_matrix: empty input");

    int max_label = 1;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || predicted[i] < 0)
            throw ArgumentError("confusion_matrix: negative label");
        max_label = std::max({max_label, truth[i], predicted[i]});
    }
    ConfusionMatrix cm;
    cm.k = static_cast<std::size_t>(max_label) + 1;
    cm.counts.assign(cm.k * cm.k, 0);
    for (std::size_t i = 0; i < truth.size(); ++i)
        cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]))++;
    return cm;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0; // binary: attack class; multi-class: macro
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<ClassMetrics> per_class; // multi-class only
};

namespace detail {

inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

inline ClassMetrics one_vs_rest(const ConfusionMatrix& cm, std::size_t c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < cm.k; ++i) {
        if (i != c) {
            fp += static_cast<double>(cm.at(i, c));
            fn += static_cast<double>(cm.at(c, i));
        }
    }
    tp = static_cast<double>(cm.at(c, c));
    ClassMetrics m;
    m.precision = safe_div(tp, tp + fp);
    m.recall = safe_div(tp, tp + fn);
    m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

} // namespace detail

// accuracy, precision, recall and F1 with zero-denominator conventions
// (precision/recall/f1 collapse to 0 rather than dividing by zero)
inline Metrics classification_metrics(const ConfusionMatrix& cm) {
    const long long total = cm.total();
    if (total == 0) throw EmptyInput("classification_metrics: empty confusion matrix");

    Metrics m;
    double trace = 0.0;
    for (std::size_t i = 0; i < cm.k; ++i) trace += static_cast<double>(cm.at(i, i));
    m.accuracy = trace / static_cast<double>(total);

    if (cm.is_binary()) {
        const ClassMetrics pos = detail::one_vs_rest(cm, 1);
        m.precision = pos.precision;
        m.recall = pos.recall;
        m.f1 = pos.f1;
    } else {
        double sp = 0.0, sr = 0.0, sf = 0.0;
        for (std::size_t c = 0; c < cm.k; ++c) {
            m.per_class.push_back(detail::one_vs_rest(cm, c));
            sp += m.per_class.back().precision;
            sr += m.per_class.back().recall;
            sf += m.per_class.back().f1;
        }
        m.precision = sp / static_cast<double>(cm.k);
        m.recall = sr / static_cast<double>(cm.k);
        m.f1 = sf / static_cast<double>(cm.k);
    }
    return m;
}

struct RocCurve {
    std::vector<double> fpr;
    std::vector<double> tpr;
    std::vector<double> thresholds; // +inf for the leading (0,0) point
};

// Threshold sweep from +inf down across each distinct score; tied scores
// form a single step so the curve moves diagonally through ties and the
// trapezoid area matches the pairwise ranking statistic exactly.
inline RocCurve roc_curve(const std::vector<int>& truth, const std::vector<double>& scores) {
    if (truth.size() != scores.size())
        throw LengthMismatch("roc_curve: labels and scores lengths differ");
    if (truth.empty()) throw LengthMismatch("roc_curve: empty input");

    long long n_pos = 0, n_neg = 0;
    for (int t : truth) (t == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw SingleClassError("roc_curve: both classes must be present");

    std::vector<std::size_t> order(truth.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());

    long long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (truth[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
        curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
        curve.thresholds.push_back(s);
    }
    return curve;
}

// trapezoidal area under the ROC curve
inline double auc(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.fpr.size(); ++i)
        area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
    return area;
}

// scores >= threshold predict the attack class
inline std::vector<int> apply_threshold(const std::vector<double>& scores, double threshold) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
    return out;
}

} // namespace flowml
