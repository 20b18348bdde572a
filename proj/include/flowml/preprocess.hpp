#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowml/dataset.hpp"
#include "flowml/errors.hpp"
#include "flowml/rng.hpp"

namespace flowml {

struct SplitSpec {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    // stratification is always on the binary label
};

enum class ScalingKind { minmax, zscore };
enum class ImputePolicy { zero, mean, median };

struct PreprocessConfig {
    double clip_lo_pct = 1.0;
    double clip_hi_pct = 99.0;
    ScalingKind scaling = ScalingKind::minmax;
    ImputePolicy impute = ImputePolicy::zero;
    bool drop_identifiers = true; // srcip, dstip, sport, dsport
    std::uint64_t provenance_seed = 0;
};

// dense numeric matrix with aligned label vectors
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // row-major
    std::vector<std::string> feature_names;
    std::vector<int> labels;
    std::vector<int> class_labels;        // optional category indices
    std::vector<std::string> class_names; // index -> canonical category

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    bool has_class_labels() const { return !class_labels.empty(); }
};

// per-output-column fitted state: fill value, category codes, clip bounds,
// scale parameters (min/max for minmax, mean/std for zscore)
struct FeatureCodec {
    std::string name;
    int column_index = -1;
    bool is_nominal = false;
    double impute_value = 0.0;
    double clip_lo = 0.0;
    double clip_hi = 0.0;
    double scale_a = 0.0;
    double scale_b = 0.0;
    std::map<std::string, int> codes;             // category -> code, 0 reserved
    std::map<std::string, std::size_t> frequency; // training counts
};

struct FittedPipeline {
    static constexpr int kVersion = 1;

    std::vector<std::string> schema_names; // full 49-column layout fitted on
    std::vector<FeatureCodec> features;    // model inputs, schema order
    ScalingKind scaling = ScalingKind::minmax;
    std::vector<std::string> attack_categories; // index -> category for multiclass heads
    std::size_t fitted_rows = 0;
    std::uint64_t fitted_seed = 0;

    std::vector<std::string> output_feature_names() const {
        std::vector<std::string> names;
        names.reserve(features.size());
        for (const auto& f : features) names.push_back(f.name);
        return names;
    }
};

// linear-interpolation percentile of a sorted array, p in [0,100]
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) return 0.0;
    if (sorted.size() == 1) return sorted[0];
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Seeded per-class split: each class is shuffled independently and
// round(class_n * test_fraction) rows go to the test side. Original record
// order is preserved within each side.
inline std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
        throw ArgumentError("stratified_split: test_fraction must be in (0,1)");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.records[i].label()].push_back(i);
    for (const auto& [label, idx] : by_class)
        if (idx.size() < 2)
            throw ArgumentError("stratified_split: class " + std::to_string(label) +
                                " has fewer than 2 records");

    Rng rng(spec.seed);
    std::vector<bool> in_test(ds.size(), false);
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        const std::size_t n_test = static_cast<std::size_t>(
            std::lround(static_cast<double>(idx.size()) * spec.test_fraction));
        for (std::size_t i = 0; i < n_test; ++i) in_test[idx[i]] = true;
    }

    Dataset train, test;
    train.schema = test.schema = ds.schema;
    train.provenance = test.provenance = ds.provenance;
    for (std::size_t i = 0; i < ds.size(); ++i)
        (in_test[i] ? test : train).records.push_back(ds.records[i]);
    return {std::move(train), std::move(test)};
}

namespace detail {

inline bool is_excluded_column(const Column& col, std::size_t arity, bool drop_identifiers) {
    if (static_cast<std::size_t>(col.index) >= arity - 2) return true; // attack_cat, label
    if (!drop_identifiers) return false;
    return col.name == "srcip" || col.name == "dstip" || col.name == "sport" ||
           col.name == "dsport";
}

} // namespace detail

// Learns all preprocessing state from the training split: imputation fill
// values, frequency-ordered category codes (0 reserved for unseen/missing),
// winsorization bounds at the configured percentiles (computed after
// imputation), and scale parameters computed after clipping.
inline FittedPipeline fit_pipeline(const Dataset& train, const PreprocessConfig& cfg = {}) {
    if (train.records.empty()) throw EmptyInput("fit_pipeline: empty training split");
    if (!(cfg.clip_lo_pct >= 0.0 && cfg.clip_hi_pct <= 100.0 && cfg.clip_lo_pct <= cfg.clip_hi_pct))
        throw ArgumentError("fit_pipeline: bad clip percentiles");

    FittedPipeline p;
    p.scaling = cfg.scaling;
    p.fitted_rows = train.size();
    p.fitted_seed = cfg.provenance_seed;
    for (const Column& c : train.schema.columns) p.schema_names.push_back(c.name);

    // canonical category list for the optional multi-class head; categories
    // unseen at fit time map to the trailing unknown-attack bucket
    {
        std::set<std::string> cats;
        for (const FlowRecord& r : train.records)
            if (auto c = r.attack_cat()) cats.insert(*c);
        p.attack_categories.assign(cats.begin(), cats.end());
        if (!cats.count("unknown-attack")) p.attack_categories.push_back("unknown-attack");
    }

    const std::size_t arity = train.schema.arity();
    for (const Column& col : train.schema.columns) {
        if (detail::is_excluded_column(col, arity, cfg.drop_identifiers)) continue;

        FeatureCodec f;
        f.name = col.name;
        f.column_index = col.index;
        f.is_nominal = col.kind == ColumnKind::nominal;

        if (f.is_nominal) {
            for (const FlowRecord& r : train.records) {
                const Cell& c = r.cells[col.index];
                if (c.is_text()) f.frequency[c.str]++;
            }
            // descending frequency, ties lexicographic; code 0 stays reserved
            std::vector<std::pair<std::string, std::size_t>> order(f.frequency.begin(),
                                                                   f.frequency.end());
            std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            int code = 1;
            for (const auto& [cat, n] : order) f.codes[cat] = code++;
            double lo = 0.0;
            double hi = static_cast<double>(f.codes.size());
            f.clip_lo = lo;
            f.clip_hi = hi;
            // scale over the codes actually present in training
            double mn = 0.0, mx = 0.0, sum = 0.0, sumsq = 0.0;
            bool first = true;
            for (const FlowRecord& r : train.records) {
                const Cell& c = r.cells[col.index];
                const double v = c.is_text() ? static_cast<double>(f.codes.at(c.str)) : 0.0;
                if (first) { mn = mx = v; first = false; }
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                sum += v;
                sumsq += v * v;
            }
            const double n = static_cast<double>(train.size());
            if (cfg.scaling == ScalingKind::minmax) {
                f.scale_a = mn;
                f.scale_b = mx;
            } else {
                f.scale_a = sum / n;
                const double var = sumsq / n - f.scale_a * f.scale_a;
                f.scale_b = var > 0.0 ? std::sqrt(var) : 0.0;
            }
        } else {
            std::vector<double> present;
            present.reserve(train.size());
            for (const FlowRecord& r : train.records) {
                const Cell& c = r.cells[col.index];
                if (c.is_number()) present.push_back(c.num);
            }
            switch (cfg.impute) {
                case ImputePolicy::zero: f.impute_value = 0.0; break;
                case ImputePolicy::mean: {
                    double sum = 0.0;
                    for (double v : present) sum += v;
                    f.impute_value = present.empty() ? 0.0 : sum / present.size();
                    break;
                }
                case ImputePolicy::median: {
                    if (present.empty()) {
                        f.impute_value = 0.0;
                    } else {
                        std::vector<double> tmp = present;
                        std::sort(tmp.begin(), tmp.end());
                        f.impute_value = percentile_sorted(tmp, 50.0);
                    }
                    break;
                }
            }

            std::vector<double> imputed;
            imputed.reserve(train.size());
            for (const FlowRecord& r : train.records) {
                const Cell& c = r.cells[col.index];
                imputed.push_back(c.is_number() ? c.num : f.impute_value);
            }
            std::sort(imputed.begin(), imputed.end());
            f.clip_lo = percentile_sorted(imputed, cfg.clip_lo_pct);
            f.clip_hi = percentile_sorted(imputed, cfg.clip_hi_pct);

            double mn = 0.0, mx = 0.0, sum = 0.0, sumsq = 0.0;
            bool first = true;
            for (double raw : imputed) {
                const double v = std::clamp(raw, f.clip_lo, f.clip_hi);
                if (first) { mn = mx = v; first = false; }
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                sum += v;
                sumsq += v * v;
            }
            const double n = static_cast<double>(imputed.size());
            if (cfg.scaling == ScalingKind::minmax) {
                f.scale_a = mn;
                f.scale_b = mx;
            } else {
                f.scale_a = sum / n;
                const double var = sumsq / n - f.scale_a * f.scale_a;
                f.scale_b = var > 0.0 ? std::sqrt(var) : 0.0;
            }
        }
        p.features.push_back(std::move(f));
    }
    return p;
}

namespace detail {

inline double codec_value(const FeatureCodec& f, const Cell& c) {
    if (f.is_nominal) {
        if (!c.is_text()) return 0.0; // missing
        auto it = f.codes.find(c.str);
        return it == f.codes.end() ? 0.0 : static_cast<double>(it->second); // unseen -> 0
    }
    return c.is_number() ? c.num : f.impute_value;
}

inline double codec_transform(const FeatureCodec& f, ScalingKind scaling, const Cell& c) {
    double v = codec_value(f, c);
    if (!f.is_nominal) v = std::clamp(v, f.clip_lo, f.clip_hi);
    if (scaling == ScalingKind::minmax) {
        if (f.scale_b == f.scale_a) return 0.0;
        return std::clamp((v - f.scale_a) / (f.scale_b - f.scale_a), 0.0, 1.0);
    }
    if (f.scale_b == 0.0) return 0.0;
    return (v - f.scale_a) / f.scale_b;
}

} // namespace detail

// impute -> encode -> clip -> scale; deterministic given the pipeline
inline FeatureMatrix transform(const FittedPipeline& p, const Dataset& ds) {
    if (ds.schema.arity() != p.schema_names.size())
        throw SchemaMismatch("transform: dataset arity " + std::to_string(ds.schema.arity()) +
                             " != fitted arity " + std::to_string(p.schema_names.size()));
    for (std::size_t i = 0; i < p.schema_names.size(); ++i)
        if (ds.schema.columns[i].name != p.schema_names[i])
            throw SchemaMismatch("transform: column " + std::to_string(i) + " is `" +
                                 ds.schema.columns[i].name + "`, pipeline fitted on `" +
                                 p.schema_names[i] + "`");

    FeatureMatrix m;
    m.rows = ds.size();
    m.cols = p.features.size();
    m.feature_names = p.output_feature_names();
    m.data.resize(m.rows * m.cols);
    m.labels.reserve(m.rows);
    m.class_names = p.attack_categories;

    const bool with_classes = !p.attack_categories.empty();
    std::map<std::string, int> class_index;
    if (with_classes) {
        int idx = 0;
        for (const auto& c : p.attack_categories) class_index[c] = idx++;
    }
    const int unknown_idx =
        with_classes && class_index.count("unknown-attack") ? class_index["unknown-attack"] : 0;

    for (std::size_t r = 0; r < ds.size(); ++r) {
        const FlowRecord& rec = ds.records[r];
        for (std::size_t j = 0; j < p.features.size(); ++j) {
            const FeatureCodec& f = p.features[j];
            m.at(r, j) = detail::codec_transform(f, p.scaling, rec.cells[f.column_index]);
        }
        m.labels.push_back(rec.label());
        if (with_classes) {
            const auto cat = rec.attack_cat();
            if (cat && class_index.count(*cat)) m.class_labels.push_back(class_index[*cat]);
            else m.class_labels.push_back(unknown_idx);
        }
    }
    return m;
}

namespace detail {

inline std::map<int, std::vector<std::size_t>> rows_by_label(const FeatureMatrix& m) {
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < m.rows; ++i) by_label[m.labels[i]].push_back(i);
    return by_label;
}

inline void append_row(FeatureMatrix& m, const FeatureMatrix& src, std::size_t row) {
    for (std::size_t c = 0; c < src.cols; ++c) m.data.push_back(src.at(row, c));
    m.labels.push_back(src.labels[row]);
    if (src.has_class_labels()) m.class_labels.push_back(src.class_labels[row]);
    ++m.rows;
}

} // namespace detail

// Random with-replacement duplication of minority-class rows until every
// class reaches ceil(target_ratio * majority_count). Original rows are kept
// untouched; copies are appended at the end.
inline FeatureMatrix oversample(const FeatureMatrix& m, std::uint64_t seed, double target_ratio) {
    if (!(target_ratio > 0.0 && target_ratio <= 1.0))
        throw ArgumentError("oversample: target_ratio must be in (0,1]");
    auto by_label = detail::rows_by_label(m);
    if (by_label.size() < 2) throw ArgumentError("oversample: need at least 2 classes");

    std::size_t majority = 0;
    for (const auto& [label, rows] : by_label) majority = std::max(majority, rows.size());
    const std::size_t target = static_cast<std::size_t>(
        std::ceil(target_ratio * static_cast<double>(majority)));

    FeatureMatrix out = m;
    Rng rng(seed);
    for (const auto& [label, rows] : by_label) {
        if (rows.size() >= target) continue;
        for (std::size_t k = rows.size(); k < target; ++k) {
            const std::size_t pick = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(rows.size()) - 1));
            detail::append_row(out, m, rows[pick]);
        }
    }
    return out;
}

// Config-selectable alternative: trims the majority class (without
// replacement, original order kept) until minority >= ratio * majority.
inline FeatureMatrix undersample(const FeatureMatrix& m, std::uint64_t seed, double target_ratio) {
    if (!(target_ratio > 0.0 && target_ratio <= 1.0))
        throw ArgumentError("undersample: target_ratio must be in (0,1]");
    auto by_label = detail::rows_by_label(m);
    if (by_label.size() < 2) throw ArgumentError("undersample: need at least 2 classes");

    std::size_t minority = m.rows;
    int majority_label = by_label.begin()->first;
    std::size_t majority = 0;
    for (const auto& [label, rows] : by_label) {
        minority = std::min(minority, rows.size());
        if (rows.size() > majority) {
            majority = rows.size();
            majority_label = label;
        }
    }
    const std::size_t keep_target = std::min(
        majority,
        static_cast<std::size_t>(std::ceil(static_cast<double>(minority) / target_ratio)));

    std::vector<std::size_t> majority_rows = by_label[majority_label];
    Rng rng(seed);
    rng.shuffle(majority_rows);
    majority_rows.resize(keep_target);
    std::vector<bool> keep(m.rows, true);
    for (std::size_t i : by_label[majority_label]) keep[i] = false;
    for (std::size_t i : majority_rows) keep[i] = true;

    FeatureMatrix out;
    out.cols = m.cols;
    out.feature_names = m.feature_names;
    out.class_names = m.class_names;
    for (std::size_t i = 0; i < m.rows; ++i)
        if (keep[i]) detail::append_row(out, m, i);
    return out;
}

// ---- pipeline serialization ------------------------------------------------

inline nlohmann::json pipeline_to_json(const FittedPipeline& p) {
    nlohmann::json j;
    j["format"] = "flowml-pipeline";
    j["version"] = FittedPipeline::kVersion;
    j["scaling"] = p.scaling == ScalingKind::minmax ? "minmax" : "zscore";
    j["schema_names"] = p.schema_names;
    j["attack_categories"] = p.attack_categories;
    j["fitted_rows"] = p.fitted_rows;
    j["fitted_seed"] = p.fitted_seed;
    nlohmann::json feats = nlohmann::json::array();
    for (const auto& f : p.features) {
        nlohmann::json jf;
        jf["name"] = f.name;
        jf["column_index"] = f.column_index;
        jf["nominal"] = f.is_nominal;
        jf["impute_value"] = f.impute_value;
        jf["clip_lo"] = f.clip_lo;
        jf["clip_hi"] = f.clip_hi;
        jf["scale_a"] = f.scale_a;
        jf["scale_b"] = f.scale_b;
        if (f.is_nominal) {
            jf["codes"] = f.codes;
            jf["frequency"] = f.frequency;
        }
        feats.push_back(std::move(jf));
    }
    j["features"] = std::move(feats);
    return j;
}

inline FittedPipeline pipeline_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "flowml-pipeline")
            throw FormatError("pipeline file: unexpected format tag");
        if (j.at("version").get<int>() != FittedPipeline::kVersion)
            throw FormatError("pipeline file: unsupported version");
        FittedPipeline p;
        p.scaling = j.at("scaling") == "minmax" ? ScalingKind::minmax : ScalingKind::zscore;
        p.schema_names = j.at("schema_names").get<std::vector<std::string>>();
        p.attack_categories = j.at("attack_categories").get<std::vector<std::string>>();
        p.fitted_rows = j.at("fitted_rows").get<std::size_t>();
        p.fitted_seed = j.at("fitted_seed").get<std::uint64_t>();
        for (const auto& jf : j.at("features")) {
            FeatureCodec f;
            f.name = jf.at("name").get<std::string>();
            f.column_index = jf.at("column_index").get<int>();
            f.is_nominal = jf.at("nominal").get<bool>();
            f.impute_value = jf.at("impute_value").get<double>();
            f.clip_lo = jf.at("clip_lo").get<double>();
            f.clip_hi = jf.at("clip_hi").get<double>();
            f.scale_a = jf.at("scale_a").get<double>();
            f.scale_b = jf.at("scale_b").get<double>();
            if (f.is_nominal) {
                f.codes = jf.at("codes").get<std::map<std::string, int>>();
                f.frequency = jf.at("frequency").get<std::map<std::string, std::size_t>>();
            }
            p.features.push_back(std::move(f));
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("pipeline file: ") + e.what());
    }
}

inline void save_pipeline(const FittedPipeline& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << pipeline_to_json(p).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline FittedPipeline load_pipeline(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pipeline file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("pipeline file " + path + ": " + e.what());
    }
    return pipeline_from_json(j);
}

} // namespace flowml
