#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "flowml/csv.hpp"
#include "flowml/errors.hpp"
#include "flowml/rng.hpp"
#include "flowml/schema.hpp"

namespace flowml {

// one value of a flow record: numeric, text, or absent
struct Cell {
    enum class Kind : std::uint8_t { missing, number, text };

    Kind kind = Kind::missing;
    double num = 0.0;
    std::string str;

    static Cell make_missing() { return Cell{}; }
    static Cell make_number(double v) { return Cell{Kind::number, v, {}}; }
    static Cell make_text(std::string s) { return Cell{Kind::text, 0.0, std::move(s)}; }

    bool is_missing() const { return kind == Kind::missing; }
    bool is_number() const { return kind == Kind::number; }
    bool is_text() const { return kind == Kind::text; }

    bool operator==(const Cell& o) const {
        if (kind != o.kind) return false;
        if (kind == Kind::number) return num == o.num;
        if (kind == Kind::text) return str == o.str;
        return true;
    }
};

struct FlowRecord {
    std::vector<Cell> cells;

    int label() const {
        const Cell& c = cells.back();
        if (!c.is_number()) throw Error("record has no numeric label cell");
        return static_cast<int>(c.num);
    }

    void set_label(int v) { cells.back() = Cell::make_number(static_cast<double>(v)); }

    std::optional<std::string> attack_cat() const {
        const Cell& c = cells[cells.size() - 2];
        if (c.is_text()) return c.str;
        return std::nullopt;
    }

    void set_attack_cat(const std::string& s) { cells[cells.size() - 2] = Cell::make_text(s); }

    bool operator==(const FlowRecord& o) const { return cells == o.cells; }
};

struct Provenance {
    struct SourceFile {
        std::string path;
        std::size_t rows = 0;
    };
    std::vector<SourceFile> files;
};

struct Dataset {
    FeatureSchema schema;
    std::vector<FlowRecord> records;
    Provenance provenance;

    std::size_t size() const { return records.size(); }
};

struct FeatureStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;
    double missing_rate = 0.0;
    std::size_t cardinality = 0; // nominal columns only
};

struct DatasetSummary {
    std::size_t n_records = 0;
    std::size_t n_duplicates_removed = 0; // rows deduplicate would drop
    std::map<int, std::size_t> class_counts;
    std::map<std::string, std::size_t> attack_category_counts; // missing under "(missing)"
    std::vector<FeatureStats> features;                        // schema order
};

enum class HeaderPolicy { auto_detect, with_header, without_header };

namespace detail {

inline bool looks_like_ip(const std::string& s) {
    int groups = 0, digits = 0;
    for (char c : s) {
        if (c == '.') {
            if (digits == 0) return false;
            ++groups;
            digits = 0;
        } else if (c >= '0' && c <= '9') {
            if (++digits > 3) return false;
        } else {
            return false;
        }
    }
    return groups == 3 && digits > 0;
}

inline bool cell_is_missing_marker(const std::string& raw, bool is_attack_cat) {
    if (raw.empty() || raw == "-") return true;
    if (is_attack_cat && raw == "NaN") return true;
    return false;
}

// canonical text form of one row; used for exact-duplicate detection
inline std::string row_key(const FlowRecord& r) {
    std::string key;
    key.reserve(r.cells.size() * 8);
    for (const Cell& c : r.cells) {
        switch (c.kind) {
            case Cell::Kind::missing: key += 'M'; break;
            case Cell::Kind::number:
                key += 'N';
                key += format_double(c.num);
                break;
            case Cell::Kind::text:
                key += 'T';
                key += c.str;
                break;
        }
        key += '\x1f';
    }
    return key;
}

} // namespace detail

// Reads one or more 49-column CSV files into a Dataset. Records appear in
// path order then row order. Empty cells and "-" load as missing ("NaN" too
// for attack_cat); numeric columns are parsed by kind, integer columns also
// accepting 0x-prefixed hex as found in raw UNSW-NB15 port fields.
inline Dataset load_csv(const std::vector<std::string>& paths, const FeatureSchema& schema,
                        HeaderPolicy header = HeaderPolicy::auto_detect) {
    Dataset ds;
    ds.schema = schema;
    const std::size_t arity = schema.arity();
    const std::size_t attack_cat_idx = arity - 2;
    const std::size_t label_idx = arity - 1;

    for (const std::string& path : paths) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open input file: " + path);

        std::size_t file_rows = 0;
        std::string line;
        std::size_t line_no = 0;
        bool first_line = true;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() && in.peek() == EOF) break;

            std::vector<std::string> cells = split_csv_line(line);
            if (first_line) {
                first_line = false;
                const bool skip =
                    header == HeaderPolicy::with_header ||
                    (header == HeaderPolicy::auto_detect && !cells.empty() &&
                     !detail::looks_like_ip(cells[0]));
                if (skip) continue;
            }
            if (cells.size() != arity)
                throw ArityError(path + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(arity) + " cells, got " +
                                 std::to_string(cells.size()));

            FlowRecord rec;
            rec.cells.resize(arity);
            for (std::size_t i = 0; i < arity; ++i) {
                const Column& col = schema.columns[i];
                const std::string& raw = cells[i];
                if (detail::cell_is_missing_marker(raw, i == attack_cat_idx)) {
                    rec.cells[i] = Cell::make_missing();
                    continue;
                }
                if (col.kind == ColumnKind::nominal) {
                    rec.cells[i] = Cell::make_text(raw);
                } else {
                    double v = 0.0;
                    if (!parse_numeric_cell(raw, col.kind == ColumnKind::integer, v))
                        throw TypeError(path + ":" + std::to_string(line_no) +
                                        ": cannot parse \"" + raw + "\" as " +
                                        column_kind_name(col.kind) + " for column `" + col.name +
                                        "`");
                    rec.cells[i] = Cell::make_number(v);
                }
            }
            const Cell& lab = rec.cells[label_idx];
            if (!lab.is_number() || (lab.num != 0.0 && lab.num != 1.0))
                throw TypeError(path + ":" + std::to_string(line_no) +
                                ": label cell must be 0 or 1");
            ds.records.push_back(std::move(rec));
            ++file_rows;
        }
        ds.provenance.files.push_back({path, file_rows});
    }
    return ds;
}

inline void write_csv(const Dataset& ds, const std::string& path, bool with_header = false) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open output file: " + path);
    if (with_header) {
        for (std::size_t i = 0; i < ds.schema.arity(); ++i) {
            if (i) out << ',';
            out << quote_csv_cell(ds.schema.columns[i].name);
        }
        out << '\n';
    }
    for (const FlowRecord& r : ds.records) {
        for (std::size_t i = 0; i < r.cells.size(); ++i) {
            if (i) out << ',';
            const Cell& c = r.cells[i];
            if (c.is_number()) out << format_double(c.num);
            else if (c.is_text()) out << quote_csv_cell(c.str);
            // missing -> empty cell
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

// removes exact duplicates (all cells equal after canonical numeric
// formatting), keeping the first occurrence; order otherwise preserved
inline std::pair<Dataset, std::size_t> deduplicate(const Dataset& ds) {
    Dataset out;
    out.schema = ds.schema;
    out.provenance = ds.provenance;
    std::unordered_set<std::string> seen;
    seen.reserve(ds.records.size() * 2);
    std::size_t removed = 0;
    for (const FlowRecord& r : ds.records) {
        if (seen.insert(detail::row_key(r)).second) out.records.push_back(r);
        else ++removed;
    }
    return {std::move(out), removed};
}

// trim + casefold + alias unification for attack categories
inline std::optional<std::string> canonical_attack_cat(const std::optional<std::string>& raw) {
    if (!raw) return std::nullopt;
    std::string s = to_lower(trim(*raw));
    if (s.empty() || s == "nan" || s == "-") return std::nullopt;
    // alias table enumerated from the raw corpus' distinct spellings
    if (s == "backdoors") return "backdoor";
    return s;
}

inline Dataset clean_labels(const Dataset& ds) {
    Dataset out = ds;
    std::size_t row = 0;
    for (FlowRecord& r : out.records) {
        ++row;
        const std::optional<std::string> canon = canonical_attack_cat(r.attack_cat());
        const int label = r.label();
        if (!canon) {
            r.set_attack_cat(label == 0 ? "normal" : "unknown-attack");
            continue;
        }
        if (label == 0 && *canon != "normal")
            throw LabelConflict("record " + std::to_string(row) + ": label 0 with attack_cat \"" +
                                *canon + "\"");
        if (label == 1 && *canon == "normal")
            throw LabelConflict("record " + std::to_string(row) +
                                ": label 1 with attack_cat \"normal\"");
        r.set_attack_cat(*canon);
    }
    return out;
}

inline DatasetSummary summarize(const Dataset& ds) {
    DatasetSummary s;
    s.n_records = ds.size();
    const std::size_t d = ds.schema.arity();

    std::vector<double> mins(d, 0.0), maxs(d, 0.0), sums(d, 0.0), sumsq(d, 0.0);
    std::vector<std::size_t> missing(d, 0), present(d, 0);
    std::vector<std::set<std::string>> distinct(d);

    std::unordered_set<std::string> seen;
    seen.reserve(ds.records.size() * 2);

    for (const FlowRecord& r : ds.records) {
        if (!seen.insert(detail::row_key(r)).second) ++s.n_duplicates_removed;
        s.class_counts[r.label()]++;
        const auto cat = r.attack_cat();
        s.attack_category_counts[cat ? *cat : "(missing)"]++;
        for (std::size_t i = 0; i < d; ++i) {
            const Cell& c = r.cells[i];
            if (c.is_missing()) {
                ++missing[i];
                continue;
            }
            if (c.is_number()) {
                if (present[i] == 0) {
                    mins[i] = maxs[i] = c.num;
                } else {
                    mins[i] = std::min(mins[i], c.num);
                    maxs[i] = std::max(maxs[i], c.num);
                }
                sums[i] += c.num;
                sumsq[i] += c.num * c.num;
                ++present[i];
            } else {
                distinct[i].insert(c.str);
                ++present[i];
            }
        }
    }

    s.features.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        FeatureStats& f = s.features[i];
        f.missing_rate = ds.size() ? static_cast<double>(missing[i]) / ds.size() : 0.0;
        f.cardinality = distinct[i].size();
        if (present[i] > 0 && is_numeric_kind(ds.schema.columns[i].kind)) {
            f.min = mins[i];
            f.max = maxs[i];
            f.mean = sums[i] / present[i];
            const double var = sumsq[i] / present[i] - f.mean * f.mean;
            f.std_dev = var > 0.0 ? std::sqrt(var) : 0.0;
        }
    }
    return s;
}

namespace detail {

inline const std::vector<std::string>& synth_attack_categories() {
    static const std::vector<std::string> cats = {
        "fuzzers", "exploits", "reconnaissance", "dos",     "generic",
        "shellcode", "worms",  "backdoor",       "analysis"};
    return cats;
}

} // namespace detail

// Hermetic generator: two fixed parametric flow distributions, class
// separable on ttl values, connection counters, duration and byte volume.
// Normal rows leave attack_cat missing, matching the raw corpus layout.
inline Dataset synthesize(std::size_t n, double attack_fraction, std::uint64_t seed) {
    if (n < 2) throw ArgumentError("synthesize: n must be >= 2");
    if (attack_fraction < 0.0 || attack_fraction > 1.0)
        throw ArgumentError("synthesize: attack_fraction must be in [0,1]");

    Dataset ds;
    ds.schema = builtin_schema();
    ds.provenance.files.push_back({"synthetic(seed=" + std::to_string(seed) + ")", n});

    const std::size_t n_attack =
        static_cast<std::size_t>(std::lround(static_cast<double>(n) * attack_fraction));
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n_attack; ++i) labels[i] = 1;
    Rng rng(seed);
    rng.shuffle(labels);

    auto num = [](double v) { return Cell::make_number(v); };
    auto inum = [](double v) { return Cell::make_number(std::floor(v + 0.5)); };
    auto txt = [](const std::string& v) { return Cell::make_text(v); };

    const auto& cats = detail::synth_attack_categories();
    ds.records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool atk = labels[i] == 1;
        FlowRecord r;
        r.cells.resize(49);

        const std::string srcnet = rng.bernoulli(0.5) ? "10.0." : "192.168.";
        r.cells[0] = txt(srcnet + std::to_string(rng.uniform_int(0, 15)) + "." +
                         std::to_string(rng.uniform_int(1, 254)));
        r.cells[1] = inum(static_cast<double>(rng.uniform_int(1024, 65535)));
        r.cells[2] = txt("149.171." + std::to_string(rng.uniform_int(120, 130)) + "." +
                         std::to_string(rng.uniform_int(1, 254)));
        static const int common_ports[] = {21, 22, 25, 53, 80, 110, 143, 443, 8080};
        r.cells[3] = atk ? inum(static_cast<double>(rng.uniform_int(1, 65535)))
                         : inum(static_cast<double>(common_ports[rng.uniform_int(0, 8)]));

        static const char* protos_normal[] = {"tcp", "udp", "arp"};
        static const char* protos_attack[] = {"tcp", "udp", "icmp"};
        r.cells[4] = atk ? txt(protos_attack[rng.weighted({0.5, 0.3, 0.2})])
                         : txt(protos_normal[rng.weighted({0.7, 0.25, 0.05})]);
        static const char* states_normal[] = {"FIN", "CON", "REQ"};
        static const char* states_attack[] = {"INT", "FIN", "CON", "RST"};
        r.cells[5] = atk ? txt(states_attack[rng.weighted({0.5, 0.2, 0.2, 0.1})])
                         : txt(states_normal[rng.weighted({0.6, 0.3, 0.1})]);

        const double dur = atk ? 0.001 + std::fabs(rng.normal(0.02, 0.01))
                               : 0.05 + std::fabs(rng.normal(1.0, 0.5));
        r.cells[6] = num(dur);

        const double sbytes = std::floor(atk ? rng.lognormal(10.0, 1.0) : rng.lognormal(7.0, 0.8));
        const double dbytes = std::floor(atk ? rng.lognormal(4.0, 1.0) : rng.lognormal(8.0, 1.0));
        r.cells[7] = num(sbytes);
        r.cells[8] = num(dbytes);

        static const int sttl_normal[] = {31, 62, 63, 64};
        static const int sttl_attack[] = {252, 254, 255};
        r.cells[9] = inum(atk ? sttl_attack[rng.uniform_int(0, 2)]
                              : sttl_normal[rng.uniform_int(0, 3)]);
        static const int dttl_normal[] = {29, 60, 63};
        static const int dttl_attack[] = {250, 252};
        r.cells[10] = inum(atk ? dttl_attack[rng.uniform_int(0, 1)]
                               : dttl_normal[rng.uniform_int(0, 2)]);

        r.cells[11] = inum(static_cast<double>(atk ? rng.uniform_int(0, 12) : rng.uniform_int(0, 3)));
        r.cells[12] = inum(static_cast<double>(atk ? rng.uniform_int(0, 8) : rng.uniform_int(0, 2)));

        static const char* services_normal[] = {"http", "dns", "smtp", "ftp-data", "ssh"};
        static const char* services_attack[] = {"http", "ftp"};
        const bool svc_missing = rng.bernoulli(atk ? 0.7 : 0.2);
        std::string service;
        if (!svc_missing)
            service = atk ? services_attack[rng.uniform_int(0, 1)]
                          : services_normal[rng.weighted({0.4, 0.25, 0.15, 0.1, 0.1})];
        r.cells[13] = svc_missing ? Cell::make_missing() : txt(service);

        r.cells[14] = num(sbytes * 8.0 / dur);
        r.cells[15] = num(dbytes * 8.0 / dur);

        const double spkts = std::max(1.0, std::floor(sbytes / rng.uniform(400.0, 1200.0)) + 1.0);
        const double dpkts = std::max(1.0, std::floor(dbytes / rng.uniform(400.0, 1200.0)) + 1.0);
        r.cells[16] = num(spkts);
        r.cells[17] = num(dpkts);

        r.cells[18] = inum(atk ? (rng.bernoulli(0.8) ? 0 : 255) : 255);
        r.cells[19] = inum(atk ? 0 : 255);
        r.cells[20] = num(std::floor(rng.uniform(0.0, 4294967295.0)));
        r.cells[21] = num(std::floor(rng.uniform(0.0, 4294967295.0)));
        r.cells[22] = inum(sbytes / spkts);
        r.cells[23] = inum(dbytes / dpkts);
        r.cells[24] = inum(service == "http" ? static_cast<double>(rng.uniform_int(1, 3)) : 0.0);
        r.cells[25] =
            inum(service == "http" ? std::floor(rng.lognormal(5.0, 1.0)) : 0.0);

        r.cells[26] = num(atk ? std::fabs(rng.normal(5.0, 3.0)) : std::fabs(rng.normal(50.0, 20.0)));
        r.cells[27] = num(atk ? std::fabs(rng.normal(4.0, 2.0)) : std::fabs(rng.normal(40.0, 15.0)));

        const double stime = 1421900000.0 + static_cast<double>(i);
        r.cells[28] = num(stime);
        r.cells[29] = num(stime + std::ceil(dur));
        r.cells[30] = num(dur * 1000.0 / spkts);
        r.cells[31] = num(dur * 1000.0 / dpkts);

        const double rtt = atk ? std::fabs(rng.normal(0.004, 0.002)) : std::fabs(rng.normal(0.08, 0.03));
        r.cells[32] = num(rtt);
        r.cells[33] = num(rtt * 0.6);
        r.cells[34] = num(rtt * 0.4);

        r.cells[35] = inum(atk && rng.bernoulli(0.05) ? 1.0 : 0.0);
        r.cells[36] = inum(static_cast<double>(atk ? rng.uniform_int(2, 6) : rng.uniform_int(0, 1)));
        r.cells[37] = inum(service == "http" ? static_cast<double>(rng.uniform_int(0, 4)) : 0.0);
        const bool ftp = service == "ftp" || service == "ftp-data";
        r.cells[38] = inum(ftp && rng.bernoulli(0.5) ? 1.0 : 0.0);
        r.cells[39] = inum(ftp ? static_cast<double>(rng.uniform_int(1, 4)) : 0.0);

        // connection counters over recent windows; attacks hammer services
        for (std::size_t j = 40; j <= 46; ++j)
            r.cells[j] =
                inum(static_cast<double>(atk ? rng.uniform_int(10, 40) : rng.uniform_int(1, 6)));

        r.cells[47] = atk ? txt(cats[rng.uniform_int(0, static_cast<std::int64_t>(cats.size()) - 1)])
                          : Cell::make_missing();
        r.cells[48] = num(atk ? 1.0 : 0.0);

        ds.records.push_back(std::move(r));
    }
    return ds;
}

} // namespace flowml
