#pragma once

#include <string>
#include <vector>

#include "flowml/errors.hpp"

namespace flowml {

enum class ColumnKind { nominal, integer, floating, timestamp, binary };

inline const char* column_kind_name(ColumnKind k) {
    switch (k) {
        case ColumnKind::nominal: return "nominal";
        case ColumnKind::integer: return "integer";
        case ColumnKind::floating: return "float";
        case ColumnKind::timestamp: return "timestamp";
        case ColumnKind::binary: return "binary";
    }
    return "?";
}

inline bool is_numeric_kind(ColumnKind k) { return k != ColumnKind::nominal; }

struct Column {
    std::string name;
    ColumnKind kind;
    int index;
};

struct FeatureSchema {
    std::vector<Column> columns;

    std::size_t arity() const { return columns.size(); }

    int index_of(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return c.index;
        return -1;
    }

    const Column& attack_cat_column() const { return columns[columns.size() - 2]; }
    const Column& label_column() const { return columns.back(); }
};

// The 49-column UNSW-NB15 flow-record layout: five-tuple identifiers,
// flow/packet/protocol/temporal counters, then attack_cat and label.
inline FeatureSchema builtin_schema() {
    using K = ColumnKind;
    static const struct { const char* name; K kind; } defs[] = {
        {"srcip", K::nominal},
        {"sport", K::integer},
        {"dstip", K::nominal},
        {"dsport", K::integer},
        {"proto", K::nominal},
        {"state", K::nominal},
        {"dur", K::floating},
        {"sbytes", K::integer},
        {"dbytes", K::integer},
        {"sttl", K::integer},
        {"dttl", K::integer},
        {"sloss", K::integer},
        {"dloss", K::integer},
        {"service", K::nominal},
        {"Sload", K::floating},
        {"Dload", K::floating},
        {"Spkts", K::integer},
        {"Dpkts", K::integer},
        {"swin", K::integer},
        {"dwin", K::integer},
        {"stcpb", K::integer},
        {"dtcpb", K::integer},
        {"smeansz", K::integer},
        {"dmeansz", K::integer},
        {"trans_depth", K::integer},
        {"res_bdy_len", K::integer},
        {"Sjit", K::floating},
        {"Djit", K::floating},
        {"Stime", K::timestamp},
        {"Ltime", K::timestamp},
        {"Sintpkt", K::floating},
        {"Dintpkt", K::floating},
        {"tcprtt", K::floating},
        {"synack", K::floating},
        {"ackdat", K::floating},
        {"is_sm_ips_ports", K::binary},
        {"ct_state_ttl", K::integer},
        {"ct_flw_http_mthd", K::integer},
        {"is_ftp_login", K::binary},
        {"ct_ftp_cmd", K::integer},
        {"ct_srv_src", K::integer},
        {"ct_srv_dst", K::integer},
        {"ct_dst_ltm", K::integer},
        {"ct_src_ltm", K::integer},
        {"ct_src_dport_ltm", K::integer},
        {"ct_dst_sport_ltm", K::integer},
        {"ct_dst_src_ltm", K::integer},
        {"attack_cat", K::nominal},
        {"label", K::binary},
    };
    FeatureSchema schema;
    int idx = 0;
    for (const auto& d : defs) schema.columns.push_back({d.name, d.kind, idx++});
    return schema;
}

inline bool same_columns(const FeatureSchema& a, const FeatureSchema& b) {
    if (a.arity() != b.arity()) return false;
    for (std::size_t i = 0; i < a.arity(); ++i)
        if (a.columns[i].name != b.columns[i].name || a.columns[i].kind != b.columns[i].kind)
            return false;
    return true;
}

} // namespace flowml
