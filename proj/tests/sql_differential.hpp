#pragma once

// Randomized differential harness for the SQL subset: a structured query is
// generated first, rendered to SQL text for the engine, and evaluated
// directly by an independent brute-force interpreter that never touches the
// SQL parser or executor.

#include "tableqa/sql.hpp"
#include "tableqa/store.hpp"
#include "tableqa/value.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace sqldiff {

using tqa::Value;

struct GenColumn {
    std::string name;
    bool numeric = false;
};

struct GenTable {
    std::string name;
    std::vector<GenColumn> columns;
    std::vector<std::vector<Value>> rows;
};

// ------------------------------------------------------------ query model

struct CmpSpec {
    int table = 0; // 0 = left, 1 = joined
    int col = 0;
    std::string op; // = != < <= > >=
    Value literal;
};

struct CondSpec {
    enum class Kind { Cmp, And, Or, In, Like } kind = Kind::Cmp;
    CmpSpec cmp;
    std::vector<Value> in_list;
    std::string like_pattern;
    std::unique_ptr<CondSpec> lhs, rhs;
};

struct ItemSpec {
    enum class Kind { Col, Arith, Agg, CountStar } kind = Kind::Col;
    int table = 0;
    int col = 0;
    // arith: col <op> operand (second column or literal)
    char arith_op = '+';
    bool rhs_is_col = false;
    int rhs_col = 0;
    double rhs_num = 0.0;
    tqa::sql::AggOp agg = tqa::sql::AggOp::Sum;
    std::string alias;
};

struct OrderSpec {
    size_t item = 0; // index into items, referenced by alias
    bool desc = false;
};

struct QuerySpec {
    std::vector<GenTable> tables; // 1 or 2; 2 means INNER JOIN on key cols
    int join_left_col = 0;
    int join_right_col = 0;
    std::vector<ItemSpec> items;
    std::unique_ptr<CondSpec> where;
    std::vector<std::pair<int, int>> group_by; // (table, col)
    std::vector<OrderSpec> order_by;
    std::optional<long> limit;
};

// ---------------------------------------------------------------- helpers

inline double u01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int pick(std::mt19937_64& rng, int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); }

// ------------------------------------------------------------- generation

inline GenTable gen_table(std::mt19937_64& rng, const std::string& name, bool allow_empty) {
    GenTable t;
    t.name = name;
    int n_cols = 2 + pick(rng, 3);
    t.columns.push_back({"t_key", false}); // shared join key domain
    for (int c = 1; c < n_cols; ++c) {
        bool numeric = pick(rng, 2) == 0;
        t.columns.push_back({(numeric ? "t_num_" : "t_str_") + name + "_" + std::to_string(c),
                             numeric});
    }
    int n_rows = allow_empty && pick(rng, 6) == 0 ? 0 : 1 + pick(rng, 50);
    static const char* words[] = {"alpha", "beta", "gamma", "delta", "echo", "fox"};
    for (int r = 0; r < n_rows; ++r) {
        std::vector<Value> row;
        for (const auto& col : t.columns) {
            if (pick(rng, 10) == 0) {
                row.emplace_back(std::monostate{});
            } else if (col.numeric) {
                row.emplace_back(static_cast<double>(pick(rng, 200) - 100));
            } else if (col.name == "t_key") {
                row.emplace_back(std::string("k") + std::to_string(pick(rng, 8)));
            } else {
                row.emplace_back(std::string(words[pick(rng, 6)]));
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Value gen_literal_for(std::mt19937_64& rng, const GenTable& t, int col) {
    // mostly values that occur, sometimes missing ones
    if (!t.rows.empty() && pick(rng, 4) != 0) {
        for (int tries = 0; tries < 8; ++tries) {
            const Value& v = t.rows[static_cast<size_t>(pick(rng, static_cast<int>(t.rows.size())))]
                                   [static_cast<size_t>(col)];
            if (!tqa::is_null(v)) return v;
        }
    }
    if (t.columns[static_cast<size_t>(col)].numeric)
        return static_cast<double>(pick(rng, 200) - 100);
    return std::string("zzz") + std::to_string(pick(rng, 5));
}

inline std::unique_ptr<CondSpec> gen_condition(std::mt19937_64& rng,
                                               const std::vector<GenTable>& tables, int depth) {
    auto cond = std::make_unique<CondSpec>();
    int table = pick(rng, static_cast<int>(tables.size()));
    const GenTable& t = tables[static_cast<size_t>(table)];
    int col = pick(rng, static_cast<int>(t.columns.size()));
    if (depth > 0 && pick(rng, 3) == 0) {
        cond->kind = pick(rng, 2) == 0 ? CondSpec::Kind::And : CondSpec::Kind::Or;
        cond->lhs = gen_condition(rng, tables, depth - 1);
        cond->rhs = gen_condition(rng, tables, depth - 1);
        return cond;
    }
    int form = pick(rng, 6);
    if (form == 0) {
        cond->kind = CondSpec::Kind::In;
        cond->cmp.table = table;
        cond->cmp.col = col;
        int n = 1 + pick(rng, 3);
        for (int i = 0; i < n; ++i) cond->in_list.push_back(gen_literal_for(rng, t, col));
        return cond;
    }
    if (form == 1 && !t.columns[static_cast<size_t>(col)].numeric) {
        cond->kind = CondSpec::Kind::Like;
        cond->cmp.table = table;
        cond->cmp.col = col;
        Value sample = gen_literal_for(rng, t, col);
        std::string s = tqa::is_string(sample) ? tqa::as_string(sample) : "alpha";
        switch (pick(rng, 3)) {
        case 0: cond->like_pattern = s.substr(0, 1 + s.size() / 2) + "%"; break;
        case 1: cond->like_pattern = "%" + s.substr(s.size() / 2); break;
        default:
            cond->like_pattern = s;
            if (!cond->like_pattern.empty()) cond->like_pattern[0] = '_';
            break;
        }
        return cond;
    }
    cond->kind = CondSpec::Kind::Cmp;
    cond->cmp.table = table;
    cond->cmp.col = col;
    static const char* ops[] = {"=", "!=", "<", "<=", ">", ">="};
    cond->cmp.op = ops[pick(rng, 6)];
    cond->cmp.literal = gen_literal_for(rng, t, col);
    return cond;
}

inline QuerySpec gen_query(std::mt19937_64& rng) {
    QuerySpec q;
    bool join = pick(rng, 4) == 0;
    q.tables.push_back(gen_table(rng, "a", true));
    if (join) q.tables.push_back(gen_table(rng, "b", false));

    bool aggregate = pick(rng, 2) == 0;
    int n_items = 1 + pick(rng, 3);
    if (aggregate) {
        bool grouped = pick(rng, 2) == 0;
        if (grouped) {
            int gt = pick(rng, static_cast<int>(q.tables.size()));
            const GenTable& t = q.tables[static_cast<size_t>(gt)];
            // group by a string column
            std::vector<int> str_cols;
            for (size_t c = 0; c < t.columns.size(); ++c)
                if (!t.columns[c].numeric) str_cols.push_back(static_cast<int>(c));
            if (!str_cols.empty()) {
                int gc = str_cols[static_cast<size_t>(pick(rng, static_cast<int>(str_cols.size())))];
                q.group_by.emplace_back(gt, gc);
                ItemSpec key;
                key.kind = ItemSpec::Kind::Col;
                key.table = gt;
                key.col = gc;
                q.items.push_back(key);
            }
        }
        for (int i = 0; i < n_items; ++i) {
            ItemSpec item;
            if (pick(rng, 5) == 0) {
                item.kind = ItemSpec::Kind::CountStar;
            } else {
                item.kind = ItemSpec::Kind::Agg;
                item.table = pick(rng, static_cast<int>(q.tables.size()));
                const GenTable& t = q.tables[static_cast<size_t>(item.table)];
                std::vector<int> num_cols;
                for (size_t c = 0; c < t.columns.size(); ++c)
                    if (t.columns[c].numeric) num_cols.push_back(static_cast<int>(c));
                if (num_cols.empty()) {
                    item.kind = ItemSpec::Kind::CountStar;
                } else {
                    item.col = num_cols[static_cast<size_t>(
                        pick(rng, static_cast<int>(num_cols.size())))];
                    static const tqa::sql::AggOp ops[] = {
                        tqa::sql::AggOp::Sum, tqa::sql::AggOp::Count, tqa::sql::AggOp::Avg,
                        tqa::sql::AggOp::Min, tqa::sql::AggOp::Max};
                    item.agg = ops[pick(rng, 5)];
                }
            }
            q.items.push_back(item);
        }
    } else {
        for (int i = 0; i < n_items; ++i) {
            ItemSpec item;
            item.table = pick(rng, static_cast<int>(q.tables.size()));
            const GenTable& t = q.tables[static_cast<size_t>(item.table)];
            item.col = pick(rng, static_cast<int>(t.columns.size()));
            if (t.columns[static_cast<size_t>(item.col)].numeric && pick(rng, 3) == 0) {
                item.kind = ItemSpec::Kind::Arith;
                static const char ops[] = {'+', '-', '*'};
                item.arith_op = ops[pick(rng, 3)];
                std::vector<int> num_cols;
                for (size_t c = 0; c < t.columns.size(); ++c)
                    if (t.columns[c].numeric) num_cols.push_back(static_cast<int>(c));
                if (pick(rng, 2) == 0 && num_cols.size() > 1) {
                    item.rhs_is_col = true;
                    item.rhs_col = num_cols[static_cast<size_t>(
                        pick(rng, static_cast<int>(num_cols.size())))];
                } else {
                    item.rhs_num = static_cast<double>(pick(rng, 20) + 1);
                }
            } else {
                item.kind = ItemSpec::Kind::Col;
            }
            q.items.push_back(item);
        }
    }
    for (size_t i = 0; i < q.items.size(); ++i) q.items[i].alias = "c" + std::to_string(i);

    if (pick(rng, 2) == 0) q.where = gen_condition(rng, q.tables, 2);
    if (pick(rng, 2) == 0) {
        int n_orders = 1 + pick(rng, 2);
        for (int i = 0; i < n_orders; ++i)
            q.order_by.push_back({static_cast<size_t>(pick(rng, static_cast<int>(q.items.size()))),
                                  pick(rng, 2) == 0});
    }
    if (pick(rng, 3) == 0) q.limit = pick(rng, 20);
    return q;
}

// -------------------------------------------------------------- rendering

inline std::string col_ref(const QuerySpec& q, int table, int col) {
    const GenTable& t = q.tables[static_cast<size_t>(table)];
    if (q.tables.size() > 1) return t.name + "." + t.columns[static_cast<size_t>(col)].name;
    return t.columns[static_cast<size_t>(col)].name;
}

inline std::string render_value(const Value& v) {
    if (tqa::is_number(v)) return tqa::text::format_number(tqa::as_number(v));
    return tqa::sql::quote_string_literal(tqa::as_string(v));
}

inline std::string render_cond(const QuerySpec& q, const CondSpec& c) {
    switch (c.kind) {
    case CondSpec::Kind::And:
        return "(" + render_cond(q, *c.lhs) + " AND " + render_cond(q, *c.rhs) + ")";
    case CondSpec::Kind::Or:
        return "(" + render_cond(q, *c.lhs) + " OR " + render_cond(q, *c.rhs) + ")";
    case CondSpec::Kind::In: {
        std::string s = col_ref(q, c.cmp.table, c.cmp.col) + " IN (";
        for (size_t i = 0; i < c.in_list.size(); ++i) {
            if (i) s += ", ";
            s += render_value(c.in_list[i]);
        }
        return s + ")";
    }
    case CondSpec::Kind::Like:
        return col_ref(q, c.cmp.table, c.cmp.col) + " LIKE " +
               tqa::sql::quote_string_literal(c.like_pattern);
    case CondSpec::Kind::Cmp:
        return col_ref(q, c.cmp.table, c.cmp.col) + " " + c.cmp.op + " " +
               render_value(c.cmp.literal);
    }
    return "";
}

inline std::string render_item(const QuerySpec& q, const ItemSpec& item) {
    switch (item.kind) {
    case ItemSpec::Kind::Col: return col_ref(q, item.table, item.col);
    case ItemSpec::Kind::Arith: {
        std::string rhs = item.rhs_is_col ? col_ref(q, item.table, item.rhs_col)
                                          : tqa::text::format_number(item.rhs_num);
        return col_ref(q, item.table, item.col) + " " + item.arith_op + " " + rhs;
    }
    case ItemSpec::Kind::Agg:
        return tqa::sql::to_string(item.agg) + "(" + col_ref(q, item.table, item.col) + ")";
    case ItemSpec::Kind::CountStar: return "COUNT(*)";
    }
    return "";
}

inline std::string render_sql(const QuerySpec& q) {
    std::string s = "SELECT ";
    for (size_t i = 0; i < q.items.size(); ++i) {
        if (i) s += ", ";
        s += render_item(q, q.items[i]) + " AS " + q.items[i].alias;
    }
    s += " FROM " + q.tables[0].name;
    if (q.tables.size() > 1) {
        s += " INNER JOIN " + q.tables[1].name + " ON " +
             col_ref(q, 0, q.join_left_col) + " = " + col_ref(q, 1, q.join_right_col);
    }
    if (q.where) s += " WHERE " + render_cond(q, *q.where);
    if (!q.group_by.empty()) {
        s += " GROUP BY ";
        for (size_t i = 0; i < q.group_by.size(); ++i) {
            if (i) s += ", ";
            s += col_ref(q, q.group_by[i].first, q.group_by[i].second);
        }
    }
    if (!q.order_by.empty()) {
        s += " ORDER BY ";
        for (size_t i = 0; i < q.order_by.size(); ++i) {
            if (i) s += ", ";
            s += q.items[q.order_by[i].item].alias;
            if (q.order_by[i].desc) s += " DESC";
        }
    }
    if (q.limit) s += " LIMIT " + std::to_string(*q.limit);
    return s;
}

// ------------------------------------------------------- brute-force oracle

struct OracleRow {
    std::vector<Value> left;
    std::vector<Value> right;
    const Value& at(int table, int col) const {
        return table == 0 ? left[static_cast<size_t>(col)] : right[static_cast<size_t>(col)];
    }
};

inline bool oracle_like(const std::string& s, const std::string& p, size_t si, size_t pi) {
    if (pi == p.size()) return si == s.size();
    if (p[pi] == '%') {
        for (size_t k = si; k <= s.size(); ++k)
            if (oracle_like(s, p, k, pi + 1)) return true;
        return false;
    }
    if (si == s.size()) return false;
    if (p[pi] != '_' && p[pi] != s[si]) return false;
    return oracle_like(s, p, si + 1, pi + 1);
}

inline bool oracle_cond(const CondSpec& c, const OracleRow& row) {
    switch (c.kind) {
    case CondSpec::Kind::And: return oracle_cond(*c.lhs, row) && oracle_cond(*c.rhs, row);
    case CondSpec::Kind::Or: return oracle_cond(*c.lhs, row) || oracle_cond(*c.rhs, row);
    case CondSpec::Kind::In: {
        const Value& v = row.at(c.cmp.table, c.cmp.col);
        if (tqa::is_null(v)) return false;
        for (const auto& lit : c.in_list)
            if (tqa::value_equal(v, lit)) return true;
        return false;
    }
    case CondSpec::Kind::Like: {
        const Value& v = row.at(c.cmp.table, c.cmp.col);
        if (!tqa::is_string(v)) return false;
        return oracle_like(tqa::as_string(v), c.like_pattern, 0, 0);
    }
    case CondSpec::Kind::Cmp: {
        const Value& v = row.at(c.cmp.table, c.cmp.col);
        const Value& lit = c.cmp.literal;
        if (tqa::is_null(v) || tqa::is_null(lit)) return false;
        if (v.index() != lit.index()) return false;
        int cmp;
        if (tqa::is_number(v)) {
            double a = tqa::as_number(v), b = tqa::as_number(lit);
            cmp = a < b ? -1 : (a > b ? 1 : 0);
        } else {
            int r = tqa::as_string(v).compare(tqa::as_string(lit));
            cmp = r < 0 ? -1 : (r > 0 ? 1 : 0);
        }
        if (c.cmp.op == "=") return cmp == 0;
        if (c.cmp.op == "!=") return cmp != 0;
        if (c.cmp.op == "<") return cmp < 0;
        if (c.cmp.op == "<=") return cmp <= 0;
        if (c.cmp.op == ">") return cmp > 0;
        return cmp >= 0;
    }
    }
    return false;
}

inline Value oracle_item_row(const QuerySpec& q, const ItemSpec& item, const OracleRow& row) {
    (void)q;
    if (item.kind == ItemSpec::Kind::Col) return row.at(item.table, item.col);
    // arith
    const Value& a = row.at(item.table, item.col);
    Value b = item.rhs_is_col ? row.at(item.table, item.rhs_col) : Value{item.rhs_num};
    if (!tqa::is_number(a) || !tqa::is_number(b)) return std::monostate{};
    double x = tqa::as_number(a), y = tqa::as_number(b);
    switch (item.arith_op) {
    case '+': return x + y;
    case '-': return x - y;
    default: return x * y;
    }
}

inline Value oracle_item_group(const QuerySpec& q, const ItemSpec& item,
                               const std::vector<const OracleRow*>& group) {
    (void)q;
    if (item.kind == ItemSpec::Kind::CountStar) return static_cast<double>(group.size());
    std::vector<Value> vals;
    for (const auto* row : group) {
        const Value& v = row->at(item.table, item.col);
        if (!tqa::is_null(v)) vals.push_back(v);
    }
    switch (item.agg) {
    case tqa::sql::AggOp::Count: return static_cast<double>(vals.size());
    case tqa::sql::AggOp::Sum:
    case tqa::sql::AggOp::Avg: {
        double sum = 0.0;
        size_t n = 0;
        for (const auto& v : vals)
            if (tqa::is_number(v)) {
                sum += tqa::as_number(v);
                ++n;
            }
        if (n == 0) return std::monostate{};
        return item.agg == tqa::sql::AggOp::Sum ? sum : sum / static_cast<double>(n);
    }
    case tqa::sql::AggOp::Min:
    case tqa::sql::AggOp::Max: {
        if (vals.empty()) return std::monostate{};
        Value best = vals[0];
        for (const auto& v : vals) {
            int c = tqa::value_compare(v, best);
            if ((item.agg == tqa::sql::AggOp::Min && c < 0) ||
                (item.agg == tqa::sql::AggOp::Max && c > 0))
                best = v;
        }
        return best;
    }
    }
    return std::monostate{};
}

inline std::vector<std::vector<Value>> oracle_eval(const QuerySpec& q) {
    std::vector<OracleRow> working;
    if (q.tables.size() == 1) {
        for (const auto& r : q.tables[0].rows) working.push_back({r, {}});
    } else {
        for (const auto& lr : q.tables[0].rows) {
            const Value& lk = lr[static_cast<size_t>(q.join_left_col)];
            for (const auto& rr : q.tables[1].rows) {
                const Value& rk = rr[static_cast<size_t>(q.join_right_col)];
                if (tqa::is_null(lk) || tqa::is_null(rk)) continue;
                if (tqa::value_equal(lk, rk)) working.push_back({lr, rr});
            }
        }
    }
    if (q.where) {
        std::vector<OracleRow> kept;
        for (auto& r : working)
            if (oracle_cond(*q.where, r)) kept.push_back(std::move(r));
        working = std::move(kept);
    }

    bool aggregate = !q.group_by.empty();
    for (const auto& item : q.items)
        if (item.kind == ItemSpec::Kind::Agg || item.kind == ItemSpec::Kind::CountStar)
            aggregate = true;

    std::vector<std::vector<Value>> rows;
    if (!aggregate) {
        for (const auto& r : working) {
            std::vector<Value> out;
            for (const auto& item : q.items) out.push_back(oracle_item_row(q, item, r));
            rows.push_back(std::move(out));
        }
    } else {
        std::vector<std::vector<Value>> keys;
        std::vector<std::vector<const OracleRow*>> groups;
        for (const auto& r : working) {
            std::vector<Value> key;
            for (const auto& [t, c] : q.group_by) key.push_back(r.at(t, c));
            size_t gi = groups.size();
            for (size_t i = 0; i < keys.size(); ++i) {
                bool same = true;
                for (size_t k = 0; k < key.size(); ++k) {
                    const Value& a = keys[i][k];
                    const Value& b = key[k];
                    if (!((tqa::is_null(a) && tqa::is_null(b)) || tqa::value_equal(a, b))) {
                        same = false;
                        break;
                    }
                }
                if (same) {
                    gi = i;
                    break;
                }
            }
            if (gi == groups.size()) {
                keys.push_back(key);
                groups.emplace_back();
            }
            groups[gi].push_back(&r);
        }
        if (q.group_by.empty() && groups.empty()) {
            keys.emplace_back();
            groups.emplace_back();
        }
        for (size_t gi = 0; gi < groups.size(); ++gi) {
            std::vector<Value> out;
            for (const auto& item : q.items) {
                if (item.kind == ItemSpec::Kind::Agg || item.kind == ItemSpec::Kind::CountStar) {
                    out.push_back(oracle_item_group(q, item, groups[gi]));
                } else {
                    size_t kc = 0;
                    for (; kc < q.group_by.size(); ++kc)
                        if (q.group_by[kc].first == item.table &&
                            q.group_by[kc].second == item.col)
                            break;
                    out.push_back(keys[gi][kc]);
                }
            }
            rows.push_back(std::move(out));
        }
    }

    if (!q.order_by.empty()) {
        std::vector<size_t> idx(rows.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            for (const auto& o : q.order_by) {
                int c = tqa::value_compare(rows[a][o.item], rows[b][o.item]);
                if (o.desc) c = -c;
                if (c != 0) return c < 0;
            }
            return false;
        });
        std::vector<std::vector<Value>> sorted;
        sorted.reserve(rows.size());
        for (size_t i : idx) sorted.push_back(std::move(rows[i]));
        rows = std::move(sorted);
    }
    if (q.limit && rows.size() > static_cast<size_t>(*q.limit))
        rows.resize(static_cast<size_t>(*q.limit));
    return rows;
}

// ------------------------------------------------------------- store glue

inline tqa::RelationalTable to_relational(const GenTable& t) {
    tqa::RelationalTable out;
    out.table_id = t.name;
    out.name = t.name;
    for (const auto& c : t.columns) {
        out.columns.push_back({c.name, c.numeric ? tqa::ColType::Continuous
                                                 : tqa::ColType::Discrete});
        out.display_labels.push_back(c.name);
        out.header_paths.push_back({c.name});
    }
    out.rows = t.rows;
    return out;
}

inline bool values_match(const Value& a, const Value& b) {
    if (tqa::is_null(a) && tqa::is_null(b)) return true;
    if (a.index() != b.index()) return false;
    if (tqa::is_number(a)) {
        double x = tqa::as_number(a), y = tqa::as_number(b);
        double tol = 1e-9 * std::max({std::fabs(x), std::fabs(y), 1.0});
        return std::fabs(x - y) <= tol;
    }
    if (tqa::is_string(a)) return tqa::as_string(a) == tqa::as_string(b);
    return true;
}

// Runs one generated query through both routes; returns true on agreement.
inline bool run_one(std::mt19937_64& rng, std::string* failure) {
    QuerySpec q = gen_query(rng);
    std::vector<tqa::RelationalTable> tables;
    for (const auto& t : q.tables) tables.push_back(to_relational(t));
    tqa::Store store = tqa::Store::ephemeral(std::move(tables));
    std::string sql_text = render_sql(q);
    auto expected = oracle_eval(q);
    auto actual = tqa::sql::execute_sql(store, sql_text);
    bool ok = actual.rows.size() == expected.size();
    if (ok) {
        for (size_t r = 0; r < expected.size() && ok; ++r) {
            if (actual.rows[r].size() != expected[r].size()) {
                ok = false;
                break;
            }
            for (size_t c = 0; c < expected[r].size(); ++c)
                if (!values_match(actual.rows[r][c], expected[r][c])) {
                    ok = false;
                    break;
                }
        }
    }
    if (!ok && failure) {
        *failure = "sql: " + sql_text + "\nexpected rows: " + std::to_string(expected.size()) +
                   ", got: " + std::to_string(actual.rows.size());
    }
    return ok;
}

} // namespace sqldiff
