#include "tableqa/query.hpp"

#include "tableqa/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using json = nlohmann::json;

namespace tqa {

std::string to_string(Modality m) { return m == Modality::Tabular ? "tabular" : "textual"; }

std::string to_string(Intent i) {
    switch (i) {
    case Intent::Aggregate: return "aggregate";
    case Intent::Lookup: return "lookup";
    case Intent::Rank: return "rank";
    case Intent::Join: return "join";
    case Intent::Describe: return "describe";
    }
    return "describe";
}

std::string to_string(LinkMethod m) {
    switch (m) {
    case LinkMethod::Exact: return "exact";
    case LinkMethod::Embedding: return "embedding";
    case LinkMethod::TypeTag: return "type-tag";
    }
    return "embedding";
}

// ------------------------------------------------------------ time ranges

namespace {

const std::set<std::string>& month_words() {
    static const std::set<std::string> kMonths = {
        "january", "february", "march",     "april",   "may",      "june",
        "july",    "august",   "september", "october", "november", "december",
        "jan",     "feb",      "mar",       "apr",     "jun",      "jul",
        "aug",     "sep",      "oct",       "nov",     "dec"};
    return kMonths;
}

int month_index(const std::string& w) {
    static const char* full[] = {"january", "february", "march", "april", "may", "june",
                                 "july", "august", "september", "october", "november",
                                 "december"};
    static const char* abbr[] = {"jan", "feb", "mar", "apr", "may", "jun",
                                 "jul", "aug", "sep", "oct", "nov", "dec"};
    for (int i = 0; i < 12; ++i) {
        if (w == full[i] || w == abbr[i]) return i + 1;
    }
    return 0;
}

int last_day(int year, int month) {
    static const int d[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && ((year % 4 == 0 && year % 100 != 0) || year % 400 == 0)) return 29;
    return d[month - 1];
}

std::optional<int> parse_year_token(const std::string& t) {
    if (t.size() != 4) return std::nullopt;
    if (!std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); }))
        return std::nullopt;
    return std::stoi(t);
}

} // namespace

std::optional<std::pair<text::Date, text::Date>> parse_time_range(const std::string& clause) {
    auto tokens = text::tokenize(clause);
    auto quarter_range = [](int q, int year) -> std::pair<text::Date, text::Date> {
        int m0 = (q - 1) * 3 + 1;
        int m1 = m0 + 2;
        return {text::Date{year, m0, 1}, text::Date{year, m1, last_day(year, m1)}};
    };
    // "first|second|third|fourth quarter of YYYY", "q1 YYYY", "q1 of YYYY"
    static const std::pair<const char*, int> ordinals[] = {
        {"first", 1}, {"1st", 1}, {"second", 2}, {"2nd", 2},
        {"third", 3}, {"3rd", 3}, {"fourth", 4}, {"4th", 4}};
    for (size_t i = 0; i < tokens.size(); ++i) {
        // qN YYYY
        if (tokens[i].size() == 2 && tokens[i][0] == 'q' && tokens[i][1] >= '1' &&
            tokens[i][1] <= '4') {
            int q = tokens[i][1] - '0';
            for (size_t j = i + 1; j < tokens.size() && j <= i + 2; ++j)
                if (auto y = parse_year_token(tokens[j])) return quarter_range(q, *y);
        }
        if (tokens[i] == "quarter" && i >= 1) {
            for (const auto& [word, q] : ordinals) {
                if (tokens[i - 1] == word) {
                    for (size_t j = i + 1; j < tokens.size() && j <= i + 3; ++j)
                        if (auto y = parse_year_token(tokens[j])) return quarter_range(q, *y);
                }
            }
        }
    }
    // "<month> YYYY"
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (month_words().count(tokens[i])) {
            // skip explicit dates like "jan 06 2025": handled by schema links
            if (i + 2 < tokens.size() && tokens[i + 1].size() <= 2 &&
                parse_year_token(tokens[i + 2]))
                continue;
            if (auto y = parse_year_token(tokens[i + 1])) {
                int mth = month_index(tokens[i]);
                if (mth)
                    return std::make_pair(text::Date{*y, mth, 1},
                                          text::Date{*y, mth, last_day(*y, mth)});
            }
        }
    }
    // bare "in YYYY"
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (tokens[i] == "in" || tokens[i] == "during" || tokens[i] == "year") {
            if (auto y = parse_year_token(tokens[i + 1]))
                return std::make_pair(text::Date{*y, 1, 1}, text::Date{*y, 12, 31});
        }
    }
    return std::nullopt;
}

// ------------------------------------------------------------- decompose

namespace {

const std::set<std::string>& measure_boundaries() {
    static const std::set<std::string> kStop = {
        "of", "in", "for", "during", "across", "per", "from", "between", "by",
        "to", "over", "with", "on", "at", "when", "that", "which", "dated"};
    return kStop;
}

std::string extract_measure(const std::vector<std::string>& tokens, size_t after) {
    std::string out;
    size_t i = after;
    while (i < tokens.size() && (tokens[i] == "the" || tokens[i] == "a" || tokens[i] == "an"))
        ++i;
    for (; i < tokens.size(); ++i) {
        if (measure_boundaries().count(tokens[i])) break;
        if (!out.empty()) out += ' ';
        out += tokens[i];
    }
    return out;
}

bool contains_word(const std::vector<std::string>& tokens, const std::string& w) {
    return std::find(tokens.begin(), tokens.end(), w) != tokens.end();
}

size_t find_word(const std::vector<std::string>& tokens, const std::string& w) {
    auto it = std::find(tokens.begin(), tokens.end(), w);
    return it == tokens.end() ? tokens.size() : static_cast<size_t>(it - tokens.begin());
}

// filter literals: quoted spans, code-like tokens, capitalized spans.
// Time-phrase words and plain numbers are not filters.
std::vector<std::string> filter_literals(const std::string& clause) {
    std::vector<std::string> out;
    for (const auto& lit : Retriever::salient_literals(clause)) {
        auto toks = text::tokenize(lit);
        bool timeish = false;
        for (const auto& t : toks) {
            if (month_words().count(t) || t == "quarter" || parse_year_token(t)) timeish = true;
        }
        if (timeish) continue;
        if (text::parse_number(lit)) continue;
        // drop leading interrogatives captured by the capitalization scan
        static const std::set<std::string> heads = {"what",  "which", "top",   "describe",
                                                    "how",   "show",  "give",  "why",
                                                    "total", "sum",   "average"};
        if (toks.size() == 1 && heads.count(toks[0])) continue;
        out.push_back(lit);
    }
    return out;
}

std::vector<std::string> split_clauses(const std::string& question) {
    std::vector<std::string> segments;
    std::string cur;
    for (char c : question) {
        if (c == '?') {
            if (!text::trim(cur).empty()) segments.push_back(text::trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!text::trim(cur).empty()) segments.push_back(text::trim(cur));

    static const std::set<std::string> starters = {"why",     "what",     "how",  "describe",
                                                   "explain", "summarize", "who", "when",
                                                   "where"};
    std::vector<std::string> clauses;
    for (const auto& seg : segments) {
        std::string lower = text::to_lower(seg);
        size_t pos = 0, start = 0;
        while ((pos = lower.find(" and ", pos)) != std::string::npos) {
            size_t next_word_begin = pos + 5;
            std::string rest = lower.substr(next_word_begin);
            auto toks = text::tokenize(rest);
            if (!toks.empty() && starters.count(toks[0])) {
                clauses.push_back(text::trim(seg.substr(start, pos - start)));
                start = next_word_begin;
            }
            pos += 5;
        }
        clauses.push_back(text::trim(seg.substr(start)));
    }
    clauses.erase(std::remove_if(clauses.begin(), clauses.end(),
                                 [](const std::string& s) { return s.empty(); }),
                  clauses.end());
    return clauses;
}

std::string agg_verb(sql::AggOp op) {
    switch (op) {
    case sql::AggOp::Sum: return "Sum";
    case sql::AggOp::Count: return "Count";
    case sql::AggOp::Avg: return "Average";
    case sql::AggOp::Min: return "Take the minimum of";
    case sql::AggOp::Max: return "Take the maximum of";
    }
    return "Combine";
}

std::string range_text(const std::pair<text::Date, text::Date>& r) {
    return text::format_date_iso(r.first) + " to " + text::format_date_iso(r.second);
}

void append_tabular_plan(std::vector<std::string>& plan, const SubQuery& sub) {
    std::string focus = sub.measure.value_or("the requested values");
    std::string scope;
    if (sub.time_range)
        scope = "the columns inside " + range_text(*sub.time_range);
    else if (!sub.filters.empty()) {
        scope = "rows matching ";
        for (size_t i = 0; i < sub.filters.size(); ++i) {
            if (i) scope += ", ";
            scope += value_to_display(sub.filters[i].literal);
        }
    } else {
        scope = "all body rows";
    }
    plan.push_back("Locate the table relevant to " + focus + ".");
    plan.push_back("Identify the rows and columns for " + scope + ".");
    plan.push_back("Extract the " + focus + " values.");
    switch (sub.intent) {
    case Intent::Aggregate:
        plan.push_back(agg_verb(sub.agg_op.value_or(sql::AggOp::Sum)) +
                       " the extracted values to obtain the result.");
        break;
    case Intent::Rank:
        plan.push_back("Order by " + focus + " descending and keep the top " +
                       std::to_string(sub.top_k.value_or(1)) + ".");
        break;
    case Intent::Join:
        plan.push_back("Join the linked tables on the shared key and combine the values.");
        break;
    default: plan.push_back("Return the matching values."); break;
    }
}

void append_textual_plan(std::vector<std::string>& plan, const SubQuery& sub) {
    plan.push_back("Retrieve passages relevant to \"" + sub.raw_span + "\".");
    plan.push_back("Rerank candidates with schema-aware relevance.");
    plan.push_back("Synthesize the answer from the top passages.");
}

} // namespace

Decomposition PatternDecomposer::decompose(const std::string& question) const {
    if (text::trim(question).empty())
        throw validation_error("decompose: empty question");
    Decomposition d;
    int sq_counter = 1;
    for (const auto& clause : split_clauses(question)) {
        SubQuery sub;
        sub.sq_id = "sq_" + std::to_string(sq_counter++);
        sub.raw_span = clause;
        auto tokens = text::tokenize(clause);
        std::string lower = text::to_lower(clause);

        bool describe = contains_word(tokens, "why") || contains_word(tokens, "describe") ||
                        contains_word(tokens, "explain") || contains_word(tokens, "summarize") ||
                        lower.rfind("tell me about", 0) == 0;

        size_t top_pos = find_word(tokens, "top");
        bool rank = top_pos + 1 < tokens.size() &&
                    text::parse_number(tokens[top_pos + 1]).has_value();

        std::optional<sql::AggOp> agg;
        size_t agg_pos = tokens.size();
        struct KeywordAgg {
            const char* word;
            sql::AggOp op;
        };
        static const KeywordAgg kAggWords[] = {
            {"total", sql::AggOp::Sum},    {"sum", sql::AggOp::Sum},
            {"overall", sql::AggOp::Sum},  {"average", sql::AggOp::Avg},
            {"mean", sql::AggOp::Avg},     {"count", sql::AggOp::Count},
            {"minimum", sql::AggOp::Min},  {"lowest", sql::AggOp::Min},
            {"smallest", sql::AggOp::Min}, {"maximum", sql::AggOp::Max},
            {"largest", sql::AggOp::Max}};
        for (const auto& kw : kAggWords) {
            size_t pos = find_word(tokens, kw.word);
            if (pos < agg_pos) {
                agg_pos = pos;
                agg = kw.op;
            }
        }
        // "how many X" counts X
        for (size_t i = 0; i + 1 < tokens.size(); ++i) {
            if (tokens[i] == "how" && tokens[i + 1] == "many" && i < agg_pos) {
                agg = sql::AggOp::Count;
                agg_pos = i + 1;
                break;
            }
        }

        if (describe) {
            sub.modality = Modality::Textual;
            sub.intent = Intent::Describe;
        } else if (rank) {
            sub.modality = Modality::Tabular;
            sub.intent = Intent::Rank;
            sub.top_k = static_cast<int>(*text::parse_number(tokens[top_pos + 1]));
            size_t by_pos = find_word(tokens, "by");
            if (by_pos + 1 < tokens.size())
                sub.measure = extract_measure(tokens, by_pos + 1);
            else
                sub.measure = extract_measure(tokens, top_pos + 2);
            if (sub.measure->empty()) sub.measure = "value";
        } else if (agg) {
            sub.modality = Modality::Tabular;
            sub.intent = Intent::Aggregate;
            sub.agg_op = agg;
            std::string measure = extract_measure(tokens, agg_pos + 1);
            if (measure.empty()) measure = "value";
            sub.measure = measure;
        } else if (contains_word(tokens, "what") || contains_word(tokens, "which") ||
                   contains_word(tokens, "show") || contains_word(tokens, "give")) {
            sub.modality = Modality::Tabular;
            sub.intent = Intent::Lookup;
            size_t is_pos = std::min(find_word(tokens, "is"), find_word(tokens, "was"));
            sub.measure = extract_measure(tokens, is_pos == tokens.size() ? 1 : is_pos + 1);
            if (sub.measure->empty()) sub.measure = "value";
        } else {
            sub.modality = Modality::Textual;
            sub.intent = Intent::Describe;
        }

        if (sub.modality == Modality::Tabular) {
            sub.time_range = parse_time_range(clause);
            for (const auto& lit : filter_literals(clause)) {
                if (sub.intent == Intent::Rank) break; // rank filters unsupported
                QueryFilter f;
                f.comparator = "=";
                f.literal = lit;
                sub.filters.push_back(std::move(f));
            }
            append_tabular_plan(d.plan, sub);
        } else {
            append_textual_plan(d.plan, sub);
        }
        d.sub_queries.push_back(std::move(sub));
    }
    if (d.sub_queries.empty()) {
        SubQuery sub;
        sub.sq_id = "sq_1";
        sub.modality = Modality::Textual;
        sub.intent = Intent::Describe;
        sub.raw_span = question;
        append_textual_plan(d.plan, sub);
        d.sub_queries.push_back(std::move(sub));
    }
    return d;
}

// ------------------------------------------------------------------ links

namespace {

std::string normalize_for_match(const std::string& s) {
    auto toks = text::tokenize(s);
    std::string out;
    for (const auto& t : toks) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

std::string strip_t_prefix(const std::string& id) {
    if (id.size() > 2 && id.rfind("t_", 0) == 0) return id.substr(2);
    return id;
}

std::optional<text::Date> column_date(const RelationalTable& table, size_t c) {
    const std::string& display = table.display_labels[c];
    if (auto d = text::parse_date(display)) return d;
    // path segments, e.g. "W16·14-Apr-2025"
    std::string seg;
    std::vector<std::string> segments;
    for (size_t i = 0; i < display.size();) {
        if (display.compare(i, 2, "·") == 0) {
            segments.push_back(seg);
            seg.clear();
            i += 2;
        } else {
            seg += display[i];
            ++i;
        }
    }
    segments.push_back(seg);
    for (const auto& s : segments)
        if (auto d = text::parse_date(s)) return d;
    // identifier form, e.g. t_Jan_06_2025
    std::string from_id = strip_t_prefix(table.columns[c].name);
    std::replace(from_id.begin(), from_id.end(), '_', ' ');
    return text::parse_date(from_id);
}

struct LinkKey {
    std::string term;
    std::string table;
    std::string column;
    bool operator<(const LinkKey& o) const {
        return std::tie(term, table, column) < std::tie(o.term, o.table, o.column);
    }
};

} // namespace

QueryEngine::QueryEngine(const Store& store, const Retriever& retriever, QueryOptions options)
    : store_(store), retriever_(retriever), options_(options) {}

Decomposition QueryEngine::decompose(const std::string& question) const {
    return decomposer_.decompose(question);
}

std::vector<SchemaLink> QueryEngine::link_schema(const SubQuery& sub) const {
    if (store_.tables().empty()) return {};
    std::map<LinkKey, SchemaLink> best;
    auto offer = [&](SchemaLink link) {
        LinkKey key{link.term, link.table_id, link.column.value_or("")};
        auto it = best.find(key);
        if (it == best.end() || it->second.score < link.score) best[key] = std::move(link);
    };

    // type-aware tagging: time ranges link every date column inside the range
    if (sub.time_range) {
        std::string term = range_text(*sub.time_range);
        for (const auto& table : store_.tables()) {
            for (size_t c = 0; c < table.columns.size(); ++c) {
                auto d = column_date(table, c);
                if (!d) continue;
                if (*d < sub.time_range->first || sub.time_range->second < *d) continue;
                offer({term, table.table_id, table.columns[c].name, 1.0, LinkMethod::TypeTag});
            }
        }
    }

    std::vector<std::string> terms;
    if (sub.measure) terms.push_back(*sub.measure);
    for (const auto& f : sub.filters) {
        if (!f.column_term.empty()) terms.push_back(f.column_term);
        if (is_string(f.literal)) terms.push_back(as_string(f.literal));
    }
    auto tokens = Retriever::query_terms(sub.raw_span);
    terms.insert(terms.end(), tokens.begin(), tokens.end());
    for (size_t i = 0; i + 1 < tokens.size(); ++i)
        terms.push_back(tokens[i] + " " + tokens[i + 1]);

    for (const auto& raw_term : terms) {
        std::string term = normalize_for_match(raw_term);
        if (term.empty()) continue;
        bool term_is_date = text::parse_date(raw_term).has_value();
        auto term_vec = retriever_.embedder().embed(term);
        for (const auto& table : store_.tables()) {
            std::string table_norm = normalize_for_match(strip_t_prefix(table.name));
            if (!term_is_date) {
                if (term == table_norm) {
                    offer({raw_term, table.table_id, std::nullopt, 1.0, LinkMethod::Exact});
                } else {
                    double s = cosine(term_vec, retriever_.embedder().embed(table_norm));
                    if (s >= options_.theta_link)
                        offer({raw_term, table.table_id, std::nullopt, s, LinkMethod::Embedding});
                }
            }
            for (size_t c = 0; c < table.columns.size(); ++c) {
                auto col_date = column_date(table, c);
                if (term_is_date) {
                    // date terms link only to date columns
                    if (col_date && *col_date == *text::parse_date(raw_term))
                        offer({raw_term, table.table_id, table.columns[c].name, 1.0,
                               LinkMethod::TypeTag});
                    continue;
                }
                std::string display_norm = normalize_for_match(table.display_labels[c]);
                std::string id_norm =
                    normalize_for_match(strip_t_prefix(table.columns[c].name));
                if (term == display_norm || term == id_norm) {
                    offer({raw_term, table.table_id, table.columns[c].name, 1.0,
                           LinkMethod::Exact});
                    continue;
                }
                double s = cosine(term_vec, retriever_.embedder().embed(
                                                display_norm.empty()
                                                    ? table.display_labels[c]
                                                    : display_norm));
                s = std::max(s, cosine(term_vec, retriever_.embedder().embed(id_norm)));
                if (s >= options_.theta_link)
                    offer({raw_term, table.table_id, table.columns[c].name, s,
                           LinkMethod::Embedding});
            }
        }
    }

    std::vector<SchemaLink> links;
    links.reserve(best.size());
    for (auto& [key, link] : best) links.push_back(std::move(link));
    std::stable_sort(links.begin(), links.end(), [](const SchemaLink& a, const SchemaLink& b) {
        if (a.score != b.score) return a.score > b.score;
        std::string ta = a.table_id + ":" + a.column.value_or("");
        std::string tb = b.table_id + ":" + b.column.value_or("");
        return ta < tb;
    });
    return links;
}

std::string QueryEngine::choose_table(const std::vector<SchemaLink>& links) const {
    std::map<std::string, double> totals;
    for (const auto& l : links) totals[l.table_id] += l.score;
    if (totals.empty()) throw GenerationFailure("", "no schema links above threshold");
    std::vector<std::pair<std::string, double>> ranked(totals.begin(), totals.end());
    std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        const StoreEntryMeta* ma = store_.entry_meta(a.first);
        const StoreEntryMeta* mb = store_.entry_meta(b.first);
        std::string ta = ma ? ma->ingested_at : "";
        std::string tb = mb ? mb->ingested_at : "";
        if (ta != tb) return ta > tb; // most recent first
        return a.first < b.first;
    });
    return ranked.front().first;
}

namespace {

std::string agg_alias_prefix(sql::AggOp op) {
    switch (op) {
    case sql::AggOp::Sum: return "total";
    case sql::AggOp::Count: return "count";
    case sql::AggOp::Avg: return "avg";
    case sql::AggOp::Min: return "min";
    case sql::AggOp::Max: return "max";
    }
    return "total";
}

std::string render_literal(const Value& v) {
    if (is_number(v)) return text::format_number(as_number(v));
    return sql::quote_string_literal(as_string(v));
}

} // namespace

std::string QueryEngine::generate_sql(const SubQuery& sub,
                                      const std::vector<SchemaLink>& links) const {
    if (sub.modality != Modality::Tabular)
        throw internal_error("generate_sql: textual sub-query");
    if (links.empty()) {
        std::string term = sub.measure.value_or(sub.raw_span);
        throw GenerationFailure(term, "generate_sql: no schema links for '" + term + "'");
    }
    std::string table_name = choose_table(links);
    const RelationalTable* table = store_.find_table(table_name);
    if (!table) throw internal_error("generate_sql: chosen table vanished");

    auto measure_column = [&]() -> std::optional<std::string> {
        if (!sub.measure) return std::nullopt;
        const SchemaLink* found = nullptr;
        for (const auto& l : links) {
            if (l.table_id != table_name || !l.column) continue;
            if (normalize_for_match(l.term) != normalize_for_match(*sub.measure)) continue;
            if (!found || l.score > found->score) found = &l;
        }
        if (found) return found->column;
        return std::nullopt;
    };

    // date columns linked by the time range, in schema order
    std::vector<std::string> range_columns;
    if (sub.time_range) {
        std::set<std::string> linked;
        for (const auto& l : links)
            if (l.table_id == table_name && l.column && l.method == LinkMethod::TypeTag)
                linked.insert(*l.column);
        for (const auto& col : table->columns)
            if (linked.count(col.name)) range_columns.push_back(col.name);
    }

    auto resolve_filter_column = [&](const QueryFilter& f) -> std::optional<std::string> {
        if (!f.column_term.empty()) {
            for (const auto& l : links)
                if (l.table_id == table_name && l.column &&
                    normalize_for_match(l.term) == normalize_for_match(f.column_term))
                    return l.column;
        }
        // value scan: first column (schema order) holding the literal
        for (size_t c = 0; c < table->columns.size(); ++c) {
            for (const auto& row : table->rows) {
                const Value& v = row[c];
                if (is_null(v)) continue;
                if (is_string(f.literal) && is_string(v)) {
                    if (text::to_lower(text::trim(as_string(v))) ==
                        text::to_lower(text::trim(as_string(f.literal))))
                        return table->columns[c].name;
                } else if (is_number(f.literal) && is_number(v)) {
                    if (as_number(v) == as_number(f.literal)) return table->columns[c].name;
                }
            }
        }
        return std::nullopt;
    };

    std::string where;
    for (const auto& f : sub.filters) {
        auto col = resolve_filter_column(f);
        if (!col) {
            std::string term = f.column_term.empty() ? value_to_display(f.literal)
                                                     : f.column_term;
            throw GenerationFailure(term, "generate_sql: cannot resolve filter '" + term + "'");
        }
        if (!where.empty()) where += " AND ";
        where += *col + " " + f.comparator + " " + render_literal(f.literal);
    }

    std::string first_token = "value";
    if (sub.measure) {
        auto toks = text::tokenize(*sub.measure);
        if (!toks.empty()) first_token = toks[0];
    }

    std::string out;
    switch (sub.intent) {
    case Intent::Aggregate: {
        sql::AggOp op = sub.agg_op.value_or(sql::AggOp::Sum);
        std::string alias = agg_alias_prefix(op) + "_" + first_token;
        if (!range_columns.empty()) {
            std::string expr;
            for (size_t i = 0; i < range_columns.size(); ++i) {
                if (i) expr += " + ";
                expr += range_columns[i];
            }
            out = "SELECT " + sql::to_string(op) + "(" + expr + ") AS " + alias + " FROM " +
                  table_name;
        } else {
            auto col = measure_column();
            if (!col && op == sql::AggOp::Count) {
                out = "SELECT COUNT(*) AS count_rows FROM " + table_name;
            } else if (!col) {
                throw GenerationFailure(sub.measure.value_or(""),
                                        "generate_sql: unresolved measure '" +
                                            sub.measure.value_or("") + "'");
            } else {
                out = "SELECT " + sql::to_string(op) + "(" + *col + ") AS " + alias +
                      " FROM " + table_name;
            }
        }
        if (!where.empty()) out += " WHERE " + where;
        return out;
    }
    case Intent::Lookup: {
        auto col = measure_column();
        if (!col)
            throw GenerationFailure(sub.measure.value_or(""),
                                    "generate_sql: unresolved measure '" +
                                        sub.measure.value_or("") + "'");
        out = "SELECT " + *col + " FROM " + table_name;
        if (!where.empty()) out += " WHERE " + where;
        return out;
    }
    case Intent::Rank: {
        auto col = measure_column();
        if (!col)
            throw GenerationFailure(sub.measure.value_or(""),
                                    "generate_sql: unresolved measure '" +
                                        sub.measure.value_or("") + "'");
        std::string label;
        for (const auto& c : table->columns)
            if (c.name != *col) {
                label = c.name;
                break;
            }
        out = "SELECT ";
        if (!label.empty()) out += label + ", ";
        out += *col + " FROM " + table_name;
        if (!where.empty()) out += " WHERE " + where;
        out += " ORDER BY " + *col + " DESC LIMIT " + std::to_string(sub.top_k.value_or(1));
        return out;
    }
    case Intent::Join: {
        // second table by link score, shared column as the join key
        std::map<std::string, double> totals;
        for (const auto& l : links)
            if (l.table_id != table_name) totals[l.table_id] += l.score;
        std::string other;
        double best_score = -1.0;
        for (const auto& [name, score] : totals) {
            if (score > best_score) {
                best_score = score;
                other = name;
            }
        }
        if (other.empty())
            throw GenerationFailure("join", "generate_sql: no second table linked for join");
        const RelationalTable* t2 = store_.find_table(other);
        std::string key;
        for (const auto& c1 : table->columns) {
            for (const auto& c2 : t2->columns)
                if (c1.name == c2.name) {
                    key = c1.name;
                    break;
                }
            if (!key.empty()) break;
        }
        if (key.empty())
            throw GenerationFailure("join", "generate_sql: no shared key between " +
                                                table_name + " and " + other);
        auto col = measure_column();
        std::string select_cols = table_name + "." + key;
        if (col) select_cols += ", " + table_name + "." + *col;
        out = "SELECT " + select_cols + " FROM " + table_name + " INNER JOIN " + other +
              " ON " + table_name + "." + key + " = " + other + "." + key;
        if (!where.empty()) out += " WHERE " + where;
        return out;
    }
    case Intent::Describe: break;
    }
    throw internal_error("generate_sql: describe intent has no SQL form");
}

// -------------------------------------------------------------- reconcile

ReconcileResult QueryEngine::reconcile(std::optional<double> sql_value,
                                       const std::vector<const Chunk*>& evidence) {
    ReconcileResult r;
    if (!sql_value) {
        r.confirmed = false;
        return r;
    }
    r.final_value = sql_value;
    std::vector<double> numbers;
    for (const Chunk* c : evidence) {
        auto nums = text::extract_numbers(c->text);
        numbers.insert(numbers.end(), nums.begin(), nums.end());
    }
    if (numbers.empty()) {
        r.confirmed = true; // confirmed by default
        return r;
    }
    double v = *sql_value;
    for (double n : numbers) {
        double tol = 1e-9 * std::max(std::fabs(v), std::fabs(n));
        if (std::fabs(n - v) <= std::max(tol, 0.0)) {
            r.confirmed = true;
            return r;
        }
    }
    DiscrepancyReport report;
    report.sql_value = v;
    std::set<double> distinct(numbers.begin(), numbers.end());
    report.text_values.assign(distinct.begin(), distinct.end());
    r.discrepancy = std::move(report);
    r.confirmed = false;
    return r;
}

// ------------------------------------------------------------------ answer

namespace {

json sub_query_json(const SubQuery& s) {
    json j = json::object();
    j["sq_id"] = s.sq_id;
    j["modality"] = to_string(s.modality);
    j["intent"] = to_string(s.intent);
    j["measure"] = s.measure ? json(*s.measure) : json(nullptr);
    j["agg_op"] = s.agg_op ? json(text::to_lower(sql::to_string(*s.agg_op))) : json(nullptr);
    json filters = json::array();
    for (const auto& f : s.filters) {
        json fj = json::object();
        fj["column_term"] = f.column_term;
        fj["comparator"] = f.comparator;
        fj["literal"] = is_number(f.literal) ? json(as_number(f.literal))
                                             : json(value_to_display(f.literal));
        filters.push_back(std::move(fj));
    }
    j["filters"] = std::move(filters);
    if (s.time_range) {
        j["time_range"] = json::array({text::format_date_iso(s.time_range->first),
                                       text::format_date_iso(s.time_range->second)});
    } else {
        j["time_range"] = nullptr;
    }
    j["top_k"] = s.top_k ? json(*s.top_k) : json(nullptr);
    j["raw_span"] = s.raw_span;
    return j;
}

SubQuery sub_query_from_json(const json& j) {
    SubQuery s;
    s.sq_id = j.at("sq_id").get<std::string>();
    std::string modality = j.at("modality").get<std::string>();
    s.modality = modality == "tabular" ? Modality::Tabular : Modality::Textual;
    std::string intent = j.at("intent").get<std::string>();
    if (intent == "aggregate") s.intent = Intent::Aggregate;
    else if (intent == "lookup") s.intent = Intent::Lookup;
    else if (intent == "rank") s.intent = Intent::Rank;
    else if (intent == "join") s.intent = Intent::Join;
    else s.intent = Intent::Describe;
    if (!j.at("measure").is_null()) s.measure = j.at("measure").get<std::string>();
    if (!j.at("agg_op").is_null()) {
        std::string op = j.at("agg_op").get<std::string>();
        if (op == "sum") s.agg_op = sql::AggOp::Sum;
        else if (op == "count") s.agg_op = sql::AggOp::Count;
        else if (op == "avg") s.agg_op = sql::AggOp::Avg;
        else if (op == "min") s.agg_op = sql::AggOp::Min;
        else if (op == "max") s.agg_op = sql::AggOp::Max;
    }
    for (const auto& fj : j.at("filters")) {
        QueryFilter f;
        f.column_term = fj.at("column_term").get<std::string>();
        f.comparator = fj.at("comparator").get<std::string>();
        if (fj.at("literal").is_number())
            f.literal = fj.at("literal").get<double>();
        else
            f.literal = fj.at("literal").get<std::string>();
        s.filters.push_back(std::move(f));
    }
    if (!j.at("time_range").is_null()) {
        auto a = text::parse_date_iso(j.at("time_range")[0].get<std::string>());
        auto b = text::parse_date_iso(j.at("time_range")[1].get<std::string>());
        if (a && b) s.time_range = std::make_pair(*a, *b);
    }
    if (!j.at("top_k").is_null()) s.top_k = j.at("top_k").get<int>();
    s.raw_span = j.at("raw_span").get<std::string>();
    return s;
}

json link_json(const SchemaLink& l) {
    json j = json::object();
    j["term"] = l.term;
    j["table_id"] = l.table_id;
    j["column"] = l.column ? json(*l.column) : json(nullptr);
    j["score"] = l.score;
    j["method"] = to_string(l.method);
    return j;
}

json value_json(const Value& v) {
    if (is_null(v)) return nullptr;
    if (is_number(v)) return as_number(v);
    return as_string(v);
}

} // namespace

std::string plan_template_json(const Decomposition& d) {
    json j = json::object();
    j["plan"] = d.plan;
    json subs = json::array();
    for (const auto& s : d.sub_queries) subs.push_back(sub_query_json(s));
    j["sub_queries"] = std::move(subs);
    return j.dump();
}

std::optional<Decomposition> decomposition_from_template(const std::string& tmpl) {
    if (tmpl.empty()) return std::nullopt;
    try {
        json j = json::parse(tmpl);
        Decomposition d;
        d.plan = j.at("plan").get<std::vector<std::string>>();
        for (const auto& sj : j.at("sub_queries")) d.sub_queries.push_back(sub_query_from_json(sj));
        if (d.sub_queries.empty()) return std::nullopt;
        return d;
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

AnswerBundle QueryEngine::answer(const std::string& question, MemoryBank* memory) const {
    AnswerBundle bundle;
    json trace = json::object();
    trace["question"] = question;
    int ops = 0;

    Decomposition d = decompose(question);
    ++ops;

    // memory seeding: a retrieved case's plan template replaces a degraded
    // (describe-only) decomposition
    json memory_trace = json(nullptr);
    if (memory && !memory->cases().empty()) {
        std::mt19937_64 rng(options_.rng_seed);
        auto state = retriever_.embedder().embed(question);
        auto sel = memory->select_case(state, options_.policy, rng);
        if (sel) {
            memory_trace = json::object();
            memory_trace["selected_case"] = sel->case_id;
            memory_trace["probability"] = sel->distribution[sel->index];
            memory_trace["seeded"] = false;
            bool degraded_parse =
                std::all_of(d.sub_queries.begin(), d.sub_queries.end(),
                            [](const SubQuery& s) { return s.intent == Intent::Describe; });
            const EpisodicCase* c = memory->find(sel->case_id);
            if (degraded_parse && c) {
                auto seeded = decomposition_from_template(c->plan_template);
                if (seeded) {
                    bool has_tabular = std::any_of(
                        seeded->sub_queries.begin(), seeded->sub_queries.end(),
                        [](const SubQuery& s) { return s.modality == Modality::Tabular; });
                    if (has_tabular) {
                        for (auto& s : seeded->sub_queries) s.raw_span = question;
                        d = std::move(*seeded);
                        memory_trace["seeded"] = true;
                    }
                }
            }
        }
    }

    trace["plan"] = d.plan;
    json subs = json::array();
    for (const auto& s : d.sub_queries) subs.push_back(sub_query_json(s));
    trace["sub_queries"] = std::move(subs);
    bundle.plan = d.plan;

    // hybrid retrieval once per question
    std::vector<RetrievalHit> hits;
    if (!store_.chunks().empty()) {
        hits = retriever_.recall_reranked(question, options_.retrieval_k);
        ++ops;
    }
    json routing = json::array();
    std::vector<const Chunk*> synthesis_chunks;
    for (const auto& h : hits) {
        json r = json::object();
        r["chunk_id"] = h.chunk_id;
        r["origin"] = to_string(h.origin);
        r["recall_score"] = h.recall_score;
        r["rerank_score"] = h.rerank_score;
        bool to_sql = h.origin == ChunkOrigin::TableRender;
        r["routed_to"] = to_sql ? "sql" : "synthesis";
        routing.push_back(std::move(r));
        if (!to_sql) {
            if (const Chunk* c = store_.find_chunk(h.chunk_id)) synthesis_chunks.push_back(c);
        }
    }
    trace["routing"] = std::move(routing);
    json scores = json::array();
    for (const auto& h : hits) scores.push_back(h.recall_score);
    trace["recall_scores"] = std::move(scores);

    json links_trace = json::array();
    json sql_trace = json::array();
    json results_trace = json::array();
    std::string chosen_table;
    std::optional<double> sql_numeric;
    std::string tabular_text;

    for (const auto& sub : d.sub_queries) {
        if (sub.modality != Modality::Tabular) continue;
        auto links = link_schema(sub);
        ++ops;
        for (const auto& l : links) links_trace.push_back(link_json(l));
        try {
            std::string stmt = generate_sql(sub, links);
            ++ops;
            sql_trace.push_back(stmt);
            if (!bundle.sql) bundle.sql = stmt;
            auto result = sql::execute_sql(store_, stmt);
            ++ops;
            if (chosen_table.empty()) chosen_table = choose_table(links);
            json rows = json::array();
            for (const auto& row : result.rows) {
                json rj = json::array();
                for (const auto& v : row) rj.push_back(value_json(v));
                rows.push_back(std::move(rj));
            }
            json rj = json::object();
            rj["columns"] = result.column_names;
            rj["rows"] = std::move(rows);
            results_trace.push_back(std::move(rj));
            if (result.rows.size() == 1 && result.rows[0].size() >= 1 &&
                is_number(result.rows[0][0]) && !sql_numeric) {
                sql_numeric = as_number(result.rows[0][0]);
                tabular_text = result.column_names[0] + " = " +
                               text::format_number(*sql_numeric);
            } else if (!result.rows.empty() && tabular_text.empty()) {
                for (size_t r = 0; r < result.rows.size(); ++r) {
                    if (r) tabular_text += "; ";
                    for (size_t c = 0; c < result.rows[r].size(); ++c) {
                        if (c) tabular_text += ", ";
                        tabular_text += result.column_names[c] + " = " +
                                        value_to_display(result.rows[r][c]);
                    }
                }
            }
        } catch (const GenerationFailure& e) {
            bundle.degraded = true;
            json fj = json::object();
            fj["failed_term"] = e.term();
            fj["message"] = e.what();
            sql_trace.push_back(std::move(fj));
        }
    }
    trace["links"] = std::move(links_trace);
    trace["sql"] = std::move(sql_trace);
    trace["results"] = std::move(results_trace);
    trace["table"] = chosen_table.empty() ? json(nullptr) : json(chosen_table);

    // reconcile SQL output against textual evidence
    ReconcileResult rec = reconcile(sql_numeric, synthesis_chunks);
    bundle.numeric_value = rec.final_value;
    if (rec.discrepancy) bundle.discrepancy = rec.discrepancy;

    for (const auto& c : synthesis_chunks) bundle.evidence_chunks.push_back(c->chunk_id);

    // assemble the final answer text
    std::string answer_text;
    if (!tabular_text.empty()) {
        answer_text = "Based on table " + chosen_table + ": " + tabular_text + ".";
        if (rec.discrepancy) {
            answer_text += " Textual evidence mentions";
            for (double v : rec.discrepancy->text_values)
                answer_text += " " + text::format_number(v);
            answer_text += "; the SQL value is preferred.";
        } else if (!synthesis_chunks.empty() && rec.confirmed && sql_numeric) {
            answer_text += " Confirmed against retrieved evidence.";
        }
    }
    bool has_textual = std::any_of(d.sub_queries.begin(), d.sub_queries.end(),
                                   [](const SubQuery& s) { return s.modality == Modality::Textual; });
    if (has_textual || bundle.degraded || answer_text.empty()) {
        std::string synth;
        size_t used = 0;
        for (const Chunk* c : synthesis_chunks) {
            if (used >= 2) break;
            if (!synth.empty()) synth += "\n";
            synth += text::trim(c->text);
            ++used;
        }
        if (synth.empty() && !hits.empty() && answer_text.empty()) {
            if (const Chunk* c = store_.find_chunk(hits.front().chunk_id))
                synth = text::trim(c->text);
        }
        if (bundle.degraded && answer_text.empty())
            answer_text = "Could not generate SQL; retrieval-only answer follows.";
        if (!synth.empty()) {
            if (!answer_text.empty()) answer_text += "\n";
            answer_text += synth;
        }
    }
    if (answer_text.empty()) answer_text = "No answer could be derived from the store.";
    bundle.answer = answer_text;

    if (bundle.discrepancy) {
        json dj = json::object();
        dj["sql_value"] = bundle.discrepancy->sql_value;
        dj["text_values"] = bundle.discrepancy->text_values;
        trace["discrepancy"] = std::move(dj);
    } else {
        trace["discrepancy"] = nullptr;
    }
    trace["memory"] = std::move(memory_trace);
    trace["final_answer"] = bundle.answer;
    trace["numeric_value"] = bundle.numeric_value ? json(*bundle.numeric_value) : json(nullptr);
    trace["degraded"] = bundle.degraded;
    trace["evidence_chunks"] = bundle.evidence_chunks;
    trace["op_count"] = ops;
    bundle.op_count = ops;
    bundle.trace_json = trace.dump();
    return bundle;
}

} // namespace tqa
