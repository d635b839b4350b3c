#include "tableqa/retriever.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <algorithm>
#include <set>

namespace tqa {

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> kStop = {
        "a",    "an",   "and",  "are",  "at",   "be",   "by",   "did", "do",
        "for",  "from", "how",  "in",   "is",   "it",   "of",   "on",  "or",
        "the",  "to",   "was",  "were", "what", "which", "who", "why", "with"};
    return kStop;
}

std::string normalize_label(const std::string& s) {
    auto toks = text::tokenize(s);
    std::string out;
    for (const auto& t : toks) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

// identifier with the t_ prefix stripped, for exact comparisons
std::string strip_prefix(const std::string& id) {
    if (id.size() > 2 && id.rfind("t_", 0) == 0) return id.substr(2);
    return id;
}

} // namespace

Retriever::Retriever(const Store& store, const EmbeddingProvider& embedder,
                     double theta_link, RerankWeights weights)
    : store_(store), embedder_(embedder), theta_(theta_link), weights_(weights) {
    chunk_vecs_.reserve(store_.chunks().size());
    for (const auto& c : store_.chunks()) chunk_vecs_.push_back(embedder_.embed(c.text));
}

std::vector<RetrievalHit> Retriever::recall(const std::string& query, int k) const {
    if (store_.chunks().empty()) throw empty_input_error("recall: store has no chunks");
    if (k < 1) throw validation_error("recall: k must be >= 1");
    auto qv = embedder_.embed(query);
    std::vector<RetrievalHit> hits;
    hits.reserve(store_.chunks().size());
    for (size_t i = 0; i < store_.chunks().size(); ++i) {
        const Chunk& c = store_.chunks()[i];
        RetrievalHit h;
        h.chunk_id = c.chunk_id;
        h.recall_score = cosine(qv, chunk_vecs_[i]);
        h.rerank_score = h.recall_score;
        h.origin = c.origin;
        hits.push_back(std::move(h));
    }
    std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.recall_score != b.recall_score) return a.recall_score > b.recall_score;
        return a.chunk_id < b.chunk_id;
    });
    if (hits.size() > static_cast<size_t>(k)) hits.resize(static_cast<size_t>(k));
    return hits;
}

std::vector<RetrievalHit> Retriever::rerank(const std::vector<std::string>& query_terms,
                                            std::vector<RetrievalHit> hits) const {
    if (query_terms.empty()) return hits;
    for (auto& hit : hits) {
        const Chunk* chunk = store_.find_chunk(hit.chunk_id);
        if (!chunk || !chunk->table_id) {
            hit.rerank_score = hit.recall_score;
            continue;
        }
        const RelationalTable* table = store_.find_table(*chunk->table_id);
        // header-path tokens from the schema-chunk map
        std::set<std::string> header_tokens;
        for (const auto& e : store_.schema_map().entries) {
            if (e.chunk_id != hit.chunk_id) continue;
            for (const auto& seg : e.header_path)
                for (const auto& tok : text::tokenize(seg)) header_tokens.insert(tok);
        }
        std::set<std::string> value_tokens;
        if (table) {
            for (const auto& row : table->rows)
                for (const auto& v : row)
                    if (is_string(v))
                        for (const auto& tok : text::tokenize(as_string(v)))
                            value_tokens.insert(tok);
        }
        int header_matches = 0, value_matches = 0;
        for (const auto& term : query_terms) {
            std::string lt = text::to_lower(term);
            bool h = header_tokens.count(lt) > 0;
            bool v = value_tokens.count(lt) > 0;
            if (!v && table) {
                if (auto num = text::parse_number(term)) {
                    for (const auto& row : table->rows) {
                        for (const auto& val : row)
                            if (is_number(val) && as_number(val) == *num) {
                                v = true;
                                break;
                            }
                        if (v) break;
                    }
                }
            }
            if (h) {
                ++header_matches;
                hit.anchors.push_back({AnchorKind::Header, term});
            }
            if (v) {
                ++value_matches;
                hit.anchors.push_back({AnchorKind::Value, term});
            }
        }
        double n = static_cast<double>(query_terms.size());
        hit.rerank_score = hit.recall_score + weights_.header * (header_matches / n) +
                           weights_.value * (value_matches / n);
    }
    std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        return a.rerank_score > b.rerank_score;
    });
    return hits;
}

std::vector<RetrievalHit> Retriever::recall_reranked(const std::string& query, int k) const {
    return rerank(query_terms(query), recall(query, k));
}

std::vector<std::string> Retriever::query_terms(const std::string& query) {
    std::vector<std::string> terms;
    for (const auto& t : text::tokenize(query))
        if (!stopwords().count(t)) terms.push_back(t);
    return terms;
}

std::vector<HeaderRegion> Retriever::top_down(const std::string& query) const {
    // candidate terms: tokens plus adjacent bigrams for multi-word labels
    auto tokens = query_terms(query);
    std::vector<std::string> terms = tokens;
    for (size_t i = 0; i + 1 < tokens.size(); ++i)
        terms.push_back(tokens[i] + " " + tokens[i + 1]);

    std::set<std::string> mapped_tables;
    for (const auto& e : store_.schema_map().entries) mapped_tables.insert(e.table_id);

    std::vector<HeaderRegion> regions;
    for (const auto& table : store_.tables()) {
        if (!mapped_tables.count(table.table_id)) continue; // anchoring invariant
        for (size_t c = 0; c < table.columns.size(); ++c) {
            const std::string& label = table.display_labels[c];
            std::string norm = normalize_label(label);
            std::string norm_id = normalize_label(strip_prefix(table.columns[c].name));
            double best = 0.0;
            for (const auto& term : terms) {
                double score;
                if (term == norm || term == norm_id)
                    score = 1.0;
                else
                    score = cosine(embedder_.embed(term),
                                   embedder_.embed(norm.empty() ? label : norm));
                best = std::max(best, score);
            }
            if (best < theta_) continue;
            HeaderRegion region;
            region.table_id = table.table_id;
            region.column = table.columns[c].name;
            region.header_path = table.header_paths[c];
            region.score = best;
            region.anchor = {AnchorKind::Header, label};
            regions.push_back(std::move(region));
        }
    }
    std::stable_sort(regions.begin(), regions.end(),
                     [](const HeaderRegion& a, const HeaderRegion& b) {
                         if (a.score != b.score) return a.score > b.score;
                         if (a.table_id != b.table_id) return a.table_id < b.table_id;
                         return a.column < b.column;
                     });
    return regions;
}

std::vector<std::string> Retriever::salient_literals(const std::string& query) {
    std::vector<std::string> out;
    // quoted spans
    for (char quote : {'"', '\''}) {
        size_t pos = 0;
        while (true) {
            size_t b = query.find(quote, pos);
            if (b == std::string::npos) break;
            size_t e = query.find(quote, b + 1);
            if (e == std::string::npos) break;
            std::string span = text::trim(query.substr(b + 1, e - b - 1));
            if (!span.empty()) out.push_back(span);
            pos = e + 1;
        }
    }
    // numbers
    for (double v : text::extract_numbers(query)) out.push_back(text::format_number(v));
    // capitalized spans: runs of cased tokens; keep runs of >= 2 tokens or
    // single code-like tokens (digits or all-caps)
    auto tokens = text::tokenize_cased(query);
    size_t i = 0;
    while (i < tokens.size()) {
        if (!text::starts_with_upper(tokens[i])) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < tokens.size() && text::starts_with_upper(tokens[j])) ++j;
        size_t run = j - i;
        if (run >= 2) {
            std::string span;
            for (size_t k = i; k < j; ++k) {
                if (k > i) span += ' ';
                span += tokens[k];
            }
            out.push_back(span);
        } else {
            const std::string& t = tokens[i];
            bool has_digit = std::any_of(t.begin(), t.end(), [](unsigned char c) {
                return std::isdigit(c) != 0;
            });
            bool all_caps = t.size() >= 2 && std::all_of(t.begin(), t.end(), [](unsigned char c) {
                return !std::islower(c);
            });
            if (has_digit || all_caps) out.push_back(t);
        }
        i = j;
    }
    return out;
}

std::vector<ValueTrace> Retriever::bottom_up(const std::string& query) const {
    auto literals = salient_literals(query);
    std::set<std::string> mapped_tables;
    for (const auto& e : store_.schema_map().entries) mapped_tables.insert(e.table_id);

    std::vector<ValueTrace> traces;
    for (const auto& table : store_.tables()) {
        if (!mapped_tables.count(table.table_id)) continue;
        for (size_t r = 0; r < table.rows.size(); ++r) {
            for (size_t c = 0; c < table.columns.size(); ++c) {
                const Value& v = table.rows[r][c];
                if (is_null(v)) continue;
                for (const auto& lit : literals) {
                    bool matched = false;
                    if (is_string(v)) {
                        matched = text::to_lower(text::trim(as_string(v))) ==
                                  text::to_lower(lit);
                    } else if (auto num = text::parse_number(lit)) {
                        matched = as_number(v) == *num;
                    }
                    if (!matched) continue;
                    ValueTrace trace;
                    trace.table_id = table.table_id;
                    trace.column = table.columns[c].name;
                    trace.header_path = table.header_paths[c];
                    trace.row_index = r;
                    trace.row_key = value_to_display(table.rows[r][0]);
                    trace.matched = lit;
                    traces.push_back(std::move(trace));
                    break;
                }
            }
        }
    }
    return traces;
}

} // namespace tqa
