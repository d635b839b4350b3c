#include "tableqa/evaluator.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

using json = nlohmann::json;

namespace tqa {

double context_precision(const std::vector<std::string>& retrieved,
                         const std::set<std::string>& gold) {
    if (retrieved.empty()) throw validation_error("context_precision: empty retrieval");
    size_t hits = 0;
    double weighted = 0.0;
    for (size_t k = 0; k < retrieved.size(); ++k) {
        bool rel = gold.count(retrieved[k]) > 0;
        if (rel) {
            ++hits;
            weighted += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    if (hits == 0) return 0.0;
    return weighted / static_cast<double>(hits);
}

namespace {

std::set<std::string> token_set(const std::string& s) {
    auto toks = text::tokenize(s);
    return {toks.begin(), toks.end()};
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    size_t inter = 0;
    for (const auto& t : a)
        if (b.count(t)) ++inter;
    size_t uni = a.size() + b.size() - inter;
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// best Jaccard between the sentence and any same-length token window
double best_window_jaccard(const std::vector<std::string>& context_tokens,
                           const std::set<std::string>& sentence_tokens) {
    size_t w = std::max<size_t>(sentence_tokens.size(), 1);
    if (context_tokens.empty()) return 0.0;
    double best = 0.0;
    size_t n = context_tokens.size();
    size_t windows = n > w ? n - w + 1 : 1;
    for (size_t i = 0; i < windows; ++i) {
        std::set<std::string> window(context_tokens.begin() + static_cast<long>(i),
                                     context_tokens.begin() +
                                         static_cast<long>(std::min(i + w, n)));
        best = std::max(best, jaccard(sentence_tokens, window));
        if (best == 1.0) break;
    }
    return best;
}

} // namespace

double context_recall(const std::vector<std::string>& context_texts,
                      const std::string& gold_answer) {
    auto sentences = text::split_sentences(gold_answer);
    std::vector<std::vector<std::string>> context_tokens;
    for (const auto& t : context_texts) context_tokens.push_back(text::tokenize(t));
    size_t attributed = 0, total = 0;
    for (const auto& s : sentences) {
        auto stoks = token_set(s);
        if (stoks.empty()) continue;
        ++total;
        for (const auto& ct : context_tokens) {
            if (best_window_jaccard(ct, stoks) >= 0.5) {
                ++attributed;
                break;
            }
        }
    }
    if (total == 0) return 0.0;
    return static_cast<double>(attributed) / static_cast<double>(total);
}

double context_relevancy(const EmbeddingProvider& embedder,
                         const std::vector<std::string>& context_texts,
                         const std::string& question) {
    if (context_texts.empty()) return 0.0;
    auto qv = embedder.embed(question);
    double sum = 0.0;
    for (const auto& t : context_texts) sum += cosine(qv, embedder.embed(t));
    double mean = sum / static_cast<double>(context_texts.size());
    return (mean + 1.0) / 2.0; // [-1,1] -> [0,1]
}

double reciprocal_rank(const std::vector<std::string>& retrieved,
                       const std::set<std::string>& gold) {
    for (size_t k = 0; k < retrieved.size(); ++k)
        if (gold.count(retrieved[k])) return 1.0 / static_cast<double>(k + 1);
    return 0.0;
}

double mrr(const std::vector<std::pair<std::vector<std::string>, std::set<std::string>>>& batch) {
    if (batch.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [retrieved, gold] : batch) sum += reciprocal_rank(retrieved, gold);
    return sum / static_cast<double>(batch.size());
}

double answer_correctness(const std::string& predicted_answer,
                          std::optional<double> predicted_number,
                          const std::string& gold_answer) {
    auto gold_numbers = text::extract_numbers(gold_answer);
    std::optional<double> predicted = predicted_number;
    if (!predicted) {
        auto nums = text::extract_numbers(predicted_answer);
        if (!nums.empty()) predicted = nums.front();
    }
    if (!gold_numbers.empty() && predicted) {
        double g = gold_numbers.front();
        double tol = 1e-9 * std::max(std::fabs(g), std::fabs(*predicted));
        return std::fabs(g - *predicted) <= tol ? 1.0 : 0.0;
    }
    if (predicted_answer.empty()) return 0.0;
    return text::token_f1(gold_answer, predicted_answer);
}

double faithfulness_proxy(const std::string& answer,
                          const std::vector<std::string>& evidence_texts) {
    auto numbers = text::extract_numbers(answer);
    std::vector<std::string> proper;
    for (const auto& tok : text::tokenize_cased(answer))
        if (text::starts_with_upper(tok) && tok.size() >= 2) proper.push_back(tok);

    if (numbers.empty() && proper.empty()) return 1.0; // nothing factual stated

    std::vector<double> evidence_numbers;
    std::set<std::string> evidence_tokens;
    for (const auto& t : evidence_texts) {
        auto nums = text::extract_numbers(t);
        evidence_numbers.insert(evidence_numbers.end(), nums.begin(), nums.end());
        for (const auto& tok : text::tokenize(t)) evidence_tokens.insert(tok);
    }
    size_t total = numbers.size() + proper.size();
    size_t supported = 0;
    for (double n : numbers) {
        for (double e : evidence_numbers) {
            double tol = 1e-9 * std::max(std::fabs(n), std::fabs(e));
            if (std::fabs(n - e) <= tol) {
                ++supported;
                break;
            }
        }
    }
    for (const auto& p : proper)
        if (evidence_tokens.count(text::to_lower(p))) ++supported;
    return static_cast<double>(supported) / static_cast<double>(total);
}

KbHealth kb_health(const Store& store, const EmbeddingProvider& embedder,
                   double dup_threshold, const std::string& horizon_iso) {
    KbHealth h;
    const auto& chunks = store.chunks();
    if (!chunks.empty()) {
        std::vector<std::vector<double>> vecs;
        vecs.reserve(chunks.size());
        for (const auto& c : chunks) vecs.push_back(embedder.embed(c.text));
        size_t dupes = 0;
        for (size_t i = 0; i < chunks.size(); ++i) {
            for (size_t j = 0; j < chunks.size(); ++j) {
                if (i == j) continue;
                if (cosine(vecs[i], vecs[j]) >= dup_threshold) {
                    ++dupes;
                    break;
                }
            }
        }
        h.duplication_rate = static_cast<double>(dupes) / static_cast<double>(chunks.size());

        double sum = 0.0;
        h.density_min = 1e300;
        for (const auto& c : chunks) {
            double tokens = static_cast<double>(text::tokenize(c.text).size());
            sum += tokens;
            h.density_min = std::min(h.density_min, tokens);
            h.density_max = std::max(h.density_max, tokens);
            ++h.category_counts[to_string(c.origin)];
        }
        h.density_mean = sum / static_cast<double>(chunks.size());
    } else {
        h.density_min = 0.0;
    }
    if (!horizon_iso.empty() && !store.tables().empty()) {
        size_t stale = 0, total = 0;
        for (const auto& t : store.tables()) {
            const StoreEntryMeta* meta = store.entry_meta(t.name);
            ++total;
            if (!meta || meta->ingested_at.empty() || meta->ingested_at < horizon_iso) ++stale;
        }
        h.obsolescence_rate = static_cast<double>(stale) / static_cast<double>(total);
    }
    return h;
}

double retrieval_uncertainty(const std::vector<double>& recall_scores) {
    if (recall_scores.empty()) throw validation_error("uncertainty: no scores");
    size_t n = std::min<size_t>(10, recall_scores.size());
    if (n == 1) return 0.0;
    std::vector<double> top(recall_scores.begin(), recall_scores.begin() + static_cast<long>(n));
    double max_s = *std::max_element(top.begin(), top.end());
    double z = 0.0;
    std::vector<double> p(n);
    for (size_t i = 0; i < n; ++i) {
        p[i] = std::exp(top[i] - max_s); // shift-invariant
        z += p[i];
    }
    double entropy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double q = p[i] / z;
        if (q > 0.0) entropy -= q * std::log(q);
    }
    return entropy / std::log(static_cast<double>(n));
}

MiningResult mine_uncertain(const std::vector<std::vector<double>>& score_lists, size_t k,
                            double flag_threshold) {
    MiningResult result;
    result.uncertainties.assign(score_lists.size(), 0.0);
    std::vector<UncertaintyFlag> flagged;
    for (size_t i = 0; i < score_lists.size(); ++i) {
        if (score_lists[i].empty()) {
            result.warnings.push_back("trace " + std::to_string(i) +
                                      " has no retrieval scores; skipped");
            continue;
        }
        double u = retrieval_uncertainty(score_lists[i]);
        result.uncertainties[i] = u;
        if (u > flag_threshold) flagged.push_back({i, u});
    }
    std::stable_sort(flagged.begin(), flagged.end(),
                     [](const UncertaintyFlag& a, const UncertaintyFlag& b) {
                         if (a.uncertainty != b.uncertainty) return a.uncertainty > b.uncertainty;
                         return a.trace_index < b.trace_index;
                     });
    if (flagged.size() > k) flagged.resize(k);
    result.flagged = std::move(flagged);
    return result;
}

std::vector<EvalCase> load_eval_cases(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw not_found_error("cannot open case file: " + path);
    std::vector<EvalCase> cases;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw parse_error("case file line " + std::to_string(line_no) + ": " + e.what());
        }
        EvalCase c;
        c.question = j.at("question").get<std::string>();
        c.gold_answer = j.at("gold_answer").get<std::string>();
        if (j.contains("gold_relevant_chunk_ids"))
            c.gold_chunk_ids = j.at("gold_relevant_chunk_ids").get<std::vector<std::string>>();
        cases.push_back(std::move(c));
    }
    return cases;
}

namespace {

// metrics requiring an LLM judge; reported unavailable without one
const std::vector<std::string>& judge_metrics() {
    static const std::vector<std::string> kJudge = {
        "answer_relevancy",     "answer_semantic_similarity", "context_sufficiency",
        "context_knowledge_conflict", "eq", "proactivity",    "thinking_ratio",
        "coherence",            "task_adherence",             "goal_alignment"};
    return kJudge;
}

} // namespace

MetricReport run_eval(const std::vector<EvalCase>& cases, const Store& store,
                      const Retriever& retriever, const QueryEngine& engine,
                      const EvalOptions& options) {
    MetricReport report;
    report.unavailable_metrics = judge_metrics();

    std::vector<std::pair<std::vector<std::string>, std::set<std::string>>> mrr_batch;
    std::ofstream failure_out;
    if (!options.failure_file.empty()) {
        failure_out.open(options.failure_file, std::ios::app | std::ios::binary);
        if (!failure_out) throw io_error("cannot append to failure file " + options.failure_file);
    }

    for (const auto& eval_case : cases) {
        CaseReport cr;
        cr.question = eval_case.question;
        try {
            for (const auto& gid : eval_case.gold_chunk_ids)
                if (!store.find_chunk(gid))
                    throw name_resolution_error("gold chunk id does not resolve: " + gid);

            AnswerBundle bundle = engine.answer(eval_case.question);
            cr.trace_json = bundle.trace_json;

            json trace = json::parse(bundle.trace_json);
            std::vector<std::string> retrieved;
            std::vector<double> recall_scores;
            for (const auto& r : trace.at("routing"))
                retrieved.push_back(r.at("chunk_id").get<std::string>());
            for (const auto& s : trace.at("recall_scores"))
                recall_scores.push_back(s.get<double>());

            std::set<std::string> gold(eval_case.gold_chunk_ids.begin(),
                                       eval_case.gold_chunk_ids.end());
            std::vector<std::string> context_texts;
            for (const auto& id : retrieved)
                if (const Chunk* c = store.find_chunk(id)) context_texts.push_back(c->text);

            if (!retrieved.empty() && !gold.empty()) {
                cr.metrics["context_precision"] = context_precision(retrieved, gold);
                cr.metrics["reciprocal_rank"] = reciprocal_rank(retrieved, gold);
                mrr_batch.emplace_back(retrieved, gold);
            } else {
                cr.metrics["context_precision"] = 0.0;
                cr.metrics["reciprocal_rank"] = 0.0;
            }
            cr.metrics["context_recall"] = context_recall(context_texts, eval_case.gold_answer);
            cr.metrics["context_relevancy"] =
                context_relevancy(retriever.embedder(), context_texts, eval_case.question);
            cr.metrics["answer_correctness"] = answer_correctness(
                bundle.answer, bundle.numeric_value, eval_case.gold_answer);
            std::vector<std::string> evidence_texts = context_texts;
            cr.metrics["answer_faithfulness"] =
                faithfulness_proxy(bundle.answer, evidence_texts);

            // agentic metrics derivable from the trace
            int tabular = 0, sql_ok = 0;
            for (const auto& sq : trace.at("sub_queries"))
                if (sq.at("modality").get<std::string>() == "tabular") ++tabular;
            for (const auto& s : trace.at("sql"))
                if (s.is_string()) ++sql_ok;
            cr.metrics["tool_correctness"] =
                tabular == 0 ? 1.0
                             : static_cast<double>(std::min(sql_ok, tabular)) /
                                   static_cast<double>(tabular);
            int ops = trace.at("op_count").get<int>();
            cr.metrics["cost_per_task"] =
                static_cast<double>(ops) / static_cast<double>(ops + 1);

            cr.uncertainty = recall_scores.empty() ? 0.0 : retrieval_uncertainty(recall_scores);
            if (cr.uncertainty > options.flag_threshold) {
                cr.flagged = true;
                cr.reasons.push_back("uncertainty");
            }
            if (cr.metrics["answer_correctness"] < options.correctness_floor) {
                cr.flagged = true;
                cr.reasons.push_back("low_correctness");
            }
            if (options.memory) {
                std::string id = options.memory->insert_case(
                    retriever.embedder(), eval_case.question,
                    plan_template_json(engine.decompose(eval_case.question)),
                    cr.metrics["answer_correctness"]);
                (void)id;
            }
        } catch (const Error& e) {
            cr.error = e.what();
        }
        if (cr.flagged && failure_out.is_open()) {
            json f = json::object();
            f["question"] = cr.question;
            f["reasons"] = cr.reasons;
            f["uncertainty"] = cr.uncertainty;
            f["answer_correctness"] =
                cr.metrics.count("answer_correctness") ? cr.metrics["answer_correctness"] : 0.0;
            failure_out << f.dump() << '\n';
            ++report.failures_appended;
        }
        report.cases.push_back(std::move(cr));
    }

    // aggregates: mean of per-case values
    std::map<std::string, std::pair<double, int>> sums;
    for (const auto& cr : report.cases) {
        if (!cr.error.empty()) continue;
        for (const auto& [name, v] : cr.metrics) {
            sums[name].first += v;
            sums[name].second += 1;
        }
    }
    for (const auto& [name, sv] : sums)
        if (sv.second > 0) report.aggregate[name] = sv.first / sv.second;
    if (!mrr_batch.empty()) report.aggregate["mrr"] = mrr(mrr_batch);
    return report;
}

std::string report_to_json(const MetricReport& report) {
    json j = json::object();
    json cases = json::array();
    for (const auto& cr : report.cases) {
        json cj = json::object();
        cj["question"] = cr.question;
        json metrics = json::object();
        for (const auto& [k, v] : cr.metrics) metrics[k] = v;
        cj["metrics"] = std::move(metrics);
        cj["uncertainty"] = cr.uncertainty;
        cj["flagged"] = cr.flagged;
        cj["reasons"] = cr.reasons;
        cj["error"] = cr.error;
        cases.push_back(std::move(cj));
    }
    j["cases"] = std::move(cases);
    json agg = json::object();
    for (const auto& [k, v] : report.aggregate) agg[k] = v;
    j["aggregate"] = std::move(agg);
    j["unavailable_metrics"] = report.unavailable_metrics;
    j["failures_appended"] = report.failures_appended;
    return j.dump();
}

} // namespace tqa
