#pragma once

#include "tableqa/embed.hpp"
#include "tableqa/query.hpp"
#include "tableqa/store.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tqa {

struct EvalCase {
    std::string question;
    std::string gold_answer;
    std::vector<std::string> gold_chunk_ids;
};

// Optional external judge; metrics that need one are reported "unavailable"
// when no implementation is supplied, never faked.
class Judge {
public:
    virtual ~Judge() = default;
    virtual std::optional<double> score(const std::string& metric, const std::string& question,
                                        const std::string& answer,
                                        const std::string& gold) const = 0;
};

// ---------------------------------------------------------------- metrics

double context_precision(const std::vector<std::string>& retrieved,
                         const std::set<std::string>& gold);

double context_recall(const std::vector<std::string>& context_texts,
                      const std::string& gold_answer);

double context_relevancy(const EmbeddingProvider& embedder,
                         const std::vector<std::string>& context_texts,
                         const std::string& question);

double reciprocal_rank(const std::vector<std::string>& retrieved,
                       const std::set<std::string>& gold);

double mrr(const std::vector<std::pair<std::vector<std::string>, std::set<std::string>>>& batch);

double answer_correctness(const std::string& predicted_answer,
                          std::optional<double> predicted_number,
                          const std::string& gold_answer);

double faithfulness_proxy(const std::string& answer,
                          const std::vector<std::string>& evidence_texts);

struct KbHealth {
    double duplication_rate = 0.0;
    double obsolescence_rate = 0.0;
    double density_mean = 0.0;
    double density_min = 0.0;
    double density_max = 0.0;
    std::map<std::string, int> category_counts; // per chunk origin
};

KbHealth kb_health(const Store& store, const EmbeddingProvider& embedder,
                   double dup_threshold = 0.95,
                   const std::string& horizon_iso = "");

// ------------------------------------------------------------ case mining

struct UncertaintyFlag {
    size_t trace_index = 0;
    double uncertainty = 0.0;
};

struct MiningResult {
    std::vector<UncertaintyFlag> flagged; // top-k by uncertainty, descending
    std::vector<double> uncertainties;    // aligned with input traces
    std::vector<std::string> warnings;
};

// Normalized entropy of the temperature-1 softmax over the top-n recall
// scores, n = min(10, hits); n == 1 means certainty 0.
double retrieval_uncertainty(const std::vector<double>& recall_scores);

MiningResult mine_uncertain(const std::vector<std::vector<double>>& score_lists, size_t k,
                            double flag_threshold = 0.8);

// ---------------------------------------------------------------- run_eval

struct EvalOptions {
    double flag_threshold = 0.8;
    double correctness_floor = 0.5;
    std::string failure_file; // JSONL appended with flagged cases
    MemoryBank* memory = nullptr; // rewards flow back when present
};

struct CaseReport {
    std::string question;
    std::map<std::string, double> metrics;
    double uncertainty = 0.0;
    bool flagged = false;
    std::vector<std::string> reasons;
    std::string error; // per-case failure, run continues
    std::string trace_json;
};

struct MetricReport {
    std::vector<CaseReport> cases;
    std::map<std::string, double> aggregate;
    std::vector<std::string> unavailable_metrics;
    int failures_appended = 0;
};

std::vector<EvalCase> load_eval_cases(const std::string& path);

MetricReport run_eval(const std::vector<EvalCase>& cases, const Store& store,
                      const Retriever& retriever, const QueryEngine& engine,
                      const EvalOptions& options);

std::string report_to_json(const MetricReport& report);

} // namespace tqa
