#pragma once

#include "tableqa/memory.hpp"
#include "tableqa/retriever.hpp"
#include "tableqa/sql.hpp"
#include "tableqa/store.hpp"
#include "tableqa/text.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tqa {

enum class Modality { Tabular, Textual };
enum class Intent { Aggregate, Lookup, Rank, Join, Describe };

std::string to_string(Modality m);
std::string to_string(Intent i);

struct QueryFilter {
    std::string column_term; // may be empty: resolved by value scan
    std::string comparator;  // "=", "<", ...
    Value literal;
};

struct SubQuery {
    std::string sq_id;
    Modality modality = Modality::Textual;
    Intent intent = Intent::Describe;
    std::optional<std::string> measure;
    std::optional<sql::AggOp> agg_op;
    std::vector<QueryFilter> filters;
    std::optional<std::pair<text::Date, text::Date>> time_range;
    std::optional<int> top_k;
    std::string raw_span;
};

struct Decomposition {
    std::vector<SubQuery> sub_queries;
    std::vector<std::string> plan;
};

enum class LinkMethod { Exact, Embedding, TypeTag };

std::string to_string(LinkMethod m);

struct SchemaLink {
    std::string term;
    std::string table_id;
    std::optional<std::string> column; // table-level link when absent
    double score = 0.0;
    LinkMethod method = LinkMethod::Embedding;
};

struct DiscrepancyReport {
    double sql_value = 0.0;
    std::vector<double> text_values; // extracted numbers that disagree
};

struct ReconcileResult {
    std::optional<double> final_value;
    bool confirmed = false;
    std::optional<DiscrepancyReport> discrepancy;
};

struct AnswerBundle {
    std::string answer;
    std::optional<double> numeric_value;
    std::optional<std::string> sql;
    std::vector<std::string> evidence_chunks;
    std::optional<DiscrepancyReport> discrepancy;
    std::vector<std::string> plan;
    bool degraded = false;   // generation failed, retrieval-only answer
    std::string trace_json;  // full machine-readable trace
    int op_count = 0;
};

// Pluggable question decomposer; the default is the deterministic pattern
// grammar. An external LLM can substitute behind this interface.
class Decomposer {
public:
    virtual ~Decomposer() = default;
    virtual Decomposition decompose(const std::string& question) const = 0;
};

class PatternDecomposer final : public Decomposer {
public:
    Decomposition decompose(const std::string& question) const override;
};

// Quarter / month / year phrases expanded to explicit date ranges.
std::optional<std::pair<text::Date, text::Date>> parse_time_range(const std::string& clause);

struct QueryOptions {
    double theta_link = 0.55;
    int retrieval_k = 5;
    SelectionPolicy policy;
    uint64_t rng_seed = 42;
};

class QueryEngine {
public:
    QueryEngine(const Store& store, const Retriever& retriever, QueryOptions options = {});

    Decomposition decompose(const std::string& question) const;

    std::vector<SchemaLink> link_schema(const SubQuery& sub) const;

    // Emits SQL in the dual-store subset; throws GenerationFailure when the
    // measure (or a lookup filter) cannot be resolved.
    std::string generate_sql(const SubQuery& sub, const std::vector<SchemaLink>& links) const;

    AnswerBundle answer(const std::string& question, MemoryBank* memory = nullptr) const;

    // SQL value wins; matching text confirms it, disagreeing numbers are
    // reported, absence of numbers confirms by default.
    static ReconcileResult reconcile(std::optional<double> sql_value,
                                     const std::vector<const Chunk*>& evidence);

    const QueryOptions& options() const { return options_; }

private:
    std::string choose_table(const std::vector<SchemaLink>& links) const;

    const Store& store_;
    const Retriever& retriever_;
    QueryOptions options_;
    PatternDecomposer decomposer_;
};

// Serialized plan + sub-query skeletons stored in episodic cases.
std::string plan_template_json(const Decomposition& d);
std::optional<Decomposition> decomposition_from_template(const std::string& tmpl);

} // namespace tqa
