#pragma once

#include "tableqa/embed.hpp"
#include "tableqa/store.hpp"

#include <memory>
#include <string>
#include <vector>

namespace tqa {

enum class AnchorKind { Header, Value };

struct Anchor {
    AnchorKind kind = AnchorKind::Header;
    std::string text;
};

struct RetrievalHit {
    std::string chunk_id;
    double recall_score = 0.0; // cosine in [-1, 1]
    double rerank_score = 0.0;
    ChunkOrigin origin = ChunkOrigin::FreeText;
    std::vector<Anchor> anchors;
};

// Column region reached from a header mentioned in the query.
struct HeaderRegion {
    std::string table_id;
    std::string column;
    std::vector<std::string> header_path;
    double score = 0.0;
    Anchor anchor; // kind = Header
};

// Body value matched from the query, traced back to its header path.
struct ValueTrace {
    std::string table_id;
    std::string column;
    std::vector<std::string> header_path;
    size_t row_index = 0;
    std::string row_key; // first column of the matched row
    std::string matched;
};

struct RerankWeights {
    double header = 0.5; // w_h
    double value = 0.25; // w_v
};

// Exact-cosine two-phase retrieval over an immutable chunk index. The index
// is built once per store snapshot; rebuilds swap the whole object.
class Retriever {
public:
    Retriever(const Store& store, const EmbeddingProvider& embedder,
              double theta_link = 0.55, RerankWeights weights = {});

    // Phase 1: top-k by cosine, ties broken by chunk_id.
    std::vector<RetrievalHit> recall(const std::string& query, int k) const;

    // Phase 2: schema-aware reordering; never drops hits.
    std::vector<RetrievalHit> rerank(const std::vector<std::string>& query_terms,
                                     std::vector<RetrievalHit> hits) const;

    std::vector<RetrievalHit> recall_reranked(const std::string& query, int k) const;

    std::vector<HeaderRegion> top_down(const std::string& query) const;
    std::vector<ValueTrace> bottom_up(const std::string& query) const;

    const Store& store() const { return store_; }
    const EmbeddingProvider& embedder() const { return embedder_; }
    double theta_link() const { return theta_; }

    // Salient literals: numbers, quoted spans, capitalized spans.
    static std::vector<std::string> salient_literals(const std::string& query);
    static std::vector<std::string> query_terms(const std::string& query);

private:
    const Store& store_;
    const EmbeddingProvider& embedder_;
    double theta_;
    RerankWeights weights_;
    std::vector<std::vector<double>> chunk_vecs_; // aligned with store_.chunks()
};

} // namespace tqa
