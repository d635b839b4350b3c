#pragma once

#include "tableqa/embed.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tqa {

struct CaseOutcome {
    double reward = 0.0; // in [0, 1]
    std::string ts;
};

struct EpisodicCase {
    std::string case_id;
    std::string statement;
    std::vector<double> state_vec; // unit norm
    std::string plan_template;     // serialized plan + sub-query skeletons
    double q_value = 0.0;          // in [0, 1]; exact reward on first update
    std::vector<CaseOutcome> outcomes;

    size_t visit_count() const { return outcomes.size(); }
};

struct SelectionPolicy {
    double tau = 0.5;       // temperature > 0
    double beta = 1.0;      // similarity exponent >= 0
    double alpha = 0.2;     // Q learning rate in (0, 1]
    double sim_floor = 1e-6;

    void validate() const;
};

struct CaseSelection {
    size_t index = 0;
    std::string case_id;
    std::vector<double> distribution; // sums to 1 over the bank
};

// Append-only episodic case bank. Events are persisted as JSONL and the
// in-memory state is rebuilt by replay on open, which also makes the single
// writer crash-tolerant. Selection is read-only.
class MemoryBank {
public:
    MemoryBank() = default; // in-memory only, no persistence

    static MemoryBank open(const std::string& events_path,
                           const EmbeddingProvider& embedder,
                           const SelectionPolicy& policy = {});

    std::string insert_case(const EmbeddingProvider& embedder, const std::string& statement,
                            const std::string& plan_template,
                            std::optional<double> initial_reward);

    void update_case(const std::string& case_id, double reward);

    // P(c) = max(sim, floor)^beta * exp(q/tau), normalized; sim = cosine
    // clamped to [0, 1]. Returns nullopt on an empty bank.
    std::optional<CaseSelection> select_case(const std::vector<double>& state,
                                             const SelectionPolicy& policy,
                                             std::mt19937_64& rng) const;

    std::vector<double> distribution(const std::vector<double>& state,
                                     const SelectionPolicy& policy) const;

    const std::vector<EpisodicCase>& cases() const { return cases_; }
    const EpisodicCase* find(const std::string& case_id) const;

    double shannon_entropy(const std::vector<double>& state,
                           const SelectionPolicy& policy) const;

private:
    void append_event(const std::string& line);

    std::vector<EpisodicCase> cases_;
    std::string events_path_; // empty for in-memory banks
    SelectionPolicy policy_;
    uint64_t next_id_ = 1;
};

// Deterministic uniform in [0,1) from a seeded engine; identical across
// platforms, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace tqa
