#include "tableqa/memory.hpp"

#include "tableqa/clock.hpp"
#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using json = nlohmann::json;

namespace tqa {

void SelectionPolicy::validate() const {
    if (!(tau > 0.0)) throw validation_error("policy: tau must be > 0");
    if (beta < 0.0) throw validation_error("policy: beta must be >= 0");
    if (!(alpha > 0.0) || alpha > 1.0) throw validation_error("policy: alpha must be in (0,1]");
    if (sim_floor <= 0.0) throw validation_error("policy: sim_floor must be > 0");
}

MemoryBank MemoryBank::open(const std::string& events_path, const EmbeddingProvider& embedder,
                            const SelectionPolicy& policy) {
    policy.validate();
    MemoryBank bank;
    bank.events_path_ = events_path;
    bank.policy_ = policy;
    std::ifstream in(events_path);
    if (!in) return bank; // fresh bank, file appears on first event
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw parse_error("memory events line " + std::to_string(line_no) + ": " + e.what());
        }
        std::string event = j.at("event").get<std::string>();
        std::string case_id = j.at("case_id").get<std::string>();
        const json& payload = j.at("payload");
        std::string ts = j.value("ts", std::string());
        if (event == "insert") {
            EpisodicCase c;
            c.case_id = case_id;
            c.statement = payload.at("statement").get<std::string>();
            c.plan_template = payload.value("plan_template", std::string());
            c.state_vec = embedder.embed(c.statement);
            if (!payload.at("reward").is_null()) {
                double r = payload.at("reward").get<double>();
                c.q_value = r;
                c.outcomes.push_back({r, ts});
            }
            bank.cases_.push_back(std::move(c));
            // keep ids monotone across reopen
            if (case_id.rfind("case_", 0) == 0) {
                uint64_t n = std::strtoull(case_id.c_str() + 5, nullptr, 10);
                bank.next_id_ = std::max(bank.next_id_, n + 1);
            }
        } else if (event == "update") {
            auto it = std::find_if(bank.cases_.begin(), bank.cases_.end(),
                                   [&](const EpisodicCase& c) { return c.case_id == case_id; });
            if (it == bank.cases_.end())
                throw parse_error("memory events: update for unknown case " + case_id);
            double r = payload.at("reward").get<double>();
            double alpha = payload.value("alpha", policy.alpha);
            if (it->outcomes.empty())
                it->q_value = r;
            else
                it->q_value += alpha * (r - it->q_value);
            it->outcomes.push_back({r, ts});
        } else {
            throw parse_error("memory events: unknown event '" + event + "'");
        }
    }
    return bank;
}

void MemoryBank::append_event(const std::string& line) {
    if (events_path_.empty()) return;
    std::ofstream out(events_path_, std::ios::app | std::ios::binary);
    if (!out) throw io_error("cannot append to memory events " + events_path_);
    out << line << '\n';
    if (!out) throw io_error("failed appending memory event");
}

std::string MemoryBank::insert_case(const EmbeddingProvider& embedder,
                                    const std::string& statement,
                                    const std::string& plan_template,
                                    std::optional<double> initial_reward) {
    if (statement.empty()) throw validation_error("insert_case: empty statement");
    if (initial_reward && (*initial_reward < 0.0 || *initial_reward > 1.0))
        throw validation_error("insert_case: reward outside [0,1]");
    EpisodicCase c;
    c.case_id = "case_" + std::to_string(next_id_++);
    c.statement = statement;
    c.plan_template = plan_template;
    c.state_vec = embedder.embed(statement);
    std::string ts = now_iso();
    if (initial_reward) {
        c.q_value = *initial_reward;
        c.outcomes.push_back({*initial_reward, ts});
    }
    json payload = json::object();
    payload["statement"] = statement;
    payload["plan_template"] = plan_template;
    if (initial_reward)
        payload["reward"] = *initial_reward;
    else
        payload["reward"] = nullptr;
    json event = json::object();
    event["event"] = "insert";
    event["case_id"] = c.case_id;
    event["payload"] = std::move(payload);
    event["ts"] = ts;
    append_event(event.dump());
    cases_.push_back(std::move(c));
    return cases_.back().case_id;
}

void MemoryBank::update_case(const std::string& case_id, double reward) {
    if (reward < 0.0 || reward > 1.0)
        throw validation_error("update_case: reward outside [0,1]");
    auto it = std::find_if(cases_.begin(), cases_.end(),
                           [&](const EpisodicCase& c) { return c.case_id == case_id; });
    if (it == cases_.end()) throw not_found_error("update_case: unknown case " + case_id);
    std::string ts = now_iso();
    if (it->outcomes.empty())
        it->q_value = reward; // first update is exact
    else
        it->q_value += policy_.alpha * (reward - it->q_value);
    it->outcomes.push_back({reward, ts});
    json payload = json::object();
    payload["reward"] = reward;
    payload["alpha"] = policy_.alpha;
    json event = json::object();
    event["event"] = "update";
    event["case_id"] = case_id;
    event["payload"] = std::move(payload);
    event["ts"] = ts;
    append_event(event.dump());
}

std::vector<double> MemoryBank::distribution(const std::vector<double>& state,
                                             const SelectionPolicy& policy) const {
    policy.validate();
    std::vector<double> w(cases_.size());
    for (size_t i = 0; i < cases_.size(); ++i) {
        double sim = cosine(state, cases_[i].state_vec);
        sim = std::clamp(sim, 0.0, 1.0);
        sim = std::max(sim, policy.sim_floor);
        w[i] = std::pow(sim, policy.beta) * std::exp(cases_[i].q_value / policy.tau);
    }
    double z = 0.0;
    for (double x : w) z += x;
    for (double& x : w) x /= z;
    return w;
}

std::optional<CaseSelection> MemoryBank::select_case(const std::vector<double>& state,
                                                     const SelectionPolicy& policy,
                                                     std::mt19937_64& rng) const {
    if (cases_.empty()) return std::nullopt; // NoCases: caller proceeds memoryless
    CaseSelection sel;
    sel.distribution = distribution(state, policy);
    double u = uniform01(rng);
    double acc = 0.0;
    sel.index = sel.distribution.size() - 1;
    for (size_t i = 0; i < sel.distribution.size(); ++i) {
        acc += sel.distribution[i];
        if (u < acc) {
            sel.index = i;
            break;
        }
    }
    sel.case_id = cases_[sel.index].case_id;
    return sel;
}

const EpisodicCase* MemoryBank::find(const std::string& case_id) const {
    for (const auto& c : cases_)
        if (c.case_id == case_id) return &c;
    return nullptr;
}

double MemoryBank::shannon_entropy(const std::vector<double>& state,
                                   const SelectionPolicy& policy) const {
    auto p = distribution(state, policy);
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

} // namespace tqa
