#include "tableqa/clock.hpp"
#include "tableqa/config.hpp"
#include "tableqa/embed.hpp"
#include "tableqa/errors.hpp"
#include "tableqa/evaluator.hpp"
#include "tableqa/grid.hpp"
#include "tableqa/memory.hpp"
#include "tableqa/parser.hpp"
#include "tableqa/query.hpp"
#include "tableqa/retriever.hpp"
#include "tableqa/sql.hpp"
#include "tableqa/store.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

tqa::GridFormat format_from_path(const std::string& path, const std::string& forced) {
    if (forced == "json") return tqa::GridFormat::CanonicalJson;
    if (forced == "csv") return tqa::GridFormat::Csv;
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv")
        return tqa::GridFormat::Csv;
    return tqa::GridFormat::CanonicalJson;
}

std::string default_memory_file(const std::string& store_dir) {
    return (fs::path(store_dir) / "memory.jsonl").string();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw tqa::io_error("cannot write " + path);
    out << content;
}

struct AppContext {
    tqa::Config config;
    bool json_output = false;
};

json kb_health_json(const tqa::KbHealth& h) {
    json j = json::object();
    j["duplication_rate"] = h.duplication_rate;
    j["obsolescence_rate"] = h.obsolescence_rate;
    json density = json::object();
    density["mean"] = h.density_mean;
    density["min"] = h.density_min;
    density["max"] = h.density_max;
    j["density"] = std::move(density);
    json cats = json::object();
    for (const auto& [k, v] : h.category_counts) cats[k] = v;
    j["category_counts"] = std::move(cats);
    return j;
}

int run_ingest(const AppContext& app, const std::string& grid_path, const std::string& store_dir,
               const std::string& forced_format) {
    tqa::GridDocument doc = tqa::load_grid(grid_path, format_from_path(grid_path, forced_format));
    if (!doc.source_meta.count("ingested_at")) doc.source_meta["ingested_at"] = tqa::now_iso();
    tqa::Store store = fs::exists(fs::path(store_dir) / "manifest.json")
                           ? tqa::Store::open(store_dir, tqa::Store::Mode::ReadWrite)
                           : tqa::Store::create(store_dir);
    tqa::IngestReport report = tqa::ingest_grid(store, doc, app.config.chunk_window);
    tqa::check_store_consistency(store);
    if (app.json_output) {
        json j = json::object();
        j["tables"] = report.table_names;
        j["chunk_count"] = report.chunk_count;
        j["warnings"] = report.warnings;
        std::cout << j.dump() << '\n';
    } else {
        std::cout << "ingested " << report.table_names.size() << " table(s), "
                  << report.chunk_count << " chunk(s) into " << store_dir << '\n';
        for (const auto& name : report.table_names) std::cout << "  " << name << '\n';
        for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    }
    return kExitOk;
}

int run_parse(const AppContext& app, const std::string& grid_path,
              const std::string& forced_format) {
    tqa::GridDocument doc = tqa::load_grid(grid_path, format_from_path(grid_path, forced_format));
    tqa::SubtableSegmentation seg = tqa::segment_subtables(doc);
    if (app.json_output) {
        std::cout << tqa::segmentation_to_json(seg) << '\n';
    } else {
        std::cout << seg.segments.size() << " segment(s) in " << doc.doc_id << '\n';
        for (const auto& s : seg.segments) {
            std::cout << "  " << s.table_id << "  rows " << s.region.top << ".."
                      << s.region.bottom() << "  cols " << s.region.left << ".."
                      << s.region.right() << "  header_rows=" << s.header_rows
                      << (s.synthesized_header ? " (synthesized)" : "") << '\n';
            for (const auto& c : s.columns)
                std::cout << "    " << c.name << " [" << tqa::to_string(c.col_type) << "] \""
                          << c.display_label << "\"\n";
            for (const auto& n : s.notes) std::cout << "    note: " << n << '\n';
        }
    }
    return kExitOk;
}

int run_ask(const AppContext& app, const std::string& question, const std::string& store_dir,
            const std::string& trace_path, bool use_memory, const std::string& memory_file,
            std::optional<double> reward, const std::string& failure_file) {
    tqa::Store store = tqa::Store::open(store_dir);
    auto embedder = tqa::make_embedder(app.config.embedder);
    tqa::Retriever retriever(store, *embedder, app.config.theta_link);
    tqa::QueryOptions opts;
    opts.theta_link = app.config.theta_link;
    opts.rng_seed = app.config.rng_seed;
    opts.policy.tau = app.config.tau;
    opts.policy.beta = app.config.beta;
    opts.policy.alpha = app.config.alpha;
    tqa::QueryEngine engine(store, retriever, opts);

    tqa::MemoryBank bank;
    tqa::MemoryBank* bank_ptr = nullptr;
    std::string mem_path = memory_file.empty() ? default_memory_file(store_dir) : memory_file;
    if (use_memory) {
        bank = tqa::MemoryBank::open(mem_path, *embedder, opts.policy);
        bank_ptr = &bank;
    }

    tqa::AnswerBundle bundle;
    try {
        bundle = engine.answer(question, bank_ptr);
    } catch (const tqa::GenerationFailure& e) {
        if (!failure_file.empty()) {
            std::ofstream out(failure_file, std::ios::app | std::ios::binary);
            json f = json::object();
            f["question"] = question;
            f["reasons"] = json::array({"generation_failure"});
            f["term"] = e.term();
            out << f.dump() << '\n';
        }
        throw;
    }

    if (use_memory && reward) {
        tqa::Decomposition d = engine.decompose(question);
        bank.insert_case(*embedder, question, tqa::plan_template_json(d), *reward);
        json trace = json::parse(bundle.trace_json);
        if (!trace.at("memory").is_null()) {
            std::string selected = trace.at("memory").at("selected_case").get<std::string>();
            bank.update_case(selected, *reward);
        }
    }
    if (bundle.degraded && !failure_file.empty()) {
        std::ofstream out(failure_file, std::ios::app | std::ios::binary);
        json f = json::object();
        f["question"] = question;
        f["reasons"] = json::array({"generation_failure"});
        json trace = json::parse(bundle.trace_json);
        for (const auto& s : trace.at("sql"))
            if (s.is_object()) f["term"] = s.at("failed_term");
        out << f.dump() << '\n';
    }

    if (!trace_path.empty()) write_text_file(trace_path, bundle.trace_json + "\n");
    if (app.json_output) {
        std::cout << bundle.trace_json << '\n';
    } else {
        std::cout << bundle.answer << '\n';
        if (bundle.sql) std::cerr << "sql: " << *bundle.sql << '\n';
        if (bundle.discrepancy) {
            std::cerr << "discrepancy: sql=" << tqa::text::format_number(bundle.discrepancy->sql_value)
                      << " text=[";
            for (size_t i = 0; i < bundle.discrepancy->text_values.size(); ++i) {
                if (i) std::cerr << ", ";
                std::cerr << tqa::text::format_number(bundle.discrepancy->text_values[i]);
            }
            std::cerr << "]\n";
        }
    }
    return kExitOk;
}

int run_retrieve(const AppContext& app, const std::string& query, const std::string& store_dir,
                 int k, const std::string& mode) {
    tqa::Store store = tqa::Store::open(store_dir);
    auto embedder = tqa::make_embedder(app.config.embedder);
    tqa::Retriever retriever(store, *embedder, app.config.theta_link);
    json out = json::object();
    out["query"] = query;
    out["mode"] = mode;
    if (mode == "recall" || mode == "hybrid") {
        auto hits = mode == "recall" ? retriever.recall(query, k)
                                     : retriever.recall_reranked(query, k);
        json arr = json::array();
        for (const auto& h : hits) {
            json j = json::object();
            j["chunk_id"] = h.chunk_id;
            j["recall_score"] = h.recall_score;
            j["rerank_score"] = h.rerank_score;
            j["origin"] = tqa::to_string(h.origin);
            arr.push_back(std::move(j));
        }
        out["hits"] = std::move(arr);
    } else if (mode == "topdown") {
        json arr = json::array();
        for (const auto& r : retriever.top_down(query)) {
            json j = json::object();
            j["table_id"] = r.table_id;
            j["column"] = r.column;
            j["header_path"] = r.header_path;
            j["score"] = r.score;
            arr.push_back(std::move(j));
        }
        out["regions"] = std::move(arr);
    } else if (mode == "bottomup") {
        json arr = json::array();
        for (const auto& t : retriever.bottom_up(query)) {
            json j = json::object();
            j["table_id"] = t.table_id;
            j["column"] = t.column;
            j["header_path"] = t.header_path;
            j["row_index"] = t.row_index;
            j["row_key"] = t.row_key;
            j["matched"] = t.matched;
            arr.push_back(std::move(j));
        }
        out["traces"] = std::move(arr);
    } else {
        throw tqa::validation_error("unknown retrieve mode: " + mode);
    }
    std::cout << out.dump() << '\n';
    return kExitOk;
}

int run_eval_cmd(const AppContext& app, const std::string& cases_path,
                 const std::string& store_dir, const std::string& report_path,
                 const std::string& failure_file, bool with_memory,
                 const std::string& memory_file) {
    tqa::Store store = tqa::Store::open(store_dir);
    auto embedder = tqa::make_embedder(app.config.embedder);
    tqa::Retriever retriever(store, *embedder, app.config.theta_link);
    tqa::QueryOptions opts;
    opts.theta_link = app.config.theta_link;
    opts.rng_seed = app.config.rng_seed;
    tqa::QueryEngine engine(store, retriever, opts);

    auto cases = tqa::load_eval_cases(cases_path);
    tqa::EvalOptions eopts;
    eopts.flag_threshold = app.config.flag_threshold;
    eopts.failure_file = failure_file;
    tqa::MemoryBank bank;
    if (with_memory) {
        std::string mem_path = memory_file.empty() ? default_memory_file(store_dir) : memory_file;
        tqa::SelectionPolicy policy;
        policy.tau = app.config.tau;
        policy.beta = app.config.beta;
        policy.alpha = app.config.alpha;
        bank = tqa::MemoryBank::open(mem_path, *embedder, policy);
        eopts.memory = &bank;
    }
    tqa::MetricReport report = tqa::run_eval(cases, store, retriever, engine, eopts);
    json report_doc = json::parse(tqa::report_to_json(report));
    report_doc["kb_health"] =
        kb_health_json(tqa::kb_health(store, *embedder, app.config.dup_threshold));
    std::string report_json = report_doc.dump();
    if (!report_path.empty()) write_text_file(report_path, report_json + "\n");
    if (app.json_output) {
        std::cout << report_json << '\n';
    } else {
        std::cout << report.cases.size() << " case(s) evaluated, " << report.failures_appended
                  << " failure(s) appended\n";
        for (const auto& [name, v] : report.aggregate)
            std::cout << "  " << name << ": " << tqa::text::format_number(v) << '\n';
    }
    return kExitOk;
}

int run_memory_cmd(const AppContext& app, const std::string& action,
                   const std::string& store_dir, const std::string& memory_file, int top_n) {
    auto embedder = tqa::make_embedder(app.config.embedder);
    std::string mem_path = memory_file;
    if (mem_path.empty()) {
        if (store_dir.empty())
            throw tqa::validation_error("memory: provide --store or --memory-file");
        mem_path = default_memory_file(store_dir);
    }
    tqa::SelectionPolicy policy;
    policy.tau = app.config.tau;
    policy.beta = app.config.beta;
    policy.alpha = app.config.alpha;
    tqa::MemoryBank bank = tqa::MemoryBank::open(mem_path, *embedder, policy);

    if (action == "stats") {
        size_t updates = 0;
        double q_sum = 0.0;
        for (const auto& c : bank.cases()) {
            updates += c.visit_count();
            q_sum += c.q_value;
        }
        json j = json::object();
        j["cases"] = bank.cases().size();
        j["outcomes"] = updates;
        j["mean_q"] = bank.cases().empty() ? 0.0 : q_sum / static_cast<double>(bank.cases().size());
        if (app.json_output)
            std::cout << j.dump() << '\n';
        else
            std::cout << "cases: " << bank.cases().size() << ", outcomes: " << updates
                      << ", mean q: "
                      << tqa::text::format_number(
                             bank.cases().empty()
                                 ? 0.0
                                 : q_sum / static_cast<double>(bank.cases().size()))
                      << '\n';
        return kExitOk;
    }
    if (action == "top") {
        auto cases = bank.cases();
        std::stable_sort(cases.begin(), cases.end(),
                         [](const tqa::EpisodicCase& a, const tqa::EpisodicCase& b) {
                             if (a.q_value != b.q_value) return a.q_value > b.q_value;
                             return a.case_id < b.case_id;
                         });
        json arr = json::array();
        for (size_t i = 0; i < cases.size() && i < static_cast<size_t>(top_n); ++i) {
            json j = json::object();
            j["case_id"] = cases[i].case_id;
            j["statement"] = cases[i].statement;
            j["q_value"] = cases[i].q_value;
            j["visits"] = cases[i].visit_count();
            arr.push_back(std::move(j));
        }
        if (app.json_output) {
            std::cout << arr.dump() << '\n';
        } else {
            for (const auto& j : arr)
                std::cout << j.at("case_id").get<std::string>() << "  q="
                          << tqa::text::format_number(j.at("q_value").get<double>()) << "  "
                          << j.at("statement").get<std::string>() << '\n';
        }
        return kExitOk;
    }
    if (action == "export") {
        json arr = json::array();
        for (const auto& c : bank.cases()) {
            json j = json::object();
            j["case_id"] = c.case_id;
            j["statement"] = c.statement;
            j["plan_template"] = c.plan_template;
            j["q_value"] = c.q_value;
            json outcomes = json::array();
            for (const auto& o : c.outcomes) {
                json oj = json::object();
                oj["reward"] = o.reward;
                oj["ts"] = o.ts;
                outcomes.push_back(std::move(oj));
            }
            j["outcomes"] = std::move(outcomes);
            arr.push_back(std::move(j));
        }
        std::cout << arr.dump() << '\n';
        return kExitOk;
    }
    throw tqa::validation_error("memory: unknown action '" + action + "' (stats|top|export)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App cli{"tableqa: structure-aware table question answering"};
    cli.require_subcommand(1);

    AppContext app;
    std::string config_path;
    cli.add_option("--config", config_path, "key=value config file");
    cli.add_flag("--json", app.json_output, "machine-readable JSON on stdout");

    // flag overrides applied after the config file loads
    std::optional<double> theta_override, tau_override, beta_override, alpha_override;
    std::optional<double> flag_threshold_override, dup_threshold_override;
    std::optional<int> window_override;
    std::optional<uint64_t> seed_override;
    cli.add_option("--theta-link", theta_override, "schema-link threshold");
    cli.add_option("--tau", tau_override, "memory softmax temperature");
    cli.add_option("--beta", beta_override, "memory similarity exponent");
    cli.add_option("--alpha", alpha_override, "memory Q learning rate");
    cli.add_option("--flag-threshold", flag_threshold_override, "uncertainty flag threshold");
    cli.add_option("--dup-threshold", dup_threshold_override, "duplicate cosine threshold");
    cli.add_option("--window", window_override, "markdown chunk row window");
    cli.add_option("--seed", seed_override, "rng seed");

    // ingest
    auto* ingest = cli.add_subcommand("ingest", "parse a grid and populate a store");
    std::string grid_path, store_dir, forced_format;
    ingest->add_option("grid", grid_path, "grid file (canonical json or csv)")->required();
    ingest->add_option("--store", store_dir, "store directory")->required();
    ingest->add_option("--format", forced_format, "force input format: json|csv");

    // parse
    auto* parse_cmd = cli.add_subcommand("parse", "segment and print schemas");
    std::string parse_grid, parse_format;
    parse_cmd->add_option("grid", parse_grid, "grid file")->required();
    parse_cmd->add_option("--format", parse_format, "force input format: json|csv");

    // ask
    auto* ask = cli.add_subcommand("ask", "answer a natural-language question");
    std::string question, ask_store, trace_path, ask_memory_file, ask_failures;
    bool use_memory = false;
    std::optional<double> reward;
    ask->add_option("question", question, "the question")->required();
    ask->add_option("--store", ask_store, "store directory")->required();
    ask->add_option("--trace", trace_path, "write the full trace JSON here");
    ask->add_flag("--use-memory", use_memory, "seed planning from the episodic case bank");
    ask->add_option("--memory-file", ask_memory_file, "memory events JSONL");
    ask->add_option("--reward", reward, "manual reward in [0,1] recorded with --use-memory");
    ask->add_option("--failures", ask_failures, "failure-case JSONL to append to");

    // retrieve
    auto* retrieve = cli.add_subcommand("retrieve", "query the chunk index");
    std::string r_query, r_store, r_mode = "hybrid";
    int r_k = 10;
    retrieve->add_option("query", r_query, "the query")->required();
    retrieve->add_option("--store", r_store, "store directory")->required();
    retrieve->add_option("-k", r_k, "hits to return");
    retrieve->add_option("--mode", r_mode, "recall|topdown|bottomup|hybrid");

    // eval
    auto* eval_cmd = cli.add_subcommand("eval", "run the metric suite over a case file");
    std::string e_cases, e_store, e_report, e_failures, e_memory_file;
    bool e_memory = false;
    eval_cmd->add_option("--cases", e_cases, "JSONL case file")->required();
    eval_cmd->add_option("--store", e_store, "store directory")->required();
    eval_cmd->add_option("--report", e_report, "write the report JSON here");
    eval_cmd->add_option("--failures", e_failures, "failure-case JSONL to append to");
    eval_cmd->add_flag("--memory", e_memory, "feed correctness rewards into the case bank");
    eval_cmd->add_option("--memory-file", e_memory_file, "memory events JSONL");

    // memory
    auto* memory_cmd = cli.add_subcommand("memory", "inspect the episodic case bank");
    std::string m_action, m_store, m_memory_file;
    int m_top = 10;
    memory_cmd->add_option("action", m_action, "stats|top|export")->required();
    memory_cmd->add_option("--store", m_store, "store directory");
    memory_cmd->add_option("--memory-file", m_memory_file, "memory events JSONL");
    memory_cmd->add_option("--top", m_top, "rows for the top action");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = cli.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (!config_path.empty()) app.config = tqa::load_config_file(config_path);
        if (theta_override) app.config.theta_link = *theta_override;
        if (tau_override) app.config.tau = *tau_override;
        if (beta_override) app.config.beta = *beta_override;
        if (alpha_override) app.config.alpha = *alpha_override;
        if (flag_threshold_override) app.config.flag_threshold = *flag_threshold_override;
        if (dup_threshold_override) app.config.dup_threshold = *dup_threshold_override;
        if (window_override) app.config.chunk_window = *window_override;
        if (seed_override) app.config.rng_seed = *seed_override;
        app.config.validate();

        if (*ingest) return run_ingest(app, grid_path, store_dir, forced_format);
        if (*parse_cmd) return run_parse(app, parse_grid, parse_format);
        if (*ask)
            return run_ask(app, question, ask_store, trace_path, use_memory, ask_memory_file,
                           reward, ask_failures);
        if (*retrieve) return run_retrieve(app, r_query, r_store, r_k, r_mode);
        if (*eval_cmd)
            return run_eval_cmd(app, e_cases, e_store, e_report, e_failures, e_memory,
                                e_memory_file);
        if (*memory_cmd) return run_memory_cmd(app, m_action, m_store, m_memory_file, m_top);
        std::cerr << "no subcommand selected\n";
        return kExitUsage;
    } catch (const tqa::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_data_error() ? kExitData : kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
