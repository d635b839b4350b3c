#include <doctest.h>

#include "fixtures_common.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/evaluator.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace tqa;
using fixtures::TempDir;

namespace {

const NgramHashEmbedder& embedder() {
    static NgramHashEmbedder e;
    return e;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

size_t line_count(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++n;
    return n;
}

} // namespace

TEST_CASE("context_precision") {
    SUBCASE("gold at ranks 1,2 of 2 is perfect") {
        CHECK(context_precision({"a", "b"}, {"a", "b"}) == doctest::Approx(1.0));
    }
    SUBCASE("single gold at rank 2 of 2 scores 0.5") {
        CHECK(context_precision({"x", "a"}, {"a"}) == doctest::Approx(0.5));
    }
    SUBCASE("no gold retrieved scores 0") {
        CHECK(context_precision({"x", "y"}, {"a"}) == doctest::Approx(0.0));
    }
    SUBCASE("equals 1.0 iff gold occupies a prefix") {
        CHECK(context_precision({"a", "b", "x"}, {"a", "b"}) == doctest::Approx(1.0));
        CHECK(context_precision({"a", "x", "b"}, {"a", "b"}) < 1.0);
        CHECK(context_precision({"x", "a", "b"}, {"a", "b"}) < 1.0);
    }
}

TEST_CASE("context_recall") {
    SUBCASE("gold verbatim inside one chunk") {
        CHECK(context_recall({"some prefix. the stock is 4444 units. suffix"},
                             "the stock is 4444 units.") == doctest::Approx(1.0));
    }
    SUBCASE("nothing attributable") {
        CHECK(context_recall({"completely unrelated words here"},
                             "alpha beta gamma. delta epsilon zeta.") == doctest::Approx(0.0));
    }
    SUBCASE("one of two sentences attributable") {
        // oracle: manual Jaccard; sentence 1 tokens appear verbatim (J=1),
        // sentence 2 shares nothing (J=0)
        CHECK(context_recall({"the stock is 4444"},
                             "The stock is 4444. Unrelated closing remark follows here.") ==
              doctest::Approx(0.5));
    }
}

TEST_CASE("context_relevancy") {
    SUBCASE("question equal to the chunk text") {
        CHECK(context_relevancy(embedder(), {"weekly production"}, "weekly production") ==
              doctest::Approx(1.0));
    }
    SUBCASE("no shared n-grams lands near the 0.5 rescale point") {
        // oracle: cosine of disjoint 3-gram sets is ~0 before rescaling
        double v = context_relevancy(embedder(), {"zzzz yyyy xxxx"}, "aaaa bbbb cccc");
        CHECK(std::fabs(v - 0.5) < 0.1);
    }
    SUBCASE("empty context is 0") {
        CHECK(context_relevancy(embedder(), {}, "anything") == 0.0);
    }
}

TEST_CASE("mrr") {
    SUBCASE("first-rank hits everywhere") {
        CHECK(mrr({{{"g", "x"}, {"g"}}, {{"g2", "y"}, {"g2"}}}) == doctest::Approx(1.0));
    }
    SUBCASE("ranks 1, 2, 4") {
        double v = mrr({{{"g", "x", "y", "z"}, {"g"}},
                        {{"x", "g", "y", "z"}, {"g"}},
                        {{"x", "y", "z", "g"}, {"g"}}});
        CHECK(v == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0));
    }
    SUBCASE("gold never retrieved") {
        CHECK(mrr({{{"x", "y"}, {"g"}}}) == doctest::Approx(0.0));
    }
}

namespace {

// independent F1 used as the oracle for the token-overlap path
double oracle_f1(const std::string& a, const std::string& b) {
    auto ta = text::tokenize(a);
    auto tb = text::tokenize(b);
    std::map<std::string, int> ca;
    for (auto& t : ta) ++ca[t];
    int overlap = 0;
    for (auto& t : tb) {
        if (ca[t] > 0) {
            --ca[t];
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double p = double(overlap) / tb.size();
    double r = double(overlap) / ta.size();
    return 2 * p * r / (p + r);
}

} // namespace

TEST_CASE("answer_correctness") {
    SUBCASE("numeric match against formatted gold") {
        CHECK(answer_correctness("total_production = 245036", 245036.0, "245,036 units") ==
              doctest::Approx(1.0));
    }
    SUBCASE("numeric mismatch is 0") {
        CHECK(answer_correctness("100", 100.0, "245,036 units") == doctest::Approx(0.0));
    }
    SUBCASE("empty prediction is 0") {
        CHECK(answer_correctness("", std::nullopt, "anything gold") == doctest::Approx(0.0));
    }
    SUBCASE("text path follows token F1") {
        std::string pred = "the shipment was delivered late";
        std::string gold = "the shipment arrived late";
        CHECK(answer_correctness(pred, std::nullopt, gold) ==
              doctest::Approx(oracle_f1(gold, pred)));
    }
}

TEST_CASE("faithfulness_proxy") {
    SUBCASE("answer quoting only chunk content") {
        CHECK(faithfulness_proxy("Stock is 4444", {"the Stock level is 4444 units"}) ==
              doctest::Approx(1.0));
    }
    SUBCASE("one unsupported number of two factual tokens") {
        // numbers {4444, 9999}; evidence only supports 4444
        CHECK(faithfulness_proxy("values 4444 and 9999", {"we counted 4444"}) ==
              doctest::Approx(0.5));
    }
    SUBCASE("no factual tokens is vacuously faithful") {
        CHECK(faithfulness_proxy("all good here", {"whatever"}) == doctest::Approx(1.0));
    }
}

TEST_CASE("kb_health") {
    SUBCASE("verbatim duplicate pair") {
        Chunk a;
        a.chunk_id = "a";
        a.text = "identical content";
        Chunk b;
        b.chunk_id = "b";
        b.text = "identical content";
        Store store = Store::ephemeral({}, {a, b}, {});
        KbHealth h = kb_health(store, embedder());
        CHECK(h.duplication_rate == doctest::Approx(1.0));
        CHECK(h.category_counts["free-text"] == 2);
    }
    SUBCASE("mixed fixture matches a brute-force pairwise scan") {
        std::vector<Chunk> chunks;
        std::vector<std::string> texts = {"alpha beta gamma", "alpha beta gamma",
                                          "totally different text", "another unrelated one"};
        for (size_t i = 0; i < texts.size(); ++i) {
            Chunk c;
            c.chunk_id = "c" + std::to_string(i);
            c.text = texts[i];
            chunks.push_back(c);
        }
        Store store = Store::ephemeral({}, chunks, {});
        KbHealth h = kb_health(store, embedder(), 0.95);
        // oracle: O(n^2) cosine scan
        size_t dupes = 0;
        for (size_t i = 0; i < texts.size(); ++i) {
            bool dup = false;
            for (size_t j = 0; j < texts.size(); ++j)
                if (i != j && cosine(embedder().embed(texts[i]), embedder().embed(texts[j])) >=
                                  0.95)
                    dup = true;
            if (dup) ++dupes;
        }
        CHECK(h.duplication_rate == doctest::Approx(double(dupes) / texts.size()));
    }
    SUBCASE("obsolescence against a horizon") {
        RelationalTable t;
        t.table_id = t.name = "t_x";
        t.columns = {{"t_v", ColType::Continuous}};
        t.display_labels = {"v"};
        t.header_paths = {{"v"}};
        t.rows = {{1.0}};
        TempDir dir("tqa_kb");
        {
            Store store = Store::create(dir.str());
            Chunk c;
            c.chunk_id = "t_x:0";
            c.text = "| v |\n| --- |\n| 1 |\n";
            c.origin = ChunkOrigin::TableRender;
            c.table_id = "t_x";
            SchemaChunkMap map;
            map.entries.push_back({"t_x:0", "t_x", {"v"}});
            store.put_entry(t, {c}, map, StoreEntryMeta{"2025-01-01T00:00:00Z"});
        }
        Store store = Store::open(dir.str());
        CHECK(kb_health(store, embedder(), 0.95, "2024-01-01T00:00:00Z").obsolescence_rate ==
              doctest::Approx(0.0));
        CHECK(kb_health(store, embedder(), 0.95, "2026-01-01T00:00:00Z").obsolescence_rate ==
              doctest::Approx(1.0));
    }
}

TEST_CASE("retrieval uncertainty") {
    SUBCASE("single hit is fully certain") {
        CHECK(retrieval_uncertainty({0.4}) == doctest::Approx(0.0));
    }
    SUBCASE("uniform scores maximize entropy") {
        std::vector<double> scores(10, 0.7);
        CHECK(retrieval_uncertainty(scores) == doctest::Approx(1.0));
    }
    SUBCASE("well-separated two-hit case is below the flag threshold") {
        double u = retrieval_uncertainty({1.0, -1.0});
        // closed form: p = (e^2/(e^2+1), 1/(e^2+1)), H/ln 2
        double p1 = std::exp(2.0) / (std::exp(2.0) + 1.0);
        double expect = -(p1 * std::log(p1) + (1 - p1) * std::log(1 - p1)) / std::log(2.0);
        CHECK(u == doctest::Approx(expect));
        CHECK(u < 0.8);
    }
    SUBCASE("crafted two-level scores match the closed form") {
        // five at s=0.6, five at s=0.1: softmax weights e^0.5 vs 1 after shift
        std::vector<double> scores(5, 0.6);
        scores.insert(scores.end(), 5, 0.1);
        double w = std::exp(0.5);
        double z = 5 * w + 5;
        double ph = w / z, pl = 1 / z;
        double expect = -(5 * ph * std::log(ph) + 5 * pl * std::log(pl)) / std::log(10.0);
        CHECK(retrieval_uncertainty(scores) == doctest::Approx(expect));
    }
    SUBCASE("adding a constant leaves the distribution unchanged") {
        std::vector<double> base = {0.9, 0.4, 0.2, 0.05, -0.3};
        std::vector<double> shifted;
        for (double s : base) shifted.push_back(s + 17.5);
        CHECK(retrieval_uncertainty(base) == doctest::Approx(retrieval_uncertainty(shifted)));
        // scaling does change it (softmax is shift- but not scale-invariant)
        std::vector<double> scaled;
        for (double s : base) scaled.push_back(s * 3.0);
        CHECK(retrieval_uncertainty(base) != doctest::Approx(retrieval_uncertainty(scaled)));
    }
    SUBCASE("one dominant cosine among ten still reads as uncertain") {
        // cosine-range scores cannot separate ten hits under a T=1 softmax:
        // (1.0, nine 0.0) computes to ~0.968, above the 0.8 default
        std::vector<double> scores = {1.0};
        scores.insert(scores.end(), 9, 0.0);
        CHECK(retrieval_uncertainty(scores) == doctest::Approx(0.9681).epsilon(1e-3));
    }
}

TEST_CASE("mine_uncertain flags the uniform case and not the separated one") {
    std::vector<std::vector<double>> traces = {
        std::vector<double>(10, 0.5), // uniform: flagged
        {1.0, -1.0},                  // separated: not flagged
        {},                           // skipped with a warning
    };
    MiningResult r = mine_uncertain(traces, 10, 0.8);
    REQUIRE(r.flagged.size() == 1);
    CHECK(r.flagged[0].trace_index == 0);
    CHECK(r.flagged[0].uncertainty == doctest::Approx(1.0));
    REQUIRE(r.warnings.size() == 1);
    // top-k truncation keeps the most uncertain
    std::vector<std::vector<double>> many = {std::vector<double>(10, 0.5),
                                             std::vector<double>(4, 0.2),
                                             std::vector<double>(2, 0.9)};
    MiningResult top1 = mine_uncertain(many, 1, 0.8);
    REQUIRE(top1.flagged.size() == 1);
    CHECK(top1.flagged[0].uncertainty == doctest::Approx(1.0));
}

namespace {

struct EvalRig {
    TempDir dir;
    std::unique_ptr<Store> store;
    std::unique_ptr<Retriever> retriever;
    std::unique_ptr<QueryEngine> engine;

    EvalRig() : dir("tqa_eval") {
        GridDocument doc = make_grid("parts", "Parts",
                                     {{"P/N", "Stock"}, {"C01", "4444"}, {"C02", "556"}},
                                     {}, {{"ingested_at", "2025-08-01T00:00:00Z"}});
        {
            Store writer = Store::create(dir.str());
            ingest_grid(writer, doc);
        }
        store = std::make_unique<Store>(Store::open(dir.str()));
        retriever = std::make_unique<Retriever>(*store, embedder());
        engine = std::make_unique<QueryEngine>(*store, *retriever);
    }
};

} // namespace

TEST_CASE("run_eval: all-correct batch, then a planted failure, then corrected") {
    EvalRig rig;
    std::string failure_file = rig.dir.str() + "/failures.jsonl";

    EvalCase good;
    good.question = "what is the total stock of all parts";
    good.gold_answer = "5,000 units";
    good.gold_chunk_ids = {"t_Parts:0"};

    EvalOptions opts;
    opts.failure_file = failure_file;

    SUBCASE("all-correct: aggregate 1.0 and no failure entries") {
        MetricReport report = run_eval({good, good}, *rig.store, *rig.retriever, *rig.engine,
                                       opts);
        CHECK(report.aggregate.at("answer_correctness") == doctest::Approx(1.0));
        CHECK(report.aggregate.at("context_precision") == doctest::Approx(1.0));
        CHECK(report.aggregate.at("mrr") == doctest::Approx(1.0));
        CHECK(report.failures_appended == 0);
        CHECK(line_count(failure_file) == 0);
        // every metric in [0,1]; aggregates equal per-case means
        for (const auto& cr : report.cases)
            for (const auto& [name, v] : cr.metrics) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        for (const auto& [name, v] : report.aggregate) {
            if (name == "mrr") continue;
            double sum = 0.0;
            for (const auto& cr : report.cases) sum += cr.metrics.at(name);
            CHECK(v == doctest::Approx(sum / report.cases.size()).epsilon(1e-12));
        }
    }

    SUBCASE("planted wrong gold flags exactly that case and appends one entry") {
        EvalCase bad = good;
        bad.gold_answer = "99,999 units";
        MetricReport report =
            run_eval({good, bad, good}, *rig.store, *rig.retriever, *rig.engine, opts);
        CHECK(report.failures_appended == 1);
        CHECK(line_count(failure_file) == 1);
        REQUIRE(report.cases.size() == 3);
        CHECK_FALSE(report.cases[0].flagged);
        CHECK(report.cases[1].flagged);
        CHECK_FALSE(report.cases[2].flagged);
        // the corrected rerun appends nothing new
        MetricReport second =
            run_eval({good, good, good}, *rig.store, *rig.retriever, *rig.engine, opts);
        CHECK(second.failures_appended == 0);
        CHECK(line_count(failure_file) == 1);
    }

    SUBCASE("unresolvable gold ids become per-case errors, run continues") {
        EvalCase broken = good;
        broken.gold_chunk_ids = {"missing:0"};
        MetricReport report =
            run_eval({broken, good}, *rig.store, *rig.retriever, *rig.engine, opts);
        REQUIRE(report.cases.size() == 2);
        CHECK_FALSE(report.cases[0].error.empty());
        CHECK(report.cases[1].error.empty());
        CHECK(report.aggregate.at("answer_correctness") == doctest::Approx(1.0));
    }

    SUBCASE("empty case file gives an empty report") {
        MetricReport report = run_eval({}, *rig.store, *rig.retriever, *rig.engine, opts);
        CHECK(report.cases.empty());
        CHECK(report.failures_appended == 0);
    }

    SUBCASE("reports are byte-identical across runs") {
        MetricReport a = run_eval({good}, *rig.store, *rig.retriever, *rig.engine, opts);
        MetricReport b = run_eval({good}, *rig.store, *rig.retriever, *rig.engine, opts);
        CHECK(report_to_json(a) == report_to_json(b));
    }
}

TEST_CASE("judge-dependent metrics are reported unavailable, never faked") {
    EvalRig rig;
    MetricReport report = run_eval({}, *rig.store, *rig.retriever, *rig.engine, {});
    CHECK(!report.unavailable_metrics.empty());
    for (const auto& m : report.unavailable_metrics) CHECK(report.aggregate.count(m) == 0);
}

TEST_CASE("load_eval_cases parses jsonl") {
    TempDir dir("tqa_cases");
    std::string path = dir.str() + "/cases.jsonl";
    {
        std::ofstream out(path);
        out << R"({"question":"q1","gold_answer":"a1","gold_relevant_chunk_ids":["c1"]})"
            << "\n";
        out << R"({"question":"q2","gold_answer":"a2"})" << "\n";
    }
    auto cases = load_eval_cases(path);
    REQUIRE(cases.size() == 2);
    CHECK(cases[0].question == "q1");
    CHECK(cases[0].gold_chunk_ids == std::vector<std::string>{"c1"});
    CHECK(cases[1].gold_chunk_ids.empty());
    CHECK_THROWS_AS(load_eval_cases(dir.str() + "/missing.jsonl"), Error);
}
