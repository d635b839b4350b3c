#include <doctest.h>

#include "tableqa/errors.hpp"
#include "tableqa/grid.hpp"

#include <random>

using namespace tqa;

TEST_CASE("csv loads as a merge-free grid") {
    GridDocument doc = load_grid_from_string("a,b,c\n1,2,3\n4,5,6", GridFormat::Csv);
    CHECK(doc.n_rows == 3);
    CHECK(doc.n_cols == 3);
    CHECK(doc.merges.empty());
    CHECK(cell_at(doc, 0, 0) == "a");
    CHECK(cell_at(doc, 2, 2) == "6");
}

TEST_CASE("csv quoting follows rfc 4180") {
    GridDocument doc = load_grid_from_string("\"a,b\",\"he said \"\"hi\"\"\"\nx,\"multi\nline\"",
                                             GridFormat::Csv);
    CHECK(doc.n_rows == 2);
    CHECK(cell_at(doc, 0, 0) == "a,b");
    CHECK(cell_at(doc, 0, 1) == "he said \"hi\"");
    CHECK(cell_at(doc, 1, 1) == "multi\nline");
}

TEST_CASE("canonical json with a row-spanning merge") {
    std::string j = R"({"doc_id":"d","title":"t","n_rows":2,"n_cols":3,)"
                    R"("rows":[["SHIPPING PLAN SEA AND TRAIN",null,null],["a","b","c"]],)"
                    R"("merges":[{"top":0,"left":0,"height":1,"width":3}],"source_meta":{}})";
    GridDocument doc = load_grid_from_string(j, GridFormat::CanonicalJson);
    REQUIRE(doc.merges.size() == 1);
    CHECK(cell_at(doc, 0, 2) == "SHIPPING PLAN SEA AND TRAIN");
    CHECK(cell_at(doc, 0, 0) == "SHIPPING PLAN SEA AND TRAIN");
}

namespace {

// oracle: pairwise rectangle intersection
bool rects_overlap(const MergeRegion& a, const MergeRegion& b) {
    bool row_disjoint = a.top + a.height <= b.top || b.top + b.height <= a.top;
    bool col_disjoint = a.left + a.width <= b.left || b.left + b.width <= a.left;
    return !row_disjoint && !col_disjoint;
}

} // namespace

TEST_CASE("overlapping merges are rejected") {
    MergeRegion m1{0, 0, 2, 2};
    MergeRegion m2{1, 1, 2, 2};
    REQUIRE(rects_overlap(m1, m2)); // the fixture really overlaps
    std::string j = R"({"doc_id":"d","title":"","n_rows":3,"n_cols":3,)"
                    R"("rows":[["x",null,null],[null,null,null],[null,null,null]],)"
                    R"("merges":[{"top":0,"left":0,"height":2,"width":2},)"
                    R"({"top":1,"left":1,"height":2,"width":2}],"source_meta":{}})";
    CHECK_THROWS_AS(load_grid_from_string(j, GridFormat::CanonicalJson), Error);
}

TEST_CASE("out-of-bounds merge is a validation error") {
    std::string j = R"({"doc_id":"d","title":"","n_rows":2,"n_cols":2,)"
                    R"("rows":[["x",null],[null,null]],)"
                    R"("merges":[{"top":0,"left":0,"height":1,"width":5}],"source_meta":{}})";
    CHECK_THROWS_AS(load_grid_from_string(j, GridFormat::CanonicalJson), Error);
}

TEST_CASE("cell_at merge and empty semantics") {
    GridDocument doc = make_grid("d", "", {{std::string("anchor"), std::nullopt, std::nullopt},
                                           {std::nullopt, std::string("x"), std::nullopt}},
                                 {MergeRegion{0, 0, 1, 3}});
    CHECK(cell_at(doc, 0, 1) == "anchor");
    CHECK(cell_at(doc, 0, 2) == "anchor");
    CHECK(cell_at(doc, 0, 0) == "anchor");
    CHECK_FALSE(cell_at(doc, 1, 0).has_value());
    CHECK(cell_at(doc, 1, 1) == "x");
    CHECK_THROWS_AS(cell_at(doc, 2, 0), Error);
    CHECK_THROWS_AS(cell_at(doc, 0, 3), Error);
}

TEST_CASE("whitespace-only cells normalize to absent") {
    GridDocument doc = load_grid_from_string("a,  ,b\n ,x, ", GridFormat::Csv);
    CHECK_FALSE(cell_at(doc, 0, 1).has_value());
    CHECK_FALSE(cell_at(doc, 1, 0).has_value());
    CHECK(cell_at(doc, 1, 1) == "x");
}

TEST_CASE("covered cells may not carry their own value") {
    std::string j = R"({"doc_id":"d","title":"","n_rows":1,"n_cols":2,)"
                    R"("rows":[["a","b"]],)"
                    R"("merges":[{"top":0,"left":0,"height":1,"width":2}],"source_meta":{}})";
    CHECK_THROWS_AS(load_grid_from_string(j, GridFormat::CanonicalJson), Error);
}

namespace {

GridDocument random_grid(std::mt19937_64& rng) {
    int rows = 1 + static_cast<int>(rng() % 6);
    int cols = 1 + static_cast<int>(rng() % 6);
    std::vector<std::vector<std::optional<std::string>>> cells(
        static_cast<size_t>(rows), std::vector<std::optional<std::string>>(
                                       static_cast<size_t>(cols)));
    for (auto& row : cells)
        for (auto& c : row)
            if (rng() % 3) c = "v" + std::to_string(rng() % 100);
    // occasionally place one merge in the top-left corner where it stays legal
    std::vector<MergeRegion> merges;
    if (rows >= 2 && cols >= 2 && rng() % 2) {
        merges.push_back(MergeRegion{0, 0, 1, 2});
        cells[0][1] = std::nullopt;
        if (!cells[0][0]) cells[0][0] = "anchor";
    }
    std::map<std::string, std::string> meta;
    if (rng() % 2) meta["ingested_at"] = "2025-01-02T03:04:05Z";
    return make_grid("doc" + std::to_string(rng() % 10), "Title " + std::to_string(rng() % 10),
                     std::move(cells), std::move(merges), std::move(meta));
}

} // namespace

TEST_CASE("canonical save/load round trip is byte identical") {
    std::mt19937_64 rng(20250810);
    for (int i = 0; i < 50; ++i) {
        GridDocument doc = random_grid(rng);
        std::string first = save_grid_to_string(doc);
        GridDocument back = load_grid_from_string(first, GridFormat::CanonicalJson);
        std::string second = save_grid_to_string(back);
        REQUIRE(first == second);
    }
}

TEST_CASE("merged positions agree with the anchor everywhere") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 30; ++i) {
        GridDocument doc = random_grid(rng);
        for (const auto& m : doc.merges) {
            auto anchor = cell_at(doc, m.top, m.left);
            for (int r = m.top; r <= m.bottom(); ++r)
                for (int c = m.left; c <= m.right(); ++c)
                    CHECK(cell_at(doc, r, c) == anchor);
        }
    }
}

TEST_CASE("malformed json names the problem") {
    CHECK_THROWS_AS(load_grid_from_string("{not json", GridFormat::CanonicalJson), Error);
    CHECK_THROWS_AS(load_grid_from_string(R"({"doc_id":"d"})", GridFormat::CanonicalJson), Error);
}
