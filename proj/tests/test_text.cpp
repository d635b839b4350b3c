#include <doctest.h>

#include "tableqa/text.hpp"

using namespace tqa;

TEST_CASE("parse_number accepts plain and signed numerics") {
    CHECK(text::parse_number("600") == 600.0);
    CHECK(text::parse_number("-1010") == -1010.0);
    CHECK(text::parse_number("+3.5") == 3.5);
    CHECK(text::parse_number("  42  ") == 42.0);
    CHECK(text::parse_number("1e3") == 1000.0);
    CHECK(text::parse_number(".5") == 0.5);
}

TEST_CASE("parse_number accepts thousands separators with proper grouping") {
    CHECK(text::parse_number("4,444") == 4444.0);
    CHECK(text::parse_number("245,036") == 245036.0);
    CHECK(text::parse_number("1,234,567.89") == doctest::Approx(1234567.89));
    CHECK_FALSE(text::parse_number("1,23").has_value());
    CHECK_FALSE(text::parse_number("12,3456").has_value());
    CHECK_FALSE(text::parse_number(",123").has_value());
}

TEST_CASE("parse_number handles currency and parenthesized negatives") {
    CHECK(text::parse_number("$1,200") == 1200.0);
    CHECK(text::parse_number("€99.5") == 99.5);
    CHECK(text::parse_number("(250)") == -250.0);
    CHECK(text::parse_number("($1,250)") == -1250.0);
}

TEST_CASE("parse_number rejects non-numbers") {
    CHECK_FALSE(text::parse_number("W16").has_value());
    CHECK_FALSE(text::parse_number("C01").has_value());
    CHECK_FALSE(text::parse_number("14-Apr-2025").has_value());
    CHECK_FALSE(text::parse_number("").has_value());
    CHECK_FALSE(text::parse_number("  ").has_value());
    CHECK_FALSE(text::parse_number("12abc").has_value());
}

TEST_CASE("format_number renders integers without decimals or separators") {
    CHECK(text::format_number(4444.0) == "4444");
    CHECK(text::format_number(-1010.0) == "-1010");
    CHECK(text::format_number(0.0) == "0");
    CHECK(text::format_number(2.5) == "2.5");
}

TEST_CASE("extract_numbers finds grouped literals inside prose") {
    auto nums = text::extract_numbers("total_production = 245,036 units over 13 weeks");
    REQUIRE(nums.size() == 2);
    CHECK(nums[0] == 245036.0);
    CHECK(nums[1] == 13.0);
}

TEST_CASE("date parsing recognizes the four label formats") {
    auto d1 = text::parse_date("14-Apr-2025");
    REQUIRE(d1.has_value());
    CHECK(*d1 == text::Date{2025, 4, 14});
    auto d2 = text::parse_date("5-May-2025");
    REQUIRE(d2.has_value());
    CHECK(*d2 == text::Date{2025, 5, 5});
    auto d3 = text::parse_date("Jan 06 2025");
    REQUIRE(d3.has_value());
    CHECK(*d3 == text::Date{2025, 1, 6});
    auto d4 = text::parse_date("2025-03-31");
    REQUIRE(d4.has_value());
    CHECK(*d4 == text::Date{2025, 3, 31});
    auto d5 = text::parse_date("Dec 30, 2024");
    REQUIRE(d5.has_value());
    CHECK(*d5 == text::Date{2024, 12, 30});
    CHECK_FALSE(text::parse_date("Stock").has_value());
    CHECK_FALSE(text::parse_date("2025-13-01").has_value());
    CHECK_FALSE(text::parse_date("30-Feb-2025").has_value());
}

TEST_CASE("format_date_label zero-pads the day") {
    CHECK(text::format_date_label(text::Date{2025, 4, 14}) == "Apr_14_2025");
    CHECK(text::format_date_label(text::Date{2025, 1, 6}) == "Jan_06_2025");
}

TEST_CASE("sentence splitting on terminal punctuation") {
    auto s = text::split_sentences("First part. Second part! Third?");
    REQUIRE(s.size() == 3);
    CHECK(s[0] == "First part.");
    CHECK(s[2] == "Third?");
    CHECK(text::split_sentences("no terminal").size() == 1);
    // a dot inside a token does not split
    CHECK(text::split_sentences("value 3.5 stays whole.").size() == 1);
}

TEST_CASE("token_f1 basics") {
    CHECK(text::token_f1("alpha beta", "alpha beta") == doctest::Approx(1.0));
    CHECK(text::token_f1("alpha beta", "gamma delta") == doctest::Approx(0.0));
    // one shared token of two each: precision = recall = 0.5
    CHECK(text::token_f1("alpha beta", "alpha gamma") == doctest::Approx(0.5));
}
