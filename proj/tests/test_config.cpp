#include <doctest.h>

#include "tableqa/config.hpp"
#include "tableqa/errors.hpp"

using namespace tqa;

TEST_CASE("defaults hold the documented values") {
    Config cfg;
    CHECK(cfg.chunk_window == 40);
    CHECK(cfg.theta_link == doctest::Approx(0.55));
    CHECK(cfg.tau == doctest::Approx(0.5));
    CHECK(cfg.beta == doctest::Approx(1.0));
    CHECK(cfg.alpha == doctest::Approx(0.2));
    CHECK(cfg.flag_threshold == doctest::Approx(0.8));
    CHECK(cfg.dup_threshold == doctest::Approx(0.95));
    CHECK(cfg.embedder == "n-gram-512");
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("key=value parsing with comments and quotes") {
    Config cfg = load_config_string("# comment\n"
                                    "chunk_window = 20\n"
                                    "theta_link = 0.6\n"
                                    "store_path = \"/tmp/store\"\n"
                                    "\n"
                                    "rng_seed = 7\n");
    CHECK(cfg.chunk_window == 20);
    CHECK(cfg.theta_link == doctest::Approx(0.6));
    CHECK(cfg.store_path == "/tmp/store");
    CHECK(cfg.rng_seed == 7);
}

TEST_CASE("unknown keys are rejected") {
    CHECK_THROWS_AS(load_config_string("nonsense = 1\n"), Error);
}

TEST_CASE("out-of-range values are rejected") {
    CHECK_THROWS_AS(load_config_string("tau = 0\n"), Error);
    CHECK_THROWS_AS(load_config_string("alpha = 1.5\n"), Error);
    CHECK_THROWS_AS(load_config_string("beta = -1\n"), Error);
    CHECK_THROWS_AS(load_config_string("chunk_window = 0\n"), Error);
    CHECK_THROWS_AS(load_config_string("flag_threshold = 2\n"), Error);
    CHECK_THROWS_AS(load_config_string("embedder = other\n"), Error);
}

TEST_CASE("malformed lines are parse errors") {
    CHECK_THROWS_AS(load_config_string("just a line without equals\n"), Error);
    CHECK_THROWS_AS(load_config_string("tau = not_a_number\n"), Error);
}
