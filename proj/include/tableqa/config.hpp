#pragma once

#include <cstdint>
#include <string>

namespace tqa {

// Runtime configuration surfaced through the CLI. Loaded from a key=value
// file; flags override file values; unknown keys are rejected.
struct Config {
    std::string store_path;
    int chunk_window = 40;
    double theta_link = 0.55;
    double tau = 0.5;
    double beta = 1.0;
    double alpha = 0.2;
    double flag_threshold = 0.8;
    double dup_threshold = 0.95;
    uint64_t rng_seed = 42;
    std::string embedder = "n-gram-512";

    void validate() const;
};

Config load_config_file(const std::string& path);
Config load_config_string(const std::string& content);

} // namespace tqa
