#include "tableqa/config.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <fstream>
#include <sstream>

namespace tqa {

void Config::validate() const {
    if (chunk_window < 1) throw validation_error("config: chunk_window must be >= 1");
    if (theta_link < 0.0 || theta_link > 1.0)
        throw validation_error("config: theta_link must be in [0,1]");
    if (!(tau > 0.0)) throw validation_error("config: tau must be > 0");
    if (beta < 0.0) throw validation_error("config: beta must be >= 0");
    if (!(alpha > 0.0) || alpha > 1.0) throw validation_error("config: alpha must be in (0,1]");
    if (flag_threshold < 0.0 || flag_threshold > 1.0)
        throw validation_error("config: flag_threshold must be in [0,1]");
    if (dup_threshold < 0.0 || dup_threshold > 1.0)
        throw validation_error("config: dup_threshold must be in [0,1]");
    if (embedder != "n-gram-512")
        throw validation_error("config: unknown embedder '" + embedder + "'");
}

Config load_config_string(const std::string& content) {
    Config cfg;
    std::istringstream in(content);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = text::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw parse_error("config line " + std::to_string(line_no) + ": expected key=value");
        std::string key = text::trim(t.substr(0, eq));
        std::string value = text::trim(t.substr(eq + 1));
        // strip optional quotes
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        auto as_double = [&](const std::string& v) {
            auto n = text::parse_number(v);
            if (!n)
                throw parse_error("config line " + std::to_string(line_no) +
                                  ": expected number for " + key);
            return *n;
        };
        if (key == "store_path") cfg.store_path = value;
        else if (key == "chunk_window") cfg.chunk_window = static_cast<int>(as_double(value));
        else if (key == "theta_link") cfg.theta_link = as_double(value);
        else if (key == "tau") cfg.tau = as_double(value);
        else if (key == "beta") cfg.beta = as_double(value);
        else if (key == "alpha") cfg.alpha = as_double(value);
        else if (key == "flag_threshold") cfg.flag_threshold = as_double(value);
        else if (key == "dup_threshold") cfg.dup_threshold = as_double(value);
        else if (key == "rng_seed") cfg.rng_seed = static_cast<uint64_t>(as_double(value));
        else if (key == "embedder") cfg.embedder = value;
        else
            throw validation_error("config line " + std::to_string(line_no) +
                                   ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw not_found_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config_string(buf.str());
}

} // namespace tqa
