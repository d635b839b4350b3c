#include "tableqa/embed.hpp"

#include "tableqa/errors.hpp"
#include "tableqa/text.hpp"

#include <cmath>
#include <cstdint>

namespace tqa {

namespace {

uint64_t fnv1a(const char* data, size_t len) {
    uint64_t h = 1469598103934665603ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

std::vector<double> NgramHashEmbedder::embed(const std::string& raw) const {
    std::vector<double> v(kDim, 0.0);
    std::string s = text::to_lower(raw);
    if (s.empty()) {
        double c = 1.0 / std::sqrt(static_cast<double>(kDim));
        std::fill(v.begin(), v.end(), c);
        return v;
    }
    auto add_gram = [&](const char* p, size_t len) {
        uint64_t h = fnv1a(p, len);
        size_t idx = static_cast<size_t>(h % kDim);
        double sign = ((h >> 32) & 1) ? 1.0 : -1.0;
        v[idx] += sign;
    };
    if (s.size() < 3) {
        add_gram(s.data(), s.size());
    } else {
        for (size_t i = 0; i + 3 <= s.size(); ++i) add_gram(s.data() + i, 3);
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        // signs cancelled exactly; fall back to the uninformative vector
        double c = 1.0 / std::sqrt(static_cast<double>(kDim));
        std::fill(v.begin(), v.end(), c);
        return v;
    }
    for (double& x : v) x /= norm;
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw validation_error("cosine: dimension mismatch");
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot;
}

std::unique_ptr<EmbeddingProvider> make_embedder(const std::string& name) {
    if (name == "n-gram-512") return std::make_unique<NgramHashEmbedder>();
    throw validation_error("unknown embedder: " + name);
}

} // namespace tqa
