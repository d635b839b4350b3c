#pragma once

#include <memory>
#include <string>
#include <vector>

namespace tqa {

// Deterministic text embedding contract: unit L2 norm, identical input gives
// identical output. The default is a hashing embedder; real services plug in
// behind this interface.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual const std::string& name() const = 0;
    virtual size_t dim() const = 0;
    virtual std::vector<double> embed(const std::string& text) const = 0;
};

// Character 3-grams of the lowercased input, signed-hashed into a fixed
// 512-dim space and L2 normalized. Inputs shorter than three characters hash
// as a single gram; the empty string maps to the all-equal unit vector.
class NgramHashEmbedder final : public EmbeddingProvider {
public:
    static constexpr size_t kDim = 512;

    const std::string& name() const override { return name_; }
    size_t dim() const override { return kDim; }
    std::vector<double> embed(const std::string& text) const override;

private:
    std::string name_ = "n-gram-512";
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

std::unique_ptr<EmbeddingProvider> make_embedder(const std::string& name);

} // namespace tqa
