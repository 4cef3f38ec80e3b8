#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sysfb/http.hpp"

namespace sysfb {

using EmbeddingVector = std::vector<double>;

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

/// Deterministic offline embedder: each token is hashed to a signed slot of
/// a `dim`-wide vector, and the result is L2-normalized.
class HashedBowEmbedder : public EmbeddingProvider {
public:
    static constexpr std::size_t kDefaultDim = 256;
    explicit HashedBowEmbedder(std::size_t dim = kDefaultDim);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::size_t dim() const { return dim_; }

private:
    std::size_t dim_;
};

/// Remote encoder: POST {"texts": [...]} -> {"vectors": [[...]]}, in batches
/// fetched with bounded parallelism.
class RemoteEmbeddingProvider : public EmbeddingProvider {
public:
    RemoteEmbeddingProvider(std::string url, std::shared_ptr<HttpTransport> transport, RetryPolicy retry = {},
                            std::size_t batch_size = 64, std::size_t parallelism = 4);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    std::vector<EmbeddingVector> fetch(const std::vector<std::string>& batch);

    std::string url_;
    std::shared_ptr<HttpTransport> transport_;
    RetryPolicy retry_;
    std::size_t batch_size_;
    std::size_t parallelism_;
};

/// Validates inputs and provider output: non-empty texts, one vector per
/// text, a shared dimension and finite values. Contract violations throw
/// ContractError.
std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts, EmbeddingProvider& provider);

}  // namespace sysfb
