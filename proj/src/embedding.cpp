#include "sysfb/embedding.hpp"

#include <cmath>
#include <future>

#include "sysfb/errors.hpp"
#include "sysfb/hashing.hpp"
#include "sysfb/text_analysis.hpp"

namespace sysfb {

HashedBowEmbedder::HashedBowEmbedder(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw DomainError("embedding dimension must be positive");
}

std::vector<EmbeddingVector> HashedBowEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        EmbeddingVector v(dim_, 0.0);
        for (const auto& tok : tokenize(text)) {
            const auto h = fnv1a64(tok);
            const double sign = (h >> 63) ? -1.0 : 1.0;
            v[h % dim_] += sign;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

RemoteEmbeddingProvider::RemoteEmbeddingProvider(std::string url, std::shared_ptr<HttpTransport> transport,
                                                 RetryPolicy retry, std::size_t batch_size, std::size_t parallelism)
    : url_(std::move(url)),
      transport_(std::move(transport)),
      retry_(retry),
      batch_size_(batch_size ? batch_size : 1),
      parallelism_(parallelism ? parallelism : 1) {}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::fetch(const std::vector<std::string>& batch) {
    const auto reply = with_retries(retry_, [&] { return post_json(*transport_, url_, nlohmann::json{{"texts", batch}}); });
    const auto it = reply.find("vectors");
    if (it == reply.end() || !it->is_array()) throw ContractError("embedding reply lacks \"vectors\"");
    std::vector<EmbeddingVector> vectors;
    for (const auto& row : *it) {
        if (!row.is_array()) throw ContractError("embedding vector is not an array");
        EmbeddingVector v;
        for (const auto& x : row) {
            if (!x.is_number()) throw ContractError("embedding value is not a number");
            v.push_back(x.get<double>());
        }
        vectors.push_back(std::move(v));
    }
    if (vectors.size() != batch.size()) throw ContractError("embedding endpoint returned a wrong vector count");
    return vectors;
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<std::string>> batches;
    for (std::size_t i = 0; i < texts.size(); i += batch_size_) {
        const auto end = std::min(texts.size(), i + batch_size_);
        batches.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(i), texts.begin() + static_cast<std::ptrdiff_t>(end));
    }
    std::vector<std::vector<EmbeddingVector>> results(batches.size());
    // Waves of at most `parallelism_` concurrent requests.
    for (std::size_t start = 0; start < batches.size(); start += parallelism_) {
        std::vector<std::future<std::vector<EmbeddingVector>>> wave;
        const auto stop = std::min(batches.size(), start + parallelism_);
        for (std::size_t b = start; b < stop; ++b) {
            wave.push_back(std::async(std::launch::async, [this, &batches, b] { return fetch(batches[b]); }));
        }
        for (std::size_t b = start; b < stop; ++b) results[b] = wave[b - start].get();
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (auto& r : results) {
        for (auto& v : r) out.push_back(std::move(v));
    }
    return out;
}

std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts, EmbeddingProvider& provider) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (trim(texts[i]).empty()) throw DomainError("text " + std::to_string(i) + " is empty");
    }
    if (texts.empty()) return {};
    auto vectors = provider.embed(texts);
    if (vectors.size() != texts.size()) {
        throw ContractError("provider returned " + std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(texts.size()) + " texts");
    }
    const auto dim = vectors.front().size();
    if (dim == 0) throw ContractError("provider returned zero-dimensional vectors");
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != dim) {
            throw ContractError("vector " + std::to_string(i) + " has dim " + std::to_string(vectors[i].size()) +
                                ", expected " + std::to_string(dim));
        }
        for (double x : vectors[i]) {
            if (!std::isfinite(x)) throw ContractError("vector " + std::to_string(i) + " has a non-finite value");
        }
    }
    return vectors;
}

}  // namespace sysfb
