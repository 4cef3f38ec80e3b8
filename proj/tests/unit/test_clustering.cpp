#include <doctest.h>

#include <cmath>

#include "sysfb/embedding.hpp"
#include "sysfb/errors.hpp"
#include "sysfb/kmeans.hpp"
#include "test_support.hpp"

using namespace sysfb;

namespace {

struct Blobs {
    std::vector<EmbeddingVector> points;
    std::vector<std::size_t> labels;
};

Blobs three_blobs(std::uint64_t seed, std::size_t per_blob = 20) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    const std::vector<EmbeddingVector> centers{{0, 0, 0}, {10, 0, 0}, {0, 10, 10}};
    Blobs b;
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            EmbeddingVector p = centers[c];
            for (auto& x : p) x += noise(rng);
            b.points.push_back(p);
            b.labels.push_back(c);
        }
    }
    return b;
}

// Pairwise check: every pair of points is together in both labelings or in neither.
bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
        }
    }
    return true;
}

}  // namespace

TEST_SUITE("clustering") {
    TEST_CASE("builtin embedder is deterministic and normalized") {
        HashedBowEmbedder e;
        const auto v = embed_batch({"a", "b", "a"}, e);
        REQUIRE(v.size() == 3);
        CHECK(v[0].size() == 256);
        CHECK(v[1].size() == 256);
        CHECK(v[0] != v[1]);
        CHECK(v[0] == v[2]);
        double norm = 0;
        for (double x : v[0]) norm += x * x;
        CHECK(norm == doctest::Approx(1.0));
        HashedBowEmbedder small(8);
        CHECK(small.embed({"x y z"})[0].size() == 8);
        CHECK_THROWS_AS(embed_batch({"ok", "  "}, e), DomainError);
    }

    TEST_CASE("remote embedder returns the stub's vectors in order") {
        auto transport = std::make_shared<test::ScriptedTransport>([](const std::string&, const std::string& body) {
            const auto req = json::parse(body);
            json vectors = json::array();
            for (const auto& t : req["texts"]) {
                const auto i = std::stoul(t.get<std::string>().substr(1));
                json v = json::array();
                for (std::size_t d = 0; d < 100; ++d) v.push_back(d == i ? 1.0 : 0.0);
                vectors.push_back(v);
            }
            return HttpResponse{200, json{{"vectors", vectors}}.dump()};
        });
        RemoteEmbeddingProvider provider("http://127.0.0.1:9/embed", transport, RetryPolicy{1, std::chrono::milliseconds(0)}, 16, 4);
        std::vector<std::string> texts;
        for (int i = 0; i < 100; ++i) texts.push_back("t" + std::to_string(i));
        const auto v = embed_batch(texts, provider);
        REQUIRE(v.size() == 100);
        for (std::size_t i = 0; i < 100; ++i) {
            for (std::size_t d = 0; d < 100; ++d) CHECK(v[i][d] == (d == i ? 1.0 : 0.0));
        }
        CHECK(transport->calls() == 7);
    }

    TEST_CASE("remote embedder contract violations") {
        std::string reply = json{{"vectors", {{1.0, 0.0}}}}.dump();
        auto transport = std::make_shared<test::ScriptedTransport>(
            [&](const std::string&, const std::string&) { return HttpResponse{200, reply}; });
        RemoteEmbeddingProvider provider("http://127.0.0.1:9/embed", transport, RetryPolicy{1, std::chrono::milliseconds(0)});
        CHECK_THROWS_AS(embed_batch({"a", "b"}, provider), ContractError);
        reply = json{{"vectors", {{1.0, 0.0}, {1.0}}}}.dump();
        CHECK_THROWS_AS(embed_batch({"a", "b"}, provider), ContractError);
        reply = R"({"nothing": 1})";
        CHECK_THROWS_AS(embed_batch({"a"}, provider), ContractError);
    }

    TEST_CASE("k equal to n gives singletons with zero distortion") {
        const auto b = three_blobs(1, 3);
        const auto m = kmeans(b.points, b.points.size(), 5);
        auto sizes = m.cluster_sizes();
        CHECK(std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s == 1; }));
        CHECK(m.distortion_trace.back() == doctest::Approx(0.0));
    }

    TEST_CASE("three separated blobs are recovered") {
        const auto b = three_blobs(42);
        const auto m = kmeans(b.points, 3, 7);
        CHECK(adjusted_rand_index(m.assignment, b.labels) == doctest::Approx(1.0));
        CHECK(same_partition(m.assignment, b.labels));
    }

    TEST_CASE("kmeans is deterministic for a seed") {
        const auto b = three_blobs(9, 15);
        const auto first = kmeans(b.points, 4, 123);
        for (int run = 0; run < 5; ++run) {
            const auto again = kmeans(b.points, 4, 123);
            CHECK(again.assignment == first.assignment);
            CHECK(again.centroids == first.centroids);
        }
    }

    TEST_CASE("distortion never increases") {
        test::Gen g(21);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<EmbeddingVector> pts;
            const auto n = g.range(5, 40);
            for (std::size_t i = 0; i < n; ++i) pts.push_back({g.unit() * 10, g.unit() * 10});
            const auto m = kmeans(pts, g.range(1, 5), trial);
            for (std::size_t i = 1; i < m.distortion_trace.size(); ++i) {
                CHECK(m.distortion_trace[i] <= m.distortion_trace[i - 1] + 1e-9);
            }
        }
    }

    TEST_CASE("identical points still fill every cluster") {
        std::vector<EmbeddingVector> pts(6, EmbeddingVector{1.0, 1.0});
        const auto m = kmeans(pts, 2, 3);
        const auto sizes = m.cluster_sizes();
        REQUIRE(sizes.size() == 2);
        CHECK(sizes[0] > 0);
        CHECK(sizes[1] > 0);
    }

    TEST_CASE("invalid k") {
        std::vector<EmbeddingVector> pts{{0.0}, {1.0}};
        CHECK_THROWS_AS(kmeans(pts, 3, 0), DomainError);
        CHECK_THROWS_AS(kmeans(pts, 0, 0), DomainError);
    }

    TEST_CASE("adjusted rand index properties") {
        CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
        CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1}) < 0.0);
        test::Gen g(5);
        for (int i = 0; i < 200; ++i) {
            const auto n = g.range(2, 20);
            std::vector<std::size_t> a(n), b(n);
            for (auto& x : a) x = g.index(3);
            for (auto& x : b) x = g.index(3);
            CHECK(adjusted_rand_index(a, b) == doctest::Approx(adjusted_rand_index(b, a)));
            CHECK(adjusted_rand_index(a, b) <= 1.0 + 1e-12);
        }
        CHECK_THROWS_AS(adjusted_rand_index({0}, {0, 1}), DomainError);
    }
}
