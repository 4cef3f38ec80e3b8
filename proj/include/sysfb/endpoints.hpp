#pragma once

#include <memory>
#include <string>

#include "sysfb/embedding.hpp"
#include "sysfb/gateway.hpp"
#include "sysfb/http.hpp"
#include "sysfb/metrics.hpp"
#include "sysfb/quality_checker.hpp"

namespace sysfb {

// Endpoint URLs select an implementation by scheme:
//   http(s)://...        remote service
//   builtin              in-process implementation (embedder, grammar)
//   stub://<name>[?...]  deterministic offline stand-in for a model
//
// Stubs:
//   stub://refiner       echoes the original text plus one " detail" per criterion
//   stub://judge         reasoning line then a hash-chosen Y/N, printed twice;
//                        ?verdict=Y or ?verdict=N pins the answer
//   stub://feedback      a fixed feedback sentence
//   stub://checker       hash-derived score, at least 0.5 iff the text has 4+ tokens;
//                        ?score=X always answers X
//   stub://pagecount     hash-derived page count
//   stub://embedder      same as builtin

bool is_stub_url(const std::string& url);
bool is_builtin_url(const std::string& url);
bool is_remote_url(const std::string& url);

inline constexpr const char* kStubFeedback =
    "The response should answer the user's question directly and use the search results.";

/// Pulls the original query or response back out of a rendered refinement prompt.
std::string original_from_refinement_prompt(const std::string& prompt);
/// Number of "(k) " items in the criteria block of a refinement prompt.
std::size_t criteria_count_in_prompt(const std::string& prompt);

std::shared_ptr<CompletionClient> make_completion_client(const std::string& url, const std::string& api_key,
                                                         std::shared_ptr<HttpTransport> transport);
std::shared_ptr<ScoreClient> make_score_client(const std::string& url, std::shared_ptr<HttpTransport> transport);
std::shared_ptr<SearchCountClient> make_search_client(const std::string& url, std::shared_ptr<HttpTransport> transport);
std::shared_ptr<EmbeddingProvider> make_embedder(const std::string& url, std::shared_ptr<HttpTransport> transport,
                                                 RetryPolicy retry, std::size_t parallelism);
std::shared_ptr<GrammarChecker> make_grammar_checker(const std::string& url, std::shared_ptr<HttpTransport> transport);

}  // namespace sysfb
