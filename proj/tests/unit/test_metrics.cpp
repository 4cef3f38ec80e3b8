#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sysfb/errors.hpp"
#include "sysfb/metrics.hpp"
#include "sysfb/prompts.hpp"
#include "test_support.hpp"

using namespace sysfb;

namespace {

DialogContext ctx(const std::string& text) { return DialogContext{"c", {Turn{Speaker::user, text}}}; }

Gateway::Options quick() {
    Gateway::Options o;
    o.retry = RetryPolicy{1, std::chrono::milliseconds(0), 2.0};
    return o;
}

std::unique_ptr<Gateway> fixed_judge(const std::string& reply) {
    auto client = std::make_shared<FunctionCompletionClient>([reply](const CompletionRequest&) { return reply; });
    return std::make_unique<Gateway>(client, nullptr, quick());
}

SearchDocument doc(const std::string& content) { return SearchDocument{"", content, std::nullopt}; }

class AcceptAll : public GrammarChecker {
public:
    bool is_grammatical(const std::string&) override { return true; }
    std::string name() const override { return "accept-all"; }
};

std::vector<bool> with_matches(std::size_t n, std::size_t matches, const std::vector<bool>& base) {
    std::vector<bool> out = base;
    for (std::size_t i = matches; i < n; ++i) out[i] = !out[i];
    return out;
}

}  // namespace

TEST_SUITE("metrics") {
    TEST_CASE("non-copy rate examples") {
        CHECK(non_copy_rate("Who scored in the final?", "who scored in the final") == doctest::Approx(1.0));
        CHECK(non_copy_rate("alpha beta gamma delta", "one two three four") == doctest::Approx(100.0));
        CHECK(non_copy_rate(test::kQuarterBleuCandidate, test::kQuarterBleuReference) == doctest::Approx(4.0).epsilon(1e-12));
        CHECK_THROWS_AS(non_copy_rate("...", "who"), DomainError);
    }

    TEST_CASE("readability examples") {
        std::vector<std::string> words;
        for (int i = 1; i <= 333333; ++i) words.push_back("w" + std::to_string(i));
        const WordFrequencyTable table(words);
        CHECK(readability("w1", table, 100000) == doctest::Approx(100000.0));
        CHECK(readability("w100 w300", table, 100000) == doctest::Approx(500.0));
        CHECK(readability("zyzzyva qwxyz", table, 100000) == doctest::Approx(100000.0 / 333334.0));
        CHECK_THROWS_AS(readability("", table, 100000), DomainError);
    }

    TEST_CASE("conciseness examples") {
        CHECK(conciseness("one two three four five") == 20.0);
        CHECK(conciseness("one") == 100.0);
        std::string q;
        for (int i = 0; i < 25; ++i) q += "w ";
        CHECK(conciseness(q) == 4.0);
        CHECK_THROWS_AS(conciseness("?!"), DomainError);
    }

    TEST_CASE("coverage examples") {
        CHECK(coverage({{"a", 1000}, {"b", 5000}, {"c", 500}}) == std::map<std::string, int>{{"a", 0}, {"b", 1}, {"c", 0}});
        CHECK(coverage({{"only", 3}}) == std::map<std::string, int>{{"only", 1}});
        CHECK(coverage({{"a", 7}, {"b", 7}}) == std::map<std::string, int>{{"a", 1}, {"b", 1}});
        test::Gen g(8);
        for (int i = 0; i < 200; ++i) {
            std::map<std::string, std::int64_t> counts;
            const auto n = g.range(1, 6);
            for (std::size_t v = 0; v < n; ++v) counts["v" + std::to_string(v)] = static_cast<std::int64_t>(g.index(4));
            const auto cov = coverage(counts);
            std::int64_t best = 0;
            for (const auto& [_, c] : counts) best = std::max(best, c);
            int ones = 0;
            for (const auto& [v, flag] : cov) {
                ones += flag;
                CHECK((flag == 1) == (counts[v] == best));
            }
            CHECK(ones >= 1);
        }
    }

    TEST_CASE("groundedness examples") {
        const std::string response = "the cat sat on the mat";
        CHECK(groundedness(response, {doc("The cat sat on the mat.")}) == doctest::Approx(1.0));
        CHECK(groundedness(response, {doc("dogs bark loudly")}) == 0.0);
        const auto low = doc("the cat sat down near the mat in a quiet room of the old house today");
        const auto high = doc("the cat sat on the rug");
        CHECK(rouge2_f1(tokenize(response), tokenize(low.content)) == doctest::Approx(0.3));
        CHECK(rouge2_f1(tokenize(response), tokenize(high.content)) == doctest::Approx(0.8));
        CHECK(groundedness(response, {low, high}) == doctest::Approx(0.8));
        CHECK_THROWS_AS(groundedness(response, {}), DomainError);
    }

    TEST_CASE("formula metrics agree with the oracles on random inputs") {
        test::Gen g(1234);
        std::vector<std::string> words;
        for (int i = 0; i < 40; ++i) words.push_back(g.word(6, 3));
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
        const WordFrequencyTable table(words);
        for (int i = 0; i < 1000; ++i) {
            const auto q = g.sentence(g.range(1, 12));
            const auto u = g.sentence(g.range(1, 12));
            CHECK(non_copy_rate(q, u) == doctest::Approx(test::oracle::non_copy(q, u)).epsilon(1e-9));
            CHECK(readability(q, table, 100000) == doctest::Approx(test::oracle::readability(q, words, 100000)).epsilon(1e-9));
            CHECK(conciseness(q) == doctest::Approx(test::oracle::conciseness(q)).epsilon(1e-9));
            std::vector<SearchDocument> docs;
            std::vector<std::string> contents;
            for (std::size_t d = 0, n = g.range(1, 3); d < n; ++d) {
                contents.push_back(g.sentence(g.range(1, 15)));
                docs.push_back(doc(contents.back()));
            }
            CHECK(groundedness(u, docs) == doctest::Approx(test::oracle::groundedness(u, contents)).epsilon(1e-9));
        }
    }

    TEST_CASE("confidence examples") {
        CHECK(confidence("I'm not sure, but it might be Paris.") == 0);
        CHECK(confidence("Paris is the capital of France.") == 1);
        CHECK(confidence("i DON'T know") == 0);
        CHECK(confidence("I don\xE2\x80\x99t know the score.") == 0);
        CHECK(confidence("I do not know.") == 0);
        CHECK(confidence("I know the answer.") == 1);
    }

    TEST_CASE("judge metrics read the verdict") {
        auto yes = fixed_judge("The query names the match.\nY\nY");
        auto no = fixed_judge("It drifts off topic.\nN\nN");
        const auto c = ctx("Who won?");
        const std::vector<SearchDocument> docs{doc("France won.")};
        CHECK(judge_metric(JudgeKind::specificity, c, "world cup winner", {}, *yes).value == 1);
        CHECK(judge_metric(JudgeKind::relevance, c, "France won.", {}, *no).value == 0);
        CHECK(judge_metric(JudgeKind::factuality, c, "France won.", docs, *yes).value == 1);
        const auto out = judge_metric(JudgeKind::helpfulness, c, "France won.", {}, *no);
        CHECK(out.verdict.reasoning == "It drifts off topic.");
        CHECK_THROWS_AS(judge_metric(JudgeKind::factuality, c, "France won.", {}, *yes), DomainError);
        auto garbled = fixed_judge("I think Y is right");
        CHECK_THROWS_AS(judge_metric(JudgeKind::relevance, c, "x", {}, *garbled), VerdictParseError);
    }

    TEST_CASE("judge prompt and token budget") {
        CompletionRequest seen;
        auto client = std::make_shared<FunctionCompletionClient>([&](const CompletionRequest& r) {
            seen = r;
            return std::string("ok\nY\nY");
        });
        Gateway judge(client, nullptr, quick());
        const std::vector<SearchDocument> docs{SearchDocument{"T", "France won.", std::nullopt}};
        judge_metric(JudgeKind::factuality, ctx("Who won?"), "France.", docs, judge);
        CHECK(seen.max_tokens == kJudgeMaxTokens);
        CHECK(seen.prompt == render(PromptName::judge_factuality, {{"DIALOG_CONTEXT", "User: Who won?"},
                                                                    {"SEARCH_DOCUMENTS", "T: France won."},
                                                                    {"RESPONSE", "France."}}));
    }

    TEST_CASE("stray Y and N words in reasoning are not verdicts") {
        test::Gen g(77);
        const std::vector<std::string> filler{"Y is a letter.", "N N N words", "The answer is Y", "Yes.", "N/A", "no Y"};
        for (int i = 0; i < 300; ++i) {
            std::string raw;
            for (std::size_t k = 0, n = g.range(1, 4); k < n; ++k) raw += filler[g.index(filler.size())] + "\n";
            const bool truth = g.coin();
            raw += truth ? "Y\nY" : "N\nN";
            auto judge = fixed_judge(raw);
            CHECK(judge_metric(JudgeKind::relevance, ctx("q"), "r", {}, *judge).value == (truth ? 1 : 0));
        }
    }

    TEST_CASE("satisfaction follows the calibrated threshold") {
        CheckerCalibration cal{0.8, 1.0, 1.0, 10, true, 0.8};
        auto score = 0.95;
        QualityChecker q(std::make_shared<FunctionScoreClient>(
                             [&](TargetKind, const std::string&, const std::string&) { return score; }),
                         nullptr);
        CHECK(satisfaction(ctx("u"), "text a", TargetKind::query, q, cal) == 1);
        score = 0.5;
        CHECK(satisfaction(ctx("u"), "text b", TargetKind::query, q, cal) == 0);
    }

    TEST_CASE("satisfaction aggregate counts accepted items") {
        test::Gen g(55);
        CheckerCalibration cal{0.6, 1.0, 1.0, 10, true, 0.8};
        std::map<std::string, double> scores;
        QualityChecker q(std::make_shared<FunctionScoreClient>(
                             [&](TargetKind, const std::string&, const std::string& t) { return scores.at(t); }),
                         nullptr);
        PerItem per_item;
        long long accepted = 0;
        for (int i = 0; i < 100; ++i) {
            const auto text = "item " + std::to_string(i);
            scores[text] = g.unit();
            accepted += scores[text] >= 0.6;
            per_item[text][metric::satisfaction] = satisfaction(ctx("u"), text, TargetKind::query, q, cal);
        }
        CHECK(aggregate_query_suite(per_item).at(metric::satisfaction) == doctest::Approx(accepted));
    }

    TEST_CASE("query aggregation uses the reciprocal of the mean denominator") {
        PerItem items{{"a", {{metric::conciseness, conciseness("w w w w")}}},
                      {"b", {{metric::conciseness, conciseness("w w w w w w")}}}};
        const double agg = aggregate_query_suite(items).at(metric::conciseness);
        CHECK(agg == doctest::Approx(20.0).epsilon(1e-12));
        const double mean_of_values = (25.0 + 100.0 / 6.0) / 2.0;
        CHECK(mean_of_values == doctest::Approx(20.83).epsilon(1e-3));
        CHECK(std::abs(agg - mean_of_values) > 0.5);

        PerItem nc{{"a", {{metric::non_copy, 1.0 / 0.5}}}, {"b", {{metric::non_copy, 1.0 / 0.5}}}};
        CHECK(aggregate_query_suite(nc).at(metric::non_copy) == doctest::Approx(2.0));

        PerItem cov;
        const std::vector<int> flags{1, 0, 0, 1};
        for (std::size_t i = 0; i < flags.size(); ++i) cov["c" + std::to_string(i)][metric::coverage] = flags[i];
        CHECK(aggregate_query_suite(cov).at(metric::coverage) == 50.0);

        PerItem rd{{"a", {{metric::readability, 100000.0 / 100}}}, {"b", {{metric::readability, 100000.0 / 300}}}};
        CHECK(aggregate_query_suite(rd, 100000).at(metric::readability) == doctest::Approx(500.0));
        CHECK_THROWS_AS(aggregate_query_suite({}), DomainError);
    }

    TEST_CASE("aggregate ranges") {
        test::Gen g(66);
        for (int i = 0; i < 200; ++i) {
            PerItem items;
            for (std::size_t k = 0, n = g.range(1, 10); k < n; ++k) {
                auto& v = items["i" + std::to_string(k)];
                v[metric::conciseness] = 100.0 / double(g.range(1, 30));
                v[metric::specificity] = g.coin();
                v[metric::non_copy] = 1.0 + g.unit() * 99;
            }
            const auto agg = aggregate_query_suite(items);
            CHECK(agg.at(metric::specificity) >= 0.0);
            CHECK(agg.at(metric::specificity) <= 100.0);
            CHECK(agg.at(metric::conciseness) > 0.0);
            CHECK(agg.at(metric::non_copy) > 0.0);
        }
    }

    TEST_CASE("response aggregation is a plain mean") {
        PerItem items{{"a", {{metric::groundedness, 0.5}, {metric::confidence, 1}, {metric::factuality, 1}}},
                      {"b", {{metric::groundedness, 0.3}, {metric::confidence, 1}, {metric::factuality, 1}}},
                      {"c", {{metric::confidence, 0}, {metric::factuality, 1}}},
                      {"d", {{metric::confidence, 1}, {metric::factuality, 1}}}};
        const auto agg = aggregate_response_suite(items);
        CHECK(agg.at(metric::groundedness) == doctest::Approx(40.0));
        CHECK(agg.at(metric::confidence) == doctest::Approx(75.0));
        CHECK(agg.at(metric::factuality) == doctest::Approx(100.0));
        CHECK_THROWS_AS(aggregate_response_suite({}), DomainError);
    }

    TEST_CASE("feedback characterization") {
        AcceptAll all;
        auto report = feedback_characterization({{"f1", "good good", true}, {"f2", "good", false}}, all);
        CHECK(report.aggregate.at(metric::diversity) == doctest::Approx(100.0 / 3.0));
        CHECK(report.aggregate.at(metric::verbosity) == doctest::Approx(1.5));
        report = feedback_characterization({{"a", "Use the results.", true},
                                            {"b", "Be brief.", false},
                                            {"c", "Answer directly. Cite the page.", true},
                                            {"d", "Say the score.", true}},
                                           all);
        CHECK(report.aggregate.at(metric::success_rate) == doctest::Approx(75.0));
        CHECK(report.aggregate.at(metric::grammar) == doctest::Approx(100.0));
        CHECK(report.per_item.at("c").at("sentences") == 2);
        HeuristicGrammarChecker heuristic;
        report = feedback_characterization({{"a", "Use the results. please be brief", true}}, heuristic);
        CHECK(report.aggregate.at(metric::grammar) == doctest::Approx(50.0));
        CHECK_THROWS_AS(feedback_characterization({}, all), DomainError);
    }

    TEST_CASE("sentence splitting") {
        CHECK(split_sentences("One. Two! Three?") == std::vector<std::string>{"One.", "Two!", "Three?"});
        CHECK(split_sentences("Version 2.5 is out. Yes") == std::vector<std::string>{"Version 2.5 is out.", "Yes"});
        CHECK(split_sentences("  ").empty());
        CHECK(split_sentences("Wait... what?!") == std::vector<std::string>{"Wait...", "what?!"});
    }

    TEST_CASE("agreement arithmetic") {
        test::Gen g(50);
        std::vector<bool> human(50);
        for (std::size_t i = 0; i < 50; ++i) human[i] = g.coin();
        CHECK(agreement(with_matches(50, 40, human), human) == doctest::Approx(0.80));
        CHECK(agreement(with_matches(50, 44, human), human) == doctest::Approx(0.88));
        CHECK(agreement(with_matches(50, 42, human), human) == doctest::Approx(0.84));
        CHECK(agreement(human, human) == 1.0);
        CHECK_THROWS_AS(agreement({true}, {true, false}), DomainError);
    }

    TEST_CASE("majority vote over three labels") {
        CHECK(majority_vote({true, true, false}));
        for (int mask = 0; mask < 8; ++mask) {
            const std::vector<bool> v{bool(mask & 1), bool(mask & 2), bool(mask & 4)};
            const int yes = int(v[0]) + int(v[1]) + int(v[2]);
            CHECK(majority_vote(v) == (yes >= 2));
        }
        CHECK_THROWS_AS(majority_vote({true, false}), DomainError);
    }

    TEST_CASE("item evaluation") {
        const WordFrequencyTable table({"the", "world", "cup", "final"});
        auto judge = fixed_judge("fine\nY\nY");
        QualityChecker q(std::make_shared<FunctionScoreClient>([](TargetKind, const std::string&, const std::string&) {
                             return 0.9;
                         }),
                         nullptr);
        EvalResources res{&table, 100000, judge.get(), &q, CheckerCalibration{0.5, 1, 1, 1, true, 0.8}};
        const auto c = ctx("Who won the world cup final?");
        const auto qe = evaluate_query_item(c, "world cup final", res);
        CHECK(qe.values.at(metric::conciseness) == doctest::Approx(100.0 / 3));
        CHECK(qe.values.at(metric::readability) == doctest::Approx(100000.0 / 3));
        CHECK(qe.values.at(metric::specificity) == 1);
        CHECK(qe.values.at(metric::satisfaction) == 1);
        CHECK(qe.traces.count(metric::specificity) == 1);
        const auto re = evaluate_response_item(c, "France won it.", {doc("France won the final.")}, res);
        for (const char* m : {metric::groundedness, metric::factuality, metric::helpfulness, metric::relevance,
                              metric::confidence, metric::satisfaction}) {
            CHECK(re.values.count(m) == 1);
        }
        const auto bare = evaluate_response_item(c, "France won it.", {}, EvalResources{});
        CHECK(bare.values.size() == 1);
        CHECK(bare.values.count(metric::confidence) == 1);
    }

    TEST_CASE("tables list columns in display order") {
        std::vector<std::string> headers;
        for (const auto& [_, h] : table_columns(Suite::response)) headers.push_back(h);
        CHECK(headers == std::vector<std::string>{"GRD", "Fact.", "Help.", "Rel.", "Conf.", "Sat."});
        headers.clear();
        for (const auto& [_, h] : table_columns(Suite::query)) headers.push_back(h);
        CHECK(headers == std::vector<std::string>{"Non-copy", "Specificity", "Readability", "Conciseness", "Coverage",
                                                  "Satisfaction"});
        const auto text = format_table(Suite::query, {{"Baseline", {{metric::conciseness, 20.0}}}});
        CHECK(text.find("Baseline") != std::string::npos);
        CHECK(text.find("20.00") != std::string::npos);
        CHECK(text.find(" -") != std::string::npos);
    }

    TEST_CASE("search count client") {
        auto transport = std::make_shared<test::ScriptedTransport>([](const std::string&, const std::string& body) {
            const auto q = json::parse(body).at("query").get<std::string>();
            return HttpResponse{200, q == "bad" ? R"({"pages": -1})" : R"({"pages": 42})"};
        });
        HttpSearchCountClient client("http://127.0.0.1:9/pages", transport);
        CHECK(client.pages("world cup") == 42);
        CHECK_THROWS_AS(client.pages("bad"), ContractError);
    }
}
