#include <doctest.h>

#include "sysfb/prompts.hpp"
#include "test_support.hpp"

using namespace sysfb;

namespace {

struct GoldenInputs {
    FeedbackRecord query_record;
    FeedbackRecord response_record;
    std::string feedback;
    std::string query;
    std::string response;
    CriteriaSet query_criteria;
    CriteriaSet response_criteria;
};

GoldenInputs golden_inputs() {
    const auto j = read_json_file(test::source_dir() / "tests" / "golden" / "inputs.json");
    GoldenInputs in;
    const auto context = dialog_context_from_json(j["context"]);
    std::vector<SearchDocument> docs;
    for (const auto& d : j["search_documents"]) docs.push_back(search_document_from_json(d));
    in.query_record = FeedbackRecord{"g-q", context, TargetKind::query, j["original_query"], false, {}, {}, json::object()};
    in.response_record =
        FeedbackRecord{"g-r", context, TargetKind::response, j["original_response"], false, {}, docs, json::object()};
    in.feedback = j["feedback"];
    in.query = j["query"];
    in.response = j["response"];
    in.query_criteria = test::fixture_criteria(j["query_criteria"]);
    in.response_criteria = test::fixture_criteria(j["response_criteria"]);
    return in;
}

std::string golden(const std::string& name) {
    return test::read_text(test::source_dir() / "tests" / "golden" / (name + ".txt"));
}

}  // namespace

TEST_SUITE("prompts") {
    TEST_CASE("refinement prompts match the goldens byte for byte") {
        const auto in = golden_inputs();
        CHECK(refinement_prompt(in.query_record, in.query_criteria) == golden("query_refine"));
        CHECK(refinement_prompt(in.query_record, test::fixture_criteria("query-baseline")) == golden("query_refine_baseline"));
        CHECK(refinement_prompt(in.response_record, in.response_criteria) == golden("response_refine"));
        CHECK(refinement_prompt(in.response_record, in.response_criteria, in.feedback) ==
              golden("response_refine_with_feedback"));
    }

    TEST_CASE("judge and feedback prompts match the goldens") {
        const auto in = golden_inputs();
        const auto dialog = serialize_dialog(in.query_record.context);
        const auto docs = serialize_documents(*in.response_record.search_documents);
        CHECK(render(PromptName::judge_specificity, {{"DIALOG_CONTEXT", dialog}, {"QUERY", in.query}}) ==
              golden("judge_specificity"));
        CHECK(render(PromptName::judge_factuality,
                     {{"DIALOG_CONTEXT", dialog}, {"SEARCH_DOCUMENTS", docs}, {"RESPONSE", in.response}}) ==
              golden("judge_factuality"));
        CHECK(render(PromptName::judge_helpfulness, {{"DIALOG_CONTEXT", dialog}, {"RESPONSE", in.response}}) ==
              golden("judge_helpfulness"));
        CHECK(render(PromptName::judge_relevance, {{"DIALOG_CONTEXT", dialog}, {"RESPONSE", in.response}}) ==
              golden("judge_relevance"));
        CHECK(render(PromptName::feedback_generate,
                     {{"DIALOG_CONTEXT", dialog}, {"ORIGINAL_RESPONSE", in.response_record.original_text}}) ==
              golden("feedback_generate"));
    }

    TEST_CASE("feedback block sits between the response and the documents") {
        const auto in = golden_inputs();
        const auto p = refinement_prompt(in.response_record, in.response_criteria, in.feedback);
        const auto response_at = p.find(in.response_record.original_text);
        const auto feedback_at = p.find("Below is the feedback for the bot's unsatisfactory response.\n" + in.feedback);
        const auto docs_at = p.find("Below are some useful search results");
        REQUIRE(response_at != std::string::npos);
        REQUIRE(feedback_at != std::string::npos);
        CHECK(response_at < feedback_at);
        CHECK(feedback_at < docs_at);
    }

    TEST_CASE("baseline query prompt drops the requirements sentence") {
        const auto in = golden_inputs();
        const auto p = refinement_prompt(in.query_record, test::fixture_criteria("query-baseline"));
        CHECK(p.find("You should follow the following requirements") == std::string::npos);
        CHECK(p.find("[[") == std::string::npos);
    }

    TEST_CASE("missing placeholders raise a render error naming the slot") {
        try {
            render(PromptName::judge_relevance, {{"DIALOG_CONTEXT", "x"}});
            FAIL("expected a render error");
        } catch (const RenderError& e) {
            CHECK(e.placeholder() == "RESPONSE");
        }
        const auto in = golden_inputs();
        CriteriaSet empty{"none", TargetKind::response, {}, ""};
        CHECK_THROWS_AS(refinement_prompt(in.response_record, empty), RenderError);
    }

    TEST_CASE("substituted text is not rescanned") {
        const auto out = render(PromptName::judge_relevance, {{"DIALOG_CONTEXT", "[[RESPONSE]]"}, {"RESPONSE", "r"}});
        CHECK(out.find("[[RESPONSE]]") != std::string::npos);
    }

    TEST_CASE("template placeholders") {
        CHECK(PromptTemplate::get(PromptName::query_refine).placeholders() ==
              std::vector<std::string>{"CRITERIA", "DIALOG_CONTEXT", "ORIGINAL_QUERY"});
        CHECK(PromptTemplate::get(PromptName::response_refine_with_feedback).placeholders() ==
              std::vector<std::string>{"CRITERIA", "DIALOG_CONTEXT", "ORIGINAL_RESPONSE", "FEEDBACK", "SEARCH_DOCUMENTS"});
        CHECK(parse_prompt_name("judge_factuality") == PromptName::judge_factuality);
        CHECK_THROWS_AS(parse_prompt_name("judge_everything"), ValidationError);
    }

    TEST_CASE("criteria numbering follows list order") {
        CHECK(format_criteria({}) == "");
        CHECK(format_criteria({"a", "b"}) == "(1) a (2) b");
        CHECK(format_criteria({"b", "a"}) == "(1) b (2) a");
    }
}
