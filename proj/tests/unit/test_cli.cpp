#include <doctest.h>

#include <fstream>
#include <sstream>

#include "schema_validator.hpp"
#include "sysfb/cli.hpp"
#include "test_support.hpp"

using namespace sysfb;

namespace {

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;

    json out_json() const { return json::parse(out); }
    json err_json() const { return json::parse(err); }
};

CliRun run(std::vector<std::string> args) {
    std::ostringstream out, err;
    CliRun r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class Desk {
public:
    Desk() : config_(test::stage_desk_config(dir_.path()).string()) {}

    CliRun operator()(std::vector<std::string> args) const {
        args.insert(args.begin(), {"--config", config_});
        return run(std::move(args));
    }

    const test::TempDir& dir() const { return dir_; }

    void ingest() const { REQUIRE((*this)({"ingest", "--input", test::fixture_path("corpus.jsonl").string()}).code == 0); }

    void add_criteria(const std::string& id) const {
        REQUIRE((*this)({"criteria", "add", "--file", test::fixture_path("criteria/" + id + ".json").string()}).code ==
                0);
    }

private:
    test::TempDir dir_{"sysfb-cli"};
    std::string config_;
};

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("help and usage errors") {
        const auto help = run({"--help"});
        CHECK(help.code == 0);
        CHECK(help.out.find("build-dataset") != std::string::npos);

        const auto none = run({});
        CHECK(none.code == 2);
        CHECK(test::schema_report("cli_error", none.err_json()) == "");
        CHECK(none.err_json()["error"]["kind"] == "usage_error");

        CHECK(run({"frobnicate"}).code == 2);
        CHECK(run({"cluster"}).code == 2);
        CHECK(run({"metrics", "--suite", "dialog"}).code == 2);
    }

    TEST_CASE("configuration errors exit with 2") {
        test::TempDir dir;
        const auto r = run({"--config", (dir / "absent.toml").string(), "cluster", "--kind", "query"});
        CHECK(r.code == 2);
        CHECK(r.err_json()["error"]["kind"] == "config_error");
        CHECK(test::schema_report("cli_error", r.err_json()) == "");
    }

    TEST_CASE("runtime errors exit with 1") {
        Desk desk;
        const auto r = desk({"cluster", "--kind", "query"});
        CHECK(r.code == 1);
        CHECK(test::schema_report("cli_error", r.err_json()) == "");
        CHECK(r.err_json()["command"] == "cluster");

        const auto bad_kind = desk({"cluster", "--kind", "dialog"});
        CHECK(bad_kind.code == 1);
        CHECK(bad_kind.err_json()["error"]["kind"] == "validation_error");
    }

    TEST_CASE("ingest and cluster") {
        Desk desk;
        const auto ingest = desk({"ingest", "--input", test::fixture_path("corpus.jsonl").string()});
        REQUIRE(ingest.code == 0);
        const auto summary = ingest.out_json();
        CHECK(test::schema_report("cli_result", summary) == "");
        CHECK(summary["result"]["total"] == 50);
        CHECK(summary["result"]["query"] == 25);
        CHECK(summary["result"]["unsatisfied"] == 30);

        const auto cluster = desk({"cluster", "--kind", "query", "--k", "5", "--seed", "7"});
        REQUIRE(cluster.code == 0);
        const auto body = cluster.out_json();
        CHECK(test::schema_report("cli_result", body) == "");
        CHECK(test::schema_report("group_report", body["result"]) == "");
        CHECK(body["result"]["groups"].size() == 5);
        for (const auto& [name, path] : body["artifacts"].items()) {
            CHECK_MESSAGE(std::filesystem::exists(path.get<std::string>()), name);
        }
        CHECK(desk({"cluster", "--kind", "query", "--k", "5", "--seed", "7"}).out == cluster.out);

        const auto regroup = desk({"regroup", "--kind", "query", "--mapping", test::fixture_path("regroup.json").string()});
        CHECK(regroup.code == 1);
        CHECK(regroup.err_json()["error"]["kind"] == "validation_error");
    }

    TEST_CASE("criteria add and list") {
        Desk desk;
        const auto added = desk({"criteria", "add", "--id", "q-short", "--kind", "query", "--criterion",
                                 "Keep it short.", "--criterion", "Use keywords."});
        REQUIRE(added.code == 0);
        CHECK(added.out_json()["result"]["status"] == "created");
        CHECK(desk({"criteria", "add", "--id", "q-short", "--kind", "query", "--criterion", "Keep it short.",
                    "--criterion", "Use keywords."})
                  .out_json()["result"]["status"] == "unchanged");
        const auto conflict = desk({"criteria", "add", "--id", "q-short", "--kind", "query", "--criterion", "Other."});
        CHECK(conflict.code == 1);
        CHECK(conflict.err_json()["error"]["kind"] == "conflict_error");

        desk.add_criteria("query-baseline");
        const auto list = desk({"criteria", "list"});
        REQUIRE(list.code == 0);
        CHECK(test::schema_report("criteria_list", list.out_json()["result"]) == "");
        CHECK(list.out_json()["result"]["criteria"].size() == 2);
    }

    TEST_CASE("build dataset and score it") {
        Desk desk;
        desk.ingest();
        desk.add_criteria("response-confidence");
        const auto build = desk({"build-dataset", "--criteria", "response-confidence", "--feedback-mode", "human",
                                 "--n-satisfied", "4", "--n-unsatisfied", "6", "--seed", "9"});
        REQUIRE_MESSAGE(build.code == 0, build.err);
        const auto body = build.out_json();
        CHECK(test::schema_report("cli_result", body) == "");
        CHECK(body["result"]["calibrated_now"] == true);
        for (const auto& [name, path] : body["artifacts"].items()) {
            CHECK_MESSAGE(std::filesystem::exists(path.get<std::string>()), name);
        }
        CHECK(test::schema_report("training_manifest", read_json_file(body["artifacts"]["manifest"].get<std::string>())) ==
              "");
        const std::string run_id = body["result"]["id"];

        const auto metrics = desk({"metrics", "--suite", "response", "--run", run_id});
        REQUIRE_MESSAGE(metrics.code == 0, metrics.err);
        for (const char* col : {"Criteria", "GRD", "Fact.", "Help.", "Rel.", "Conf.", "Sat."}) {
            CHECK_MESSAGE(metrics.out.find(col) != std::string::npos, col);
        }
        CHECK(metrics.out.find("report: ") != std::string::npos);

        const auto fb = desk({"characterize-feedback", "--run", run_id});
        REQUIRE_MESSAGE(fb.code == 0, fb.err);
        CHECK(test::schema_report("metric_report", fb.out_json()["result"]) == "");

        CHECK(desk({"metrics", "--suite", "response"}).code == 1);
        CHECK(desk({"metrics", "--suite", "response", "--run", "../x"}).code == 1);
    }

    TEST_CASE("ablate prints a table") {
        Desk desk;
        desk.ingest();
        desk.add_criteria("query-baseline");
        desk.add_criteria("query-specificity");
        const auto r = desk({"ablate", "--kind", "query", "--criteria", "query-baseline,query-specificity", "--sample",
                             "5", "--seed", "1"});
        REQUIRE_MESSAGE(r.code == 0, r.err);
        const auto body = r.out_json();
        CHECK(test::schema_report("cli_result", body) == "");
        CHECK(body["result"]["rows"].size() == 2);
        const std::string table = body["result"]["table"];
        CHECK(table.find("Non-copy") != std::string::npos);
        CHECK(std::filesystem::exists(body["artifacts"]["report"].get<std::string>()));
    }

    TEST_CASE("agreement") {
        const auto r = run({"agreement", "--input", test::fixture_path("agreement.json").string()});
        REQUIRE(r.code == 0);
        const auto body = r.out_json();
        CHECK(test::schema_report("cli_result", body) == "");
        CHECK(body["result"]["n"] == 5);
        CHECK(body["result"]["matches"] == 3);
        CHECK(body["result"]["agreement"].get<double>() == doctest::Approx(0.6));

        test::TempDir dir;
        {
            std::ofstream(dir / "even.json") << R"({"judge": [true], "human": [[true, false]]})";
        }
        CHECK(run({"agreement", "--input", (dir / "even.json").string()}).code == 1);
    }
}
