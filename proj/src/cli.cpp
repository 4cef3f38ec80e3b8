#include "sysfb/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "sysfb/config.hpp"
#include "sysfb/hashing.hpp"
#include "sysfb/metrics.hpp"
#include "sysfb/prompts.hpp"
#include "sysfb/server.hpp"
#include "sysfb/workspace.hpp"

namespace sysfb {

namespace {

std::string default_config_path() {
    if (const char* env = std::getenv("SYSFB_CONFIG"); env && *env) return env;
    return "config.toml";
}

json ok_payload(const std::string& command, const json& result, const json& artifacts = json::object()) {
    return {{"ok", true}, {"command", command}, {"artifacts", artifacts}, {"result", result}};
}

void print(std::ostream& out, const json& payload) { out << payload.dump(2) << "\n"; }

std::string short_hash(const json& j) { return sha256_hex(j.dump()).substr(0, 12); }

std::vector<RefinementRecord> refinements_for(Workspace& ws, const std::string& input, const std::string& run) {
    if (!input.empty() == !run.empty()) throw ValidationError("give exactly one of --input or --run");
    if (!run.empty()) {
        if (!is_safe_id(run)) throw ValidationError("unsafe run id \"" + run + "\"");
        return load_refinements(ws.datasets_dir() / (run + ".refinements.jsonl"));
    }
    return load_refinements(input);
}

std::vector<std::pair<std::string, std::map<std::string, double>>> ablation_rows(const AblationResult& a) {
    std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
    for (const auto& r : a.rows) rows.emplace_back(r.label.empty() ? r.criteria_id : r.label, r.report.aggregate);
    return rows;
}

std::vector<bool> bool_list(const json& j, const char* field) {
    if (!j.contains(field) || !j[field].is_array()) throw ValidationError(std::string("\"") + field + "\" must be an array");
    std::vector<bool> out;
    for (const auto& v : j[field]) {
        if (v.is_boolean()) {
            out.push_back(v.get<bool>());
        } else if (v.is_array()) {
            std::vector<bool> votes;
            for (const auto& b : v) {
                if (!b.is_boolean()) throw ValidationError(std::string("\"") + field + "\" votes must be booleans");
                votes.push_back(b.get<bool>());
            }
            out.push_back(majority_vote(votes));
        } else {
            throw ValidationError(std::string("\"") + field + "\" entries must be booleans or vote lists");
        }
    }
    return out;
}

json agreement_result(const json& j) {
    const auto judge = bool_list(j, "judge");
    const auto human = bool_list(j, "human");
    std::size_t matches = 0;
    for (std::size_t i = 0; i < std::min(judge.size(), human.size()); ++i) matches += judge[i] == human[i];
    const double a = agreement(judge, human);
    return {{"n", judge.size()}, {"matches", matches}, {"agreement", a}};
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Build and evaluate refinement datasets from user feedback", "sysfb"};
    app.require_subcommand(1);
    std::string config_path = default_config_path();
    app.add_option("--config", config_path, "Run config (TOML)");

    std::string input, run, kind_s = "query", mapping, criteria_id, feedback_mode = "none", validation, suite_s;
    std::string host = "127.0.0.1", record_id, feedback, file, id, label;
    std::vector<std::string> criteria_ids, criterion_texts;
    std::optional<std::size_t> k;
    std::optional<std::uint64_t> seed;
    std::size_t n_sat = 1000, n_unsat = 1000, sample = 0;
    int port = 8080;
    bool no_satisfaction = false;

    auto* ingest = app.add_subcommand("ingest", "Load feedback records into the run directory");
    ingest->add_option("--input", input, "JSONL of feedback records")->required();

    auto* cluster = app.add_subcommand("cluster", "Cluster feedback of one target kind");
    cluster->add_option("--kind", kind_s)->required();
    cluster->add_option("--k", k);
    cluster->add_option("--seed", seed);

    auto* regroup = app.add_subcommand("regroup", "Merge or split clusters into named groups");
    regroup->add_option("--kind", kind_s)->required();
    regroup->add_option("--mapping", mapping, "JSON regroup plan")->required();

    auto* criteria = app.add_subcommand("criteria", "Manage criteria sets");
    criteria->require_subcommand(1);
    auto* criteria_add = criteria->add_subcommand("add", "Add a criteria set");
    criteria_add->add_option("--file", file, "JSON criteria set");
    criteria_add->add_option("--id", id);
    criteria_add->add_option("--kind", kind_s);
    criteria_add->add_option("--label", label);
    criteria_add->add_option("--criterion", criterion_texts, "One criterion; repeatable");
    auto* criteria_list = criteria->add_subcommand("list", "List criteria sets");

    auto* refine_cmd = app.add_subcommand("refine", "Refine one record and score the result");
    refine_cmd->add_option("--criteria", criteria_id)->required();
    refine_cmd->add_option("--record", record_id);
    refine_cmd->add_option("--feedback", feedback);

    auto* calibrate = app.add_subcommand("calibrate", "Pick the checker threshold");
    calibrate->add_option("--kind", kind_s)->required();
    calibrate->add_option("--validation", validation, "JSONL of labelled records");

    auto* build = app.add_subcommand("build-dataset", "Build a training dataset");
    build->add_option("--criteria", criteria_id)->required();
    build->add_option("--feedback-mode", feedback_mode)->check(CLI::IsMember({"none", "human", "model"}));
    build->add_option("--n-satisfied", n_sat);
    build->add_option("--n-unsatisfied", n_unsat);
    build->add_option("--seed", seed);

    auto* ablate = app.add_subcommand("ablate", "Compare criteria sets on the same records");
    ablate->add_option("--kind", kind_s)->required();
    ablate->add_option("--criteria", criteria_ids)->delimiter(',')->required();
    ablate->add_option("--sample", sample);
    ablate->add_option("--seed", seed);
    ablate->add_option("--id", id);

    auto* metrics = app.add_subcommand("metrics", "Score refinements with a metric suite");
    metrics->add_option("--suite", suite_s)->required()->check(CLI::IsMember({"query", "response", "feedback"}));
    metrics->add_option("--input", input, "Refinements JSONL");
    metrics->add_option("--run", run, "Run id of a built dataset");
    metrics->add_flag("--no-satisfaction", no_satisfaction);

    auto* characterize = app.add_subcommand("characterize-feedback", "Describe the instance feedback of a run");
    characterize->add_option("--input", input, "Refinements JSONL");
    characterize->add_option("--run", run, "Run id of a built dataset");

    auto* agree = app.add_subcommand("agreement", "Judge vs. human label agreement");
    agree->add_option("--input", input, "JSON with judge and human labels")->required();

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--host", host);
    serve->add_option("--port", port);

    std::string command;
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        print(err, {{"ok", false}, {"error", {{"kind", "usage_error"}, {"message", e.what()}}}});
        return 2;
    }
    for (auto* sub : app.get_subcommands()) command = sub->get_name();

    try {
        if (*agree) {
            const auto doc = read_json_file(input);
            json result;
            if (doc.contains("metrics")) {
                for (const auto& [name, v] : doc["metrics"].items()) result[name] = agreement_result(v);
            } else {
                result = agreement_result(doc);
            }
            print(out, ok_payload(command, result));
            return 0;
        }

        auto config = load_config(config_path);
        Workspace ws(config);

        if (*ingest) {
            const auto s = ws.ingest(input);
            print(out, ok_payload(command,
                                  {{"total", s.total},
                                   {"query", s.query},
                                   {"response", s.response},
                                   {"satisfied", s.satisfied},
                                   {"unsatisfied", s.unsatisfied}},
                                  {{"records", s.path.string()}}));
        } else if (*cluster) {
            const auto kind = parse_target_kind(kind_s);
            const auto report = ws.cluster(kind, k, seed);
            const auto kname = std::string(to_string(kind));
            print(out, ok_payload(command, report,
                                  {{"clusters", (ws.reports_dir() / ("clusters-" + kname + ".json")).string()},
                                   {"corpus", (ws.reports_dir() / ("corpus-" + kname + ".json")).string()},
                                   {"model", (ws.reports_dir() / ("cluster-model-" + kname + ".json")).string()}}));
        } else if (*regroup) {
            const auto kind = parse_target_kind(kind_s);
            const auto report = ws.regroup(kind, regroup_plan_from_json(read_json_file(mapping)));
            print(out, ok_payload(command, report,
                                  {{"clusters", (ws.reports_dir() / ("clusters-" + std::string(to_string(kind)) + ".json"))
                                                    .string()}}));
        } else if (*criteria_add) {
            CriteriaSet set;
            if (!file.empty()) {
                set = criteria_set_from_json(read_json_file(file));
            } else {
                if (id.empty()) throw ValidationError("criteria add needs --file or --id");
                set = CriteriaSet{id, parse_target_kind(kind_s), criterion_texts, label};
            }
            const bool existed = ws.criteria().get(set.id).has_value();
            const auto stored = ws.criteria().save(set);
            auto result = to_json(stored);
            result["status"] = existed ? "unchanged" : "created";
            print(out, ok_payload(command, result,
                                  {{"criteria", (ws.criteria().directory() / (set.id + ".json")).string()}}));
        } else if (*criteria_list) {
            json items = json::array();
            for (const auto& s : ws.criteria().list()) items.push_back(to_json(s));
            print(out, ok_payload("criteria list", {{"criteria", items}}));
        } else if (*refine_cmd) {
            const auto set = ws.criteria_set(criteria_id);
            RenderRequest rr;
            rr.kind = set.target_kind;
            rr.criteria = set.criteria;
            if (!record_id.empty()) rr.record_id = record_id;
            FeedbackRecord record;
            bool found = false;
            for (const auto& r : ws.records(set.target_kind)) {
                if (record_id.empty() ? !r.satisfied : r.id == record_id) {
                    record = r;
                    found = true;
                    break;
                }
            }
            if (!found) throw ValidationError(record_id.empty() ? "no unsatisfied record to refine"
                                                                : "unknown record \"" + record_id + "\"");
            std::optional<std::string> fb;
            if (!feedback.empty()) fb = feedback;
            else if (set.target_kind == TargetKind::response) fb = record.feedback_text;
            const auto refined = sysfb::refine(record, set, fb, ws.refiner());
            const double score = ws.checker().score(record.context, refined, set.target_kind);
            json result{{"source", record.id},
                        {"criteria_id", set.id},
                        {"original_text", record.original_text},
                        {"refined_text", refined},
                        {"checker_score", score}};
            if (const auto cal = ws.calibration(set.target_kind)) result["accepted"] = is_satisfactory(score, *cal);
            print(out, ok_payload(command, result));
        } else if (*calibrate) {
            const auto kind = parse_target_kind(kind_s);
            std::optional<std::filesystem::path> v;
            if (!validation.empty()) v = validation;
            const auto cal = ws.calibrate(kind, v);
            print(out, ok_payload(command, cal,
                                  {{"calibration", (ws.reports_dir() / ("calibration-" + std::string(to_string(kind)) +
                                                                        ".json"))
                                                       .string()}}));
        } else if (*build) {
            BuildRequest req;
            req.criteria_id = criteria_id;
            req.feedback_mode = parse_feedback_mode(feedback_mode);
            req.n_satisfied = n_sat;
            req.n_unsatisfied = n_unsat;
            req.seed = seed;
            const auto o = ws.build_dataset(req);
            json result = o.result.run;
            result["dataset_size"] = o.result.dataset.size();
            result["calibrated_now"] = o.calibrated_now;
            print(out, ok_payload(command, result,
                                  {{"dataset", o.dataset_path.string()},
                                   {"refinements", o.refinements_path.string()},
                                   {"log", o.log_path.string()},
                                   {"manifest", o.manifest_path.string()},
                                   {"report", (ws.reports_dir() / (o.result.run.id + ".json")).string()}}));
        } else if (*ablate) {
            AblationRequest req;
            req.criteria_ids = criteria_ids;
            req.sample_size = sample;
            req.seed = seed;
            req.id = id;
            const auto kind = parse_target_kind(kind_s);
            const auto result = ws.ablate(kind, req);
            json body = result;
            body["table"] = format_table(kind == TargetKind::query ? Suite::query : Suite::response,
                                         ablation_rows(result));
            print(out, ok_payload(command, body, {{"report", (ws.reports_dir() / (result.id + ".json")).string()}}));
        } else if (*metrics) {
            const auto suite = parse_suite(suite_s);
            const auto refinements = refinements_for(ws, input, run);
            // One row per criteria set, in first-seen order.
            std::vector<std::string> order;
            std::map<std::string, std::vector<RefinementRecord>> by_criteria;
            for (const auto& r : refinements) {
                if (!by_criteria.count(r.criteria_id)) order.push_back(r.criteria_id);
                by_criteria[r.criteria_id].push_back(r);
            }
            json reports = json::object();
            std::vector<std::pair<std::string, std::map<std::string, double>>> rows;
            for (const auto& cid : order) {
                const auto report = ws.evaluate_refinements(suite, by_criteria[cid], !no_satisfaction);
                std::string row_label = cid;
                if (const auto stored = ws.criteria().get(cid); stored && !stored->set.label.empty()) {
                    row_label = stored->set.label;
                }
                rows.emplace_back(row_label, report.aggregate);
                reports[cid] = report;
            }
            const json body{{"suite", to_string(suite)}, {"reports", reports}};
            const auto report_id = "metrics-" + std::string(to_string(suite)) + "-" + short_hash(body);
            const auto path = ws.save_report(report_id, body);
            out << format_table(suite, rows);
            out << "report: " << path.string() << "\n";
        } else if (*characterize) {
            const auto report = ws.characterize_feedback(refinements_for(ws, input, run));
            const json body = report;
            const auto report_id = "feedback-" + short_hash(body);
            const auto path = ws.save_report(report_id, body);
            print(out, ok_payload(command, body, {{"report", path.string()}}));
        } else if (*serve) {
            ApiServer server(ws);
            const int bound = server.bind(host, port);
            print(out, ok_payload(command, {{"url", "http://" + host + ":" + std::to_string(bound)}}));
            out.flush();
            server.run();
        }
        return 0;
    } catch (const Error& e) {
        print(err, {{"ok", false}, {"command", command}, {"error", {{"kind", e.kind()}, {"message", e.what()}}}});
        return dynamic_cast<const ConfigError*>(&e) ? 2 : 1;
    } catch (const std::exception& e) {
        print(err, {{"ok", false}, {"command", command}, {"error", {{"kind", "internal_error"}, {"message", e.what()}}}});
        return 1;
    }
}

}  // namespace sysfb
