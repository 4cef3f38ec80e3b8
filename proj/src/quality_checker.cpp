#include "sysfb/quality_checker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json_fields.hpp"
#include "sysfb/errors.hpp"
#include "sysfb/hashing.hpp"
#include "sysfb/prompts.hpp"

namespace sysfb {
using namespace detail;

HttpScoreClient::HttpScoreClient(std::string url, std::shared_ptr<HttpTransport> transport)
    : url_(std::move(url)), transport_(std::move(transport)) {}

double HttpScoreClient::score(TargetKind kind, const std::string& context, const std::string& text) {
    const auto reply =
        post_json(*transport_, url_, json{{"kind", to_string(kind)}, {"context", context}, {"text", text}});
    const auto it = reply.find("score");
    if (it == reply.end() || !it->is_number()) throw ContractError("checker reply lacks a numeric \"score\"");
    return it->get<double>();
}

QualityChecker::QualityChecker(std::shared_ptr<ScoreClient> client, std::shared_ptr<ResponseCache> cache,
                               std::string endpoint_id, RetryPolicy retry)
    : client_(std::move(client)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      endpoint_id_(std::move(endpoint_id)),
      retry_(retry) {
    if (!client_) throw ValidationError("quality checker needs a score client");
}

double QualityChecker::score(const DialogContext& context, const std::string& text, TargetKind kind) {
    const auto serialized = serialize_dialog(context);
    const json request{{"endpoint_id", endpoint_id_}, {"kind", to_string(kind)}, {"context", serialized}, {"text", text}};
    const auto key = sha256_hex("score;" + request.dump());
    if (auto hit = cache_->get(key)) return std::stod(*hit);

    const double s = with_retries(retry_, [&] {
        ++calls_;
        return client_->score(kind, serialized, text);
    });
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
        throw ContractError("checker score " + std::to_string(s) + " is outside [0,1]");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", s);
    cache_->put(key, request, buf);
    return s;
}

double no_threshold_sentinel() { return std::nextafter(1.0, 2.0); }

CheckerCalibration calibrate_threshold(const std::vector<std::pair<double, bool>>& scored, double target_precision) {
    if (scored.empty()) throw DomainError("calibration needs at least one scored example");
    if (!(target_precision > 0.0 && target_precision <= 1.0)) throw DomainError("target precision must be in (0,1]");
    std::size_t positives = 0;
    for (const auto& [s, label] : scored) {
        if (!(s >= 0.0 && s <= 1.0)) throw DomainError("calibration score outside [0,1]");
        positives += label;
    }

    auto sorted = scored;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    CheckerCalibration best;
    best.validation_size = scored.size();
    best.target_precision = target_precision;
    best.threshold = no_threshold_sentinel();

    // Walk thresholds from high to low; the last qualifying one is the smallest.
    std::size_t tp = 0;
    std::size_t taken = 0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double t = sorted[i].first;
        while (i < sorted.size() && sorted[i].first == t) {
            tp += sorted[i].second;
            ++taken;
            ++i;
        }
        const double precision = static_cast<double>(tp) / static_cast<double>(taken);
        if (precision >= target_precision) {
            best.qualified = true;
            best.threshold = t;
            best.achieved_precision = precision;
            best.achieved_recall = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
        }
    }
    return best;
}

bool is_satisfactory(double score, const CheckerCalibration& calibration) {
    return calibration.qualified && score >= calibration.threshold;
}

void to_json(json& j, const CheckerCalibration& c) {
    j = json{{"threshold", c.threshold},
             {"achieved_precision", c.achieved_precision},
             {"achieved_recall", c.achieved_recall},
             {"validation_size", c.validation_size},
             {"qualified", c.qualified},
             {"target_precision", c.target_precision}};
}

CheckerCalibration checker_calibration_from_json(const json& j) {
    CheckerCalibration c;
    c.threshold = require_number(j, "threshold");
    c.achieved_precision = require_number(j, "achieved_precision");
    c.achieved_recall = require_number(j, "achieved_recall");
    c.validation_size = require_count(j, "validation_size");
    c.qualified = require_bool(j, "qualified");
    c.target_precision = require_number(j, "target_precision");
    return c;
}

}  // namespace sysfb
