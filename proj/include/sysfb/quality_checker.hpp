#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sysfb/data_model.hpp"
#include "sysfb/gateway.hpp"
#include "sysfb/http.hpp"

namespace sysfb {

/// Satisfaction classifier endpoint. Returns a score that should lie in [0,1].
class ScoreClient {
public:
    virtual ~ScoreClient() = default;
    virtual double score(TargetKind kind, const std::string& context, const std::string& text) = 0;
};

/// POST {"kind", "context", "text"} -> {"score"}.
class HttpScoreClient : public ScoreClient {
public:
    HttpScoreClient(std::string url, std::shared_ptr<HttpTransport> transport);
    double score(TargetKind kind, const std::string& context, const std::string& text) override;

private:
    std::string url_;
    std::shared_ptr<HttpTransport> transport_;
};

class FunctionScoreClient : public ScoreClient {
public:
    using Fn = std::function<double(TargetKind, const std::string&, const std::string&)>;
    explicit FunctionScoreClient(Fn fn) : fn_(std::move(fn)) {}
    double score(TargetKind kind, const std::string& context, const std::string& text) override {
        return fn_(kind, context, text);
    }

private:
    Fn fn_;
};

/// Scores (context, text) pairs through the response cache, so repeated
/// inputs are answered without another call.
class QualityChecker {
public:
    QualityChecker(std::shared_ptr<ScoreClient> client, std::shared_ptr<ResponseCache> cache,
                   std::string endpoint_id = "checker", RetryPolicy retry = {});

    /// Throws ContractError when the endpoint answers outside [0,1].
    double score(const DialogContext& context, const std::string& text, TargetKind kind);
    std::size_t client_calls() const { return calls_.load(); }

private:
    std::shared_ptr<ScoreClient> client_;
    std::shared_ptr<ResponseCache> cache_;
    std::string endpoint_id_;
    RetryPolicy retry_;
    std::atomic<std::size_t> calls_{0};
};

struct CheckerCalibration {
    double threshold = 0.0;
    double achieved_precision = 0.0;
    double achieved_recall = 0.0;
    std::size_t validation_size = 0;
    /// false when no threshold reaches the target; `threshold` is then the
    /// sentinel just above 1 and nothing is judged satisfactory.
    bool qualified = false;
    double target_precision = 0.8;
    bool operator==(const CheckerCalibration&) const = default;
};

/// Threshold just above 1 used when no candidate qualifies.
double no_threshold_sentinel();

/// Picks the smallest distinct score t such that precision over
/// {score >= t} is at least `target_precision`. Throws DomainError on empty
/// input, scores outside [0,1], or a target outside (0,1].
CheckerCalibration calibrate_threshold(const std::vector<std::pair<double, bool>>& scored,
                                       double target_precision = 0.8);

bool is_satisfactory(double score, const CheckerCalibration& calibration);

void to_json(json& j, const CheckerCalibration& c);
CheckerCalibration checker_calibration_from_json(const json& j);

}  // namespace sysfb
