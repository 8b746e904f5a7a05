#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "proplab/core_types.hpp"
#include "proplab/rng.hpp"

namespace proplab {

// Simulated judge behavior. position_leak = 0 keeps score distribution a
// function of relevance alone; lambda > 0 deliberately injects a
// rank-dependent term so the conditional-independence diagnostic has
// something to catch.
struct JudgeCalibration {
    std::function<double(double)> mapping = [](double r) { return 100.0 * r; };
    double noise_sd = 8.0;
    double position_leak = 0.0;  // lambda
};

// score = clamp(round(mapping(rel) + noise + lambda * (rank - 1)), 0, 100)
int simulate_score(double relevance, int rank, const JudgeCalibration& calib,
                   RngStream& rng);

struct JudgeRequest {
    std::string query;
    std::string title;
    std::string description;
};

struct JudgeResponse {
    int score = 0;
};

struct EndpointConfig {
    std::string base_url;
    std::string model = "gpt-4o-mini";
    std::string auth_env = "JUDGE_API_KEY";
    std::string prompt_template;  // {query}, {title}, {description} placeholders
    int timeout_seconds = 30;
    int max_retries = 3;
    int backoff_ms = 200;
};

std::string default_prompt_template();
std::string render_prompt(const std::string& tmpl, const JudgeRequest& req);

// Single chat-completion call; parses an integer score from the reply.
// Throws judge_transport_error / judge_parse_error / judge_range_error.
JudgeResponse external_judge_call(const JudgeRequest& req,
                                  const EndpointConfig& config);

// Pluggable score source for annotate_log.
class JudgeSource {
public:
    virtual ~JudgeSource() = default;
    // nullopt = permanent failure for this row (after retries).
    virtual std::optional<int> score(const Impression& imp) = 0;
    // true when a call leaves the process (drives the dedup cache stats).
    virtual bool is_external() const { return false; }
};

// Deterministic scores from true_relevance; rng derived per (query, item) so
// annotation is idempotent and order-independent.
class SimulatedJudge : public JudgeSource {
public:
    SimulatedJudge(JudgeCalibration calib, std::uint64_t seed)
        : calib_(std::move(calib)), seed_(seed) {}
    std::optional<int> score(const Impression& imp) override;

private:
    JudgeCalibration calib_;
    std::uint64_t seed_;
};

class MockJudge : public JudgeSource {
public:
    explicit MockJudge(int fixed_score) : fixed_score_(fixed_score) {}
    std::optional<int> score(const Impression& imp) override;
    bool is_external() const override { return true; }

private:
    int fixed_score_;
};

// Talks to a chat-completion endpoint; query/item ids stand in for text
// unless a text lookup is installed.
class EndpointJudge : public JudgeSource {
public:
    explicit EndpointJudge(EndpointConfig config) : config_(std::move(config)) {}
    std::optional<int> score(const Impression& imp) override;
    bool is_external() const override { return true; }

private:
    EndpointConfig config_;
};

struct AnnotateResult {
    std::vector<Impression> log;
    std::size_t source_calls = 0;  // cache misses
    std::size_t cache_hits = 0;
    std::size_t failures = 0;  // rows left unannotated
};

// Fills judge_score on every row that lacks one (or all rows when reannotate
// is set). Scores are cached per (query_id, item_id); output order equals
// input order; a failing row is counted, not fatal. External sources may run
// up to max_in_flight calls concurrently.
AnnotateResult annotate_log(std::vector<Impression> log, JudgeSource& source,
                            bool reannotate = false, int max_in_flight = 1);

}  // namespace proplab
