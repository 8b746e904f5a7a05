#include "proplab/judge.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

namespace proplab {

int simulate_score(double relevance, int rank, const JudgeCalibration& calib,
                   RngStream& rng) {
    if (calib.noise_sd < 0.0) throw config_error("noise_sd must be >= 0");
    if (calib.position_leak < 0.0) throw config_error("position_leak must be >= 0");
    double raw = calib.mapping(relevance);
    if (calib.noise_sd > 0.0) raw += rng.gaussian(0.0, calib.noise_sd);
    raw += calib.position_leak * static_cast<double>(rank - 1);
    const int rounded = static_cast<int>(std::lround(raw));
    return std::clamp(rounded, kScoreMin, kScoreMax);
}

std::string default_prompt_template() {
    return "You are grading search relevance. Given the user query and a "
           "product, return ONLY an integer relevance score between 0 and "
           "100, with no other text.\n\nQuery: {query}\nProduct title: "
           "{title}\nProduct description: {description}\n\nScore:";
}

std::string render_prompt(const std::string& tmpl, const JudgeRequest& req) {
    std::string out = tmpl;
    auto replace_all = [&out](const std::string& key, const std::string& value) {
        size_t pos = 0;
        while ((pos = out.find(key, pos)) != std::string::npos) {
            out.replace(pos, key.size(), value);
            pos += value.size();
        }
    };
    replace_all("{query}", req.query);
    replace_all("{title}", req.title);
    replace_all("{description}", req.description);
    return out;
}

namespace {

int parse_score_reply(const std::string& content) {
    // Strict integer reply; leading/trailing whitespace tolerated.
    auto begin = content.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) throw judge_parse_error("empty judge reply");
    auto end = content.find_last_not_of(" \t\r\n") + 1;
    const std::string trimmed = content.substr(begin, end - begin);
    int value = 0;
    auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
    if (res.ec != std::errc() || res.ptr != trimmed.data() + trimmed.size()) {
        throw judge_parse_error("non-integer judge reply: '" + trimmed + "'");
    }
    if (value < kScoreMin || value > kScoreMax) {
        throw judge_range_error("judge score out of range: " + trimmed);
    }
    return value;
}

JudgeResponse call_once(const JudgeRequest& req, const EndpointConfig& config) {
    if (req.query.empty() || req.title.empty()) {
        throw judge_parse_error("judge request fields must be non-empty");
    }
    httplib::Client client(config.base_url);
    client.set_read_timeout(config.timeout_seconds, 0);
    client.set_connection_timeout(config.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv(config.auth_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    const std::string tmpl = config.prompt_template.empty()
                                 ? default_prompt_template()
                                 : config.prompt_template;
    nlohmann::json body = {
        {"model", config.model},
        {"messages",
         {{{"role", "user"}, {"content", render_prompt(tmpl, req)}}}},
    };
    auto res = client.Post("/v1/chat/completions", headers, body.dump(),
                           "application/json");
    if (!res) throw judge_transport_error("judge endpoint unreachable");
    if (res->status != 200) {
        throw judge_transport_error("judge endpoint returned HTTP " +
                                    std::to_string(res->status));
    }
    nlohmann::json reply;
    try {
        reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
        throw judge_parse_error("judge reply is not JSON");
    }
    if (!reply.contains("choices") || reply["choices"].empty()) {
        throw judge_parse_error("judge reply has no choices");
    }
    const auto& msg = reply["choices"][0];
    std::string content;
    if (msg.contains("message") && msg["message"].contains("content")) {
        content = msg["message"]["content"].get<std::string>();
    } else {
        throw judge_parse_error("judge reply missing message content");
    }
    return JudgeResponse{parse_score_reply(content)};
}

}  // namespace

JudgeResponse external_judge_call(const JudgeRequest& req,
                                  const EndpointConfig& config) {
    int attempts = std::max(1, config.max_retries);
    for (int attempt = 0;; ++attempt) {
        try {
            return call_once(req, config);
        } catch (const judge_error&) {
            if (attempt + 1 >= attempts) throw;
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config.backoff_ms * (attempt + 1)));
        }
    }
}

std::optional<int> SimulatedJudge::score(const Impression& imp) {
    if (!imp.true_relevance) return std::nullopt;
    // Stream keyed by the (query, item) pair so identical pairs always score
    // identically regardless of annotation order.
    RngStream rng(seed_, "judge",
                  fnv1a(imp.query_id + '\x1f' + imp.item_id));
    return simulate_score(*imp.true_relevance, imp.rank, calib_, rng);
}

std::optional<int> MockJudge::score(const Impression&) { return fixed_score_; }

std::optional<int> EndpointJudge::score(const Impression& imp) {
    JudgeRequest req;
    req.query = imp.query_id;
    req.title = imp.item_id;
    req.description = imp.item_id;
    try {
        return external_judge_call(req, config_).score;
    } catch (const judge_error&) {
        return std::nullopt;
    }
}

AnnotateResult annotate_log(std::vector<Impression> log, JudgeSource& source,
                            bool reannotate, int max_in_flight) {
    AnnotateResult result;
    std::unordered_map<std::string, std::optional<int>> cache;

    auto pair_key = [](const Impression& imp) {
        return imp.query_id + '\x1f' + imp.item_id;
    };

    if (max_in_flight > 1 && source.is_external()) {
        // Resolve distinct pairs concurrently in chunks, then fill below.
        std::vector<std::pair<std::string, const Impression*>> pending;
        for (const auto& imp : log) {
            if (imp.judge_score && !reannotate) continue;
            std::string key = pair_key(imp);
            if (!cache.count(key)) {
                cache.emplace(key, std::nullopt);
                pending.emplace_back(std::move(key), &imp);
            }
        }
        for (size_t start = 0; start < pending.size();
             start += static_cast<size_t>(max_in_flight)) {
            const size_t stop =
                std::min(pending.size(), start + static_cast<size_t>(max_in_flight));
            std::vector<std::future<std::optional<int>>> futures;
            for (size_t i = start; i < stop; ++i) {
                const Impression* imp = pending[i].second;
                futures.push_back(std::async(std::launch::async, [&source, imp] {
                    return source.score(*imp);
                }));
            }
            for (size_t i = start; i < stop; ++i) {
                cache[pending[i].first] = futures[i - start].get();
            }
        }
        result.source_calls = pending.size();
    }

    std::size_t rows_needing = 0;
    for (auto& imp : log) {
        if (imp.judge_score && !reannotate) continue;
        ++rows_needing;
        const std::string key = pair_key(imp);
        auto it = cache.find(key);
        if (it == cache.end()) {
            ++result.source_calls;
            it = cache.emplace(key, source.score(imp)).first;
        }
        if (it->second) {
            imp.judge_score = *it->second;
        } else {
            ++result.failures;
        }
    }
    result.cache_hits = rows_needing - result.source_calls;
    result.log = std::move(log);
    return result;
}

}  // namespace proplab
