#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proplab/click_model.hpp"
#include "proplab/core_types.hpp"
#include "proplab/judge.hpp"

namespace proplab {

struct SurfaceSpec {
    enum class Kind { Exponential, Grid };
    Kind kind = Kind::Exponential;
    DecayParams decay{1.0};
    GridSurfaceParams grid;
};

struct RelevancePrior {
    // Uniform on [lo, hi].
    double lo = 0.0;
    double hi = 1.0;
};

struct FeatureGenConfig {
    // Noisy views of true relevance.
    std::vector<double> view_noise_sd = {0.05, 0.15};
    // Include the logging policy's noise draw as a feature (the part of the
    // production score unexplained by relevance). Click-predictive through
    // examination only, so a naive trainer picks it up and an IPS trainer
    // should not.
    bool policy_residual = true;
    int pure_noise_features = 1;
};

struct SimConfig {
    int num_queries = 1000;
    int items_per_query = 20;
    GridLayout layout{4, 3};
    SurfaceSpec surface;
    RelevancePrior relevance_prior;
    double policy_noise_sd = 0.5;
    // booking | click ~ Bernoulli(booking_scale * relevance)
    double booking_scale = 0.5;
    JudgeCalibration calib;
    bool annotate = true;  // stamp judge scores during simulation
    FeatureGenConfig features;
    std::uint64_t seed = 1;
};

struct FeatureRow {
    std::string query_id;
    std::string item_id;
    std::vector<double> values;
};

struct SimOutput {
    std::vector<Impression> log;  // ordered by query id then rank
    std::vector<FeatureRow> features;
};

void validate_config(const SimConfig& config);
PropensitySurface surface_of(const SimConfig& config);

// Deterministic given config: per-query derived rng streams, so output is
// independent of evaluation order. Emits exactly num_queries * page_size rows.
SimOutput simulate(const SimConfig& config);

// Config file round-trip (JSON, documented key names).
SimConfig load_sim_config(const std::string& path);
SimConfig sim_config_from_json_text(const std::string& text);
std::string sim_config_to_json_text(const SimConfig& config);

// Features sidecar: JSONL {"query_id","item_id","features":[...]}.
void write_features_file(const std::string& path,
                         const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features_file(const std::string& path);

}  // namespace proplab
