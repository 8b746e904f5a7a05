#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proplab/core_types.hpp"
#include "proplab/estimator.hpp"
#include "proplab/simulator.hpp"

namespace proplab {

enum class TrainMode { Ips, Naive };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 30;
    int batch_size = 256;
    double l2 = 1e-4;
    double clip_floor = 0.05;
    std::uint64_t seed = 1;
};

struct RankerModel {
    std::vector<double> weights;
    double bias = 0.0;
    TrainMode mode = TrainMode::Naive;
    double clip_floor = 0.05;
    double final_loss = 0.0;
    std::string config_hash;
    std::string propensity_hash;  // hash of the propensity CSV (ips mode)
};

// 1 / max(estimate[rank], clip_floor)
double ips_weight(int rank, const PropensityEstimate& est, double clip_floor);

// Log rows joined with their feature vectors, in log order.
struct Dataset {
    std::vector<std::vector<double>> features;
    std::vector<char> clicked;
    std::vector<int> rank;
    std::vector<std::string> query_id;
    std::vector<std::string> item_id;
    std::vector<double> true_relevance;  // NaN when absent
};

Dataset build_dataset(const std::vector<Impression>& log,
                      const std::vector<FeatureRow>& features);

// Per-example weights under a mode: clicked rows get the inverse-propensity
// weight in ips mode, everything else weight 1.
std::vector<double> example_weights(const Dataset& data, TrainMode mode,
                                    const PropensityEstimate* est,
                                    double clip_floor);

// Weighted pointwise logistic loss (mean over examples) + L2 penalty.
double weighted_logloss(const std::vector<double>& weights, double bias,
                        const Dataset& data, const std::vector<size_t>& batch,
                        const std::vector<double>& ex_weights, double l2);

// Analytic gradient of weighted_logloss; last entry is the bias gradient.
std::vector<double> loss_gradient(const std::vector<double>& weights,
                                  double bias, const Dataset& data,
                                  const std::vector<size_t>& batch,
                                  const std::vector<double>& ex_weights,
                                  double l2);

// Mini-batch gradient descent, single-threaded, deterministic given seed.
// Throws numeric_error when the loss turns non-finite.
RankerModel train(const Dataset& data, TrainMode mode,
                  const PropensityEstimate* est, const TrainConfig& config);

double model_score(const RankerModel& model, const std::vector<double>& features);

// Indices of candidates in descending score order; ties broken by item id.
std::vector<size_t> score_items(const RankerModel& model,
                                const std::vector<std::vector<double>>& features,
                                const std::vector<std::string>& item_ids);

// Relative discrepancy (L2-norm ratio) between the analytic and central
// finite-difference gradients on a batch.
double gradient_check(const std::vector<double>& weights, double bias,
                      const Dataset& data, const std::vector<size_t>& batch,
                      const std::vector<double>& ex_weights, double l2,
                      double epsilon);

// Model persistence (small JSON document).
std::string model_to_json_text(const RankerModel& model);
RankerModel model_from_json_text(const std::string& text);
void save_model(const std::string& path, const RankerModel& model);
RankerModel load_model(const std::string& path);

}  // namespace proplab
