#include "proplab/ltr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

namespace proplab {

std::string to_string(TrainMode mode) {
    return mode == TrainMode::Ips ? "ips" : "naive";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "ips") return TrainMode::Ips;
    if (s == "naive") return TrainMode::Naive;
    throw config_error("unknown training mode '" + s + "' (want ips|naive)");
}

double ips_weight(int rank, const PropensityEstimate& est, double clip_floor) {
    if (clip_floor <= 0.0) throw config_error("clip_floor must be > 0");
    if (rank < 1 || rank > static_cast<int>(est.estimate.size())) {
        throw validation_error("rank out of range for propensity estimate");
    }
    return 1.0 / std::max(est.estimate[static_cast<size_t>(rank) - 1], clip_floor);
}

Dataset build_dataset(const std::vector<Impression>& log,
                      const std::vector<FeatureRow>& features) {
    std::unordered_map<std::string, const FeatureRow*> by_key;
    for (const auto& row : features) {
        by_key[row.query_id + '\x1f' + row.item_id] = &row;
    }
    Dataset data;
    size_t dim = 0;
    for (const auto& imp : log) {
        auto it = by_key.find(imp.query_id + '\x1f' + imp.item_id);
        if (it == by_key.end()) {
            throw validation_error("no features for (" + imp.query_id + ", " +
                                   imp.item_id + ")");
        }
        if (data.features.empty()) {
            dim = it->second->values.size();
        } else if (it->second->values.size() != dim) {
            throw validation_error("inconsistent feature dimensionality");
        }
        data.features.push_back(it->second->values);
        data.clicked.push_back(imp.clicked ? 1 : 0);
        data.rank.push_back(imp.rank);
        data.query_id.push_back(imp.query_id);
        data.item_id.push_back(imp.item_id);
        data.true_relevance.push_back(
            imp.true_relevance.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    return data;
}

std::vector<double> example_weights(const Dataset& data, TrainMode mode,
                                    const PropensityEstimate* est,
                                    double clip_floor) {
    std::vector<double> w(data.clicked.size(), 1.0);
    if (mode == TrainMode::Naive) return w;
    if (est == nullptr) {
        throw config_error("ips mode requires a propensity estimate");
    }
    for (size_t i = 0; i < w.size(); ++i) {
        if (data.clicked[i]) {
            w[i] = ips_weight(data.rank[i], *est, clip_floor);
        }
    }
    return w;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double weighted_logloss(const std::vector<double>& weights, double bias,
                        const Dataset& data, const std::vector<size_t>& batch,
                        const std::vector<double>& ex_weights, double l2) {
    if (batch.empty()) return 0.0;
    double loss = 0.0;
    for (size_t i : batch) {
        const auto& x = data.features[i];
        double z = bias;
        for (size_t d = 0; d < weights.size(); ++d) z += weights[d] * x[d];
        const double p = sigmoid(z);
        const double eps = 1e-12;
        loss -= ex_weights[i] * (data.clicked[i] ? std::log(p + eps)
                                                 : std::log(1.0 - p + eps));
    }
    loss /= static_cast<double>(batch.size());
    double penalty = 0.0;
    for (double w : weights) penalty += w * w;
    return loss + 0.5 * l2 * penalty;
}

std::vector<double> loss_gradient(const std::vector<double>& weights,
                                  double bias, const Dataset& data,
                                  const std::vector<size_t>& batch,
                                  const std::vector<double>& ex_weights,
                                  double l2) {
    std::vector<double> grad(weights.size() + 1, 0.0);
    if (batch.empty()) return grad;
    for (size_t i : batch) {
        const auto& x = data.features[i];
        double z = bias;
        for (size_t d = 0; d < weights.size(); ++d) z += weights[d] * x[d];
        const double residual =
            ex_weights[i] * (sigmoid(z) - (data.clicked[i] ? 1.0 : 0.0));
        for (size_t d = 0; d < weights.size(); ++d) grad[d] += residual * x[d];
        grad.back() += residual;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (auto& g : grad) g *= inv_n;
    for (size_t d = 0; d < weights.size(); ++d) grad[d] += l2 * weights[d];
    return grad;
}

RankerModel train(const Dataset& data, TrainMode mode,
                  const PropensityEstimate* est, const TrainConfig& config) {
    if (config.learning_rate <= 0.0) throw config_error("learning_rate must be > 0");
    if (config.epochs < 1) throw config_error("epochs must be >= 1");
    if (config.batch_size < 1) throw config_error("batch_size must be >= 1");

    const size_t n = data.features.size();
    const size_t dim = n > 0 ? data.features.front().size() : 0;
    const std::vector<double> ex_weights =
        example_weights(data, mode, est, config.clip_floor);

    RankerModel model;
    model.mode = mode;
    model.clip_floor = config.clip_floor;
    model.weights.assign(dim, 0.0);

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle_rng(config.seed, "train-shuffle");

    std::vector<size_t> batch;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        for (size_t start = 0; start < n;
             start += static_cast<size_t>(config.batch_size)) {
            const size_t stop =
                std::min(n, start + static_cast<size_t>(config.batch_size));
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            const auto grad = loss_gradient(model.weights, model.bias, data,
                                            batch, ex_weights, config.l2);
            for (size_t d = 0; d < dim; ++d) {
                model.weights[d] -= config.learning_rate * grad[d];
            }
            model.bias -= config.learning_rate * grad.back();
        }
    }

    std::vector<size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    model.final_loss = weighted_logloss(model.weights, model.bias, data, all,
                                        ex_weights, config.l2);
    if (!std::isfinite(model.final_loss)) {
        throw numeric_error(
            "training diverged (non-finite loss); try a smaller learning rate");
    }
    for (double w : model.weights) {
        if (!std::isfinite(w)) {
            throw numeric_error(
                "training diverged (non-finite weights); try a smaller "
                "learning rate");
        }
    }
    return model;
}

double model_score(const RankerModel& model, const std::vector<double>& features) {
    if (features.size() != model.weights.size()) {
        throw validation_error("feature dimensionality does not match model");
    }
    double z = model.bias;
    for (size_t d = 0; d < features.size(); ++d) {
        z += model.weights[d] * features[d];
    }
    return z;
}

std::vector<size_t> score_items(const RankerModel& model,
                                const std::vector<std::vector<double>>& features,
                                const std::vector<std::string>& item_ids) {
    if (features.size() != item_ids.size()) {
        throw validation_error("features/item_ids size mismatch");
    }
    std::vector<double> scores(features.size());
    for (size_t i = 0; i < features.size(); ++i) {
        scores[i] = model_score(model, features[i]);
    }
    std::vector<size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return item_ids[a] < item_ids[b];
    });
    return order;
}

double gradient_check(const std::vector<double>& weights, double bias,
                      const Dataset& data, const std::vector<size_t>& batch,
                      const std::vector<double>& ex_weights, double l2,
                      double epsilon) {
    if (epsilon < 1e-8 || epsilon > 1e-3) {
        throw config_error("epsilon must be in [1e-8, 1e-3]");
    }
    const auto analytic = loss_gradient(weights, bias, data, batch, ex_weights, l2);
    const size_t dim = weights.size();
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (size_t d = 0; d <= dim; ++d) {
        auto w_plus = weights;
        auto w_minus = weights;
        double b_plus = bias, b_minus = bias;
        if (d < dim) {
            w_plus[d] += epsilon;
            w_minus[d] -= epsilon;
        } else {
            b_plus += epsilon;
            b_minus -= epsilon;
        }
        const double numeric =
            (weighted_logloss(w_plus, b_plus, data, batch, ex_weights, l2) -
             weighted_logloss(w_minus, b_minus, data, batch, ex_weights, l2)) /
            (2.0 * epsilon);
        diff_sq += (analytic[d] - numeric) * (analytic[d] - numeric);
        analytic_sq += analytic[d] * analytic[d];
        numeric_sq += numeric * numeric;
    }
    // Norm-based relative error: component-wise ratios explode on near-zero
    // gradient entries where finite-difference cancellation dominates.
    const double denom =
        std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), 1e-8});
    return std::sqrt(diff_sq) / denom;
}

std::string model_to_json_text(const RankerModel& model) {
    nlohmann::json j;
    j["weights"] = model.weights;
    j["bias"] = model.bias;
    j["mode"] = to_string(model.mode);
    j["clip_floor"] = model.clip_floor;
    j["final_loss"] = model.final_loss;
    j["config_hash"] = model.config_hash;
    j["propensity_hash"] = model.propensity_hash;
    return j.dump(2);
}

RankerModel model_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("bad model JSON: ") + e.what());
    }
    RankerModel model;
    try {
        model.weights = j.at("weights").get<std::vector<double>>();
        model.bias = j.at("bias").get<double>();
        model.mode = train_mode_from_string(j.at("mode").get<std::string>());
        model.clip_floor = j.at("clip_floor").get<double>();
        model.final_loss = j.value("final_loss", 0.0);
        model.config_hash = j.value("config_hash", "");
        model.propensity_hash = j.value("propensity_hash", "");
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("bad model JSON: ") + e.what());
    }
    return model;
}

void save_model(const std::string& path, const RankerModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write model file: " + path);
    os << model_to_json_text(model) << '\n';
}

RankerModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open model file: " + path);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    return model_from_json_text(text);
}

}  // namespace proplab
