#include "proplab/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace proplab {

void validate_config(const SimConfig& config) {
    if (config.num_queries < 0) throw config_error("num_queries must be >= 0");
    if (config.layout.columns < 1 || config.layout.rows < 1) {
        throw config_error("layout dimensions must be positive");
    }
    if (config.items_per_query < config.layout.page_size()) {
        throw config_error("items_per_query must be >= page size (" +
                           std::to_string(config.layout.page_size()) + ")");
    }
    if (config.relevance_prior.lo < 0.0 || config.relevance_prior.hi > 1.0 ||
        config.relevance_prior.lo > config.relevance_prior.hi) {
        throw config_error("relevance prior must satisfy 0 <= lo <= hi <= 1");
    }
    if (config.policy_noise_sd < 0.0) {
        throw config_error("policy_noise_sd must be >= 0");
    }
    if (config.booking_scale < 0.0 || config.booking_scale > 1.0) {
        throw config_error("booking_scale must be in [0,1]");
    }
    if (config.surface.kind == SurfaceSpec::Kind::Exponential &&
        config.surface.decay.gamma < 0.0) {
        throw config_error("gamma must be >= 0");
    }
}

PropensitySurface surface_of(const SimConfig& config) {
    if (config.surface.kind == SurfaceSpec::Kind::Exponential) {
        return exponential_surface(config.layout.page_size(), config.surface.decay);
    }
    return grid_surface(config.layout, config.surface.grid);
}

namespace {

std::string padded_id(char prefix, int value, int width) {
    std::string digits = std::to_string(value);
    std::string out(1, prefix);
    if (static_cast<int>(digits.size()) < width) {
        out.append(static_cast<size_t>(width) - digits.size(), '0');
    }
    out += digits;
    return out;
}

}  // namespace

SimOutput simulate(const SimConfig& config) {
    validate_config(config);
    const PropensitySurface surface = surface_of(config);
    const int page = config.layout.page_size();
    const int n_items = config.items_per_query;

    SimOutput out;
    out.log.reserve(static_cast<size_t>(config.num_queries) * page);
    out.features.reserve(static_cast<size_t>(config.num_queries) * page);

    for (int q = 0; q < config.num_queries; ++q) {
        const std::string query_id = padded_id('q', q, 6);
        const auto qi = static_cast<std::uint64_t>(q);

        RngStream rel_rng(config.seed, "relevance", qi);
        RngStream policy_rng(config.seed, "policy", qi);
        RngStream click_rng(config.seed, "clicks", qi);
        RngStream booking_rng(config.seed, "bookings", qi);
        RngStream feature_rng(config.seed, "features", qi);

        std::vector<double> rel(static_cast<size_t>(n_items));
        std::vector<double> policy_noise(static_cast<size_t>(n_items));
        for (int i = 0; i < n_items; ++i) {
            rel[static_cast<size_t>(i)] = rel_rng.uniform(
                config.relevance_prior.lo, config.relevance_prior.hi);
        }
        for (int i = 0; i < n_items; ++i) {
            policy_noise[static_cast<size_t>(i)] =
                config.policy_noise_sd > 0.0
                    ? policy_rng.gaussian(0.0, config.policy_noise_sd)
                    : 0.0;
        }

        // Logging policy: descending relevance + noise, item index breaks ties.
        std::vector<int> order(static_cast<size_t>(n_items));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            const double sa = rel[static_cast<size_t>(a)] + policy_noise[static_cast<size_t>(a)];
            const double sb = rel[static_cast<size_t>(b)] + policy_noise[static_cast<size_t>(b)];
            if (sa != sb) return sa > sb;
            return a < b;
        });

        for (int p = 1; p <= page; ++p) {
            const int item = order[static_cast<size_t>(p) - 1];
            const double r = rel[static_cast<size_t>(item)];

            Impression imp;
            imp.query_id = query_id;
            imp.item_id = padded_id('i', item, 3);
            imp.rank = p;
            imp.cell = rank_to_cell(p, config.layout);
            imp.true_relevance = r;
            imp.clicked = sample_click(click_probability(r, surface, p), click_rng);
            // Booking draw taken unconditionally to keep streams aligned
            // across config toggles.
            const bool booking_draw =
                booking_rng.bernoulli(config.booking_scale * r);
            imp.booked = imp.clicked && booking_draw;

            if (config.annotate) {
                RngStream judge_rng(config.seed, "judge",
                                    fnv1a(imp.query_id + '\x1f' + imp.item_id));
                imp.judge_score = simulate_score(r, p, config.calib, judge_rng);
            }

            FeatureRow feat;
            feat.query_id = imp.query_id;
            feat.item_id = imp.item_id;
            for (double sd : config.features.view_noise_sd) {
                feat.values.push_back(r + (sd > 0.0 ? feature_rng.gaussian(0.0, sd) : 0.0));
            }
            if (config.features.policy_residual) {
                feat.values.push_back(policy_noise[static_cast<size_t>(item)]);
            }
            for (int f = 0; f < config.features.pure_noise_features; ++f) {
                feat.values.push_back(feature_rng.gaussian(0.0, 1.0));
            }

            out.log.push_back(std::move(imp));
            out.features.push_back(std::move(feat));
        }
    }
    return out;
}

namespace {

using nlohmann::json;

SurfaceSpec surface_spec_from_json(const json& j) {
    SurfaceSpec spec;
    const std::string kind = j.value("kind", "exponential");
    if (kind == "exponential") {
        spec.kind = SurfaceSpec::Kind::Exponential;
        spec.decay.gamma = j.value("gamma", 1.0);
    } else if (kind == "grid") {
        spec.kind = SurfaceSpec::Kind::Grid;
        spec.grid.row_factors = j.at("row_factors").get<std::vector<double>>();
        spec.grid.column_profiles =
            j.at("column_profiles").get<std::vector<std::vector<double>>>();
    } else {
        throw config_error("surface.kind must be 'exponential' or 'grid'");
    }
    return spec;
}

json surface_spec_to_json(const SurfaceSpec& spec) {
    json j;
    if (spec.kind == SurfaceSpec::Kind::Exponential) {
        j["kind"] = "exponential";
        j["gamma"] = spec.decay.gamma;
    } else {
        j["kind"] = "grid";
        j["row_factors"] = spec.grid.row_factors;
        j["column_profiles"] = spec.grid.column_profiles;
    }
    return j;
}

}  // namespace

SimConfig sim_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw config_error(std::string("bad sim config JSON: ") + e.what());
    }
    SimConfig config;
    try {
        config.num_queries = j.value("num_queries", config.num_queries);
        config.items_per_query = j.value("items_per_query", config.items_per_query);
        if (j.contains("layout")) {
            config.layout.columns = j["layout"].value("columns", 4);
            config.layout.rows = j["layout"].value("rows", 3);
        }
        if (j.contains("surface")) {
            config.surface = surface_spec_from_json(j["surface"]);
        }
        if (j.contains("relevance_prior")) {
            config.relevance_prior.lo = j["relevance_prior"].value("lo", 0.0);
            config.relevance_prior.hi = j["relevance_prior"].value("hi", 1.0);
        }
        config.policy_noise_sd = j.value("policy_noise_sd", config.policy_noise_sd);
        config.booking_scale = j.value("booking_scale", config.booking_scale);
        if (j.contains("judge")) {
            config.calib.noise_sd = j["judge"].value("noise_sd", 8.0);
            config.calib.position_leak = j["judge"].value("position_leak", 0.0);
        }
        config.annotate = j.value("annotate", config.annotate);
        if (j.contains("features")) {
            const auto& f = j["features"];
            if (f.contains("view_noise_sd")) {
                config.features.view_noise_sd =
                    f["view_noise_sd"].get<std::vector<double>>();
            }
            config.features.policy_residual =
                f.value("policy_residual", config.features.policy_residual);
            config.features.pure_noise_features =
                f.value("pure_noise", config.features.pure_noise_features);
        }
        config.seed = j.value("seed", config.seed);
    } catch (const json::exception& e) {
        throw config_error(std::string("bad sim config: ") + e.what());
    }
    validate_config(config);
    return config;
}

SimConfig load_sim_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    return sim_config_from_json_text(text);
}

std::string sim_config_to_json_text(const SimConfig& config) {
    json j;
    j["num_queries"] = config.num_queries;
    j["items_per_query"] = config.items_per_query;
    j["layout"] = {{"columns", config.layout.columns}, {"rows", config.layout.rows}};
    j["surface"] = surface_spec_to_json(config.surface);
    j["relevance_prior"] = {{"lo", config.relevance_prior.lo},
                            {"hi", config.relevance_prior.hi}};
    j["policy_noise_sd"] = config.policy_noise_sd;
    j["booking_scale"] = config.booking_scale;
    j["judge"] = {{"noise_sd", config.calib.noise_sd},
                  {"position_leak", config.calib.position_leak}};
    j["annotate"] = config.annotate;
    j["features"] = {{"view_noise_sd", config.features.view_noise_sd},
                     {"policy_residual", config.features.policy_residual},
                     {"pure_noise", config.features.pure_noise_features}};
    j["seed"] = config.seed;
    return j.dump(2);
}

void write_features_file(const std::string& path,
                         const std::vector<FeatureRow>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write features file: " + path);
    for (const auto& row : rows) {
        std::string line = "{\"query_id\":\"" + row.query_id +
                           "\",\"item_id\":\"" + row.item_id + "\",\"features\":[";
        for (size_t i = 0; i < row.values.size(); ++i) {
            if (i) line += ',';
            char buf[32];
            auto res = std::to_chars(buf, buf + sizeof(buf), row.values[i]);
            line.append(buf, res.ptr);
        }
        line += "]}";
        os << line << '\n';
    }
}

std::vector<FeatureRow> read_features_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open features file: " + path);
    std::vector<FeatureRow> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            FeatureRow row;
            row.query_id = j.at("query_id").get<std::string>();
            row.item_id = j.at("item_id").get<std::string>();
            row.values = j.at("features").get<std::vector<double>>();
            rows.push_back(std::move(row));
        } catch (const json::exception& e) {
            throw io_error(std::string("bad features record: ") + e.what());
        }
    }
    return rows;
}

}  // namespace proplab
