// proplab: simulate -> annotate -> estimate -> train -> evaluate, over files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "proplab/click_model.hpp"
#include "proplab/core_types.hpp"
#include "proplab/estimator.hpp"
#include "proplab/evaluator.hpp"
#include "proplab/judge.hpp"
#include "proplab/ltr.hpp"
#include "proplab/manifest.hpp"
#include "proplab/pipeline.hpp"
#include "proplab/simulator.hpp"

namespace fs = std::filesystem;
using namespace proplab;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open file: " + path);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory: " + dir);
}

struct SimulateArgs {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
};

int cmd_simulate(const SimulateArgs& args) {
    SimConfig config = load_sim_config(args.config_path);
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    ensure_dir(args.out_dir);

    const SimOutput sim = simulate(config);
    const PropensitySurface surface = surface_of(config);

    const std::string log_path = args.out_dir + "/log.jsonl";
    const std::string surface_path = args.out_dir + "/surface.csv";
    const std::string features_path = args.out_dir + "/features.jsonl";
    const std::string config_path = args.out_dir + "/sim_config.json";

    std::string log_text;
    for (const auto& imp : sim.log) {
        log_text += impression_to_json_line(imp);
        log_text += '\n';
    }
    atomic_write_file(log_path, log_text);

    std::ostringstream surface_csv;
    write_surface_csv(surface_csv, surface, config.layout);
    atomic_write_file(surface_path, surface_csv.str());

    write_features_file(features_path + ".tmp", sim.features);
    fs::rename(features_path + ".tmp", features_path);

    atomic_write_file(config_path, sim_config_to_json_text(config) + "\n");

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.config_hash = hash_hex(read_file(args.config_path));
    manifest.seed = config.seed;
    manifest.add_input(args.config_path);
    manifest.add_output(log_path);
    manifest.add_output(surface_path);
    manifest.add_output(features_path);
    manifest.add_output(config_path);
    manifest.stamp_now();
    manifest.write(args.out_dir + "/manifest.json");

    std::cout << "wrote " << sim.log.size() << " impressions to " << log_path
              << "\n";
    return 0;
}

struct AnnotateArgs {
    std::string log_path;
    std::string out_path;
    std::string source = "simulated";
    int mock_score = 70;
    double noise_sd = 8.0;
    double leak = 0.0;
    std::int64_t seed = 1;
    std::string endpoint_url;
    std::string model = "gpt-4o-mini";
    std::string prompt_path;
    int timeout = 30;
    int retries = 3;
    int max_in_flight = 1;
    bool reannotate = false;
};

int cmd_annotate(const AnnotateArgs& args) {
    auto log = read_impressions_file(args.log_path);

    std::unique_ptr<JudgeSource> source;
    if (args.source == "mock") {
        source = std::make_unique<MockJudge>(args.mock_score);
    } else if (args.source == "simulated") {
        JudgeCalibration calib;
        calib.noise_sd = args.noise_sd;
        calib.position_leak = args.leak;
        source = std::make_unique<SimulatedJudge>(
            calib, static_cast<std::uint64_t>(args.seed));
    } else if (args.source == "endpoint") {
        EndpointConfig config;
        config.base_url = args.endpoint_url;
        config.model = args.model;
        config.timeout_seconds = args.timeout;
        config.max_retries = args.retries;
        if (!args.prompt_path.empty()) {
            config.prompt_template = read_file(args.prompt_path);
        }
        if (config.base_url.empty()) {
            throw config_error("--endpoint-url required for --source endpoint");
        }
        source = std::make_unique<EndpointJudge>(config);
    } else {
        throw config_error("unknown --source (want mock|simulated|endpoint)");
    }

    auto result =
        annotate_log(std::move(log), *source, args.reannotate, args.max_in_flight);

    std::string text;
    for (const auto& imp : result.log) {
        text += impression_to_json_line(imp);
        text += '\n';
    }
    atomic_write_file(args.out_path, text);

    RunManifest manifest;
    manifest.command = "annotate";
    manifest.seed = static_cast<std::uint64_t>(args.seed);
    manifest.add_input(args.log_path);
    manifest.add_output(args.out_path);
    manifest.stamp_now();
    manifest.write(args.out_path + ".manifest.json");

    std::cout << "annotated " << result.log.size() << " rows ("
              << result.source_calls << " source calls, " << result.cache_hits
              << " cache hits, " << result.failures << " failures)\n";
    return 0;
}

struct EstimateArgs {
    std::string log_path;
    std::string out_dir;
    std::string buckets = "81-100,61-80,41-60";
    long long min_support = 50;
    double alpha = 0.0;
    int resamples = 200;
    std::int64_t seed = 1;
    bool svg = false;
    bool support_weighted = false;
};

int cmd_estimate(const EstimateArgs& args) {
    auto log = read_impressions_file(args.log_path);
    for (size_t i = 0; i < log.size(); ++i) {
        if (!log[i].judge_score) {
            throw validation_error("row " + std::to_string(i) +
                                   " lacks a judge score; run 'proplab "
                                   "annotate' first");
        }
    }
    const GridLayout layout = infer_layout(log);
    ensure_dir(args.out_dir);

    EstimatorSpec spec;
    spec.alpha = args.alpha;
    spec.min_support = args.min_support;
    spec.support_weighted = args.support_weighted;

    const auto buckets = parse_buckets(args.buckets);
    const auto result =
        estimate_all(log, layout.page_size(), buckets, spec, args.resamples,
                     static_cast<std::uint64_t>(args.seed));

    const std::string propensity_path = args.out_dir + "/propensity.csv";
    const std::string buckets_path = args.out_dir + "/buckets.csv";
    const std::string divergence_path = args.out_dir + "/divergence.json";

    std::ostringstream propensity_csv;
    write_propensity_csv(propensity_csv, result.overall, layout);
    atomic_write_file(propensity_path, propensity_csv.str());

    std::ostringstream buckets_csv;
    write_bucket_csv(buckets_csv, result.buckets, layout);
    atomic_write_file(buckets_path, buckets_csv.str());

    // The divergence flag is data, not an error: exit 0 either way.
    std::string divergence_text;
    if (result.buckets.curves.size() >= 2) {
        divergence_text = divergence_report_json(bucket_divergence(result.buckets));
    } else {
        nlohmann::json j;
        j["divergent"] = nullptr;
        j["reason"] = "diagnostic unavailable: fewer than 2 bucket curves";
        divergence_text = j.dump(2);
    }
    atomic_write_file(divergence_path, divergence_text + "\n");

    RunManifest manifest;
    manifest.command = "estimate";
    manifest.seed = static_cast<std::uint64_t>(args.seed);
    manifest.add_input(args.log_path);
    manifest.add_output(propensity_path);
    manifest.add_output(buckets_path);
    manifest.add_output(divergence_path);

    if (args.svg) {
        const std::string svg_path = args.out_dir + "/heatmap.svg";
        std::ostringstream svg;
        write_heatmap_svg(svg, map_to_grid(result.overall, layout));
        atomic_write_file(svg_path, svg.str());
        manifest.add_output(svg_path);
    }
    manifest.stamp_now();
    manifest.write(args.out_dir + "/manifest.json");

    std::cout << "retained " << result.overall.scores_retained << " scores, "
              << "excluded " << result.overall.scores_excluded << "; outputs in "
              << args.out_dir << "\n";
    return 0;
}

struct TrainArgs {
    std::string log_path;
    std::string features_path;
    std::string mode = "naive";
    std::string propensity_path;
    std::string out_path;
    double clip_floor = 0.05;
    double learning_rate = 0.1;
    int epochs = 30;
    int batch_size = 256;
    double l2 = 1e-4;
    std::int64_t seed = 1;
};

int cmd_train(const TrainArgs& args) {
    const auto log = read_impressions_file(args.log_path);
    const auto features = read_features_file(args.features_path);
    const Dataset data = build_dataset(log, features);

    const TrainMode mode = train_mode_from_string(args.mode);
    PropensityEstimate est;
    std::string propensity_hash;
    if (mode == TrainMode::Ips) {
        if (args.propensity_path.empty()) {
            throw config_error("--propensity required for --mode ips");
        }
        est = read_propensity_csv_file(args.propensity_path);
        propensity_hash = hash_file_hex(args.propensity_path);
    }

    TrainConfig config;
    config.learning_rate = args.learning_rate;
    config.epochs = args.epochs;
    config.batch_size = args.batch_size;
    config.l2 = args.l2;
    config.clip_floor = args.clip_floor;
    config.seed = static_cast<std::uint64_t>(args.seed);

    RankerModel model =
        train(data, mode, mode == TrainMode::Ips ? &est : nullptr, config);
    model.propensity_hash = propensity_hash;
    {
        nlohmann::json j = {{"learning_rate", config.learning_rate},
                            {"epochs", config.epochs},
                            {"batch_size", config.batch_size},
                            {"l2", config.l2},
                            {"clip_floor", config.clip_floor},
                            {"seed", config.seed}};
        model.config_hash = hash_hex(j.dump());
    }
    atomic_write_file(args.out_path, model_to_json_text(model) + "\n");

    RunManifest manifest;
    manifest.command = "train";
    manifest.seed = config.seed;
    manifest.config_hash = model.config_hash;
    manifest.add_input(args.log_path);
    manifest.add_input(args.features_path);
    if (!args.propensity_path.empty()) manifest.add_input(args.propensity_path);
    manifest.add_output(args.out_path);
    manifest.stamp_now();
    manifest.write(args.out_path + ".manifest.json");

    std::cout << "trained " << to_string(mode) << " model, final loss "
              << model.final_loss << ", saved to " << args.out_path << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string log_path;
    std::string features_path;
    std::vector<std::string> models;  // name=path
    std::string baseline = "logging-policy";
    std::string labels = "booked";
    std::string texts_path;
    std::string out_dir;
    int k = 10;
    bool with_oracle = false;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const auto log = read_impressions_file(args.log_path);
    std::vector<FeatureRow> features;
    if (!args.features_path.empty()) {
        features = read_features_file(args.features_path);
    }
    const auto groups =
        group_log(log, args.features_path.empty() ? nullptr : &features);

    LabelSource labels;
    if (args.labels == "booked") {
        labels = LabelSource::Booked;
    } else if (args.labels == "true") {
        labels = LabelSource::TrueRelevance;
    } else {
        throw config_error("unknown --labels (want booked|true)");
    }

    std::vector<MethodEval> evals;
    evals.push_back(evaluate_method("logging-policy", groups, args.k, labels,
                                    logging_policy_ranker()));
    const bool annotated =
        !log.empty() && std::all_of(log.begin(), log.end(), [](const auto& imp) {
            return imp.judge_score.has_value();
        });
    if (annotated) {
        evals.push_back(evaluate_method("judge", groups, args.k, labels,
                                        judge_score_ranker()));
    }
    if (args.with_oracle) {
        evals.push_back(
            evaluate_method("oracle", groups, args.k, labels, oracle_ranker()));
    }

    std::vector<RankerModel> loaded;  // keep alive for the rankers
    loaded.reserve(args.models.size());
    for (const auto& spec : args.models) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw config_error("--model expects name=path, got '" + spec + "'");
        }
        loaded.push_back(load_model(spec.substr(eq + 1)));
        evals.push_back(evaluate_method(spec.substr(0, eq), groups, args.k,
                                        labels, model_ranker(loaded.back())));
    }

    if (!args.texts_path.empty()) {
        std::unordered_map<std::string, std::string> query_texts, item_texts;
        std::ifstream is(args.texts_path);
        if (!is) throw io_error("cannot open texts file: " + args.texts_path);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            const std::string kind = j.at("kind").get<std::string>();
            const std::string id = j.at("id").get<std::string>();
            const std::string text = j.at("text").get<std::string>();
            (kind == "query" ? query_texts : item_texts)[id] = text;
        }
        evals.push_back(
            evaluate_method("bm25", groups, args.k, labels,
                            bm25_ranker(groups, query_texts, item_texts)));
    }

    const EvalReport report = delta_report(evals, args.baseline, args.k);
    ensure_dir(args.out_dir);

    const std::string csv_path = args.out_dir + "/report.csv";
    const std::string table_path = args.out_dir + "/report.txt";
    std::ostringstream csv, table;
    write_report_csv(csv, report);
    render_report_table(table, report);
    atomic_write_file(csv_path, csv.str());
    atomic_write_file(table_path, table.str());

    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.add_input(args.log_path);
    if (!args.features_path.empty()) manifest.add_input(args.features_path);
    manifest.add_output(csv_path);
    manifest.add_output(table_path);
    manifest.stamp_now();
    manifest.write(args.out_dir + "/manifest.json");

    std::cout << table.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Position-bias propensity laboratory"};
    app.require_subcommand(1);

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic click log");
    sim->add_option("--config", sim_args.config_path, "Simulation config JSON")
        ->required();
    sim->add_option("--out", sim_args.out_dir, "Output directory")->required();
    sim->add_option("--seed", sim_args.seed, "Override the config seed");

    AnnotateArgs ann_args;
    auto* ann = app.add_subcommand("annotate", "Stamp judge scores onto a log");
    ann->add_option("--log", ann_args.log_path, "Input log JSONL")->required();
    ann->add_option("--out", ann_args.out_path, "Annotated log path")->required();
    ann->add_option("--source", ann_args.source, "mock|simulated|endpoint");
    ann->add_option("--mock-score", ann_args.mock_score, "Fixed score for mock");
    ann->add_option("--noise-sd", ann_args.noise_sd, "Simulated judge noise sd");
    ann->add_option("--leak", ann_args.leak, "Simulated position leak lambda");
    ann->add_option("--seed", ann_args.seed, "Simulated judge seed");
    ann->add_option("--endpoint-url", ann_args.endpoint_url, "Judge endpoint URL");
    ann->add_option("--model", ann_args.model, "Judge model name");
    ann->add_option("--prompt", ann_args.prompt_path, "Prompt template file");
    ann->add_option("--timeout", ann_args.timeout, "Endpoint timeout seconds");
    ann->add_option("--retries", ann_args.retries, "Endpoint max attempts");
    ann->add_option("--max-in-flight", ann_args.max_in_flight,
                    "Concurrent endpoint calls");
    ann->add_flag("--reannotate", ann_args.reannotate, "Rescore annotated rows");

    EstimateArgs est_args;
    auto* est = app.add_subcommand("estimate", "Estimate examination propensities");
    est->add_option("--log", est_args.log_path, "Annotated log JSONL")->required();
    est->add_option("--out", est_args.out_dir, "Output directory")->required();
    est->add_option("--buckets", est_args.buckets, "Score buckets, e.g. 81-100,61-80,41-60");
    est->add_option("--min-support", est_args.min_support,
                    "Min rank-1 impressions per score");
    est->add_option("--alpha", est_args.alpha, "Additive smoothing");
    est->add_option("--resamples", est_args.resamples, "Bootstrap resamples");
    est->add_option("--seed", est_args.seed, "Bootstrap seed");
    est->add_flag("--svg", est_args.svg, "Emit grid heatmap SVG");
    est->add_flag("--support-weighted", est_args.support_weighted,
                  "Weight scores by rank-1 support");

    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "Train a ranker on logged clicks");
    tr->add_option("--log", train_args.log_path, "Log JSONL")->required();
    tr->add_option("--features", train_args.features_path, "Features JSONL")
        ->required();
    tr->add_option("--mode", train_args.mode, "ips|naive");
    tr->add_option("--propensity", train_args.propensity_path,
                   "Propensity CSV (ips mode)");
    tr->add_option("--out", train_args.out_path, "Model JSON path")->required();
    tr->add_option("--clip-floor", train_args.clip_floor, "Propensity clip floor");
    tr->add_option("--lr", train_args.learning_rate, "Learning rate");
    tr->add_option("--epochs", train_args.epochs, "Epochs");
    tr->add_option("--batch", train_args.batch_size, "Batch size");
    tr->add_option("--l2", train_args.l2, "L2 strength");
    tr->add_option("--seed", train_args.seed, "Shuffle seed");

    EvaluateArgs eval_args;
    auto* ev = app.add_subcommand("evaluate", "Score ranking methods");
    ev->add_option("--log", eval_args.log_path, "Log JSONL")->required();
    ev->add_option("--features", eval_args.features_path, "Features JSONL");
    ev->add_option("--model", eval_args.models, "Ranker as name=path");
    ev->add_option("--baseline", eval_args.baseline, "Baseline method");
    ev->add_option("--labels", eval_args.labels, "booked|true");
    ev->add_option("--texts", eval_args.texts_path,
                   "JSONL id texts enabling the bm25 method");
    ev->add_option("--out", eval_args.out_dir, "Output directory")->required();
    ev->add_option("--k", eval_args.k, "Metric cutoff");
    ev->add_flag("--with-oracle", eval_args.with_oracle,
                 "Include a true-relevance oracle method");

    try {
        app.parse(argc, argv);
        if (sim->parsed()) return cmd_simulate(sim_args);
        if (ann->parsed()) return cmd_annotate(ann_args);
        if (est->parsed()) return cmd_estimate(est_args);
        if (tr->parsed()) return cmd_train(train_args);
        if (ev->parsed()) return cmd_evaluate(eval_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const io_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
