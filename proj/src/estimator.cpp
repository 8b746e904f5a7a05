#include "proplab/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "proplab/rng.hpp"

namespace proplab {

ClickRateTable::ClickRateTable(int page_size)
    : page_size_(page_size),
      impressions_(static_cast<size_t>(kScoreMax + 1) * page_size, 0),
      clicks_(static_cast<size_t>(kScoreMax + 1) * page_size, 0) {
    if (page_size < 1) throw config_error("page_size must be >= 1");
}

size_t ClickRateTable::idx(int score, int rank) const {
    if (score < kScoreMin || score > kScoreMax) {
        throw validation_error("score out of range: " + std::to_string(score));
    }
    if (rank < 1 || rank > page_size_) {
        throw validation_error("rank out of range: " + std::to_string(rank));
    }
    return static_cast<size_t>(score) * page_size_ + (rank - 1);
}

void ClickRateTable::add(int score, int rank, bool clicked) {
    const size_t i = idx(score, rank);
    ++impressions_[i];
    if (clicked) ++clicks_[i];
}

void ClickRateTable::merge(const ClickRateTable& other) {
    if (other.page_size_ != page_size_) {
        throw validation_error("cannot merge tables with different page sizes");
    }
    for (size_t i = 0; i < impressions_.size(); ++i) {
        impressions_[i] += other.impressions_[i];
        clicks_[i] += other.clicks_[i];
    }
}

long long ClickRateTable::impressions(int score, int rank) const {
    return impressions_[idx(score, rank)];
}

long long ClickRateTable::clicks(int score, int rank) const {
    return clicks_[idx(score, rank)];
}

ClickRateTable ClickRateTable::from_log(const std::vector<Impression>& log,
                                        int page_size) {
    ClickRateTable table(page_size);
    for (const auto& imp : log) {
        if (!imp.judge_score) continue;
        table.add(*imp.judge_score, imp.rank, imp.clicked);
    }
    return table;
}

ClickRateTable empirical_click_rates(const std::vector<Impression>& log,
                                     int page_size) {
    for (size_t i = 0; i < log.size(); ++i) {
        if (!log[i].judge_score) {
            throw validation_error("row " + std::to_string(i) +
                                   " lacks a judge score; run annotate first");
        }
    }
    return ClickRateTable::from_log(log, page_size);
}

double click_rate(const ClickRateTable& table, int score, int rank,
                  double alpha) {
    const long long n = table.impressions(score, rank);
    if (n == 0 && alpha == 0.0) {
        throw numeric_error("click rate undefined: no impressions at (s=" +
                            std::to_string(score) + ", p=" +
                            std::to_string(rank) + ") and alpha=0");
    }
    return (static_cast<double>(table.clicks(score, rank)) + alpha) /
           (static_cast<double>(n) + 2.0 * alpha);
}

std::optional<std::vector<double>> propensity_single_score(
    const ClickRateTable& table, int score, double alpha,
    long long min_support) {
    if (table.impressions(score, 1) < min_support) return std::nullopt;
    if (alpha == 0.0) {
        if (table.clicks(score, 1) == 0) return std::nullopt;  // zero denominator
        for (int p = 2; p <= table.page_size(); ++p) {
            if (table.impressions(score, p) == 0) return std::nullopt;
        }
    }
    const double rate1 = click_rate(table, score, 1, alpha);
    if (rate1 <= 0.0) return std::nullopt;
    std::vector<double> v(static_cast<size_t>(table.page_size()));
    v[0] = 1.0;
    for (int p = 2; p <= table.page_size(); ++p) {
        v[static_cast<size_t>(p) - 1] = click_rate(table, score, p, alpha) / rate1;
    }
    return v;
}

std::vector<int> all_scores() {
    std::vector<int> s(static_cast<size_t>(kScoreMax - kScoreMin + 1));
    std::iota(s.begin(), s.end(), kScoreMin);
    return s;
}

std::vector<int> scores_in_bucket(const ScoreBucket& bucket) {
    std::vector<int> s;
    for (int v = bucket.lo; v <= bucket.hi; ++v) s.push_back(v);
    return s;
}

PropensityEstimate propensity_averaged(const ClickRateTable& table,
                                       const std::vector<int>& score_set,
                                       double alpha, long long min_support,
                                       bool support_weighted) {
    const std::vector<int>& scores = score_set.empty() ? all_scores() : score_set;
    PropensityEstimate est;
    std::vector<double> sum(static_cast<size_t>(table.page_size()), 0.0);
    double weight_sum = 0.0;
    for (int s : scores) {
        auto v = propensity_single_score(table, s, alpha, min_support);
        if (!v) {
            ++est.scores_excluded;
            continue;
        }
        const double w = support_weighted
                             ? static_cast<double>(table.impressions(s, 1))
                             : 1.0;
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += w * (*v)[i];
        weight_sum += w;
        ++est.scores_retained;
    }
    if (est.scores_retained == 0) {
        throw numeric_error(
            "propensity estimation impossible: no score met min_support=" +
            std::to_string(min_support) + " at rank 1");
    }
    est.estimate.resize(sum.size());
    for (size_t i = 0; i < sum.size(); ++i) est.estimate[i] = sum[i] / weight_sum;
    est.estimate[0] = 1.0;  // bit-exact anchor
    for (size_t i = 1; i < est.estimate.size(); ++i) {
        if (est.estimate[i] > 1.0) {
            est.warnings.push_back("estimate above 1 at rank " +
                                   std::to_string(i + 1) +
                                   " (reported unclamped)");
        }
    }
    return est;
}

BucketCurves bucket_curves(const ClickRateTable& table,
                           const std::vector<ScoreBucket>& buckets, double alpha,
                           long long min_support) {
    validate_buckets(buckets);
    BucketCurves out;
    for (const auto& bucket : buckets) {
        try {
            auto est = propensity_averaged(table, scores_in_bucket(bucket),
                                           alpha, min_support);
            out.curves.push_back({bucket, std::move(est)});
        } catch (const numeric_error&) {
            out.warnings.push_back("bucket '" + bucket.label +
                                   "' omitted: no score met min_support");
        }
    }
    return out;
}

DivergenceReport bucket_divergence(const BucketCurves& curves) {
    if (curves.curves.size() < 2) {
        throw numeric_error("bucket divergence needs at least 2 curves");
    }
    const size_t n_ranks = curves.curves.front().estimate.estimate.size();
    DivergenceReport report;
    report.max_gap.assign(n_ranks, 0.0);
    int disjoint_ranks = 0;
    const int deep_ranks = static_cast<int>(n_ranks) - 1;
    for (size_t i = 0; i < n_ranks; ++i) {
        bool disjoint = false;
        for (size_t a = 0; a < curves.curves.size(); ++a) {
            for (size_t b = a + 1; b < curves.curves.size(); ++b) {
                const auto& ea = curves.curves[a].estimate;
                const auto& eb = curves.curves[b].estimate;
                const double gap = std::abs(ea.estimate[i] - eb.estimate[i]);
                report.max_gap[i] = std::max(report.max_gap[i], gap);
                if (ea.has_ci() && eb.has_ci() &&
                    (ea.ci_lo[i] > eb.ci_hi[i] || eb.ci_lo[i] > ea.ci_hi[i])) {
                    disjoint = true;
                }
            }
        }
        if (report.max_gap[i] > report.overall_max_gap) {
            report.overall_max_gap = report.max_gap[i];
            report.rank_of_max_gap = static_cast<int>(i) + 1;
        }
        if (i >= 1 && disjoint) ++disjoint_ranks;
    }
    if (deep_ranks > 0) {
        report.disjoint_rank_fraction =
            static_cast<double>(disjoint_ranks) / deep_ranks;
    }
    report.divergent = report.disjoint_rank_fraction >= 0.25;
    return report;
}

std::vector<std::vector<double>> map_to_grid(const PropensityEstimate& est,
                                             const GridLayout& layout) {
    if (static_cast<int>(est.estimate.size()) != layout.page_size()) {
        throw validation_error("estimate length does not match layout page size");
    }
    std::vector<std::vector<double>> matrix(
        static_cast<size_t>(layout.rows),
        std::vector<double>(static_cast<size_t>(layout.columns)));
    for (int p = 1; p <= layout.page_size(); ++p) {
        const GridCell cell = rank_to_cell(p, layout);
        matrix[static_cast<size_t>(cell.row)][static_cast<size_t>(cell.column)] =
            est.estimate[static_cast<size_t>(p) - 1];
    }
    return matrix;
}

namespace {

// Compact per-query click records for bootstrap table rebuilds.
struct CompactRow {
    std::uint8_t score;
    std::uint8_t rank;
    std::uint8_t clicked;
};

struct GroupedLog {
    std::vector<std::vector<CompactRow>> queries;
};

GroupedLog group_by_query(const std::vector<Impression>& log, int page_size) {
    if (page_size > 255) throw config_error("page size above 255 unsupported");
    GroupedLog grouped;
    std::unordered_map<std::string, size_t> index;
    for (const auto& imp : log) {
        if (!imp.judge_score) continue;
        auto [it, inserted] = index.emplace(imp.query_id, grouped.queries.size());
        if (inserted) grouped.queries.emplace_back();
        grouped.queries[it->second].push_back(
            CompactRow{static_cast<std::uint8_t>(*imp.judge_score),
                       static_cast<std::uint8_t>(imp.rank),
                       static_cast<std::uint8_t>(imp.clicked ? 1 : 0)});
    }
    return grouped;
}

double percentile(std::vector<double>& values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

void attach_ci_from_samples(PropensityEstimate& est,
                            const std::vector<std::vector<double>>& samples) {
    const size_t n_ranks = est.estimate.size();
    est.ci_lo.assign(n_ranks, 1.0);
    est.ci_hi.assign(n_ranks, 1.0);
    std::vector<double> column;
    for (size_t i = 1; i < n_ranks; ++i) {
        column.clear();
        for (const auto& s : samples) {
            if (!s.empty()) column.push_back(s[i]);
        }
        if (column.empty()) {
            est.ci_lo[i] = est.estimate[i];
            est.ci_hi[i] = est.estimate[i];
            continue;
        }
        std::vector<double> sorted = column;
        est.ci_lo[i] = percentile(sorted, 0.025);
        est.ci_hi[i] = percentile(sorted, 0.975);
    }
}

std::vector<double> estimate_or_empty(const ClickRateTable& table,
                                      const std::vector<int>& score_set,
                                      const EstimatorSpec& spec) {
    try {
        return propensity_averaged(table, score_set, spec.alpha,
                                   spec.min_support, spec.support_weighted)
            .estimate;
    } catch (const numeric_error&) {
        return {};
    }
}

}  // namespace

void attach_bootstrap_ci(PropensityEstimate& est,
                         const std::vector<Impression>& log,
                         const EstimatorSpec& spec, int resamples,
                         std::uint64_t seed, int page_size) {
    if (resamples < 100) throw config_error("bootstrap needs >= 100 resamples");
    GroupedLog grouped = group_by_query(log, page_size);
    const size_t n_queries = grouped.queries.size();
    if (n_queries == 0) throw validation_error("bootstrap over an empty log");
    if (n_queries < 10) {
        est.warnings.push_back("bootstrap CI unreliable: fewer than 10 queries");
    }
    std::vector<std::vector<double>> samples(static_cast<size_t>(resamples));
    for (int r = 0; r < resamples; ++r) {
        RngStream rng(seed, "bootstrap", static_cast<std::uint64_t>(r));
        ClickRateTable table(page_size);
        for (size_t i = 0; i < n_queries; ++i) {
            const size_t pick =
                static_cast<size_t>(rng.engine()() % n_queries);
            for (const auto& row : grouped.queries[pick]) {
                table.add(row.score, row.rank, row.clicked != 0);
            }
        }
        samples[static_cast<size_t>(r)] =
            estimate_or_empty(table, spec.score_set, spec);
    }
    attach_ci_from_samples(est, samples);
}

EstimationResult estimate_all(const std::vector<Impression>& log, int page_size,
                              const std::vector<ScoreBucket>& buckets,
                              const EstimatorSpec& spec, int resamples,
                              std::uint64_t seed) {
    if (resamples < 100) throw config_error("bootstrap needs >= 100 resamples");
    validate_buckets(buckets);
    const ClickRateTable table = empirical_click_rates(log, page_size);

    EstimationResult result;
    result.overall = propensity_averaged(table, spec.score_set, spec.alpha,
                                         spec.min_support, spec.support_weighted);
    result.buckets = bucket_curves(table, buckets, spec.alpha, spec.min_support);

    GroupedLog grouped = group_by_query(log, page_size);
    const size_t n_queries = grouped.queries.size();
    if (n_queries < 10) {
        result.overall.warnings.push_back(
            "bootstrap CI unreliable: fewer than 10 queries");
    }

    std::vector<std::vector<int>> bucket_scores;
    for (const auto& c : result.buckets.curves) {
        bucket_scores.push_back(scores_in_bucket(c.bucket));
    }

    std::vector<std::vector<double>> overall_samples(
        static_cast<size_t>(resamples));
    std::vector<std::vector<std::vector<double>>> bucket_samples(
        result.buckets.curves.size(),
        std::vector<std::vector<double>>(static_cast<size_t>(resamples)));

    // One resampled table serves the overall estimate and every bucket curve.
    for (int r = 0; r < resamples; ++r) {
        RngStream rng(seed, "bootstrap", static_cast<std::uint64_t>(r));
        ClickRateTable boot(page_size);
        for (size_t i = 0; i < n_queries; ++i) {
            const size_t pick = static_cast<size_t>(rng.engine()() % n_queries);
            for (const auto& row : grouped.queries[pick]) {
                boot.add(row.score, row.rank, row.clicked != 0);
            }
        }
        overall_samples[static_cast<size_t>(r)] =
            estimate_or_empty(boot, spec.score_set, spec);
        for (size_t b = 0; b < bucket_scores.size(); ++b) {
            EstimatorSpec bucket_spec = spec;
            bucket_spec.score_set = bucket_scores[b];
            bucket_samples[b][static_cast<size_t>(r)] =
                estimate_or_empty(boot, bucket_scores[b], bucket_spec);
        }
    }

    attach_ci_from_samples(result.overall, overall_samples);
    for (size_t b = 0; b < result.buckets.curves.size(); ++b) {
        attach_ci_from_samples(result.buckets.curves[b].estimate,
                               bucket_samples[b]);
    }
    return result;
}

namespace {

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_estimate_rows(std::ostream& os, const PropensityEstimate& est,
                         const GridLayout& layout, const std::string& prefix) {
    for (int p = 1; p <= layout.page_size(); ++p) {
        const GridCell cell = rank_to_cell(p, layout);
        const size_t i = static_cast<size_t>(p) - 1;
        os << prefix << p << ',' << cell.row << ',' << cell.column << ','
           << fixed6(est.estimate[i]) << ','
           << fixed6(est.has_ci() ? est.ci_lo[i] : est.estimate[i]) << ','
           << fixed6(est.has_ci() ? est.ci_hi[i] : est.estimate[i]) << ','
           << est.scores_retained << '\n';
    }
}

}  // namespace

void write_propensity_csv(std::ostream& os, const PropensityEstimate& est,
                          const GridLayout& layout) {
    os << "rank,row,col,estimate,ci_lo,ci_hi,n_scores\n";
    write_estimate_rows(os, est, layout, "");
}

PropensityEstimate read_propensity_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open propensity CSV: " + path);
    std::string line;
    if (!std::getline(is, line)) throw io_error("empty propensity CSV: " + path);
    PropensityEstimate est;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() < 7) throw io_error("bad propensity CSV row: " + line);
        est.estimate.push_back(std::stod(fields[3]));
        est.ci_lo.push_back(std::stod(fields[4]));
        est.ci_hi.push_back(std::stod(fields[5]));
        est.scores_retained = std::stoi(fields[6]);
    }
    if (est.estimate.empty()) throw io_error("no rows in propensity CSV: " + path);
    est.estimate[0] = 1.0;
    return est;
}

void write_bucket_csv(std::ostream& os, const BucketCurves& curves,
                      const GridLayout& layout) {
    os << "bucket,rank,row,col,estimate,ci_lo,ci_hi,n_scores\n";
    for (const auto& curve : curves.curves) {
        write_estimate_rows(os, curve.estimate, layout, curve.bucket.label + ",");
    }
}

std::string divergence_report_json(const DivergenceReport& report) {
    nlohmann::json j;
    j["divergent"] = report.divergent;
    j["disjoint_rank_fraction"] = report.disjoint_rank_fraction;
    j["overall_max_gap"] = report.overall_max_gap;
    j["rank_of_max_gap"] = report.rank_of_max_gap;
    j["max_gap_per_rank"] = report.max_gap;
    return j.dump(2);
}

void write_heatmap_svg(std::ostream& os,
                       const std::vector<std::vector<double>>& matrix) {
    const int cell = 90;
    const int rows = static_cast<int>(matrix.size());
    const int cols = rows > 0 ? static_cast<int>(matrix.front().size()) : 0;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * cell
       << "\" height=\"" << rows * cell << "\">\n";
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const double v =
                std::clamp(matrix[static_cast<size_t>(r)][static_cast<size_t>(c)],
                           0.0, 1.0);
            // White at 0 to dark blue at 1.
            const int red = static_cast<int>(255 - v * (255 - 8));
            const int green = static_cast<int>(255 - v * (255 - 48));
            const int blue = static_cast<int>(255 - v * (255 - 107));
            char color[16];
            std::snprintf(color, sizeof(color), "#%02x%02x%02x", red, green, blue);
            os << "  <rect x=\"" << c * cell << "\" y=\"" << r * cell
               << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
               << color << "\" stroke=\"#444\"/>\n";
            char label[16];
            std::snprintf(label, sizeof(label), "%.3f",
                          matrix[static_cast<size_t>(r)][static_cast<size_t>(c)]);
            os << "  <text x=\"" << c * cell + cell / 2 << "\" y=\""
               << r * cell + cell / 2 << "\" text-anchor=\"middle\" "
               << "dominant-baseline=\"middle\" font-family=\"monospace\" "
               << "font-size=\"16\" fill=\"" << (v > 0.6 ? "#fff" : "#000")
               << "\">" << label << "</text>\n";
        }
    }
    os << "</svg>\n";
}

}  // namespace proplab
