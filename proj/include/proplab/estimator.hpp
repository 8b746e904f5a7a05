#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "proplab/core_types.hpp"

namespace proplab {

// Impression/click counts indexed by (judge score, rank). Merge is a plain
// count sum, so shard-wise construction commutes with sequential.
class ClickRateTable {
public:
    explicit ClickRateTable(int page_size);

    static ClickRateTable from_log(const std::vector<Impression>& log,
                                   int page_size);

    void add(int score, int rank, bool clicked);
    void merge(const ClickRateTable& other);

    long long impressions(int score, int rank) const;
    long long clicks(int score, int rank) const;
    int page_size() const { return page_size_; }

private:
    size_t idx(int score, int rank) const;
    int page_size_;
    std::vector<long long> impressions_;
    std::vector<long long> clicks_;
};

// Same table construction but with a validation pass: every impression must
// carry a judge score.
ClickRateTable empirical_click_rates(const std::vector<Impression>& log,
                                     int page_size);

// (clicks + alpha) / (impressions + 2 alpha). alpha = 0 on an empty cell is an
// undefined-cell error.
double click_rate(const ClickRateTable& table, int score, int rank,
                  double alpha = 0.0);

// v[p] = rate(s,p) / rate(s,1), v[1] = 1 exactly. nullopt when rank-1 support
// for this score is below min_support. Ratios above 1 are reported as-is;
// clamping would hide the violations the diagnostics look for.
std::optional<std::vector<double>> propensity_single_score(
    const ClickRateTable& table, int score, double alpha, long long min_support);

struct PropensityEstimate {
    std::vector<double> estimate;  // index 0 = rank 1; estimate[0] == 1.0
    std::vector<double> ci_lo;     // empty until a bootstrap attaches one
    std::vector<double> ci_hi;
    int scores_retained = 0;
    int scores_excluded = 0;
    std::vector<std::string> warnings;

    bool has_ci() const { return !ci_lo.empty(); }
};

std::vector<int> all_scores();
std::vector<int> scores_in_bucket(const ScoreBucket& bucket);

// Unweighted mean of per-score ratio vectors over retained scores (the
// support-weighted variant is behind a flag). Throws numeric_error when every
// score in the set fails min_support.
PropensityEstimate propensity_averaged(const ClickRateTable& table,
                                       const std::vector<int>& score_set,
                                       double alpha, long long min_support,
                                       bool support_weighted = false);

struct BucketCurve {
    ScoreBucket bucket;
    PropensityEstimate estimate;
};

struct BucketCurves {
    std::vector<BucketCurve> curves;
    std::vector<std::string> warnings;  // e.g. empty buckets that were skipped
};

BucketCurves bucket_curves(const ClickRateTable& table,
                           const std::vector<ScoreBucket>& buckets, double alpha,
                           long long min_support);

struct DivergenceReport {
    std::vector<double> max_gap;        // per rank (index 0 = rank 1)
    double overall_max_gap = 0.0;
    int rank_of_max_gap = 1;
    // Fraction of ranks >= 2 where some bucket pair has disjoint 95% CIs.
    double disjoint_rank_fraction = 0.0;
    bool divergent = false;
};

// Requires >= 2 curves with CIs attached; throws numeric_error otherwise.
// Divergent when CIs separate at >= 25% of ranks beyond rank 1.
DivergenceReport bucket_divergence(const BucketCurves& curves);

// Row-major rearrangement of the estimate onto the grid.
std::vector<std::vector<double>> map_to_grid(const PropensityEstimate& est,
                                             const GridLayout& layout);

struct EstimatorSpec {
    std::vector<int> score_set;  // empty = all scores
    double alpha = 0.0;
    long long min_support = 50;
    bool support_weighted = false;
};

// Percentile 95% CIs from query-level resampling. Deterministic given seed;
// rank 1 stays [1,1]. Warns (not fails) below 10 distinct queries.
void attach_bootstrap_ci(PropensityEstimate& est,
                         const std::vector<Impression>& log,
                         const EstimatorSpec& spec, int resamples,
                         std::uint64_t seed, int page_size);

struct EstimationResult {
    PropensityEstimate overall;
    BucketCurves buckets;
};

// One pass over the log: overall estimate plus per-bucket curves, all with
// bootstrap CIs from a shared set of query resamples.
EstimationResult estimate_all(const std::vector<Impression>& log, int page_size,
                              const std::vector<ScoreBucket>& buckets,
                              const EstimatorSpec& spec, int resamples,
                              std::uint64_t seed);

// Outputs.
void write_propensity_csv(std::ostream& os, const PropensityEstimate& est,
                          const GridLayout& layout);
PropensityEstimate read_propensity_csv_file(const std::string& path);
void write_bucket_csv(std::ostream& os, const BucketCurves& curves,
                      const GridLayout& layout);
std::string divergence_report_json(const DivergenceReport& report);
void write_heatmap_svg(std::ostream& os,
                       const std::vector<std::vector<double>>& matrix);

}  // namespace proplab
