#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "proplab/core_types.hpp"

namespace proplab {

// gains are in ranked order; binary linear gain in this artifact but any
// non-negative reals are accepted.
double dcg_at_k(const std::vector<double>& gains, int k);

// nullopt when every label is zero (instance skipped, counted by callers).
std::optional<double> ndcg_at_k(const std::vector<double>& labels_in_ranked_order,
                                int k);

struct EvalInstance {
    std::string query_id;
    double ndcg = 0.0;
    // Logged rank of the booked item (max logged rank when several are
    // booked); <= 0 means unknown and excludes the instance from wNDCG.
    int logged_rank_of_booked = 0;
};

struct WeightedNdcg {
    double value = 0.0;
    int used = 0;
    int excluded = 0;
};

// Weighted mean with w_q = logged_rank_of_booked.
WeightedNdcg wndcg(const std::vector<EvalInstance>& instances);

// Okapi BM25 with the +1-inside-log IDF variant (never negative).
struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class Bm25Index {
public:
    explicit Bm25Index(const std::vector<std::vector<std::string>>& documents,
                       Bm25Params params = {});
    double score(const std::vector<std::string>& query_terms, size_t doc) const;
    size_t size() const { return doc_lengths_.size(); }

private:
    Bm25Params params_;
    std::vector<std::map<std::string, int>> term_counts_;
    std::vector<int> doc_lengths_;
    std::map<std::string, int> doc_freq_;
    double avg_doc_length_ = 0.0;
};

std::vector<std::string> tokenize(const std::string& text);

struct MethodEval {
    std::string method;
    double mean_ndcg = 0.0;
    double wndcg = 0.0;
    int n = 0;            // instances contributing to mean NDCG
    int skipped = 0;      // all-zero-label instances
    int wndcg_excluded = 0;
};

struct DeltaRow {
    std::string method;
    double mean_ndcg = 0.0;
    double wndcg = 0.0;
    int n = 0;
    double delta_ndcg_pct = 0.0;   // 100 * (method - baseline) / baseline
    double delta_wndcg_pct = 0.0;
};

struct EvalReport {
    std::string baseline;
    int k = 10;
    std::vector<DeltaRow> rows;
};

// Throws numeric_error when the baseline is missing or has zero means.
EvalReport delta_report(const std::vector<MethodEval>& methods,
                        const std::string& baseline, int k);

// "+0.81%" / "-42.24%", two decimals, explicit sign.
std::string format_delta(double pct);

// CSV: method,ndcg,wndcg,n (floats to 4 decimals) and a rendered text table
// with the delta columns.
void write_report_csv(std::ostream& os, const EvalReport& report);
void render_report_table(std::ostream& os, const EvalReport& report);

}  // namespace proplab
