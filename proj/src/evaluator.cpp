#include "proplab/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace proplab {

double dcg_at_k(const std::vector<double>& gains, int k) {
    if (k < 1) throw config_error("k must be >= 1");
    double dcg = 0.0;
    const size_t n = std::min(gains.size(), static_cast<size_t>(k));
    for (size_t i = 0; i < n; ++i) {
        dcg += gains[i] / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg;
}

std::optional<double> ndcg_at_k(const std::vector<double>& labels_in_ranked_order,
                                int k) {
    for (double g : labels_in_ranked_order) {
        if (g < 0.0) throw validation_error("negative gain");
    }
    std::vector<double> ideal = labels_in_ranked_order;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double ideal_dcg = dcg_at_k(ideal, k);
    if (ideal_dcg == 0.0) return std::nullopt;
    return dcg_at_k(labels_in_ranked_order, k) / ideal_dcg;
}

WeightedNdcg wndcg(const std::vector<EvalInstance>& instances) {
    WeightedNdcg out;
    double num = 0.0, den = 0.0;
    for (const auto& inst : instances) {
        if (inst.logged_rank_of_booked < 1) {
            ++out.excluded;
            continue;
        }
        const double w = static_cast<double>(inst.logged_rank_of_booked);
        num += w * inst.ndcg;
        den += w;
        ++out.used;
    }
    if (den > 0.0) out.value = num / den;
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

Bm25Index::Bm25Index(const std::vector<std::vector<std::string>>& documents,
                     Bm25Params params)
    : params_(params) {
    term_counts_.reserve(documents.size());
    long long total_len = 0;
    for (const auto& doc : documents) {
        std::map<std::string, int> counts;
        for (const auto& term : doc) ++counts[term];
        for (const auto& [term, _] : counts) ++doc_freq_[term];
        doc_lengths_.push_back(static_cast<int>(doc.size()));
        total_len += static_cast<long long>(doc.size());
        term_counts_.push_back(std::move(counts));
    }
    avg_doc_length_ = documents.empty()
                          ? 0.0
                          : static_cast<double>(total_len) /
                                static_cast<double>(documents.size());
}

double Bm25Index::score(const std::vector<std::string>& query_terms,
                        size_t doc) const {
    if (doc >= term_counts_.size()) throw validation_error("document out of range");
    if (query_terms.empty()) return 0.0;
    const double n_docs = static_cast<double>(term_counts_.size());
    const double len = static_cast<double>(doc_lengths_[doc]);
    const double norm =
        params_.k1 * (1.0 - params_.b +
                      params_.b * (avg_doc_length_ > 0.0 ? len / avg_doc_length_ : 0.0));
    double total = 0.0;
    for (const auto& term : query_terms) {
        auto tf_it = term_counts_[doc].find(term);
        if (tf_it == term_counts_[doc].end()) continue;
        const double tf = static_cast<double>(tf_it->second);
        const double df = static_cast<double>(doc_freq_.at(term));
        const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        total += idf * tf * (params_.k1 + 1.0) / (tf + norm);
    }
    return total;
}

EvalReport delta_report(const std::vector<MethodEval>& methods,
                        const std::string& baseline, int k) {
    const MethodEval* base = nullptr;
    for (const auto& m : methods) {
        if (m.method == baseline) base = &m;
    }
    if (base == nullptr) {
        throw numeric_error("baseline method '" + baseline + "' not present");
    }
    if (base->mean_ndcg <= 0.0 || base->wndcg <= 0.0) {
        throw numeric_error("baseline means must be positive for deltas");
    }
    EvalReport report;
    report.baseline = baseline;
    report.k = k;
    for (const auto& m : methods) {
        DeltaRow row;
        row.method = m.method;
        row.mean_ndcg = m.mean_ndcg;
        row.wndcg = m.wndcg;
        row.n = m.n;
        row.delta_ndcg_pct = 100.0 * (m.mean_ndcg - base->mean_ndcg) / base->mean_ndcg;
        row.delta_wndcg_pct = 100.0 * (m.wndcg - base->wndcg) / base->wndcg;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string format_delta(double pct) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%+.2f%%", pct);
    return buf;
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
    os << "method,ndcg,wndcg,n\n";
    for (const auto& row : report.rows) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f,%.4f", row.mean_ndcg, row.wndcg);
        os << row.method << ',' << buf << ',' << row.n << '\n';
    }
}

void render_report_table(std::ostream& os, const EvalReport& report) {
    size_t width = 14;
    for (const auto& row : report.rows) width = std::max(width, row.method.size() + 2);
    os << "Ranking Method";
    os << std::string(width - 14, ' ');
    char head[64];
    std::snprintf(head, sizeof(head), "  dNDCG@%-3d  dwNDCG@%-3d\n", report.k,
                  report.k);
    os << head;
    for (const auto& row : report.rows) {
        if (row.method == report.baseline) continue;
        os << row.method << std::string(width - row.method.size(), ' ') << "  "
           << format_delta(row.delta_ndcg_pct) << "     "
           << format_delta(row.delta_wndcg_pct) << '\n';
    }
    os << "(deltas vs " << report.baseline << ", " << report.rows.size()
       << " methods)\n";
}

}  // namespace proplab
