#include "proplab/pipeline.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

namespace proplab {

std::vector<QueryGroup> group_log(const std::vector<Impression>& log,
                                  const std::vector<FeatureRow>* features) {
    std::unordered_map<std::string, const FeatureRow*> by_key;
    if (features != nullptr) {
        for (const auto& row : *features) {
            by_key[row.query_id + '\x1f' + row.item_id] = &row;
        }
    }
    std::vector<QueryGroup> groups;
    std::unordered_map<std::string, size_t> index;
    for (const auto& imp : log) {
        auto [it, inserted] = index.emplace(imp.query_id, groups.size());
        if (inserted) {
            groups.emplace_back();
            groups.back().query_id = imp.query_id;
        }
        groups[it->second].rows.push_back(imp);
    }
    for (auto& group : groups) {
        std::sort(group.rows.begin(), group.rows.end(),
                  [](const Impression& a, const Impression& b) {
                      return a.rank < b.rank;
                  });
        if (features != nullptr) {
            for (const auto& row : group.rows) {
                auto it = by_key.find(row.query_id + '\x1f' + row.item_id);
                if (it == by_key.end()) {
                    throw validation_error("no features for (" + row.query_id +
                                           ", " + row.item_id + ")");
                }
                group.features.push_back(it->second->values);
            }
        }
    }
    return groups;
}

namespace {

std::vector<size_t> identity_order(size_t n) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    return order;
}

std::vector<size_t> order_by_key(const QueryGroup& group,
                                 const std::function<double(size_t)>& key) {
    auto order = identity_order(group.rows.size());
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const double ka = key(a), kb = key(b);
        if (ka != kb) return ka > kb;
        return group.rows[a].item_id < group.rows[b].item_id;
    });
    return order;
}

}  // namespace

RankingFn logging_policy_ranker() {
    return [](const QueryGroup& group) { return identity_order(group.rows.size()); };
}

RankingFn judge_score_ranker() {
    return [](const QueryGroup& group) {
        return order_by_key(group, [&](size_t i) {
            if (!group.rows[i].judge_score) {
                throw validation_error("judge ranking needs annotated rows");
            }
            return static_cast<double>(*group.rows[i].judge_score);
        });
    };
}

RankingFn oracle_ranker() {
    return [](const QueryGroup& group) {
        return order_by_key(group, [&](size_t i) {
            if (!group.rows[i].true_relevance) {
                throw validation_error("oracle ranking needs true_relevance");
            }
            return *group.rows[i].true_relevance;
        });
    };
}

RankingFn model_ranker(const RankerModel& model) {
    return [&model](const QueryGroup& group) {
        if (group.features.size() != group.rows.size()) {
            throw validation_error("model ranking needs aligned features");
        }
        std::vector<std::string> ids;
        ids.reserve(group.rows.size());
        for (const auto& row : group.rows) ids.push_back(row.item_id);
        return score_items(model, group.features, ids);
    };
}

RankingFn bm25_ranker(
    const std::vector<QueryGroup>& groups,
    const std::unordered_map<std::string, std::string>& query_texts,
    const std::unordered_map<std::string, std::string>& item_texts,
    Bm25Params params) {
    // Corpus = distinct items across the evaluated groups.
    auto doc_index = std::make_shared<std::unordered_map<std::string, size_t>>();
    std::vector<std::vector<std::string>> docs;
    for (const auto& group : groups) {
        for (const auto& row : group.rows) {
            if (doc_index->count(row.item_id)) continue;
            auto it = item_texts.find(row.item_id);
            if (it == item_texts.end()) {
                throw validation_error("no text for item " + row.item_id);
            }
            doc_index->emplace(row.item_id, docs.size());
            docs.push_back(tokenize(it->second));
        }
    }
    auto index = std::make_shared<Bm25Index>(docs, params);
    auto queries = std::make_shared<std::unordered_map<std::string, std::string>>(
        query_texts);
    return [index, doc_index, queries](const QueryGroup& group) {
        auto qit = queries->find(group.query_id);
        if (qit == queries->end()) {
            throw validation_error("no text for query " + group.query_id);
        }
        const auto terms = tokenize(qit->second);
        return order_by_key(group, [&](size_t i) {
            return index->score(terms, doc_index->at(group.rows[i].item_id));
        });
    };
}

MethodEval evaluate_method(const std::string& name,
                           const std::vector<QueryGroup>& groups, int k,
                           LabelSource labels, const RankingFn& order) {
    MethodEval eval;
    eval.method = name;
    std::vector<EvalInstance> instances;
    double ndcg_sum = 0.0;
    for (const auto& group : groups) {
        std::vector<double> gains_logged(group.rows.size(), 0.0);
        int booked_rank = 0;
        for (size_t i = 0; i < group.rows.size(); ++i) {
            const auto& row = group.rows[i];
            if (labels == LabelSource::Booked) {
                gains_logged[i] = row.booked ? 1.0 : 0.0;
            } else {
                if (!row.true_relevance) {
                    throw validation_error("true-relevance labels missing");
                }
                gains_logged[i] = *row.true_relevance;
            }
            if (row.booked) booked_rank = std::max(booked_rank, row.rank);
        }
        const auto permutation = order(group);
        std::vector<double> gains(permutation.size());
        for (size_t i = 0; i < permutation.size(); ++i) {
            gains[i] = gains_logged[permutation[i]];
        }
        const auto value = ndcg_at_k(gains, k);
        if (!value) {
            ++eval.skipped;
            continue;
        }
        ndcg_sum += *value;
        ++eval.n;
        instances.push_back(EvalInstance{group.query_id, *value, booked_rank});
    }
    if (eval.n > 0) eval.mean_ndcg = ndcg_sum / eval.n;
    const auto weighted = wndcg(instances);
    eval.wndcg = weighted.value;
    eval.wndcg_excluded = weighted.excluded;
    return eval;
}

}  // namespace proplab
