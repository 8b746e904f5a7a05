#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "proplab/evaluator.hpp"
#include "proplab/ltr.hpp"

namespace proplab {

// One query's page, rows sorted by logged rank, features aligned with rows
// (empty when no features file is in play).
struct QueryGroup {
    std::string query_id;
    std::vector<Impression> rows;
    std::vector<std::vector<double>> features;
};

std::vector<QueryGroup> group_log(const std::vector<Impression>& log,
                                  const std::vector<FeatureRow>* features);

enum class LabelSource { Booked, TrueRelevance };

// Produces the indices of a group's rows in the order a method would show
// them.
using RankingFn = std::function<std::vector<size_t>(const QueryGroup&)>;

RankingFn logging_policy_ranker();
RankingFn judge_score_ranker();
RankingFn oracle_ranker();  // descending true_relevance
RankingFn model_ranker(const RankerModel& model);

// Lexical baseline over id->text lookups; corpus statistics span the distinct
// items of the evaluated log.
RankingFn bm25_ranker(const std::vector<QueryGroup>& groups,
                      const std::unordered_map<std::string, std::string>& query_texts,
                      const std::unordered_map<std::string, std::string>& item_texts,
                      Bm25Params params = {});

MethodEval evaluate_method(const std::string& name,
                           const std::vector<QueryGroup>& groups, int k,
                           LabelSource labels, const RankingFn& order);

}  // namespace proplab
