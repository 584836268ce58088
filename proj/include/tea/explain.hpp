#pragma once

// Instance attributions from a fitted surrogate: per-query decompositions
// into alpha_i yhat_i gamma_i terms, and the training-row orderings the
// cleaning and remove-retrain protocols consume.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tea/dataset.hpp"
#include "tea/gbdt.hpp"
#include "tea/surrogate.hpp"
#include "tea/teknn.hpp"

namespace tea {

struct Explanation {
    std::int64_t query_id = -1;
    std::vector<double> similarities;    // gamma_i = k(x_i, x_t)
    std::vector<double> signed_weights;  // alpha_i yhat_i
    std::vector<double> contributions;   // alpha_i yhat_i gamma_i
    int predicted_label = 0;             // sign of the surrogate decision
};

struct Ordering {
    std::string method;
    std::vector<std::int64_t> ranked_row_ids;  // most important first
    std::vector<double> scores;                // non-increasing
};

// Sorts by score descending, ties by ascending row_id. Every ordering is
// built through this.
Ordering make_ordering(const std::string& method, const std::vector<std::int64_t>& row_ids,
                       const std::vector<double>& scores);

// rows ranked by |alpha_i| descending
Ordering global_importance(const SurrogateModel& model, const std::vector<std::int64_t>& row_ids);

Explanation local_explanation(const SurrogateModel& model, const TreeEnsemble& ensemble,
                              std::span<const double> x_t);

// score_i = sum over queries of contribution_i times the query's predicted
// label; high scores support the model's own predictions
Ordering aggregate_explanations(const SurrogateModel& model, const TreeEnsemble& ensemble,
                                const std::vector<std::vector<double>>& queries,
                                const std::vector<std::int64_t>& row_ids);

// highest loss first
Ordering loss_ordering(const std::string& method, const std::vector<double>& losses,
                       const std::vector<std::int64_t>& row_ids);

// seeded uniform permutation of 0..n-1; score is the reversed rank position
Ordering random_ordering(std::size_t n, std::uint64_t seed);

// score_i = number of other training rows whose k nearest neighbors include i
Ordering teknn_density_ordering(const TeknnModel& model, const KernelRep& rep,
                                const std::vector<std::int64_t>& row_ids);

}  // namespace tea
