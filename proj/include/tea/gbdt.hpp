#pragma once

// Gradient-boosted regression trees for binary classification with logistic
// loss. Trees expose leaf identities and values so the kernel code can build
// feature maps from the trained structure.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tea/dataset.hpp"

namespace tea {

struct GBDTConfig {
    int num_trees = 100;
    int max_depth = 3;  // -1 means unlimited, internally capped at 32
    double learning_rate = 0.1;
    int min_samples_leaf = 1;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf_id = -1;   // unique and contiguous across the whole ensemble
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // root at index 0
};

struct TreeEnsemble {
    std::vector<Tree> trees;
    std::size_t num_leaves = 0;
    double base_score = 0.0;
    GBDTConfig config;
    std::size_t d = 0;
    mutable std::string fingerprint_cache;  // filled on first ensemble_fingerprint call

    // leaf node reached by routing x through tree t; x[feature] < threshold goes left
    const TreeNode& route(std::size_t t, const double* x) const;
};

TreeEnsemble fit_gbdt(const Dataset& train, const GBDTConfig& config);

// One leaf_id per tree, in tree order.
std::vector<int> leaf_assignment(const TreeEnsemble& ensemble, std::span<const double> x);

double predict_margin(const TreeEnsemble& ensemble, std::span<const double> x);
double predict_proba(const TreeEnsemble& ensemble, std::span<const double> x);

// log(1 + exp(-y * margin)), evaluated without overflow
double instance_loss(const TreeEnsemble& ensemble, std::span<const double> x, int y);

std::vector<double> predict_margins(const TreeEnsemble& ensemble, const Dataset& data);
std::vector<int> predicted_labels(const TreeEnsemble& ensemble, const Dataset& data);
double test_accuracy(const TreeEnsemble& ensemble, const Dataset& data);

// Cross-validated grid search on mean fold accuracy; ties prefer fewer trees,
// then shallower depth.
GBDTConfig tune_gbdt(const Dataset& train, const std::vector<GBDTConfig>& grid, int folds);

nlohmann::json ensemble_to_json(const TreeEnsemble& ensemble);
TreeEnsemble ensemble_from_json(const nlohmann::json& j);

// content hash of the serialized ensemble, hex string
std::string ensemble_fingerprint(const TreeEnsemble& ensemble);

}  // namespace tea
