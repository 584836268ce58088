#pragma once

// Shared test fixtures: the hand-built two-tree ensemble and small random
// datasets for solver and kernel property tests.

#include <cstdint>
#include <string>
#include <vector>

#include "tea/dataset.hpp"
#include "tea/gbdt.hpp"
#include "tea/rng.hpp"

namespace tea::fixtures {

// Two hand-built trees over three features. x = (1, 0, 0) routes to the
// leaves worth 5 and 3.8, so its margin is exactly 8.8. Leaf ids follow the
// library's pre-order convention and are contiguous across trees.
inline TreeEnsemble worked_ensemble() {
    TreeEnsemble ens;
    ens.d = 3;
    ens.base_score = 0.0;
    ens.num_leaves = 6;

    Tree t1;
    t1.nodes.resize(5);
    t1.nodes[0] = TreeNode{0, 0.5, 1, 2, -1, 0.0};
    t1.nodes[1] = TreeNode{-1, 0.0, -1, -1, 0, -2.0};
    t1.nodes[2] = TreeNode{1, 0.5, 3, 4, -1, 0.0};
    t1.nodes[3] = TreeNode{-1, 0.0, -1, -1, 1, 5.0};
    t1.nodes[4] = TreeNode{-1, 0.0, -1, -1, 2, 1.0};
    ens.trees.push_back(t1);

    Tree t2;
    t2.nodes.resize(5);
    t2.nodes[0] = TreeNode{2, 0.5, 1, 2, -1, 0.0};
    t2.nodes[1] = TreeNode{0, 0.5, 3, 4, -1, 0.0};
    t2.nodes[2] = TreeNode{-1, 0.0, -1, -1, 5, 0.5};
    t2.nodes[3] = TreeNode{-1, 0.0, -1, -1, 3, -4.0};
    t2.nodes[4] = TreeNode{-1, 0.0, -1, -1, 4, 3.8};
    ens.trees.push_back(t2);
    return ens;
}

// uniform features with an axis rule plus label noise; both classes present
inline Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Dataset out;
    out.n = n;
    out.d = d;
    for (std::size_t j = 0; j < d; ++j) out.feature_names.push_back("f" + std::to_string(j));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) out.features.push_back(rng.uniform_double());
        int label = out.features[i * d] > 0.5 ? 1 : -1;
        if (rng.uniform_double() < 0.15) label = -label;
        out.labels.push_back(label);
        out.row_ids.push_back(static_cast<std::int64_t>(i));
    }
    bool has_pos = false, has_neg = false;
    for (const int y : out.labels) (y > 0 ? has_pos : has_neg) = true;
    if (!has_pos) out.labels[0] = 1;
    if (!has_neg) out.labels[0] = -1;
    out.check();
    return out;
}

}  // namespace tea::fixtures
