#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "doctest.h"

#include "tea/dataset.hpp"
#include "tea/gbdt.hpp"
#include "tea/rng.hpp"

namespace {

tea::Dataset blobs(std::size_t n, std::uint64_t seed, double gap = 4.0) {
    tea::Rng rng(seed);
    tea::Dataset d;
    d.n = n;
    d.d = 2;
    d.feature_names = {"x0", "x1"};
    for (std::size_t i = 0; i < n; ++i) {
        const int label = i % 2 == 0 ? -1 : 1;
        const double cx = label < 0 ? 0.0 : gap;
        d.features.push_back(cx + rng.normal());
        d.features.push_back(rng.normal());
        d.labels.push_back(label);
        d.row_ids.push_back(static_cast<std::int64_t>(i));
    }
    d.check();
    return d;
}

// Checkerboard with jittered points and unequal quadrant counts. Exact xor on
// {0,1}^2 gives every first split zero gain, so greedy trees never start on
// it; the uneven counts leave a usable first split while still requiring a
// second level to separate.
tea::Dataset xor_data(std::size_t per_quadrant, std::uint64_t seed) {
    tea::Rng rng(seed);
    tea::Dataset d;
    d.d = 2;
    d.feature_names = {"x0", "x1"};
    std::size_t i = 0;
    std::size_t quadrant = 0;
    for (const int a : {0, 1}) {
        for (const int b : {0, 1}) {
            const std::size_t count = per_quadrant + 3 * quadrant++;
            for (std::size_t r = 0; r < count; ++r) {
                d.features.push_back(a == 0 ? 0.25 * rng.uniform_double()
                                            : 1.0 - 0.25 * rng.uniform_double());
                d.features.push_back(b == 0 ? 0.25 * rng.uniform_double()
                                            : 1.0 - 0.25 * rng.uniform_double());
                d.labels.push_back(a != b ? 1 : -1);
                d.row_ids.push_back(static_cast<std::int64_t>(i++));
            }
        }
    }
    d.n = i;
    d.check();
    return d;
}

tea::Dataset noisy(std::size_t n, std::uint64_t seed) {
    tea::Dataset d = blobs(n, seed, 1.5);
    tea::Rng rng(seed + 1);
    for (std::size_t i = 0; i < n; ++i)
        if (rng.uniform_double() < 0.2) d.labels[i] = -d.labels[i];
    return d;
}

double train_loss(const tea::TreeEnsemble& ens, const tea::Dataset& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.n; ++i)
        s += tea::instance_loss(ens, {d.row(i), d.d}, d.labels[i]);
    return s / static_cast<double>(d.n);
}

}  // namespace

TEST_CASE("separable data is fit to full training accuracy") {
    const tea::Dataset d = blobs(80, 1);
    tea::GBDTConfig cfg;
    cfg.num_trees = 20;
    const tea::TreeEnsemble ens = tea::fit_gbdt(d, cfg);
    CHECK(tea::test_accuracy(ens, d) == 1.0);
    CHECK(ens.d == 2);
    CHECK(ens.trees.size() == 20);
}

TEST_CASE("base score is the prior log-odds") {
    tea::Dataset d = blobs(40, 2);
    // 3:1 class ratio
    for (std::size_t i = 0; i < d.n; ++i) d.labels[i] = i % 4 == 0 ? -1 : 1;
    tea::GBDTConfig cfg;
    cfg.num_trees = 1;
    const tea::TreeEnsemble ens = tea::fit_gbdt(d, cfg);
    CHECK(ens.base_score == doctest::Approx(std::log(0.75 / 0.25)).epsilon(1e-12));
}

TEST_CASE("xor needs depth two and tuning finds it") {
    const tea::Dataset d = xor_data(12, 21);
    tea::GBDTConfig shallow;
    shallow.num_trees = 5;
    shallow.max_depth = 1;
    tea::GBDTConfig deep;
    deep.num_trees = 5;
    deep.max_depth = 3;
    CHECK(tea::test_accuracy(tea::fit_gbdt(d, shallow), d) < 1.0);
    CHECK(tea::test_accuracy(tea::fit_gbdt(d, deep), d) == 1.0);

    const tea::GBDTConfig picked = tea::tune_gbdt(d, {shallow, deep}, 4);
    CHECK(picked.max_depth == 3);
}

TEST_CASE("tuning ties prefer the smaller model") {
    const tea::Dataset d = blobs(60, 3);
    tea::GBDTConfig big;
    big.num_trees = 50;
    big.max_depth = 3;
    tea::GBDTConfig small = big;
    small.num_trees = 5;
    const tea::GBDTConfig picked = tea::tune_gbdt(d, {big, small}, 3);
    CHECK(picked.num_trees == 5);

    // singleton grids skip cross-validation entirely
    const tea::GBDTConfig only = tea::tune_gbdt(d, {big}, 3);
    CHECK(only.num_trees == 50);
}

TEST_CASE("training loss is non-increasing in the number of trees") {
    const tea::Dataset d = noisy(120, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 8; ++k) {
        tea::GBDTConfig cfg;
        cfg.num_trees = k;
        cfg.max_depth = 2;
        const double loss = train_loss(tea::fit_gbdt(d, cfg), d);
        CHECK(loss <= prev);
        prev = loss;
    }
}

TEST_CASE("leaf ids are contiguous and min_samples_leaf is respected") {
    const tea::Dataset d = noisy(60, 5);
    tea::GBDTConfig cfg;
    cfg.num_trees = 6;
    cfg.max_depth = 4;
    cfg.min_samples_leaf = 5;
    const tea::TreeEnsemble ens = tea::fit_gbdt(d, cfg);

    std::vector<int> seen;
    for (const tea::Tree& tree : ens.trees)
        for (const tea::TreeNode& node : tree.nodes)
            if (node.is_leaf()) seen.push_back(node.leaf_id);
    std::sort(seen.begin(), seen.end());
    CHECK(seen.size() == ens.num_leaves);
    for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == static_cast<int>(i));

    // per-tree leaf occupancy over the training rows
    std::map<int, int> count;
    for (std::size_t i = 0; i < d.n; ++i)
        for (const int leaf : tea::leaf_assignment(ens, {d.row(i), d.d})) count[leaf]++;
    CHECK(count.size() == ens.num_leaves);
    for (const auto& [leaf, c] : count) CHECK(c >= cfg.min_samples_leaf);

    // leaf ids ascend with tree index, so sparse map indices sort for free
    int prev_max = -1;
    for (const tea::Tree& tree : ens.trees) {
        int lo = 1 << 30, hi = -1;
        for (const tea::TreeNode& node : tree.nodes)
            if (node.is_leaf()) {
                lo = std::min(lo, node.leaf_id);
                hi = std::max(hi, node.leaf_id);
            }
        CHECK(lo > prev_max);
        prev_max = hi;
    }
}

TEST_CASE("margins decompose into base score plus routed leaf values") {
    const tea::Dataset d = noisy(50, 6);
    tea::GBDTConfig cfg;
    cfg.num_trees = 4;
    const tea::TreeEnsemble ens = tea::fit_gbdt(d, cfg);
    for (std::size_t i = 0; i < d.n; ++i) {
        double margin = ens.base_score;
        for (std::size_t t = 0; t < ens.trees.size(); ++t) margin += ens.route(t, d.row(i)).value;
        CHECK(margin == tea::predict_margin(ens, {d.row(i), d.d}));
        const double m = tea::predict_margin(ens, {d.row(i), d.d});
        CHECK(tea::predict_proba(ens, {d.row(i), d.d}) == doctest::Approx(1.0 / (1.0 + std::exp(-m))));
        const double want_loss = std::log1p(std::exp(-std::abs(m))) + (d.labels[i] * m < 0 ? std::abs(m) : 0.0);
        CHECK(tea::instance_loss(ens, {d.row(i), d.d}, d.labels[i]) ==
              doctest::Approx(want_loss).epsilon(1e-12));
    }
}

TEST_CASE("unlimited depth drives training error to zero on distinct rows") {
    tea::Dataset d = blobs(40, 7, 0.5);
    tea::GBDTConfig cfg;
    cfg.num_trees = 30;
    cfg.max_depth = -1;
    const tea::TreeEnsemble ens = tea::fit_gbdt(d, cfg);
    CHECK(tea::test_accuracy(ens, d) == 1.0);
}

TEST_CASE("fitting is deterministic and round-trips through json") {
    const tea::Dataset d = noisy(70, 8);
    tea::GBDTConfig cfg;
    cfg.num_trees = 10;
    const tea::TreeEnsemble a = tea::fit_gbdt(d, cfg);
    const tea::TreeEnsemble b = tea::fit_gbdt(d, cfg);
    CHECK(tea::ensemble_fingerprint(a) == tea::ensemble_fingerprint(b));

    const tea::TreeEnsemble back = tea::ensemble_from_json(tea::ensemble_to_json(a));
    CHECK(tea::ensemble_fingerprint(back) == tea::ensemble_fingerprint(a));
    CHECK(back.num_leaves == a.num_leaves);
    CHECK(back.base_score == a.base_score);
    for (std::size_t i = 0; i < d.n; ++i)
        CHECK(tea::predict_margin(back, {d.row(i), d.d}) ==
              tea::predict_margin(a, {d.row(i), d.d}));
}

TEST_CASE("invalid training inputs are rejected") {
    tea::Dataset d = blobs(10, 9);
    tea::GBDTConfig cfg;
    CHECK_THROWS(tea::fit_gbdt(tea::Dataset{}, cfg));

    tea::Dataset single = d;
    for (auto& y : single.labels) y = 1;
    CHECK_THROWS(tea::fit_gbdt(single, cfg));

    tea::GBDTConfig bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS(tea::fit_gbdt(d, bad));
    bad = cfg;
    bad.num_trees = 0;
    CHECK_THROWS(tea::fit_gbdt(d, bad));
    bad = cfg;
    bad.min_samples_leaf = 0;
    CHECK_THROWS(tea::fit_gbdt(d, bad));

    CHECK_THROWS(tea::tune_gbdt(d, {}, 3));
    CHECK_THROWS(tea::tune_gbdt(d, {cfg, cfg}, 1));
}
