#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tea/gbdt.hpp"
#include "tea/stats.hpp"
#include "tea/surrogate.hpp"
#include "tea/teknn.hpp"
#include "tea/tree_kernel.hpp"

namespace {

struct Fitted {
    tea::TreeEnsemble ens;
    tea::KernelRep rep;
    std::vector<int> yhat;
};

Fitted fit_problem(std::size_t n, std::uint64_t seed, int trees = 8,
                   tea::KernelKind kind = tea::KernelKind::LeafOutput) {
    const tea::Dataset d = tea::fixtures::random_dataset(n, 3, seed);
    tea::GBDTConfig cfg;
    cfg.num_trees = trees;
    Fitted f;
    f.ens = tea::fit_gbdt(d, cfg);
    f.rep = tea::transform(f.ens, d, kind);
    f.yhat = tea::predicted_labels(f.ens, d);
    bool pos = false, neg = false;
    for (const int y : f.yhat) (y > 0 ? pos : neg) = true;
    if (!pos) f.yhat[0] = 1;
    if (!neg) f.yhat[0] = -1;
    return f;
}

}  // namespace

TEST_CASE("pearson matches a hand-computed value and rejects bad input") {
    const std::vector<double> a{0.1, 0.4, 0.6, 0.9};
    const std::vector<double> b{0.2, 0.3, 0.7, 0.8};
    // means are 0.5; cross sum 0.28, self sums 0.34 and 0.26
    CHECK(tea::pearson(a, b) == doctest::Approx(0.28 / std::sqrt(0.34 * 0.26)).epsilon(1e-14));
    CHECK_THROWS(tea::pearson(a, {1.0, 1.0, 1.0, 1.0}));
    CHECK_THROWS(tea::pearson(a, {0.2, 0.3}));
    CHECK_THROWS(tea::pearson({}, {}));
}

TEST_CASE("family names round-trip") {
    CHECK(tea::family_name(tea::SurrogateFamily::KLR) == "KLR");
    CHECK(tea::family_name(tea::SurrogateFamily::SVM) == "SVM");
    CHECK(tea::family_from_name("KLR") == tea::SurrogateFamily::KLR);
    CHECK(tea::family_from_name("SVM") == tea::SurrogateFamily::SVM);
    CHECK_THROWS(tea::family_from_name("klr"));
}

TEST_CASE("both dual solvers reach the oracle objective") {
    const double cs[] = {0.1, 1.0, 10.0};
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        const std::size_t n = 8 + trial;
        const Fitted f = fit_problem(n, 300 + trial, 4);
        const double C = cs[trial % 3];

        tea::oracle::BoxDual klr{tea::oracle::gram(f.rep, f.yhat), n, C, true};
        const std::vector<double> klr_ref = tea::oracle::minimize(klr);
        const tea::SurrogateModel klr_model = tea::fit_klr(f.rep, f.yhat, C);
        const double klr_solver_obj = tea::klr_dual_objective(klr_model.alphas, f.rep, f.yhat, C);
        const double klr_oracle_obj = tea::oracle::objective(klr, klr_ref);
        CHECK(std::abs(klr_solver_obj - klr_oracle_obj) <= 1e-6);
        // the two objective implementations agree on the same point
        CHECK(tea::klr_dual_objective(klr_ref, f.rep, f.yhat, C) ==
              doctest::Approx(klr_oracle_obj).epsilon(1e-10));
        for (const double alpha : klr_model.alphas) {
            CHECK(alpha > 0.0);
            CHECK(alpha < C);
        }

        tea::oracle::BoxDual svm{tea::oracle::gram(f.rep, f.yhat), n, C, false};
        const std::vector<double> svm_ref = tea::oracle::minimize(svm);
        const tea::SurrogateModel svm_model = tea::fit_svm(f.rep, f.yhat, C);
        const double svm_solver_obj = tea::svm_dual_objective(svm_model.alphas, f.rep, f.yhat, C);
        const double svm_oracle_obj = tea::oracle::objective(svm, svm_ref);
        CHECK(std::abs(svm_solver_obj - svm_oracle_obj) <= 1e-6);
        for (const double alpha : svm_model.alphas) {
            CHECK(alpha >= 0.0);
            CHECK(alpha <= C);
        }
    }
}

TEST_CASE("decision equals its kernel expansion") {
    const Fitted f = fit_problem(50, 41);
    const tea::SurrogateModel model = tea::fit_klr(f.rep, f.yhat, 1.0);
    for (std::size_t i = 0; i < f.rep.maps.size(); ++i) {
        const double primal = tea::decision(model, f.rep.maps[i]);
        const double expanded = tea::decision_expansion(model, f.rep.maps[i]);
        CHECK(std::abs(primal - expanded) / std::max(1.0, std::abs(primal)) <= 1e-8);
        CHECK(tea::predict_proba(model, f.rep.maps[i]) ==
              doctest::Approx(tea::sigmoid(primal)).epsilon(1e-12));
    }
}

TEST_CASE("surrogates track the ensemble on easy data") {
    const tea::Dataset d = tea::fixtures::random_dataset(150, 3, 47);
    tea::GBDTConfig cfg;
    cfg.num_trees = 15;
    const tea::TreeEnsemble ens = tea::fit_gbdt(d, cfg);
    const tea::TunedSurrogate klr = tea::tune_C(ens, d, tea::SurrogateFamily::KLR,
                                                tea::KernelKind::LeafOutput, {0.1, 1.0, 10.0}, 7);
    const tea::FidelityReport rep = tea::fidelity(klr.model, ens, d);
    CHECK(rep.family == "KLR");
    CHECK(rep.n_eval == d.n);
    CHECK(rep.pearson > 0.8);
    const bool in_grid = klr.C == 0.1 || klr.C == 1.0 || klr.C == 10.0;
    CHECK(in_grid);
    // the refit model covers all of train
    CHECK(klr.model.alphas.size() == d.n);

    const tea::TunedSurrogate svm = tea::tune_C(ens, d, tea::SurrogateFamily::SVM,
                                                tea::KernelKind::LeafOutput, {0.1, 1.0, 10.0}, 7);
    CHECK(tea::fidelity(svm.model, ens, d).pearson > 0.6);
}

TEST_CASE("surrogate json round-trips and validates its rep") {
    const Fitted f = fit_problem(30, 53);
    const tea::SurrogateModel model = tea::fit_svm(f.rep, f.yhat, 2.0);
    const nlohmann::json j = tea::model_to_json(model);
    CHECK(j.at("family") == "SVM");
    CHECK(j.at("C") == 2.0);
    CHECK(j.at("kind") == "LeafOutput");

    const tea::SurrogateModel back = tea::model_from_json(j, f.rep);
    CHECK(back.alphas == model.alphas);
    CHECK(back.target_labels == model.target_labels);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(tea::decision(back, f.rep.maps[i]) ==
              doctest::Approx(tea::decision(model, f.rep.maps[i])).epsilon(1e-12));

    // a rep from a different ensemble is rejected by fingerprint
    const Fitted other = fit_problem(30, 54);
    CHECK_THROWS(tea::model_from_json(j, other.rep));
}

TEST_CASE("solver input validation") {
    const Fitted f = fit_problem(20, 61);
    CHECK_THROWS(tea::fit_klr(f.rep, f.yhat, 0.0));
    CHECK_THROWS(tea::fit_klr(f.rep, f.yhat, -1.0));
    std::vector<int> bad = f.yhat;
    bad[0] = 0;
    CHECK_THROWS(tea::fit_klr(f.rep, bad, 1.0));
    bad = f.yhat;
    bad.pop_back();
    CHECK_THROWS(tea::fit_svm(f.rep, bad, 1.0));
    CHECK_THROWS(tea::fit_svm(tea::KernelRep{}, {}, 1.0));
}

TEST_CASE("teknn probability is the neighbor vote and ties break by position") {
    // four training points on a line, k = 3
    tea::KernelRep rep;
    rep.kind = tea::KernelKind::TreeOutput;
    rep.dimension = 1;
    for (const double v : {0.0, 1.0, 2.0, 10.0}) {
        tea::FeatureMap m;
        m.kind = rep.kind;
        m.dimension = 1;
        m.indices = {0};
        m.values = {v};
        rep.maps.push_back(m);
    }
    rep.ensemble_fingerprint = "test";
    const std::vector<int> yhat{1, -1, 1, -1};
    const tea::TeknnModel model = tea::make_teknn(rep, yhat, 3);

    tea::FeatureMap q;
    q.kind = rep.kind;
    q.dimension = 1;
    q.indices = {0};
    q.values = {0.9};
    const std::vector<std::size_t> nb = tea::teknn_neighbors(model, q);
    CHECK(nb == std::vector<std::size_t>{1, 0, 2});
    CHECK(tea::teknn_predict_proba(model, q) == doctest::Approx(2.0 / 3.0));

    // equidistant neighbors resolve to the earlier training row
    q.values = {1.5};
    const std::vector<std::size_t> tie = tea::teknn_neighbors(model, q);
    CHECK(tie[0] == 1);
    CHECK(tie[1] == 2);

    CHECK_THROWS(tea::make_teknn(rep, yhat, 0));
    CHECK_THROWS(tea::make_teknn(rep, yhat, 4));
}

TEST_CASE("teknn tuning picks k from the grid and reports fidelity") {
    const tea::Dataset d = tea::fixtures::random_dataset(120, 3, 67);
    tea::GBDTConfig cfg;
    cfg.num_trees = 10;
    const tea::TreeEnsemble ens = tea::fit_gbdt(d, cfg);
    const tea::TunedTeknn tuned = tea::tune_teknn(ens, d, tea::KernelKind::LeafOutput, {3, 7, 15}, 5);
    const bool in_grid = tuned.k == 3 || tuned.k == 7 || tuned.k == 15;
    CHECK(in_grid);
    CHECK(tuned.model.train_rep.maps.size() == d.n);
    CHECK(tuned.validation.family == "KNN");

    const tea::FidelityReport rep = tea::teknn_fidelity(tuned.model, ens, d);
    CHECK(rep.pearson > 0.3);
    CHECK(rep.n_eval == d.n);
}
