#pragma once

// Kernelized surrogates fit on the ensemble's own predicted labels. Both
// families solve a box-constrained dual by cyclic coordinate descent over a
// random permutation per epoch, maintaining the primal weights w = sum_i
// alpha_i yhat_i phi(x_i) incrementally:
//   KLR  min 1/2 a'Qa + sum_i [a_i log a_i + (C - a_i) log(C - a_i)]
//   SVM  min 1/2 a'Qa - sum_i a_i          (L1 hinge)
// with Q_ij = yhat_i yhat_j k(x_i, x_j) and 0 <= a_i <= C, Q applied
// implicitly through the feature maps.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tea/dataset.hpp"
#include "tea/gbdt.hpp"
#include "tea/tree_kernel.hpp"

namespace tea {

enum class SurrogateFamily { KLR, SVM };

std::string family_name(SurrogateFamily family);
SurrogateFamily family_from_name(const std::string& name);

struct SurrogateModel {
    SurrogateFamily family = SurrogateFamily::KLR;
    double C = 1.0;
    std::vector<double> alphas;      // representer values, 0 <= alpha_i <= C
    std::vector<int> target_labels;  // yhat, the ensemble's predicted labels
    KernelRep train_rep;
    std::vector<double> primal_weights;
    std::uint64_t seed = 0;
};

struct FidelityReport {
    double pearson = 0.0;
    std::size_t n_eval = 0;
    std::string family;  // "KLR", "SVM", or "KNN"
    KernelKind kind = KernelKind::LeafPath;
};

inline constexpr std::uint64_t kDefaultSolverSeed = 1;
inline constexpr std::uint64_t kDefaultTuneSeed = 0xA11CEULL;
inline constexpr double kSolverEps = 1e-6;
inline constexpr int kSolverMaxEpochs = 1000;

SurrogateModel fit_klr(const KernelRep& rep, const std::vector<int>& yhat, double C,
                       std::uint64_t seed = kDefaultSolverSeed);
SurrogateModel fit_svm(const KernelRep& rep, const std::vector<int>& yhat, double C,
                       std::uint64_t seed = kDefaultSolverSeed);

// decision value through the cached primal weights
double decision(const SurrogateModel& model, const FeatureMap& x_map);

// the same value as the explicit kernel expansion sum_i alpha_i yhat_i k(x_i, x)
double decision_expansion(const SurrogateModel& model, const FeatureMap& x_map);

double predict_proba(const SurrogateModel& model, const FeatureMap& x_map);

// dual objective values for a candidate alpha, used by the solver tests
double klr_dual_objective(const std::vector<double>& alphas, const KernelRep& rep,
                          const std::vector<int>& yhat, double C);
double svm_dual_objective(const std::vector<double>& alphas, const KernelRep& rep,
                          const std::vector<int>& yhat, double C);

struct TunedSurrogate {
    SurrogateModel model;
    double C = 1.0;
    FidelityReport validation;
};

// 90/10 validation protocol: fit per grid C on the 90% side, keep the C with
// the best validation Pearson against the ensemble probabilities (ties prefer
// smaller C), refit on all of train.
TunedSurrogate tune_C(const TreeEnsemble& ensemble, const Dataset& train,
                      SurrogateFamily family, KernelKind kind, const std::vector<double>& grid,
                      std::uint64_t seed = kDefaultTuneSeed);

FidelityReport fidelity(const SurrogateModel& model, const TreeEnsemble& ensemble,
                        const Dataset& eval_data);

// {family, C, kind, fingerprint, alphas[], target_labels[]}
nlohmann::json model_to_json(const SurrogateModel& model);
SurrogateModel model_from_json(const nlohmann::json& j, const KernelRep& rep);

}  // namespace tea
