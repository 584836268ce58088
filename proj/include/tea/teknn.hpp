#pragma once

// k-nearest-neighbor surrogate in the feature-map space under Euclidean
// distance, plus the appears-in-neighbors density ordering used as a
// cleaning baseline.

#include <cstdint>
#include <vector>

#include "tea/dataset.hpp"
#include "tea/gbdt.hpp"
#include "tea/surrogate.hpp"
#include "tea/tree_kernel.hpp"

namespace tea {

struct TeknnModel {
    KernelRep train_rep;
    std::vector<int> target_labels;  // yhat on the training rows
    std::vector<double> train_norms;  // cached ||phi_i||^2
    int k = 3;
};

// Bundles rep, labels, and cached norms; validates 1 <= k < n.
TeknnModel make_teknn(const KernelRep& rep, const std::vector<int>& yhat, int k);

// Chooses k from k_grid by Pearson fidelity on the validation rows (ties
// prefer smaller k) and returns the model over rep with that k.
TeknnModel teknn_fit(const KernelRep& rep, const std::vector<int>& yhat,
                     const std::vector<int>& k_grid, const Dataset& validation,
                     const TreeEnsemble& ensemble);

struct TunedTeknn {
    TeknnModel model;
    int k = 3;
    FidelityReport validation;
};

// Same 90/10 protocol as tune_C: choose k on a held-out tenth of train, then
// rebuild the model over all of train with that k.
TunedTeknn tune_teknn(const TreeEnsemble& ensemble, const Dataset& train, KernelKind kind,
                      const std::vector<int>& k_grid, std::uint64_t seed = kDefaultTuneSeed);

// fraction of +1 among the k nearest training neighbors' yhat; distance ties
// broken by ascending training row position
double teknn_predict_proba(const TeknnModel& model, const FeatureMap& x_map);

FidelityReport teknn_fidelity(const TeknnModel& model, const TreeEnsemble& ensemble,
                              const Dataset& eval_data);

// indices into model.train_rep of the k nearest neighbors, nearest first
std::vector<std::size_t> teknn_neighbors(const TeknnModel& model, const FeatureMap& x_map);

}  // namespace tea
