#include "tea/teknn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tea/stats.hpp"

namespace tea {

namespace {

std::vector<double> map_norms(const KernelRep& rep) {
    std::vector<double> norms(rep.maps.size());
    for (std::size_t i = 0; i < rep.maps.size(); ++i) norms[i] = map_nrm2_sq(rep.maps[i]);
    return norms;
}

// (squared distance, train position) for every training row
std::vector<std::pair<double, std::size_t>> all_distances(const KernelRep& rep,
                                                          const std::vector<double>& norms,
                                                          const FeatureMap& q) {
    const double qn = map_nrm2_sq(q);
    std::vector<std::pair<double, std::size_t>> dist(rep.maps.size());
    for (std::size_t i = 0; i < rep.maps.size(); ++i) {
        const double d2 = norms[i] + qn - 2.0 * map_dot(rep.maps[i], q);
        dist[i] = {d2 < 0.0 ? 0.0 : d2, i};
    }
    return dist;
}

std::vector<std::size_t> nearest_k(std::vector<std::pair<double, std::size_t>>& dist,
                                   std::size_t k) {
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
    return out;
}

double vote_fraction(const std::vector<std::size_t>& neighbors, const std::vector<int>& yhat) {
    std::size_t pos = 0;
    for (const std::size_t i : neighbors)
        if (yhat[i] == 1) ++pos;
    return static_cast<double>(pos) / static_cast<double>(neighbors.size());
}

}  // namespace

TeknnModel make_teknn(const KernelRep& rep, const std::vector<int>& yhat, int k) {
    if (yhat.size() != rep.maps.size())
        throw std::invalid_argument("make_teknn: label vector length mismatch");
    if (k < 1 || static_cast<std::size_t>(k) >= rep.maps.size())
        throw std::invalid_argument("make_teknn: k must satisfy 1 <= k < n");
    TeknnModel model;
    model.train_rep = rep;
    model.target_labels = yhat;
    model.train_norms = map_norms(rep);
    model.k = k;
    return model;
}

TeknnModel teknn_fit(const KernelRep& rep, const std::vector<int>& yhat,
                     const std::vector<int>& k_grid, const Dataset& validation,
                     const TreeEnsemble& ensemble) {
    if (k_grid.empty()) throw std::invalid_argument("teknn_fit: empty k grid");
    if (yhat.size() != rep.maps.size())
        throw std::invalid_argument("teknn_fit: label vector length mismatch");
    if (validation.n < 2) throw std::invalid_argument("teknn_fit: need at least 2 validation rows");
    for (const int k : k_grid)
        if (k < 1 || static_cast<std::size_t>(k) >= rep.maps.size())
            throw std::invalid_argument("teknn_fit: k must satisfy 1 <= k < n");

    const std::vector<double> norms = map_norms(rep);

    // neighbor lists computed once at the largest k, prefixes reused per k
    std::vector<int> grid = k_grid;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::size_t kmax = static_cast<std::size_t>(grid.back());

    std::vector<std::vector<std::size_t>> val_neighbors(validation.n);
    std::vector<double> ens_proba(validation.n);
    for (std::size_t i = 0; i < validation.n; ++i) {
        const std::span<const double> x(validation.row(i), validation.d);
        FeatureMap q = feature_map(ensemble, x, rep.kind);
        auto dist = all_distances(rep, norms, q);
        val_neighbors[i] = nearest_k(dist, kmax);
        ens_proba[i] = predict_proba(ensemble, x);
    }

    int best_k = grid.front();
    double best_pearson = -2.0;
    for (const int k : grid) {
        std::vector<double> knn_proba(validation.n);
        for (std::size_t i = 0; i < validation.n; ++i) {
            std::vector<std::size_t> prefix(val_neighbors[i].begin(),
                                            val_neighbors[i].begin() + k);
            knn_proba[i] = vote_fraction(prefix, yhat);
        }
        double r;
        try {
            r = pearson(knn_proba, ens_proba);
        } catch (const std::invalid_argument&) {
            continue;  // constant vote fractions at this k
        }
        if (r > best_pearson) {
            best_pearson = r;
            best_k = k;
        }
    }
    if (best_pearson <= -2.0)
        throw std::runtime_error("teknn_fit: no grid k produced a defined validation correlation");

    TeknnModel model;
    model.train_rep = rep;
    model.target_labels = yhat;
    model.train_norms = norms;
    model.k = best_k;
    return model;
}

std::vector<std::size_t> teknn_neighbors(const TeknnModel& model, const FeatureMap& x_map) {
    if (x_map.kind != model.train_rep.kind || x_map.dimension != model.train_rep.dimension)
        throw std::invalid_argument("teknn_neighbors: feature map kind or dimension mismatch");
    auto dist = all_distances(model.train_rep, model.train_norms, x_map);
    return nearest_k(dist, static_cast<std::size_t>(model.k));
}

double teknn_predict_proba(const TeknnModel& model, const FeatureMap& x_map) {
    return vote_fraction(teknn_neighbors(model, x_map), model.target_labels);
}

TunedTeknn tune_teknn(const TreeEnsemble& ensemble, const Dataset& train, KernelKind kind,
                      const std::vector<int>& k_grid, std::uint64_t seed) {
    auto [fit_part, val_part] = split(train, 0.1, seed);
    if (val_part.n < 2)
        throw std::invalid_argument("tune_teknn: validation split has fewer than 2 rows");
    const KernelRep fit_rep = transform(ensemble, fit_part, kind);
    const TeknnModel chosen =
        teknn_fit(fit_rep, predicted_labels(ensemble, fit_part), k_grid, val_part, ensemble);

    TunedTeknn out;
    out.k = chosen.k;
    out.validation = teknn_fidelity(chosen, ensemble, val_part);
    out.model =
        make_teknn(transform(ensemble, train, kind), predicted_labels(ensemble, train), chosen.k);
    return out;
}

FidelityReport teknn_fidelity(const TeknnModel& model, const TreeEnsemble& ensemble,
                              const Dataset& eval_data) {
    if (eval_data.n < 2) throw std::invalid_argument("teknn_fidelity: need at least 2 eval rows");
    std::vector<double> knn(eval_data.n), ens(eval_data.n);
    for (std::size_t i = 0; i < eval_data.n; ++i) {
        const std::span<const double> x(eval_data.row(i), eval_data.d);
        knn[i] = teknn_predict_proba(model, feature_map(ensemble, x, model.train_rep.kind));
        ens[i] = predict_proba(ensemble, x);
    }
    return FidelityReport{pearson(knn, ens), eval_data.n, "KNN", model.train_rep.kind};
}

}  // namespace tea
