#include "tea/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "tea/rng.hpp"
#include "tea/stats.hpp"
#include "tea/vecops.hpp"

namespace tea {

namespace {

void check_fit_inputs(const KernelRep& rep, const std::vector<int>& yhat, double C) {
    if (!(C > 0.0)) throw std::invalid_argument("surrogate fit: C must be positive");
    if (yhat.size() != rep.maps.size())
        throw std::invalid_argument("surrogate fit: label vector length mismatch");
    if (rep.maps.empty()) throw std::invalid_argument("surrogate fit: empty kernel rep");
    for (const int y : yhat)
        if (y != -1 && y != 1)
            throw std::invalid_argument("surrogate fit: labels must be -1 or +1");
}

double map_dot_w(const std::vector<double>& w, const FeatureMap& m) {
    return vecops::dot_gather(w.data(), m.indices.data(), m.values.data(), m.indices.size());
}

void map_axpy_w(double a, const FeatureMap& m, std::vector<double>& w) {
    vecops::axpy_scatter(a, m.indices.data(), m.values.data(), m.indices.size(), w.data());
}

// x log x with the 0 log 0 := 0 convention
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

std::string family_name(SurrogateFamily family) {
    return family == SurrogateFamily::KLR ? "KLR" : "SVM";
}

SurrogateFamily family_from_name(const std::string& name) {
    if (name == "KLR") return SurrogateFamily::KLR;
    if (name == "SVM") return SurrogateFamily::SVM;
    throw std::invalid_argument("family_from_name: unknown family '" + name + "'");
}

SurrogateModel fit_klr(const KernelRep& rep, const std::vector<int>& yhat, double C,
                       std::uint64_t seed) {
    check_fit_inputs(rep, yhat, C);
    const std::size_t n = rep.maps.size();

    // Pair storage: pair[2i] = alpha_i, pair[2i+1] = C - alpha_i. Interior
    // start at C/2 keeps both entropy terms finite from the first step.
    std::vector<double> pair(2 * n, 0.5 * C);
    std::vector<double> QD(n);
    std::vector<double> w(rep.dimension, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        QD[i] = map_nrm2_sq(rep.maps[i]);
        map_axpy_w(static_cast<double>(yhat[i]) * pair[2 * i], rep.maps[i], w);
    }

    std::vector<std::size_t> index(n);
    std::iota(index.begin(), index.end(), std::size_t{0});
    Rng rng(seed);

    const int max_inner_iter = 100;
    double innereps = 1e-2;
    const double innereps_min = std::min(1e-8, kSolverEps);

    int epoch = 0;
    double gmax = 0.0;
    for (epoch = 0; epoch < kSolverMaxEpochs; ++epoch) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t j = i + rng.uniform_index(n - i);
            std::swap(index[i], index[j]);
        }
        int newton_iter = 0;
        gmax = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t i = index[s];
            const double yi = static_cast<double>(yhat[i]);
            const double a = QD[i];
            const double b = yi * map_dot_w(w, rep.maps[i]);

            // minimize over whichever pair coordinate has the descent direction
            std::size_t ind1 = 2 * i, ind2 = 2 * i + 1;
            double sign = 1.0;
            if (0.5 * a * (pair[ind2] - pair[ind1]) + b < 0.0) {
                std::swap(ind1, ind2);
                sign = -1.0;
            }

            // g(z) = z log z + (C-z) log(C-z) + 0.5 a (z-alpha_old)^2 + sign b (z-alpha_old)
            const double alpha_old = pair[ind1];
            double z = alpha_old;
            if (C - z < 0.5 * C) z = 0.1 * z;
            double gp = a * (z - alpha_old) + sign * b + std::log(z / (C - z));
            gmax = std::max(gmax, std::fabs(gp));

            const double eta = 0.1;
            int inner_iter = 0;
            while (inner_iter <= max_inner_iter) {
                if (std::fabs(gp) < innereps) break;
                const double gpp = a + C / (C - z) / z;
                const double tmpz = z - gp / gpp;
                if (tmpz <= 0.0) z *= eta;
                else if (tmpz >= C) z = 0.5 * (z + C);  // keeps the barrier argument in range
                else z = tmpz;
                gp = a * (z - alpha_old) + sign * b + std::log(z / (C - z));
                ++newton_iter;
                ++inner_iter;
            }

            if (inner_iter > 0) {
                pair[ind1] = z;
                pair[ind2] = C - z;
                map_axpy_w(sign * (z - alpha_old) * yi, rep.maps[i], w);
            }
        }
        if (gmax < kSolverEps) break;
        if (newton_iter <= static_cast<int>(n) / 10)
            innereps = std::max(innereps_min, 0.1 * innereps);
    }
    if (epoch >= kSolverMaxEpochs)
        std::fprintf(stderr, "fit_klr: epoch cap %d reached, max projected gradient %.3e\n",
                     kSolverMaxEpochs, gmax);

    SurrogateModel model;
    model.family = SurrogateFamily::KLR;
    model.C = C;
    model.seed = seed;
    model.target_labels = yhat;
    model.train_rep = rep;
    model.alphas.resize(n);
    for (std::size_t i = 0; i < n; ++i) model.alphas[i] = pair[2 * i];
    model.primal_weights = std::move(w);
    return model;
}

SurrogateModel fit_svm(const KernelRep& rep, const std::vector<int>& yhat, double C,
                       std::uint64_t seed) {
    check_fit_inputs(rep, yhat, C);
    const std::size_t n = rep.maps.size();

    std::vector<double> alpha(n, 0.0);
    std::vector<double> QD(n);
    std::vector<double> w(rep.dimension, 0.0);
    for (std::size_t i = 0; i < n; ++i) QD[i] = std::max(map_nrm2_sq(rep.maps[i]), 1e-300);

    std::vector<std::size_t> index(n);
    std::iota(index.begin(), index.end(), std::size_t{0});
    Rng rng(seed);

    int epoch = 0;
    double pg_abs_max = 0.0;
    for (epoch = 0; epoch < kSolverMaxEpochs; ++epoch) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t j = i + rng.uniform_index(n - i);
            std::swap(index[i], index[j]);
        }
        pg_abs_max = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const std::size_t i = index[s];
            const double yi = static_cast<double>(yhat[i]);
            const double G = yi * map_dot_w(w, rep.maps[i]) - 1.0;

            double PG = G;
            if (alpha[i] == 0.0) PG = std::min(G, 0.0);
            else if (alpha[i] == C) PG = std::max(G, 0.0);
            pg_abs_max = std::max(pg_abs_max, std::fabs(PG));

            if (std::fabs(PG) > 1e-12) {
                const double alpha_old = alpha[i];
                alpha[i] = std::min(std::max(alpha[i] - G / QD[i], 0.0), C);
                map_axpy_w((alpha[i] - alpha_old) * yi, rep.maps[i], w);
            }
        }
        if (pg_abs_max <= kSolverEps) break;
    }
    if (epoch >= kSolverMaxEpochs)
        std::fprintf(stderr, "fit_svm: epoch cap %d reached, max projected gradient %.3e\n",
                     kSolverMaxEpochs, pg_abs_max);

    SurrogateModel model;
    model.family = SurrogateFamily::SVM;
    model.C = C;
    model.seed = seed;
    model.target_labels = yhat;
    model.train_rep = rep;
    model.alphas = std::move(alpha);
    model.primal_weights = std::move(w);
    return model;
}

double decision(const SurrogateModel& model, const FeatureMap& x_map) {
    if (x_map.kind != model.train_rep.kind || x_map.dimension != model.train_rep.dimension)
        throw std::invalid_argument("decision: feature map kind or dimension mismatch");
    return map_dot_w(model.primal_weights, x_map);
}

double decision_expansion(const SurrogateModel& model, const FeatureMap& x_map) {
    if (x_map.kind != model.train_rep.kind || x_map.dimension != model.train_rep.dimension)
        throw std::invalid_argument("decision_expansion: feature map kind or dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < model.alphas.size(); ++i)
        s += model.alphas[i] * static_cast<double>(model.target_labels[i]) *
             map_dot(model.train_rep.maps[i], x_map);
    return s;
}

double predict_proba(const SurrogateModel& model, const FeatureMap& x_map) {
    return sigmoid(decision(model, x_map));
}

double klr_dual_objective(const std::vector<double>& alphas, const KernelRep& rep,
                          const std::vector<int>& yhat, double C) {
    std::vector<double> w(rep.dimension, 0.0);
    for (std::size_t i = 0; i < alphas.size(); ++i)
        map_axpy_w(alphas[i] * static_cast<double>(yhat[i]), rep.maps[i], w);
    double v = 0.5 * vecops::nrm2_sq(w.data(), w.size());
    for (const double a : alphas) v += xlogx(a) + xlogx(C - a);
    return v;
}

double svm_dual_objective(const std::vector<double>& alphas, const KernelRep& rep,
                          const std::vector<int>& yhat, double C) {
    (void)C;
    std::vector<double> w(rep.dimension, 0.0);
    for (std::size_t i = 0; i < alphas.size(); ++i)
        map_axpy_w(alphas[i] * static_cast<double>(yhat[i]), rep.maps[i], w);
    double v = 0.5 * vecops::nrm2_sq(w.data(), w.size());
    for (const double a : alphas) v -= a;
    return v;
}

TunedSurrogate tune_C(const TreeEnsemble& ensemble, const Dataset& train,
                      SurrogateFamily family, KernelKind kind, const std::vector<double>& grid,
                      std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("tune_C: empty grid");
    auto [fit_part, val_part] = split(train, 0.1, seed);
    if (val_part.n < 2) throw std::invalid_argument("tune_C: validation split has fewer than 2 rows");

    const KernelRep fit_rep = transform(ensemble, fit_part, kind);
    const std::vector<int> fit_yhat = predicted_labels(ensemble, fit_part);

    std::vector<double> ens_proba(val_part.n);
    const KernelRep val_rep = transform(ensemble, val_part, kind);
    for (std::size_t i = 0; i < val_part.n; ++i)
        ens_proba[i] =
            predict_proba(ensemble, std::span<const double>(val_part.row(i), val_part.d));

    std::vector<double> sorted_grid = grid;
    std::sort(sorted_grid.begin(), sorted_grid.end());

    double best_C = sorted_grid.front();
    double best_pearson = -2.0;
    for (const double c : sorted_grid) {
        const SurrogateModel candidate = family == SurrogateFamily::KLR
                                             ? fit_klr(fit_rep, fit_yhat, c)
                                             : fit_svm(fit_rep, fit_yhat, c);
        std::vector<double> sur_proba(val_part.n);
        for (std::size_t i = 0; i < val_part.n; ++i)
            sur_proba[i] = predict_proba(candidate, val_rep.maps[i]);
        double r;
        try {
            r = pearson(sur_proba, ens_proba);
        } catch (const std::invalid_argument&) {
            continue;  // constant predictions at this C, not selectable
        }
        if (r > best_pearson) {
            best_pearson = r;
            best_C = c;
        }
    }
    if (best_pearson <= -2.0)
        throw std::runtime_error("tune_C: no grid C produced a defined validation correlation");

    const KernelRep full_rep = transform(ensemble, train, kind);
    const std::vector<int> full_yhat = predicted_labels(ensemble, train);
    TunedSurrogate out;
    out.model = family == SurrogateFamily::KLR ? fit_klr(full_rep, full_yhat, best_C)
                                               : fit_svm(full_rep, full_yhat, best_C);
    out.C = best_C;
    out.validation =
        FidelityReport{best_pearson, val_part.n, family_name(family), kind};
    return out;
}

FidelityReport fidelity(const SurrogateModel& model, const TreeEnsemble& ensemble,
                        const Dataset& eval_data) {
    if (eval_data.n < 2) throw std::invalid_argument("fidelity: need at least 2 eval rows");
    std::vector<double> sur(eval_data.n), ens(eval_data.n);
    for (std::size_t i = 0; i < eval_data.n; ++i) {
        const std::span<const double> x(eval_data.row(i), eval_data.d);
        sur[i] = predict_proba(model, feature_map(ensemble, x, model.train_rep.kind));
        ens[i] = predict_proba(ensemble, x);
    }
    return FidelityReport{pearson(sur, ens), eval_data.n, family_name(model.family),
                          model.train_rep.kind};
}

nlohmann::json model_to_json(const SurrogateModel& model) {
    return nlohmann::json{{"family", family_name(model.family)},
                          {"C", model.C},
                          {"kind", kernel_kind_name(model.train_rep.kind)},
                          {"fingerprint", model.train_rep.ensemble_fingerprint},
                          {"alphas", model.alphas},
                          {"target_labels", model.target_labels}};
}

SurrogateModel model_from_json(const nlohmann::json& j, const KernelRep& rep) {
    SurrogateModel model;
    model.family = family_from_name(j.at("family").get<std::string>());
    model.C = j.at("C").get<double>();
    if (kernel_kind_from_name(j.at("kind").get<std::string>()) != rep.kind)
        throw std::invalid_argument("model_from_json: kernel kind mismatch");
    if (j.at("fingerprint").get<std::string>() != rep.ensemble_fingerprint)
        throw std::invalid_argument("model_from_json: ensemble fingerprint mismatch");
    model.alphas = j.at("alphas").get<std::vector<double>>();
    model.target_labels = j.at("target_labels").get<std::vector<int>>();
    if (model.alphas.size() != rep.maps.size() || model.target_labels.size() != rep.maps.size())
        throw std::invalid_argument("model_from_json: length mismatch against rep");
    for (const double a : model.alphas) {
        if (!(a >= 0.0 && a <= model.C))
            throw std::invalid_argument("model_from_json: alpha outside [0, C]");
        if (model.family == SurrogateFamily::KLR && !(a > 0.0 && a < model.C))
            throw std::invalid_argument("model_from_json: KLR alpha not strictly interior");
    }
    model.train_rep = rep;
    model.primal_weights.assign(rep.dimension, 0.0);
    for (std::size_t i = 0; i < model.alphas.size(); ++i)
        map_axpy_w(model.alphas[i] * static_cast<double>(model.target_labels[i]), rep.maps[i],
                   model.primal_weights);
    return model;
}

}  // namespace tea
