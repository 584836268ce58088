#include "tea/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tea/rng.hpp"

namespace tea {

Ordering make_ordering(const std::string& method, const std::vector<std::int64_t>& row_ids,
                       const std::vector<double>& scores) {
    if (row_ids.size() != scores.size())
        throw std::invalid_argument("make_ordering: row_id/score length mismatch");
    std::vector<std::size_t> order(row_ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return row_ids[a] < row_ids[b];
    });
    Ordering out;
    out.method = method;
    out.ranked_row_ids.reserve(order.size());
    out.scores.reserve(order.size());
    for (const std::size_t i : order) {
        out.ranked_row_ids.push_back(row_ids[i]);
        out.scores.push_back(scores[i]);
    }
    return out;
}

Ordering global_importance(const SurrogateModel& model,
                           const std::vector<std::int64_t>& row_ids) {
    if (row_ids.size() != model.alphas.size())
        throw std::invalid_argument("global_importance: row_id length mismatch");
    std::vector<double> scores(model.alphas.size());
    for (std::size_t i = 0; i < model.alphas.size(); ++i) scores[i] = std::fabs(model.alphas[i]);
    return make_ordering("global_importance", row_ids, scores);
}

Explanation local_explanation(const SurrogateModel& model, const TreeEnsemble& ensemble,
                              std::span<const double> x_t) {
    if (ensemble_fingerprint(ensemble) != model.train_rep.ensemble_fingerprint)
        throw std::invalid_argument("local_explanation: ensemble fingerprint mismatch");
    const FeatureMap q = feature_map(ensemble, x_t, model.train_rep.kind);

    const std::size_t n = model.alphas.size();
    Explanation out;
    out.similarities.resize(n);
    out.signed_weights.resize(n);
    out.contributions.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.similarities[i] = map_dot(model.train_rep.maps[i], q);
        out.signed_weights[i] = model.alphas[i] * static_cast<double>(model.target_labels[i]);
        out.contributions[i] = out.signed_weights[i] * out.similarities[i];
        total += out.contributions[i];
    }
    out.predicted_label = total > 0.0 ? 1 : -1;
    return out;
}

Ordering aggregate_explanations(const SurrogateModel& model, const TreeEnsemble& ensemble,
                                const std::vector<std::vector<double>>& queries,
                                const std::vector<std::int64_t>& row_ids) {
    if (queries.empty()) throw std::invalid_argument("aggregate_explanations: empty query list");
    if (row_ids.size() != model.alphas.size())
        throw std::invalid_argument("aggregate_explanations: row_id length mismatch");
    std::vector<double> scores(model.alphas.size(), 0.0);
    for (const std::vector<double>& q : queries) {
        const Explanation e = local_explanation(model, ensemble, q);
        const double lbl = static_cast<double>(e.predicted_label);
        for (std::size_t i = 0; i < scores.size(); ++i) scores[i] += e.contributions[i] * lbl;
    }
    return make_ordering("aggregate", row_ids, scores);
}

Ordering loss_ordering(const std::string& method, const std::vector<double>& losses,
                       const std::vector<std::int64_t>& row_ids) {
    return make_ordering(method, row_ids, losses);
}

Ordering random_ordering(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("random_ordering: n must be >= 1");
    std::vector<std::int64_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::int64_t{0});
    Rng rng(seed);
    rng.shuffle(perm);
    Ordering out;
    out.method = "random";
    out.ranked_row_ids = std::move(perm);
    out.scores.resize(n);
    for (std::size_t r = 0; r < n; ++r) out.scores[r] = static_cast<double>(n - r);
    return out;
}

Ordering teknn_density_ordering(const TeknnModel& model, const KernelRep& rep,
                                const std::vector<std::int64_t>& row_ids) {
    if (rep.kind != model.train_rep.kind ||
        rep.ensemble_fingerprint != model.train_rep.ensemble_fingerprint ||
        rep.maps.size() != model.train_rep.maps.size())
        throw std::invalid_argument("teknn_density_ordering: rep does not match the model");
    if (row_ids.size() != rep.maps.size())
        throw std::invalid_argument("teknn_density_ordering: row_id length mismatch");

    const std::size_t n = rep.maps.size();
    const std::size_t k = static_cast<std::size_t>(model.k);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) norms[i] = map_nrm2_sq(rep.maps[i]);

    std::vector<double> scores(n, 0.0);
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        dist.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;  // a row is not its own neighbor
            const double d2 = norms[i] + norms[j] - 2.0 * map_dot(rep.maps[i], rep.maps[j]);
            dist.emplace_back(d2 < 0.0 ? 0.0 : d2, i);
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                          dist.end());
        for (std::size_t r = 0; r < k; ++r) scores[dist[r].second] += 1.0;
    }
    return make_ordering("teknn", row_ids, scores);
}

}  // namespace tea
