#include "tea/tree_kernel.hpp"

#include <stdexcept>

#include "tea/vecops.hpp"

namespace tea {

std::string kernel_kind_name(KernelKind kind) {
    switch (kind) {
        case KernelKind::LeafPath: return "LeafPath";
        case KernelKind::TreeOutput: return "TreeOutput";
        case KernelKind::LeafOutput: return "LeafOutput";
    }
    throw std::logic_error("kernel_kind_name: unknown kind");
}

KernelKind kernel_kind_from_name(const std::string& name) {
    if (name == "LeafPath") return KernelKind::LeafPath;
    if (name == "TreeOutput") return KernelKind::TreeOutput;
    if (name == "LeafOutput") return KernelKind::LeafOutput;
    throw std::invalid_argument("kernel_kind_from_name: unknown kind '" + name + "'");
}

FeatureMap feature_map(const TreeEnsemble& ensemble, std::span<const double> x, KernelKind kind) {
    if (x.size() != ensemble.d) throw std::invalid_argument("feature_map: dimension mismatch");
    const std::size_t m = ensemble.trees.size();
    FeatureMap map;
    map.kind = kind;
    map.dimension = kind == KernelKind::TreeOutput ? m : ensemble.num_leaves;
    map.indices.reserve(m);
    map.values.reserve(m);
    // leaf_ids grow with tree index, so pushing per tree keeps indices sorted
    for (std::size_t t = 0; t < m; ++t) {
        const TreeNode& leaf = ensemble.route(t, x.data());
        switch (kind) {
            case KernelKind::LeafPath:
                map.indices.push_back(leaf.leaf_id);
                map.values.push_back(1.0);
                break;
            case KernelKind::TreeOutput:
                map.indices.push_back(static_cast<std::int32_t>(t));
                map.values.push_back(leaf.value);
                break;
            case KernelKind::LeafOutput:
                map.indices.push_back(leaf.leaf_id);
                map.values.push_back(leaf.value);
                break;
        }
    }
    return map;
}

double map_dot(const FeatureMap& a, const FeatureMap& b) {
    if (a.kind != b.kind || a.dimension != b.dimension)
        throw std::invalid_argument("map_dot: kind or dimension mismatch");
    if (a.kind == KernelKind::TreeOutput)
        return vecops::dot(a.values.data(), b.values.data(), a.values.size());
    // sorted sparse merge
    double s = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.indices.size() && j < b.indices.size()) {
        if (a.indices[i] < b.indices[j]) ++i;
        else if (a.indices[i] > b.indices[j]) ++j;
        else {
            s += a.values[i] * b.values[j];
            ++i;
            ++j;
        }
    }
    return s;
}

double map_nrm2_sq(const FeatureMap& a) {
    return vecops::nrm2_sq(a.values.data(), a.values.size());
}

double kernel(const TreeEnsemble& ensemble, std::span<const double> xa,
              std::span<const double> xb, KernelKind kind) {
    return map_dot(feature_map(ensemble, xa, kind), feature_map(ensemble, xb, kind));
}

KernelRep transform(const TreeEnsemble& ensemble, const Dataset& data, KernelKind kind) {
    if (data.n > 0 && data.d != ensemble.d)
        throw std::invalid_argument("transform: dimension mismatch");
    KernelRep rep;
    rep.kind = kind;
    rep.dimension =
        kind == KernelKind::TreeOutput ? ensemble.trees.size() : ensemble.num_leaves;
    rep.ensemble_fingerprint = ensemble_fingerprint(ensemble);
    rep.maps.reserve(data.n);
    for (std::size_t i = 0; i < data.n; ++i)
        rep.maps.push_back(feature_map(ensemble, std::span<const double>(data.row(i), data.d), kind));
    return rep;
}

nlohmann::json rep_to_json(const KernelRep& rep) {
    // CSR layout: indptr has n+1 entries, indices/values are concatenated rows
    std::vector<std::size_t> indptr{0};
    std::vector<std::int32_t> indices;
    std::vector<double> values;
    for (const FeatureMap& m : rep.maps) {
        indices.insert(indices.end(), m.indices.begin(), m.indices.end());
        values.insert(values.end(), m.values.begin(), m.values.end());
        indptr.push_back(indices.size());
    }
    return nlohmann::json{{"kind", kernel_kind_name(rep.kind)},
                          {"dimension", rep.dimension},
                          {"fingerprint", rep.ensemble_fingerprint},
                          {"indptr", indptr},
                          {"indices", indices},
                          {"values", values}};
}

KernelRep rep_from_json(const nlohmann::json& j) {
    KernelRep rep;
    rep.kind = kernel_kind_from_name(j.at("kind").get<std::string>());
    rep.dimension = j.at("dimension").get<std::size_t>();
    rep.ensemble_fingerprint = j.at("fingerprint").get<std::string>();
    const auto indptr = j.at("indptr").get<std::vector<std::size_t>>();
    const auto indices = j.at("indices").get<std::vector<std::int32_t>>();
    const auto values = j.at("values").get<std::vector<double>>();
    if (indptr.empty() || indices.size() != values.size())
        throw std::invalid_argument("rep_from_json: inconsistent CSR arrays");
    for (std::size_t r = 0; r + 1 < indptr.size(); ++r) {
        FeatureMap m;
        m.kind = rep.kind;
        m.dimension = rep.dimension;
        m.indices.assign(indices.begin() + static_cast<std::ptrdiff_t>(indptr[r]),
                         indices.begin() + static_cast<std::ptrdiff_t>(indptr[r + 1]));
        m.values.assign(values.begin() + static_cast<std::ptrdiff_t>(indptr[r]),
                        values.begin() + static_cast<std::ptrdiff_t>(indptr[r + 1]));
        rep.maps.push_back(std::move(m));
    }
    return rep;
}

}  // namespace tea
