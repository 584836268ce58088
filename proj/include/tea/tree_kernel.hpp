#pragma once

// Feature maps derived from a trained ensemble and their induced kernel
// k(a, b) = phi(a) . phi(b). Three map kinds:
//   LeafPath   one-hot over reached leaves, dimension num_leaves
//   TreeOutput leaf value per tree, dimension M
//   LeafOutput leaf value at the reached-leaf position, dimension num_leaves

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tea/dataset.hpp"
#include "tea/gbdt.hpp"

namespace tea {

enum class KernelKind { LeafPath, TreeOutput, LeafOutput };

// exact serialized names: "LeafPath", "TreeOutput", "LeafOutput"
std::string kernel_kind_name(KernelKind kind);
KernelKind kernel_kind_from_name(const std::string& name);

struct FeatureMap {
    KernelKind kind = KernelKind::LeafPath;
    std::size_t dimension = 0;
    std::vector<std::int32_t> indices;  // strictly increasing
    std::vector<double> values;
};

struct KernelRep {
    KernelKind kind = KernelKind::LeafPath;
    std::size_t dimension = 0;
    std::vector<FeatureMap> maps;
    std::string ensemble_fingerprint;
};

FeatureMap feature_map(const TreeEnsemble& ensemble, std::span<const double> x, KernelKind kind);

double kernel(const TreeEnsemble& ensemble, std::span<const double> xa,
              std::span<const double> xb, KernelKind kind);

KernelRep transform(const TreeEnsemble& ensemble, const Dataset& data, KernelKind kind);

// sparse dot of two maps of the same kind and dimension
double map_dot(const FeatureMap& a, const FeatureMap& b);
double map_nrm2_sq(const FeatureMap& a);

nlohmann::json rep_to_json(const KernelRep& rep);
KernelRep rep_from_json(const nlohmann::json& j);

}  // namespace tea
