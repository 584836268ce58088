#pragma once

// Tabular data with {-1,+1} labels, plus the split and corruption operations
// the experiment protocols need. All operations are pure functions of
// (input, seed); datasets are never mutated in place.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace tea {

struct Dataset {
    // row-major n x d
    std::vector<double> features;
    std::vector<int> labels;                 // each entry -1 or +1
    std::vector<std::string> feature_names;  // length d
    std::vector<std::int64_t> row_ids;       // unique, stable across subsetting
    std::size_t n = 0;
    std::size_t d = 0;

    const double* row(std::size_t i) const { return features.data() + i * d; }

    std::size_t feature_index(const std::string& name) const;  // throws if absent
    void check() const;                                        // throws on broken invariants
};

struct CorruptionRecord {
    std::vector<bool> flipped_mask;  // length n of the dataset it was made from
    std::uint64_t seed = 0;
    double fraction = 0.0;
};

// CSV with a header row. The label column maps to +1 where the cell equals
// positive_value, else -1. Feature columns are inferred per column: all cells
// numeric -> one numeric feature; no cells numeric -> one-hot expanded as
// "name=value" with values sorted; anything mixed, empty, or non-finite is an
// error.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_value);

// Rows picked by index, original order of `rows` preserved, row_ids carried over.
Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows);

// Disjoint (train, test) partition; round(test_fraction * n) test rows, clamped
// so both sides are nonempty. Row order within each side follows the input.
std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction,
                                  std::uint64_t seed);

// Negates exactly round(fraction * n) labels chosen uniformly without
// replacement. Applying the returned mask again restores the input.
std::pair<Dataset, CorruptionRecord> flip_labels(const Dataset& data, double fraction,
                                                 std::uint64_t seed);

// Negates labels[i] where mask[i] is set; its own inverse.
Dataset apply_mask(const Dataset& data, const std::vector<bool>& mask);

// Shrinks the subgroup {rows with predicate column < threshold} to `keep` rows
// and sets `flip` of the kept rows to +1. The mask in the returned record marks
// rows whose label actually changed, indexed against the returned dataset.
std::pair<Dataset, CorruptionRecord> inject_domain_mismatch(
    const Dataset& data, const std::string& predicate_column, double threshold,
    std::size_t keep, std::size_t flip, std::uint64_t seed);

nlohmann::json corruption_to_json(const CorruptionRecord& record, const Dataset& data);

}  // namespace tea
