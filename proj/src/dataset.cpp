#include "tea/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tea/rng.hpp"

namespace tea {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

// One CSV record, quote-aware: fields may be wrapped in double quotes with
// embedded doubled quotes. No multi-line fields.
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

}  // namespace

std::size_t Dataset::feature_index(const std::string& name) const {
    for (std::size_t j = 0; j < feature_names.size(); ++j)
        if (feature_names[j] == name) return j;
    throw std::invalid_argument("Dataset: no feature named '" + name + "'");
}

void Dataset::check() const {
    if (features.size() != n * d) throw std::logic_error("Dataset: feature matrix not n*d");
    if (labels.size() != n || row_ids.size() != n)
        throw std::logic_error("Dataset: label/row_id length mismatch");
    if (feature_names.size() != d) throw std::logic_error("Dataset: feature name count mismatch");
    for (const int y : labels)
        if (y != -1 && y != 1) throw std::logic_error("Dataset: label outside {-1,+1}");
    std::set<std::int64_t> ids(row_ids.begin(), row_ids.end());
    if (ids.size() != n) throw std::logic_error("Dataset: duplicate row_ids");
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_value) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file '" + path + "'");
    const std::vector<std::string> header = split_record(line);

    std::size_t label_col = header.size();
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == label_column) label_col = j;
    if (label_col == header.size())
        throw std::runtime_error("load_csv: label column '" + label_column + "' not found");

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        std::vector<std::string> fields = split_record(line);
        if (fields.size() != header.size())
            throw std::runtime_error("load_csv: row " + std::to_string(rows.size() + 2) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw std::runtime_error("load_csv: no data rows in '" + path + "'");

    const std::size_t n = rows.size();

    // Column typing: every cell numeric -> numeric; none numeric -> categorical.
    // A mix in one column, or an empty cell anywhere, is rejected.
    struct Col {
        bool numeric = false;
        std::vector<std::string> categories;  // sorted, categorical only
    };
    std::vector<Col> cols(header.size());
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == label_col) continue;
        std::size_t numeric_cells = 0;
        std::set<std::string> values;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& cell = rows[i][j];
            if (cell.empty())
                throw std::runtime_error("load_csv: empty cell in column '" + header[j] + "'");
            double v;
            if (parse_double(cell, v)) ++numeric_cells;
            else values.insert(cell);
        }
        if (numeric_cells == n) {
            cols[j].numeric = true;
        } else if (numeric_cells == 0) {
            cols[j].categories.assign(values.begin(), values.end());
        } else {
            throw std::runtime_error("load_csv: column '" + header[j] +
                                     "' mixes numeric and non-numeric cells");
        }
    }

    Dataset out;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == label_col) continue;
        if (cols[j].numeric) {
            out.feature_names.push_back(header[j]);
        } else {
            for (const std::string& v : cols[j].categories)
                out.feature_names.push_back(header[j] + "=" + v);
        }
    }
    out.n = n;
    out.d = out.feature_names.size();
    out.features.resize(n * out.d);
    out.labels.resize(n);
    out.row_ids.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        out.row_ids[i] = static_cast<std::int64_t>(i);
        out.labels[i] = (rows[i][label_col] == positive_value) ? 1 : -1;
        std::size_t k = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j == label_col) continue;
            if (cols[j].numeric) {
                double v = 0.0;
                parse_double(rows[i][j], v);
                out.features[i * out.d + k] = v;
                ++k;
            } else {
                for (const std::string& cat : cols[j].categories) {
                    out.features[i * out.d + k] = (rows[i][j] == cat) ? 1.0 : 0.0;
                    ++k;
                }
            }
        }
    }
    return out;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_names = data.feature_names;
    out.d = data.d;
    out.n = rows.size();
    out.features.resize(out.n * out.d);
    out.labels.resize(out.n);
    out.row_ids.resize(out.n);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        if (r >= data.n) throw std::out_of_range("subset: row index out of range");
        std::copy(data.row(r), data.row(r) + data.d, out.features.begin() + i * out.d);
        out.labels[i] = data.labels[r];
        out.row_ids[i] = data.row_ids[r];
    }
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double test_fraction,
                                  std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split: test_fraction must lie in (0,1)");
    if (data.n < 2) throw std::invalid_argument("split: need at least 2 rows");

    std::size_t n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(data.n)));
    if (n_test == 0) n_test = 1;
    if (n_test >= data.n) n_test = data.n - 1;

    std::vector<std::size_t> perm(data.n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(perm);

    std::vector<std::size_t> test_rows(perm.begin(), perm.begin() + n_test);
    std::vector<std::size_t> train_rows(perm.begin() + n_test, perm.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    return {subset(data, train_rows), subset(data, test_rows)};
}

std::pair<Dataset, CorruptionRecord> flip_labels(const Dataset& data, double fraction,
                                                 std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0)
        throw std::invalid_argument("flip_labels: fraction must lie in [0,1]");
    const std::size_t m = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(data.n)));

    std::vector<std::size_t> perm(data.n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(perm);

    CorruptionRecord record;
    record.seed = seed;
    record.fraction = fraction;
    record.flipped_mask.assign(data.n, false);
    for (std::size_t i = 0; i < m; ++i) record.flipped_mask[perm[i]] = true;

    return {apply_mask(data, record.flipped_mask), record};
}

Dataset apply_mask(const Dataset& data, const std::vector<bool>& mask) {
    if (mask.size() != data.n) throw std::invalid_argument("apply_mask: mask length mismatch");
    Dataset out = data;
    for (std::size_t i = 0; i < data.n; ++i)
        if (mask[i]) out.labels[i] = -out.labels[i];
    return out;
}

std::pair<Dataset, CorruptionRecord> inject_domain_mismatch(
    const Dataset& data, const std::string& predicate_column, double threshold,
    std::size_t keep, std::size_t flip, std::uint64_t seed) {
    const std::size_t col = data.feature_index(predicate_column);
    if (flip > keep) throw std::invalid_argument("inject_domain_mismatch: flip > keep");

    std::vector<std::size_t> subgroup, rest;
    for (std::size_t i = 0; i < data.n; ++i) {
        if (data.row(i)[col] < threshold) subgroup.push_back(i);
        else rest.push_back(i);
    }
    if (subgroup.size() < keep)
        throw std::invalid_argument("inject_domain_mismatch: subgroup has " +
                                    std::to_string(subgroup.size()) + " rows, keep=" +
                                    std::to_string(keep));

    Rng rng(seed);
    rng.shuffle(subgroup);
    std::vector<std::size_t> kept(subgroup.begin(), subgroup.begin() + keep);
    // First `flip` of the shuffled kept rows get label +1.
    std::set<std::size_t> to_flip(kept.begin(), kept.begin() + flip);

    std::vector<std::size_t> rows = rest;
    rows.insert(rows.end(), kept.begin(), kept.end());
    std::sort(rows.begin(), rows.end());

    Dataset out = subset(data, rows);
    CorruptionRecord record;
    record.seed = seed;
    record.flipped_mask.assign(out.n, false);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (to_flip.count(rows[i]) && out.labels[i] != 1) {
            out.labels[i] = 1;
            record.flipped_mask[i] = true;
            ++changed;
        }
    }
    record.fraction = out.n > 0 ? static_cast<double>(changed) / static_cast<double>(out.n) : 0.0;
    return {out, record};
}

nlohmann::json corruption_to_json(const CorruptionRecord& record, const Dataset& data) {
    if (record.flipped_mask.size() != data.n)
        throw std::invalid_argument("corruption_to_json: record/dataset length mismatch");
    std::vector<std::int64_t> flipped;
    for (std::size_t i = 0; i < data.n; ++i)
        if (record.flipped_mask[i]) flipped.push_back(data.row_ids[i]);
    return nlohmann::json{{"seed", record.seed},
                         {"fraction", record.fraction},
                         {"flipped_row_ids", flipped}};
}

}  // namespace tea
