#include "tea/gbdt.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tea/hash.hpp"
#include "tea/rng.hpp"

namespace tea {

namespace {

constexpr int kDepthCap = 32;       // stands in for "unlimited"
constexpr double kHessEps = 1e-12;  // guards divisions, not a regularizer
constexpr double kMinGain = 1e-12;

// log(1 + e^z) without overflow
double log1p_exp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double logistic_loss_sum(const std::vector<double>& margins, const std::vector<int>& labels) {
    double s = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i)
        s += log1p_exp(-static_cast<double>(labels[i]) * margins[i]);
    return s;
}

struct ActiveNode {
    int node = -1;  // index into Tree::nodes
    int depth = 0;
    double G = 0.0;
    double H = 0.0;
    int count = 0;
    int best_feature = -1;
    double best_thr = 0.0;
    double best_gain = 0.0;
};

struct SplitScan {
    double GL = 0.0;
    double HL = 0.0;
    int NL = 0;
    double prev = 0.0;
    bool has_prev = false;
};

// One boosting round: exact greedy splits on (g, h), grown level by level over
// presorted feature orders.
Tree build_tree(const Dataset& train, const std::vector<std::vector<int>>& sorted_order,
                const std::vector<double>& g, const std::vector<double>& h,
                const GBDTConfig& config) {
    const std::size_t n = train.n;
    const std::size_t d = train.d;
    const int msl = config.min_samples_leaf;
    const int depth_limit =
        config.max_depth < 0 ? kDepthCap : std::min(config.max_depth, kDepthCap);

    Tree tree;
    tree.nodes.emplace_back();

    double G0 = 0.0, H0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        G0 += g[i];
        H0 += h[i];
    }

    std::vector<int> slot_of_row(n, 0);
    std::vector<ActiveNode> active(1);
    active[0] = ActiveNode{0, 0, G0, H0, static_cast<int>(n), -1, 0.0, 0.0};

    while (!active.empty()) {
        std::vector<char> splittable(active.size(), 0);
        bool any = false;
        for (std::size_t s = 0; s < active.size(); ++s) {
            if (active[s].depth < depth_limit && active[s].count >= 2 * msl) {
                splittable[s] = 1;
                any = true;
            }
        }

        if (any) {
            std::vector<SplitScan> scan(active.size());
            for (std::size_t f = 0; f < d; ++f) {
                std::fill(scan.begin(), scan.end(), SplitScan{});
                for (const int idx : sorted_order[f]) {
                    const int s = slot_of_row[idx];
                    if (s < 0 || !splittable[static_cast<std::size_t>(s)]) continue;
                    SplitScan& q = scan[static_cast<std::size_t>(s)];
                    ActiveNode& a = active[static_cast<std::size_t>(s)];
                    const double v = train.row(static_cast<std::size_t>(idx))[f];
                    if (q.has_prev && v > q.prev) {
                        const int NR = a.count - q.NL;
                        if (q.NL >= msl && NR >= msl) {
                            const double mid = 0.5 * (q.prev + v);
                            const double thr = (mid > q.prev) ? mid : v;
                            const double GR = a.G - q.GL;
                            const double HR = a.H - q.HL;
                            const double gain = q.GL * q.GL / (q.HL + kHessEps) +
                                                GR * GR / (HR + kHessEps) -
                                                a.G * a.G / (a.H + kHessEps);
                            if (gain > a.best_gain) {
                                a.best_gain = gain;
                                a.best_feature = static_cast<int>(f);
                                a.best_thr = thr;
                            }
                        }
                    }
                    q.GL += g[idx];
                    q.HL += h[idx];
                    ++q.NL;
                    q.prev = v;
                    q.has_prev = true;
                }
            }
        }

        std::vector<ActiveNode> next;
        std::vector<int> child_base(active.size(), -1);
        for (std::size_t s = 0; s < active.size(); ++s) {
            ActiveNode& a = active[s];
            if (splittable[s] && a.best_feature >= 0 && a.best_gain > kMinGain) {
                const int li = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                const int ri = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes[static_cast<std::size_t>(a.node)].feature = a.best_feature;
                tree.nodes[static_cast<std::size_t>(a.node)].threshold = a.best_thr;
                tree.nodes[static_cast<std::size_t>(a.node)].left = li;
                tree.nodes[static_cast<std::size_t>(a.node)].right = ri;
                child_base[s] = static_cast<int>(next.size());
                next.push_back(ActiveNode{li, a.depth + 1, 0.0, 0.0, 0, -1, 0.0, 0.0});
                next.push_back(ActiveNode{ri, a.depth + 1, 0.0, 0.0, 0, -1, 0.0, 0.0});
            } else {
                tree.nodes[static_cast<std::size_t>(a.node)].value =
                    -config.learning_rate * a.G / (a.H + kHessEps);
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            const int s = slot_of_row[i];
            if (s < 0) continue;
            if (child_base[static_cast<std::size_t>(s)] < 0) {
                slot_of_row[i] = -1;
                continue;
            }
            const ActiveNode& a = active[static_cast<std::size_t>(s)];
            const bool go_left = train.row(i)[a.best_feature] < a.best_thr;
            const int cs = child_base[static_cast<std::size_t>(s)] + (go_left ? 0 : 1);
            slot_of_row[i] = cs;
            ActiveNode& c = next[static_cast<std::size_t>(cs)];
            c.G += g[i];
            c.H += h[i];
            ++c.count;
        }
        active = std::move(next);
    }
    return tree;
}

double tree_output(const Tree& tree, const double* x) {
    int cur = 0;
    while (!tree.nodes[static_cast<std::size_t>(cur)].is_leaf()) {
        const TreeNode& nd = tree.nodes[static_cast<std::size_t>(cur)];
        cur = (x[nd.feature] < nd.threshold) ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<std::size_t>(cur)].value;
}

void scale_leaves(Tree& tree, double s) {
    for (TreeNode& nd : tree.nodes)
        if (nd.is_leaf()) nd.value *= s;
}

void assign_leaf_ids(TreeEnsemble& ensemble) {
    int next_id = 0;
    for (Tree& tree : ensemble.trees) {
        // pre-order walk
        std::vector<int> stack{0};
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            TreeNode& nd = tree.nodes[static_cast<std::size_t>(cur)];
            if (nd.is_leaf()) {
                nd.leaf_id = next_id++;
            } else {
                stack.push_back(nd.right);
                stack.push_back(nd.left);
            }
        }
    }
    ensemble.num_leaves = static_cast<std::size_t>(next_id);
}

int effective_depth(int max_depth) { return max_depth < 0 ? INT_MAX : max_depth; }

}  // namespace

const TreeNode& TreeEnsemble::route(std::size_t t, const double* x) const {
    const Tree& tree = trees[t];
    int cur = 0;
    while (!tree.nodes[static_cast<std::size_t>(cur)].is_leaf()) {
        const TreeNode& nd = tree.nodes[static_cast<std::size_t>(cur)];
        cur = (x[nd.feature] < nd.threshold) ? nd.left : nd.right;
    }
    return tree.nodes[static_cast<std::size_t>(cur)];
}

TreeEnsemble fit_gbdt(const Dataset& train, const GBDTConfig& config) {
    if (train.n < 2) throw std::invalid_argument("fit_gbdt: need at least 2 rows");
    if (config.num_trees < 1) throw std::invalid_argument("fit_gbdt: num_trees must be >= 1");
    if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0))
        throw std::invalid_argument("fit_gbdt: learning_rate must lie in (0,1]");
    if (config.min_samples_leaf < 1)
        throw std::invalid_argument("fit_gbdt: min_samples_leaf must be >= 1");

    const std::size_t n = train.n;
    std::size_t pos = 0;
    for (const int y : train.labels)
        if (y == 1) ++pos;
    if (pos == 0 || pos == n)
        throw std::invalid_argument("fit_gbdt: training data has a single class");

    TreeEnsemble ensemble;
    ensemble.config = config;
    ensemble.d = train.d;
    const double pbar = static_cast<double>(pos) / static_cast<double>(n);
    ensemble.base_score = std::log(pbar / (1.0 - pbar));

    // per-feature row order, ties by row index
    std::vector<std::vector<int>> sorted_order(train.d);
    for (std::size_t f = 0; f < train.d; ++f) {
        std::vector<int>& ord = sorted_order[f];
        ord.resize(n);
        std::iota(ord.begin(), ord.end(), 0);
        std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) {
            return train.row(static_cast<std::size_t>(a))[f] <
                   train.row(static_cast<std::size_t>(b))[f];
        });
    }

    std::vector<double> margins(n, ensemble.base_score);
    std::vector<double> g(n), h(n), out(n);
    double cur_loss = logistic_loss_sum(margins, train.labels);

    for (int t = 0; t < config.num_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-margins[i]));
            const double y01 = train.labels[i] == 1 ? 1.0 : 0.0;
            g[i] = p - y01;
            h[i] = p * (1.0 - p);
        }

        Tree tree = build_tree(train, sorted_order, g, h, config);
        for (std::size_t i = 0; i < n; ++i) out[i] = tree_output(tree, train.row(i));

        // Newton steps can overshoot on saturated leaves; halve until the
        // training loss is non-increasing, zeroing the tree as a last resort.
        double new_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            new_loss += log1p_exp(-static_cast<double>(train.labels[i]) * (margins[i] + out[i]));
        int halvings = 0;
        while (new_loss > cur_loss && halvings < 64) {
            scale_leaves(tree, 0.5);
            for (std::size_t i = 0; i < n; ++i) out[i] *= 0.5;
            new_loss = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                new_loss +=
                    log1p_exp(-static_cast<double>(train.labels[i]) * (margins[i] + out[i]));
            ++halvings;
        }
        if (new_loss > cur_loss) {
            scale_leaves(tree, 0.0);
            std::fill(out.begin(), out.end(), 0.0);
            new_loss = cur_loss;
        }
        cur_loss = new_loss;
        for (std::size_t i = 0; i < n; ++i) margins[i] += out[i];
        ensemble.trees.push_back(std::move(tree));
    }

    assign_leaf_ids(ensemble);
    return ensemble;
}

std::vector<int> leaf_assignment(const TreeEnsemble& ensemble, std::span<const double> x) {
    if (x.size() != ensemble.d) throw std::invalid_argument("leaf_assignment: dimension mismatch");
    std::vector<int> leaves(ensemble.trees.size());
    for (std::size_t t = 0; t < ensemble.trees.size(); ++t)
        leaves[t] = ensemble.route(t, x.data()).leaf_id;
    return leaves;
}

double predict_margin(const TreeEnsemble& ensemble, std::span<const double> x) {
    if (x.size() != ensemble.d) throw std::invalid_argument("predict_margin: dimension mismatch");
    double m = ensemble.base_score;
    for (std::size_t t = 0; t < ensemble.trees.size(); ++t) m += ensemble.route(t, x.data()).value;
    return m;
}

double predict_proba(const TreeEnsemble& ensemble, std::span<const double> x) {
    return 1.0 / (1.0 + std::exp(-predict_margin(ensemble, x)));
}

double instance_loss(const TreeEnsemble& ensemble, std::span<const double> x, int y) {
    if (y != -1 && y != 1) throw std::invalid_argument("instance_loss: label must be -1 or +1");
    return log1p_exp(-static_cast<double>(y) * predict_margin(ensemble, x));
}

std::vector<double> predict_margins(const TreeEnsemble& ensemble, const Dataset& data) {
    if (data.d != ensemble.d) throw std::invalid_argument("predict_margins: dimension mismatch");
    std::vector<double> m(data.n);
    for (std::size_t i = 0; i < data.n; ++i)
        m[i] = predict_margin(ensemble, std::span<const double>(data.row(i), data.d));
    return m;
}

std::vector<int> predicted_labels(const TreeEnsemble& ensemble, const Dataset& data) {
    std::vector<double> m = predict_margins(ensemble, data);
    std::vector<int> labels(data.n);
    for (std::size_t i = 0; i < data.n; ++i) labels[i] = m[i] > 0.0 ? 1 : -1;
    return labels;
}

double test_accuracy(const TreeEnsemble& ensemble, const Dataset& data) {
    const std::vector<int> pred = predicted_labels(ensemble, data);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < data.n; ++i)
        if (pred[i] == data.labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(data.n);
}

GBDTConfig tune_gbdt(const Dataset& train, const std::vector<GBDTConfig>& grid, int folds) {
    if (grid.empty()) throw std::invalid_argument("tune_gbdt: empty grid");
    if (grid.size() == 1) return grid.front();
    if (folds < 2) throw std::invalid_argument("tune_gbdt: folds must be >= 2");
    if (train.n < static_cast<std::size_t>(folds))
        throw std::invalid_argument("tune_gbdt: fewer rows than folds");

    std::vector<std::size_t> perm(train.n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(0xC0FFEEULL);
    rng.shuffle(perm);

    std::vector<int> fold_of(train.n);
    for (std::size_t p = 0; p < perm.size(); ++p)
        fold_of[perm[p]] = static_cast<int>(p % static_cast<std::size_t>(folds));

    for (int f = 0; f < folds; ++f) {
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < train.n; ++i) {
            if (fold_of[i] != f) continue;
            (train.labels[i] == 1 ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg)
            throw std::invalid_argument("tune_gbdt: fold " + std::to_string(f) +
                                        " lacks one class");
    }

    GBDTConfig best = grid.front();
    double best_acc = -1.0;
    for (const GBDTConfig& cfg : grid) {
        double acc_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<std::size_t> tr, ev;
            for (std::size_t i = 0; i < train.n; ++i)
                (fold_of[i] == f ? ev : tr).push_back(i);
            const TreeEnsemble model = fit_gbdt(subset(train, tr), cfg);
            acc_sum += test_accuracy(model, subset(train, ev));
        }
        const double acc = acc_sum / static_cast<double>(folds);
        const bool better =
            acc > best_acc ||
            (acc == best_acc &&
             (cfg.num_trees < best.num_trees ||
              (cfg.num_trees == best.num_trees &&
               effective_depth(cfg.max_depth) < effective_depth(best.max_depth))));
        if (better) {
            best = cfg;
            best_acc = acc;
        }
    }
    return best;
}

namespace {

nlohmann::json node_to_json(const Tree& tree, int i) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(i)];
    if (nd.is_leaf()) return nlohmann::json{{"leaf_id", nd.leaf_id}, {"value", nd.value}};
    return nlohmann::json{{"feature_index", nd.feature},
                          {"threshold", nd.threshold},
                          {"left", node_to_json(tree, nd.left)},
                          {"right", node_to_json(tree, nd.right)}};
}

int node_from_json(const nlohmann::json& j, Tree& tree) {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (j.contains("leaf_id")) {
        tree.nodes[static_cast<std::size_t>(idx)].leaf_id = j.at("leaf_id").get<int>();
        tree.nodes[static_cast<std::size_t>(idx)].value = j.at("value").get<double>();
    } else {
        tree.nodes[static_cast<std::size_t>(idx)].feature = j.at("feature_index").get<int>();
        tree.nodes[static_cast<std::size_t>(idx)].threshold = j.at("threshold").get<double>();
        const int li = node_from_json(j.at("left"), tree);
        const int ri = node_from_json(j.at("right"), tree);
        tree.nodes[static_cast<std::size_t>(idx)].left = li;
        tree.nodes[static_cast<std::size_t>(idx)].right = ri;
    }
    return idx;
}

}  // namespace

nlohmann::json ensemble_to_json(const TreeEnsemble& ensemble) {
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& tree : ensemble.trees) trees.push_back(node_to_json(tree, 0));
    return nlohmann::json{
        {"base_score", ensemble.base_score},
        {"num_leaves", ensemble.num_leaves},
        {"d", ensemble.d},
        {"config",
         {{"num_trees", ensemble.config.num_trees},
          {"max_depth", ensemble.config.max_depth},
          {"learning_rate", ensemble.config.learning_rate},
          {"min_samples_leaf", ensemble.config.min_samples_leaf},
          {"seed", ensemble.config.seed}}},
        {"trees", trees}};
}

TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
    TreeEnsemble ensemble;
    ensemble.base_score = j.at("base_score").get<double>();
    ensemble.num_leaves = j.at("num_leaves").get<std::size_t>();
    ensemble.d = j.at("d").get<std::size_t>();
    const nlohmann::json& cfg = j.at("config");
    ensemble.config.num_trees = cfg.at("num_trees").get<int>();
    ensemble.config.max_depth = cfg.at("max_depth").get<int>();
    ensemble.config.learning_rate = cfg.at("learning_rate").get<double>();
    ensemble.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
    ensemble.config.seed = cfg.at("seed").get<std::uint64_t>();
    for (const nlohmann::json& tj : j.at("trees")) {
        Tree tree;
        node_from_json(tj, tree);
        ensemble.trees.push_back(std::move(tree));
    }
    return ensemble;
}

std::string ensemble_fingerprint(const TreeEnsemble& ensemble) {
    if (ensemble.fingerprint_cache.empty()) {
        Fnv1a h;
        h.update_str(ensemble_to_json(ensemble).dump());
        ensemble.fingerprint_cache = h.hex();
    }
    return ensemble.fingerprint_cache;
}

}  // namespace tea
