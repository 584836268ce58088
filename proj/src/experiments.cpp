#include "tea/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>

#include "tea/dataset.hpp"
#include "tea/explain.hpp"
#include "tea/rng.hpp"
#include "tea/stats.hpp"
#include "tea/surrogate.hpp"
#include "tea/svg.hpp"
#include "tea/teknn.hpp"

namespace tea {

namespace {

// measured values round-trip exactly
std::string f17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// config-derived values stay human-readable
std::string fg(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

KernelKind kind_from_string(const std::string& name) {
    const std::string s = lower(name);
    if (s == "leafpath") return KernelKind::LeafPath;
    if (s == "treeoutput") return KernelKind::TreeOutput;
    if (s == "leafoutput") return KernelKind::LeafOutput;
    throw std::invalid_argument("unknown kernel kind: " + name);
}

struct OutDirs {
    std::filesystem::path root;
    std::filesystem::path raw;
    std::filesystem::path plots;
};

OutDirs prepare_output(const ExperimentConfig& config) {
    if (config.output_dir.empty()) throw std::invalid_argument("output_dir is required");
    OutDirs dirs;
    dirs.root = config.output_dir;
    dirs.raw = dirs.root / "raw";
    dirs.plots = dirs.root / "plots";
    std::filesystem::create_directories(dirs.raw);
    std::filesystem::create_directories(dirs.plots);
    return dirs;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void check_common(const ExperimentConfig& config) {
    if (config.dataset_path.empty()) throw std::invalid_argument("dataset_path is required");
    if (config.seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must lie in (0, 1)");
}

std::vector<std::string> resolve_methods(const ExperimentConfig& config, const char* experiment,
                                         const std::vector<std::string>& defaults,
                                         const std::vector<std::string>& allowed) {
    const std::vector<std::string>& picked = config.methods.empty() ? defaults : config.methods;
    std::vector<std::string> out;
    for (const std::string& raw : picked) {
        std::string m = lower(raw);
        if (m == "klr_loss" || m == "svm_loss") m = "surrogate_loss";
        if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
            throw std::invalid_argument(std::string("unknown method for ") + experiment + ": " + raw);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
}

std::vector<double> resolve_fractions(const std::vector<double>& requested,
                                      std::vector<double> defaults) {
    std::vector<double> f = requested.empty() ? std::move(defaults) : requested;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!(f[i] >= 0.0 && f[i] <= 1.0))
            throw std::invalid_argument("fractions must lie in [0, 1]");
        if (i > 0 && f[i] <= f[i - 1])
            throw std::invalid_argument("fractions must be strictly ascending");
    }
    if (f.empty()) throw std::invalid_argument("at least one fraction is required");
    return f;
}

std::vector<GBDTConfig> resolve_gbdt_grid(const ExperimentConfig& config) {
    return config.gbdt_grid.empty() ? default_gbdt_grid() : config.gbdt_grid;
}

nlohmann::json gbdt_to_json(const GBDTConfig& c) {
    nlohmann::json j;
    j["num_trees"] = c.num_trees;
    j["max_depth"] = c.max_depth;
    j["learning_rate"] = c.learning_rate;
    j["min_samples_leaf"] = c.min_samples_leaf;
    j["seed"] = c.seed;
    return j;
}

nlohmann::json make_meta(const ExperimentConfig& config, const std::vector<std::string>& methods,
                         const std::vector<double>& fractions) {
    nlohmann::json meta;
    nlohmann::json cfg = config_to_json(config);
    if (!methods.empty()) cfg["methods"] = methods;
    if (!fractions.empty()) cfg["fractions"] = fractions;
    meta["config"] = std::move(cfg);
    meta["seeds"] = nlohmann::json::array();
    return meta;
}

struct FittedSeed {
    Dataset train;
    Dataset test;
    GBDTConfig gbdt;
    TreeEnsemble ensemble;
};

FittedSeed fit_seed(const Dataset& full, const ExperimentConfig& config, std::uint64_t seed) {
    FittedSeed fs;
    auto parts = split(full, config.test_fraction, derive_seed(seed, 0));
    fs.train = std::move(parts.first);
    fs.test = std::move(parts.second);
    fs.gbdt = tune_gbdt(fs.train, resolve_gbdt_grid(config), config.cv_folds);
    fs.ensemble = fit_gbdt(fs.train, fs.gbdt);
    return fs;
}

std::vector<double> ensemble_probas(const TreeEnsemble& ensemble, const Dataset& data) {
    std::vector<double> out = predict_margins(ensemble, data);
    for (double& v : out) v = sigmoid(v);
    return out;
}

// positions 0..n-1 ranked by random_ordering, mapped onto the dataset's row ids
Ordering random_row_ordering(const Dataset& data, std::uint64_t seed) {
    const Ordering base = random_ordering(data.n, seed);
    Ordering out;
    out.method = "random";
    out.scores = base.scores;
    out.ranked_row_ids.reserve(base.ranked_row_ids.size());
    for (const std::int64_t pos : base.ranked_row_ids)
        out.ranked_row_ids.push_back(data.row_ids[static_cast<std::size_t>(pos)]);
    return out;
}

double log1p_exp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

template <typename F>
double timed_seconds(F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

double mean_or_nan(const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(v);
}

double stderr_or_nan(const std::vector<double>& v) {
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : stderr_mean(v);
}

}  // namespace

std::vector<GBDTConfig> default_gbdt_grid() {
    std::vector<GBDTConfig> grid;
    for (const int trees : {10, 100, 250}) {
        for (const int depth : {3, 5, 10, -1}) {
            GBDTConfig cfg;
            cfg.num_trees = trees;
            cfg.max_depth = depth;
            grid.push_back(cfg);
        }
    }
    return grid;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    if (j.contains("experiment")) config.experiment = j.at("experiment").get<std::string>();
    if (j.contains("dataset_path")) config.dataset_path = j.at("dataset_path").get<std::string>();
    if (j.contains("label_column")) config.label_column = j.at("label_column").get<std::string>();
    if (j.contains("positive_value"))
        config.positive_value = j.at("positive_value").get<std::string>();
    if (j.contains("kernel")) config.kind = kind_from_string(j.at("kernel").get<std::string>());
    if (j.contains("methods")) config.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("seeds")) {
        config.seeds = j.at("seeds").get<std::vector<unsigned long long>>();
    }
    if (j.contains("fractions")) config.fractions = j.at("fractions").get<std::vector<double>>();
    if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("test_fraction")) config.test_fraction = j.at("test_fraction").get<double>();
    if (j.contains("cv_folds")) config.cv_folds = j.at("cv_folds").get<int>();
    if (j.contains("c_grid")) config.c_grid = j.at("c_grid").get<std::vector<double>>();
    if (j.contains("k_grid")) config.k_grid = j.at("k_grid").get<std::vector<int>>();
    if (j.contains("gbdt_grid")) {
        config.gbdt_grid.clear();
        for (const auto& entry : j.at("gbdt_grid")) {
            GBDTConfig c;
            c.num_trees = entry.value("num_trees", c.num_trees);
            c.max_depth = entry.value("max_depth", c.max_depth);
            c.learning_rate = entry.value("learning_rate", c.learning_rate);
            c.min_samples_leaf = entry.value("min_samples_leaf", c.min_samples_leaf);
            c.seed = entry.value("seed", c.seed);
            config.gbdt_grid.push_back(c);
        }
    }
    if (j.contains("flip_fraction")) config.flip_fraction = j.at("flip_fraction").get<double>();
    if (j.contains("roar_queries")) config.roar_queries = j.at("roar_queries").get<int>();
    if (j.contains("predicate_column"))
        config.predicate_column = j.at("predicate_column").get<std::string>();
    if (j.contains("predicate_threshold"))
        config.predicate_threshold = j.at("predicate_threshold").get<double>();
    if (j.contains("keep_count")) config.keep_count = j.at("keep_count").get<int>();
    if (j.contains("flip_count")) config.flip_count = j.at("flip_count").get<int>();
    if (j.contains("runtime_reps")) config.runtime_reps = j.at("runtime_reps").get<int>();
    return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["experiment"] = config.experiment;
    j["dataset_path"] = config.dataset_path;
    j["label_column"] = config.label_column;
    j["positive_value"] = config.positive_value;
    j["kernel"] = kernel_kind_name(config.kind);
    j["methods"] = config.methods;
    j["seeds"] = config.seeds;
    j["fractions"] = config.fractions;
    j["output_dir"] = config.output_dir;
    j["test_fraction"] = config.test_fraction;
    j["cv_folds"] = config.cv_folds;
    j["c_grid"] = config.c_grid;
    j["k_grid"] = config.k_grid;
    j["gbdt_grid"] = nlohmann::json::array();
    for (const GBDTConfig& c : resolve_gbdt_grid(config)) j["gbdt_grid"].push_back(gbdt_to_json(c));
    j["flip_fraction"] = config.flip_fraction;
    j["roar_queries"] = config.roar_queries;
    j["predicate_column"] = config.predicate_column;
    j["predicate_threshold"] = config.predicate_threshold;
    j["keep_count"] = config.keep_count;
    j["flip_count"] = config.flip_count;
    j["runtime_reps"] = config.runtime_reps;
    return j;
}

void run_fidelity(const ExperimentConfig& config) {
    check_common(config);
    const std::vector<std::string> methods =
        resolve_methods(config, "fidelity", {"klr", "svm", "teknn"}, {"klr", "svm", "teknn"});
    if (methods.empty()) throw std::invalid_argument("fidelity: no methods selected");
    const OutDirs dirs = prepare_output(config);
    const Dataset full = load_csv(config.dataset_path, config.label_column, config.positive_value);

    std::string results = "method,kernel,seed,n_eval,pearson\n";
    nlohmann::json meta = make_meta(config, methods, {});

    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
        const std::uint64_t seed = config.seeds[si];
        const FittedSeed fs = fit_seed(full, config, seed);
        const KernelRep test_rep = transform(fs.ensemble, fs.test, config.kind);
        const std::vector<double> ens_proba = ensemble_probas(fs.ensemble, fs.test);

        std::string raw = "method,row_id,ensemble_proba,surrogate_proba\n";
        nlohmann::json mseed;
        mseed["seed"] = seed;
        mseed["gbdt"] = gbdt_to_json(fs.gbdt);
        mseed["ensemble_fingerprint"] = ensemble_fingerprint(fs.ensemble);
        mseed["methods"] = nlohmann::json::object();

        for (const std::string& m : methods) {
            std::vector<double> sur(fs.test.n, 0.0);
            nlohmann::json mm;
            if (m == "klr" || m == "svm") {
                const SurrogateFamily family =
                    m == "klr" ? SurrogateFamily::KLR : SurrogateFamily::SVM;
                const TunedSurrogate ts = tune_C(fs.ensemble, fs.train, family, config.kind,
                                                 config.c_grid, derive_seed(seed, 1));
                for (std::size_t i = 0; i < fs.test.n; ++i)
                    sur[i] = predict_proba(ts.model, test_rep.maps[i]);
                mm["C"] = ts.C;
            } else {
                const TunedTeknn tt = tune_teknn(fs.ensemble, fs.train, config.kind, config.k_grid,
                                                 derive_seed(seed, 1));
                for (std::size_t i = 0; i < fs.test.n; ++i)
                    sur[i] = teknn_predict_proba(tt.model, test_rep.maps[i]);
                mm["k"] = tt.k;
            }
            const double pear = pearson(ens_proba, sur);
            mm["pearson"] = pear;
            mseed["methods"][m] = std::move(mm);

            results += m + "," + kernel_kind_name(config.kind) + "," + std::to_string(seed) + "," +
                       std::to_string(fs.test.n) + "," + f17(pear) + "\n";
            for (std::size_t i = 0; i < fs.test.n; ++i)
                raw += m + "," + std::to_string(fs.test.row_ids[i]) + "," + f17(ens_proba[i]) +
                       "," + f17(sur[i]) + "\n";

            if (si == 0) {
                SvgPlot plot("surrogate vs ensemble: " + m, "ensemble probability",
                             "surrogate probability");
                SvgSeries diag;
                diag.name = "y = x";
                diag.style = SvgSeries::Style::Line;
                diag.color = "#999999";
                diag.dashed = true;
                diag.xs = {0.0, 1.0};
                diag.ys = {0.0, 1.0};
                plot.add(diag);
                SvgSeries pts;
                pts.name = m;
                pts.style = SvgSeries::Style::Points;
                pts.color = svg_color(0);
                pts.xs = ens_proba;
                pts.ys = sur;
                plot.add(pts);
                plot.write((dirs.plots / ("fidelity_" + m + ".svg")).string());
            }
        }
        write_file(dirs.raw / ("seed_" + std::to_string(seed) + ".csv"), raw);
        meta["seeds"].push_back(std::move(mseed));
    }
    write_file(dirs.root / "results.csv", results);
    write_file(dirs.root / "meta.json", meta.dump(2) + "\n");
}

void run_cleaning(const ExperimentConfig& config) {
    check_common(config);
    const std::vector<std::string> defaults = {"klr",       "svm",            "random",
                                              "gbdt_loss", "surrogate_loss", "teknn"};
    const std::vector<std::string> methods = resolve_methods(config, "cleaning", defaults, defaults);
    if (methods.empty()) throw std::invalid_argument("cleaning: no methods selected");
    const std::vector<double> fractions =
        resolve_fractions(config.fractions, {0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30});
    if (!(config.flip_fraction > 0.0 && config.flip_fraction < 1.0))
        throw std::invalid_argument("cleaning: flip_fraction must lie in (0, 1)");
    const OutDirs dirs = prepare_output(config);
    const Dataset full = load_csv(config.dataset_path, config.label_column, config.positive_value);

    // accs[mi][fi] and found[mi][fi] collect one entry per seed
    std::vector<std::vector<std::vector<double>>> accs(
        methods.size(), std::vector<std::vector<double>>(fractions.size()));
    std::vector<std::vector<std::vector<double>>> found = accs;
    std::vector<double> clean_accs;
    nlohmann::json meta = make_meta(config, methods, fractions);

    for (const std::uint64_t seed : config.seeds) {
        auto parts = split(full, config.test_fraction, derive_seed(seed, 0));
        const Dataset train = std::move(parts.first);
        const Dataset test = std::move(parts.second);
        auto corrupted_pair = flip_labels(train, config.flip_fraction, derive_seed(seed, 1));
        const Dataset corrupted = std::move(corrupted_pair.first);
        const CorruptionRecord record = std::move(corrupted_pair.second);

        const GBDTConfig cfg = tune_gbdt(corrupted, resolve_gbdt_grid(config), config.cv_folds);
        const TreeEnsemble ens = fit_gbdt(corrupted, cfg);
        const double corrupted_acc = test_accuracy(ens, test);
        const double clean_acc = test_accuracy(fit_gbdt(train, cfg), test);
        clean_accs.push_back(clean_acc);

        nlohmann::json mseed;
        mseed["seed"] = seed;
        mseed["gbdt"] = gbdt_to_json(cfg);
        mseed["ensemble_fingerprint"] = ensemble_fingerprint(ens);
        mseed["corruption"] = {{"seed", record.seed}, {"fraction", record.fraction}};
        mseed["corrupted_accuracy"] = corrupted_acc;
        mseed["clean_accuracy"] = clean_acc;
        mseed["methods"] = nlohmann::json::object();

        std::optional<TunedSurrogate> klr_shared;  // klr and surrogate_loss reuse one fit
        const auto need_klr = [&]() -> const TunedSurrogate& {
            if (!klr_shared)
                klr_shared = tune_C(ens, corrupted, SurrogateFamily::KLR, config.kind,
                                    config.c_grid, derive_seed(seed, 2));
            return *klr_shared;
        };

        std::map<std::string, Ordering> orderings;
        for (const std::string& m : methods) {
            nlohmann::json mm;
            if (m == "klr") {
                const TunedSurrogate& ts = need_klr();
                orderings[m] = global_importance(ts.model, corrupted.row_ids);
                mm["C"] = ts.C;
            } else if (m == "svm") {
                const TunedSurrogate ts = tune_C(ens, corrupted, SurrogateFamily::SVM, config.kind,
                                                 config.c_grid, derive_seed(seed, 3));
                orderings[m] = global_importance(ts.model, corrupted.row_ids);
                mm["C"] = ts.C;
            } else if (m == "random") {
                orderings[m] = random_row_ordering(corrupted, derive_seed(seed, 5));
            } else if (m == "gbdt_loss") {
                std::vector<double> losses(corrupted.n, 0.0);
                for (std::size_t i = 0; i < corrupted.n; ++i)
                    losses[i] = instance_loss(ens, {corrupted.row(i), corrupted.d},
                                              corrupted.labels[i]);
                orderings[m] = loss_ordering(m, losses, corrupted.row_ids);
            } else if (m == "surrogate_loss") {
                const TunedSurrogate& ts = need_klr();
                std::vector<double> losses(corrupted.n, 0.0);
                for (std::size_t i = 0; i < corrupted.n; ++i) {
                    const double f = decision(ts.model, ts.model.train_rep.maps[i]);
                    losses[i] = log1p_exp(-corrupted.labels[i] * f);
                }
                orderings[m] = loss_ordering(m, losses, corrupted.row_ids);
                mm["C"] = ts.C;
            } else {  // teknn
                const TunedTeknn tt = tune_teknn(ens, corrupted, config.kind, config.k_grid,
                                                 derive_seed(seed, 4));
                orderings[m] = teknn_density_ordering(tt.model, tt.model.train_rep,
                                                      corrupted.row_ids);
                mm["k"] = tt.k;
            }
            mseed["methods"][m] = std::move(mm);
        }

        std::map<std::int64_t, std::size_t> pos_of;
        for (std::size_t i = 0; i < corrupted.n; ++i) pos_of[corrupted.row_ids[i]] = i;
        std::vector<std::int64_t> all_flipped;
        for (std::size_t i = 0; i < corrupted.n; ++i)
            if (record.flipped_mask[i]) all_flipped.push_back(corrupted.row_ids[i]);
        std::sort(all_flipped.begin(), all_flipped.end());
        const double total_flipped = static_cast<double>(all_flipped.size());
        mseed["n_flipped"] = all_flipped.size();

        // retrains keyed by the sorted set of repaired rows; the endpoint keys
        // are preseeded so fraction 0 and fraction 1 hit the anchors exactly
        std::map<std::vector<std::int64_t>, double> cache;
        cache[{}] = corrupted_acc;
        cache[all_flipped] = clean_acc;
        const auto retrain_accuracy = [&](const std::vector<std::int64_t>& fixed) {
            const auto it = cache.find(fixed);
            if (it != cache.end()) return it->second;
            Dataset repaired = corrupted;
            for (const std::int64_t id : fixed) {
                const std::size_t p = pos_of.at(id);
                repaired.labels[p] = train.labels[p];
            }
            const double acc = test_accuracy(fit_gbdt(repaired, cfg), test);
            cache.emplace(fixed, acc);
            return acc;
        };

        std::string raw = "method,fraction,n_checked,flips_found,frac_flips_found,test_accuracy\n";
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Ordering& ord = orderings[methods[mi]];
            for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
                std::size_t n_checked = static_cast<std::size_t>(
                    std::llround(fractions[fi] * static_cast<double>(corrupted.n)));
                n_checked = std::min(n_checked, corrupted.n);
                std::vector<std::int64_t> fixed;
                for (std::size_t r = 0; r < n_checked; ++r) {
                    const std::int64_t id = ord.ranked_row_ids[r];
                    if (record.flipped_mask[pos_of.at(id)]) fixed.push_back(id);
                }
                std::sort(fixed.begin(), fixed.end());
                const double frac_found =
                    total_flipped > 0.0 ? static_cast<double>(fixed.size()) / total_flipped : 0.0;
                const double acc = retrain_accuracy(fixed);
                accs[mi][fi].push_back(acc);
                found[mi][fi].push_back(frac_found);
                raw += methods[mi] + "," + fg(fractions[fi]) + "," + std::to_string(n_checked) +
                       "," + std::to_string(fixed.size()) + "," + f17(frac_found) + "," +
                       f17(acc) + "\n";
            }
        }
        for (const double f : fractions)
            raw += "clean_reference," + fg(f) + ",0,0,0," + f17(clean_acc) + "\n";
        write_file(dirs.raw / ("seed_" + std::to_string(seed) + ".csv"), raw);
        meta["seeds"].push_back(std::move(mseed));
    }

    const std::string n_seeds = std::to_string(config.seeds.size());
    std::string results =
        "method,fraction,n_seeds,mean_accuracy,stderr_accuracy,"
        "mean_frac_flips_found,stderr_frac_flips_found\n";
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
        for (std::size_t fi = 0; fi < fractions.size(); ++fi)
            results += methods[mi] + "," + fg(fractions[fi]) + "," + n_seeds + "," +
                       f17(mean(accs[mi][fi])) + "," + f17(stderr_mean(accs[mi][fi])) + "," +
                       f17(mean(found[mi][fi])) + "," + f17(stderr_mean(found[mi][fi])) + "\n";
    for (const double f : fractions)
        results += "clean_reference," + fg(f) + "," + n_seeds + "," + f17(mean(clean_accs)) +
                   "," + f17(stderr_mean(clean_accs)) + ",0,0\n";
    write_file(dirs.root / "results.csv", results);

    SvgPlot acc_plot("label cleaning", "fraction checked", "test accuracy");
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        SvgSeries s;
        s.name = methods[mi];
        s.color = svg_color(mi);
        s.xs = fractions;
        for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
            s.ys.push_back(mean(accs[mi][fi]));
            s.yerr.push_back(stderr_mean(accs[mi][fi]));
        }
        acc_plot.add(std::move(s));
    }
    {
        SvgSeries ref;
        ref.name = "clean_reference";
        ref.color = "#555555";
        ref.dashed = true;
        ref.xs = fractions;
        ref.ys.assign(fractions.size(), mean(clean_accs));
        acc_plot.add(std::move(ref));
    }
    acc_plot.write((dirs.plots / "cleaning_accuracy.svg").string());

    SvgPlot found_plot("flips recovered", "fraction checked", "fraction of flips found");
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        SvgSeries s;
        s.name = methods[mi];
        s.color = svg_color(mi);
        s.xs = fractions;
        for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
            s.ys.push_back(mean(found[mi][fi]));
            s.yerr.push_back(stderr_mean(found[mi][fi]));
        }
        found_plot.add(std::move(s));
    }
    found_plot.write((dirs.plots / "cleaning_flips_found.svg").string());

    write_file(dirs.root / "meta.json", meta.dump(2) + "\n");
}

void run_roar(const ExperimentConfig& config) {
    check_common(config);
    const std::vector<std::string> defaults = {"klr", "random", "teknn"};
    const std::vector<std::string> methods = resolve_methods(config, "roar", defaults, defaults);
    if (methods.empty()) throw std::invalid_argument("roar: no methods selected");
    const std::vector<double> fractions = resolve_fractions(
        config.fractions, {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
    if (config.roar_queries < 1) throw std::invalid_argument("roar: roar_queries must be >= 1");
    const OutDirs dirs = prepare_output(config);
    const Dataset full = load_csv(config.dataset_path, config.label_column, config.positive_value);

    std::vector<std::vector<std::vector<double>>> accs(
        methods.size(), std::vector<std::vector<double>>(fractions.size()));
    std::vector<double> baseline_accs;
    nlohmann::json meta = make_meta(config, methods, fractions);

    for (const std::uint64_t seed : config.seeds) {
        const FittedSeed fs = fit_seed(full, config, seed);
        const double acc0 = test_accuracy(fs.ensemble, fs.test);
        baseline_accs.push_back(acc0);

        std::vector<std::size_t> qpos(fs.test.n);
        std::iota(qpos.begin(), qpos.end(), std::size_t{0});
        Rng qrng(derive_seed(seed, 3));
        qrng.shuffle(qpos);
        qpos.resize(std::min<std::size_t>(static_cast<std::size_t>(config.roar_queries),
                                          fs.test.n));
        std::vector<std::vector<double>> queries;
        queries.reserve(qpos.size());
        for (const std::size_t p : qpos)
            queries.emplace_back(fs.test.row(p), fs.test.row(p) + fs.test.d);

        nlohmann::json mseed;
        mseed["seed"] = seed;
        mseed["gbdt"] = gbdt_to_json(fs.gbdt);
        mseed["ensemble_fingerprint"] = ensemble_fingerprint(fs.ensemble);
        mseed["baseline_accuracy"] = acc0;
        mseed["n_queries"] = qpos.size();
        mseed["methods"] = nlohmann::json::object();

        std::map<std::string, Ordering> orderings;
        for (const std::string& m : methods) {
            nlohmann::json mm;
            if (m == "klr") {
                const TunedSurrogate ts = tune_C(fs.ensemble, fs.train, SurrogateFamily::KLR,
                                                 config.kind, config.c_grid, derive_seed(seed, 1));
                orderings[m] =
                    aggregate_explanations(ts.model, fs.ensemble, queries, fs.train.row_ids);
                mm["C"] = ts.C;
            } else if (m == "teknn") {
                const TunedTeknn tt = tune_teknn(fs.ensemble, fs.train, config.kind, config.k_grid,
                                                 derive_seed(seed, 2));
                // neighbors of each query vote for rows that agree with the
                // query's predicted label
                std::vector<double> scores(fs.train.n, 0.0);
                for (const auto& q : queries) {
                    const FeatureMap qmap =
                        feature_map(fs.ensemble, {q.data(), q.size()}, config.kind);
                    const int label = teknn_predict_proba(tt.model, qmap) > 0.5 ? 1 : -1;
                    for (const std::size_t i : teknn_neighbors(tt.model, qmap))
                        scores[i] += tt.model.target_labels[i] == label ? 1.0 : -1.0;
                }
                orderings[m] = make_ordering(m, fs.train.row_ids, scores);
                mm["k"] = tt.k;
            } else {  // random
                orderings[m] = random_row_ordering(fs.train, derive_seed(seed, 4));
            }
            mseed["methods"][m] = std::move(mm);
        }

        std::map<std::int64_t, std::size_t> pos_of;
        for (std::size_t i = 0; i < fs.train.n; ++i) pos_of[fs.train.row_ids[i]] = i;
        std::map<std::vector<std::int64_t>, double> cache;
        cache[{}] = acc0;
        const auto removal_accuracy = [&](const std::vector<std::int64_t>& removed) {
            const auto it = cache.find(removed);
            if (it != cache.end()) return it->second;
            std::vector<std::size_t> keep;
            keep.reserve(fs.train.n - removed.size());
            for (std::size_t i = 0; i < fs.train.n; ++i)
                if (!std::binary_search(removed.begin(), removed.end(), fs.train.row_ids[i]))
                    keep.push_back(i);
            const Dataset remaining = subset(fs.train, keep);
            int pos = 0, neg = 0;
            for (const int y : remaining.labels) (y > 0 ? pos : neg)++;
            double acc = std::numeric_limits<double>::quiet_NaN();
            if (remaining.n >= 2 && pos > 0 && neg > 0) {
                acc = test_accuracy(fit_gbdt(remaining, fs.gbdt), fs.test);
            } else {
                std::fprintf(stderr,
                             "roar: removal left a single-class training set "
                             "(n=%zu), recording a missing point\n",
                             remaining.n);
            }
            cache.emplace(removed, acc);
            return acc;
        };

        std::string raw = "method,fraction,n_removed,test_accuracy\n";
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            const Ordering& ord = orderings[methods[mi]];
            for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
                std::size_t n_removed = static_cast<std::size_t>(
                    std::llround(fractions[fi] * static_cast<double>(fs.train.n)));
                n_removed = std::min(n_removed, fs.train.n);
                std::vector<std::int64_t> removed(ord.ranked_row_ids.begin(),
                                                  ord.ranked_row_ids.begin() +
                                                      static_cast<std::ptrdiff_t>(n_removed));
                std::sort(removed.begin(), removed.end());
                const double acc = removal_accuracy(removed);
                if (std::isfinite(acc)) accs[mi][fi].push_back(acc);
                raw += methods[mi] + "," + fg(fractions[fi]) + "," + std::to_string(n_removed) +
                       "," + f17(acc) + "\n";
            }
        }
        for (const double f : fractions)
            raw += "baseline," + fg(f) + ",0," + f17(acc0) + "\n";
        write_file(dirs.raw / ("seed_" + std::to_string(seed) + ".csv"), raw);
        meta["seeds"].push_back(std::move(mseed));
    }

    std::string results = "method,fraction,n_seeds,mean_accuracy,stderr_accuracy\n";
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
        for (std::size_t fi = 0; fi < fractions.size(); ++fi)
            results += methods[mi] + "," + fg(fractions[fi]) + "," +
                       std::to_string(accs[mi][fi].size()) + "," + f17(mean_or_nan(accs[mi][fi])) +
                       "," + f17(stderr_or_nan(accs[mi][fi])) + "\n";
    for (const double f : fractions)
        results += "baseline," + fg(f) + "," + std::to_string(baseline_accs.size()) + "," +
                   f17(mean_or_nan(baseline_accs)) + "," + f17(stderr_or_nan(baseline_accs)) +
                   "\n";
    write_file(dirs.root / "results.csv", results);

    SvgPlot plot("remove and retrain", "fraction removed", "test accuracy");
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        SvgSeries s;
        s.name = methods[mi];
        s.color = svg_color(mi);
        for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
            if (accs[mi][fi].empty()) continue;
            s.xs.push_back(fractions[fi]);
            s.ys.push_back(mean(accs[mi][fi]));
            s.yerr.push_back(stderr_mean(accs[mi][fi]));
        }
        plot.add(std::move(s));
    }
    {
        SvgSeries ref;
        ref.name = "baseline";
        ref.color = "#555555";
        ref.dashed = true;
        ref.xs = fractions;
        ref.ys.assign(fractions.size(), mean_or_nan(baseline_accs));
        plot.add(std::move(ref));
    }
    plot.write((dirs.plots / "roar_accuracy.svg").string());

    write_file(dirs.root / "meta.json", meta.dump(2) + "\n");
}

void run_runtime(const ExperimentConfig& config) {
    check_common(config);
    const std::vector<std::string> methods =
        resolve_methods(config, "runtime", {"klr", "svm", "teknn"}, {"klr", "svm", "teknn"});
    if (methods.empty()) throw std::invalid_argument("runtime: no methods selected");
    if (config.runtime_reps < 1)
        throw std::invalid_argument("runtime: runtime_reps must be >= 1");
    const OutDirs dirs = prepare_output(config);
    const Dataset full = load_csv(config.dataset_path, config.label_column, config.positive_value);

    const std::uint64_t seed = config.seeds.front();
    const FittedSeed fs = fit_seed(full, config, seed);
    Rng qrng(derive_seed(seed, 2));
    const std::size_t qpos = qrng.uniform_index(fs.test.n);
    const std::int64_t query_row_id = fs.test.row_ids[qpos];
    const FeatureMap qmap = feature_map(fs.ensemble, {fs.test.row(qpos), fs.test.d}, config.kind);

    std::string results = "method,tuned_param,tuned_value,query_row_id,query_value\n";
    std::string timings = "method,phase,mean_seconds,std_seconds,reps\n";
    std::string raw = "method,phase,rep,seconds\n";
    const std::string reps = std::to_string(config.runtime_reps);

    nlohmann::json meta = make_meta(config, methods, {});
    nlohmann::json mseed;
    mseed["seed"] = seed;
    mseed["gbdt"] = gbdt_to_json(fs.gbdt);
    mseed["ensemble_fingerprint"] = ensemble_fingerprint(fs.ensemble);
    mseed["query_row_id"] = query_row_id;
    mseed["methods"] = nlohmann::json::object();

    for (const std::string& m : methods) {
        std::vector<double> train_secs, test_secs;
        nlohmann::json mm;
        if (m == "klr" || m == "svm") {
            const SurrogateFamily family = m == "klr" ? SurrogateFamily::KLR : SurrogateFamily::SVM;
            TunedSurrogate ts;
            for (int rep = 0; rep < config.runtime_reps; ++rep)
                train_secs.push_back(timed_seconds([&] {
                    ts = tune_C(fs.ensemble, fs.train, family, config.kind, config.c_grid,
                                derive_seed(seed, 1));
                }));
            for (int rep = 0; rep < config.runtime_reps; ++rep)
                test_secs.push_back(timed_seconds(
                    [&] { local_explanation(ts.model, fs.ensemble, {fs.test.row(qpos), fs.test.d}); }));
            results += m + ",C," + fg(ts.C) + "," + std::to_string(query_row_id) + "," +
                       f17(decision(ts.model, qmap)) + "\n";
            mm["C"] = ts.C;
        } else {
            TunedTeknn tt;
            for (int rep = 0; rep < config.runtime_reps; ++rep)
                train_secs.push_back(timed_seconds([&] {
                    tt = tune_teknn(fs.ensemble, fs.train, config.kind, config.k_grid,
                                    derive_seed(seed, 1));
                }));
            for (int rep = 0; rep < config.runtime_reps; ++rep)
                test_secs.push_back(timed_seconds([&] { teknn_neighbors(tt.model, qmap); }));
            results += m + ",k," + std::to_string(tt.k) + "," + std::to_string(query_row_id) +
                       "," + f17(teknn_predict_proba(tt.model, qmap)) + "\n";
            mm["k"] = tt.k;
        }
        timings += m + ",train," + f17(mean(train_secs)) + "," + f17(stddev(train_secs)) + "," +
                   reps + "\n";
        timings += m + ",test," + f17(mean(test_secs)) + "," + f17(stddev(test_secs)) + "," +
                   reps + "\n";
        for (int rep = 0; rep < config.runtime_reps; ++rep)
            raw += m + ",train," + std::to_string(rep) + "," + f17(train_secs[rep]) + "\n";
        for (int rep = 0; rep < config.runtime_reps; ++rep)
            raw += m + ",test," + std::to_string(rep) + "," + f17(test_secs[rep]) + "\n";
        mseed["methods"][m] = std::move(mm);

        SvgPlot plot("runtime: " + m, "rep", "seconds");
        SvgSeries tr;
        tr.name = "train";
        tr.color = svg_color(0);
        SvgSeries te;
        te.name = "test";
        te.color = svg_color(1);
        for (int rep = 0; rep < config.runtime_reps; ++rep) {
            tr.xs.push_back(rep);
            tr.ys.push_back(train_secs[rep]);
            te.xs.push_back(rep);
            te.ys.push_back(test_secs[rep]);
        }
        plot.add(std::move(tr));
        plot.add(std::move(te));
        plot.write((dirs.plots / ("runtime_" + m + ".svg")).string());
    }
    meta["seeds"].push_back(std::move(mseed));

    write_file(dirs.root / "results.csv", results);
    write_file(dirs.root / "timings.csv", timings);
    write_file(dirs.raw / ("seed_" + std::to_string(seed) + ".csv"), raw);
    write_file(dirs.root / "meta.json", meta.dump(2) + "\n");
}

void run_case_study(const ExperimentConfig& config) {
    check_common(config);
    if (config.keep_count < 1 || config.flip_count < 0 ||
        config.flip_count > config.keep_count)
        throw std::invalid_argument("case-study: need 0 <= flip_count <= keep_count, keep_count >= 1");
    const OutDirs dirs = prepare_output(config);
    const Dataset full = load_csv(config.dataset_path, config.label_column, config.positive_value);

    const std::uint64_t seed = config.seeds.front();
    auto parts = split(full, config.test_fraction, derive_seed(seed, 0));
    const Dataset train_raw = std::move(parts.first);
    const Dataset test = std::move(parts.second);
    auto injected = inject_domain_mismatch(train_raw, config.predicate_column,
                                           config.predicate_threshold,
                                           static_cast<std::size_t>(config.keep_count),
                                           static_cast<std::size_t>(config.flip_count),
                                           derive_seed(seed, 1));
    const Dataset train = std::move(injected.first);
    const CorruptionRecord record = std::move(injected.second);

    const GBDTConfig cfg = tune_gbdt(train, resolve_gbdt_grid(config), config.cv_folds);
    const TreeEnsemble ens = fit_gbdt(train, cfg);
    const std::size_t pred_col = train.feature_index(config.predicate_column);

    // query: the subgroup test row most confidently misclassified as positive
    std::size_t best = test.n;
    double best_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < test.n; ++i) {
        if (!(test.row(i)[pred_col] < config.predicate_threshold)) continue;
        if (test.labels[i] != -1) continue;
        const double margin = predict_margin(ens, {test.row(i), test.d});
        if (margin > 0.0 && margin > best_margin) {
            best = i;
            best_margin = margin;
        }
    }
    if (best == test.n)
        throw std::runtime_error(
            "case-study: no subgroup test row is misclassified as positive; "
            "strengthen the injection (raise flip_count) or adjust the predicate");

    const TunedSurrogate ts = tune_C(ens, train, SurrogateFamily::KLR, config.kind, config.c_grid,
                                     derive_seed(seed, 2));
    const Explanation ex = local_explanation(ts.model, ens, {test.row(best), test.d});

    std::vector<bool> in_subgroup(train.n, false);
    std::size_t n_subgroup = 0, n_flipped = 0;
    for (std::size_t i = 0; i < train.n; ++i) {
        in_subgroup[i] = train.row(i)[pred_col] < config.predicate_threshold;
        if (in_subgroup[i]) ++n_subgroup;
        if (record.flipped_mask[i]) ++n_flipped;
    }

    std::vector<std::size_t> order(train.n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ex.contributions[a] != ex.contributions[b])
            return ex.contributions[a] > ex.contributions[b];
        return train.row_ids[a] < train.row_ids[b];
    });
    std::size_t top_checked = 0, top_subgroup = 0;
    for (const std::size_t p : order) {
        if (top_checked == 100 || ex.contributions[p] <= 0.0) break;
        ++top_checked;
        if (in_subgroup[p]) ++top_subgroup;
    }
    const double top_fraction =
        top_checked > 0 ? static_cast<double>(top_subgroup) / static_cast<double>(top_checked)
                        : 0.0;

    std::vector<double> gamma_sub, gamma_rest;
    for (std::size_t i = 0; i < train.n; ++i)
        (in_subgroup[i] ? gamma_sub : gamma_rest).push_back(ex.similarities[i]);

    std::string raw =
        "row_id,predicate_value,label,in_subgroup,flipped,gamma,signed_weight,contribution\n";
    for (std::size_t i = 0; i < train.n; ++i) {
        raw += std::to_string(train.row_ids[i]) + "," + f17(train.row(i)[pred_col]) + "," +
               std::to_string(train.labels[i]) + "," + (in_subgroup[i] ? "1" : "0") + "," +
               (record.flipped_mask[i] ? "1" : "0") + "," + f17(ex.similarities[i]) + "," +
               f17(ex.signed_weights[i]) + "," + f17(ex.contributions[i]) + "\n";
    }
    write_file(dirs.raw / ("seed_" + std::to_string(seed) + ".csv"), raw);

    // predicate-column histograms: raw labels, weight mass, contribution mass
    constexpr int kBins = 12;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.n; ++i) {
        lo = std::min(lo, train.row(i)[pred_col]);
        hi = std::max(hi, train.row(i)[pred_col]);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const double width = (hi - lo) / kBins;
    std::vector<int> count_neg(kBins, 0), count_pos(kBins, 0);
    std::vector<double> sum_weight(kBins, 0.0), sum_contrib(kBins, 0.0);
    for (std::size_t i = 0; i < train.n; ++i) {
        int b = static_cast<int>((train.row(i)[pred_col] - lo) / width);
        b = std::clamp(b, 0, kBins - 1);
        (train.labels[i] > 0 ? count_pos : count_neg)[b]++;
        sum_weight[b] += ex.signed_weights[i];
        sum_contrib[b] += ex.contributions[i];
    }
    std::string hist = "bin_lo,bin_hi,count_neg,count_pos,sum_signed_weight,sum_contribution\n";
    for (int b = 0; b < kBins; ++b)
        hist += f17(lo + b * width) + "," + f17(lo + (b + 1) * width) + "," +
                std::to_string(count_neg[b]) + "," + std::to_string(count_pos[b]) + "," +
                f17(sum_weight[b]) + "," + f17(sum_contrib[b]) + "\n";
    write_file(dirs.raw / "histograms.csv", hist);

    std::string results = "key,value\n";
    results += "query_row_id," + std::to_string(test.row_ids[best]) + "\n";
    results += "query_margin," + f17(best_margin) + "\n";
    results += "query_proba," + f17(sigmoid(best_margin)) + "\n";
    results += "n_train," + std::to_string(train.n) + "\n";
    results += "n_subgroup," + std::to_string(n_subgroup) + "\n";
    results += "n_flipped," + std::to_string(n_flipped) + "\n";
    results += "top_checked," + std::to_string(top_checked) + "\n";
    results += "top_subgroup_fraction," + f17(top_fraction) + "\n";
    results += "mean_gamma_subgroup," + f17(mean_or_nan(gamma_sub)) + "\n";
    results += "mean_gamma_rest," + f17(mean_or_nan(gamma_rest)) + "\n";
    results += "klr_C," + fg(ts.C) + "\n";
    write_file(dirs.root / "results.csv", results);

    SvgPlot scatter("similarity vs weight", "gamma", "alpha * yhat");
    {
        SvgSeries rest;
        rest.name = "rest";
        rest.style = SvgSeries::Style::Points;
        rest.color = svg_color(0);
        SvgSeries sub;
        sub.name = "subgroup";
        sub.style = SvgSeries::Style::Points;
        sub.color = svg_color(1);
        for (std::size_t i = 0; i < train.n; ++i) {
            SvgSeries& s = in_subgroup[i] ? sub : rest;
            s.xs.push_back(ex.similarities[i]);
            s.ys.push_back(ex.signed_weights[i]);
        }
        scatter.add(std::move(rest));
        scatter.add(std::move(sub));
    }
    scatter.write((dirs.plots / "case_scatter.svg").string());

    const auto bar_plot = [&](const std::string& title, const std::string& ylabel) {
        return SvgPlot(title, config.predicate_column, ylabel);
    };
    {
        SvgPlot plot = bar_plot("label counts by " + config.predicate_column, "count");
        SvgSeries neg;
        neg.name = "label -1";
        neg.style = SvgSeries::Style::Bars;
        neg.color = svg_color(0);
        neg.bar_width = width * 0.42;
        SvgSeries pos = neg;
        pos.name = "label +1";
        pos.color = svg_color(1);
        for (int b = 0; b < kBins; ++b) {
            const double center = lo + (b + 0.5) * width;
            neg.xs.push_back(center - width * 0.22);
            neg.ys.push_back(count_neg[b]);
            pos.xs.push_back(center + width * 0.22);
            pos.ys.push_back(count_pos[b]);
        }
        plot.add(std::move(neg));
        plot.add(std::move(pos));
        plot.write((dirs.plots / "case_hist_counts.svg").string());
    }
    {
        SvgPlot plot = bar_plot("weight mass by " + config.predicate_column, "sum alpha * yhat");
        SvgSeries s;
        s.name = "alpha * yhat";
        s.style = SvgSeries::Style::Bars;
        s.color = svg_color(2);
        s.bar_width = width * 0.8;
        for (int b = 0; b < kBins; ++b) {
            s.xs.push_back(lo + (b + 0.5) * width);
            s.ys.push_back(sum_weight[b]);
        }
        plot.add(std::move(s));
        plot.write((dirs.plots / "case_hist_weights.svg").string());
    }
    {
        SvgPlot plot =
            bar_plot("contribution mass by " + config.predicate_column, "sum contribution");
        SvgSeries s;
        s.name = "alpha * yhat * gamma";
        s.style = SvgSeries::Style::Bars;
        s.color = svg_color(3);
        s.bar_width = width * 0.8;
        for (int b = 0; b < kBins; ++b) {
            s.xs.push_back(lo + (b + 0.5) * width);
            s.ys.push_back(sum_contrib[b]);
        }
        plot.add(std::move(s));
        plot.write((dirs.plots / "case_hist_contributions.svg").string());
    }

    nlohmann::json meta = make_meta(config, {}, {});
    nlohmann::json mseed;
    mseed["seed"] = seed;
    mseed["gbdt"] = gbdt_to_json(cfg);
    mseed["ensemble_fingerprint"] = ensemble_fingerprint(ens);
    mseed["injection"] = {{"seed", record.seed},
                          {"fraction", record.fraction},
                          {"n_flipped", n_flipped},
                          {"n_subgroup", n_subgroup}};
    mseed["query_row_id"] = test.row_ids[best];
    mseed["klr_C"] = ts.C;
    meta["seeds"].push_back(std::move(mseed));
    write_file(dirs.root / "meta.json", meta.dump(2) + "\n");
}

void run_experiment(const ExperimentConfig& config) {
    std::string name = lower(config.experiment);
    std::replace(name.begin(), name.end(), '-', '_');
    if (name == "fidelity") return run_fidelity(config);
    if (name == "cleaning") return run_cleaning(config);
    if (name == "roar") return run_roar(config);
    if (name == "runtime") return run_runtime(config);
    if (name == "case_study") return run_case_study(config);
    throw std::invalid_argument("unknown experiment: " + config.experiment);
}

}  // namespace tea
