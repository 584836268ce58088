#pragma once

// Experiment harness: fidelity, cleaning, roar, runtime, case-study.
// Each run_* writes results.csv, raw/seed_<k>.csv, plots/*.svg and meta.json
// under config.output_dir.  results.csv content depends only on the config,
// so repeated runs produce byte-identical files.

#include <string>
#include <vector>

#include "json.hpp"

#include "tea/gbdt.hpp"
#include "tea/tree_kernel.hpp"

namespace tea {

struct ExperimentConfig {
    std::string experiment;                // fidelity | cleaning | roar | runtime | case-study
    std::string dataset_path;
    std::string label_column = "label";
    std::string positive_value = "yes";
    KernelKind kind = KernelKind::LeafOutput;
    std::vector<std::string> methods;      // empty: per-experiment default
    std::vector<unsigned long long> seeds = {1};
    std::vector<double> fractions;         // empty: per-experiment default
    std::string output_dir = "out";
    double test_fraction = 0.2;
    int cv_folds = 5;
    std::vector<double> c_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<int> k_grid = {3, 7, 15, 31, 61};
    std::vector<GBDTConfig> gbdt_grid;     // empty: default grid
    double flip_fraction = 0.4;            // cleaning: fraction of train labels corrupted
    int roar_queries = 50;
    std::string predicate_column = "age";  // case-study subgroup predicate
    double predicate_threshold = 18.0;
    int keep_count = 98;
    int flip_count = 83;
    int runtime_reps = 5;
};

// Partial override: only keys present in j are applied on top of defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
// Full resolved config, including defaults filled in.
nlohmann::json config_to_json(const ExperimentConfig& config);

std::vector<GBDTConfig> default_gbdt_grid();

void run_fidelity(const ExperimentConfig& config);
void run_cleaning(const ExperimentConfig& config);
void run_roar(const ExperimentConfig& config);
void run_runtime(const ExperimentConfig& config);
void run_case_study(const ExperimentConfig& config);

// Dispatches on config.experiment.
void run_experiment(const ExperimentConfig& config);

}  // namespace tea
