// CLI for the experiment harness. Each subcommand reads an optional JSON
// config file, overlays any flags given on the command line, and runs one
// experiment into the output directory.

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "tea/experiments.hpp"

namespace {

struct CliValues {
    std::string config_path;
    std::string data;
    std::string label_col;
    std::string positive;
    std::string kernel;
    std::vector<std::string> methods;
    std::vector<unsigned long long> seeds;
    std::vector<double> fractions;
    std::string out;
    double test_fraction = 0.0;
    double flip_fraction = 0.0;
    int queries = 0;
    int reps = 0;
    std::string predicate_col;
    double threshold = 0.0;
    int keep = 0;
    int flip = 0;
};

void add_shared_options(CLI::App* sub, CliValues& v) {
    sub->add_option("--config", v.config_path, "JSON config file; flags override its keys");
    sub->add_option("--data", v.data, "dataset CSV path");
    sub->add_option("--label-col", v.label_col, "label column name");
    sub->add_option("--positive", v.positive, "label value mapped to +1");
    sub->add_option("--kernel", v.kernel, "leafpath | treeoutput | leafoutput");
    sub->add_option("--methods", v.methods, "comma-separated method list")->delimiter(',');
    sub->add_option("--seeds", v.seeds, "comma-separated seed list")->delimiter(',');
    sub->add_option("--fractions", v.fractions, "comma-separated fraction grid")->delimiter(',');
    sub->add_option("--out", v.out, "output directory");
    sub->add_option("--test-fraction", v.test_fraction, "held-out fraction of the dataset");
}

nlohmann::json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (!j.is_object()) throw std::runtime_error("config file must hold a JSON object");
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"explains tree-ensemble predictions via the training data"};
    app.require_subcommand(1);
    CliValues v;

    CLI::App* fidelity = app.add_subcommand("fidelity", "surrogate fidelity on held-out rows");
    add_shared_options(fidelity, v);

    CLI::App* cleaning = app.add_subcommand("cleaning", "flip labels, rank, fix, retrain");
    add_shared_options(cleaning, v);
    cleaning->add_option("--flip-fraction", v.flip_fraction,
                         "fraction of training labels corrupted");

    CLI::App* roar = app.add_subcommand("roar", "remove top-ranked rows and retrain");
    add_shared_options(roar, v);
    roar->add_option("--queries", v.queries, "number of test queries to aggregate");

    CLI::App* runtime = app.add_subcommand("runtime", "train and per-query timing table");
    add_shared_options(runtime, v);
    runtime->add_option("--reps", v.reps, "timing repetitions");

    CLI::App* case_study = app.add_subcommand("case-study", "domain-mismatch misclassification study");
    add_shared_options(case_study, v);
    case_study->add_option("--predicate-col", v.predicate_col, "numeric subgroup column");
    case_study->add_option("--threshold", v.threshold, "subgroup is column < threshold");
    case_study->add_option("--keep", v.keep, "subgroup rows kept in train");
    case_study->add_option("--flip", v.flip, "kept subgroup rows forced to +1");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        nlohmann::json j = nlohmann::json::object();
        if (sub->count("--config") > 0) j = load_config_file(v.config_path);
        if (sub->count("--data") > 0) j["dataset_path"] = v.data;
        if (sub->count("--label-col") > 0) j["label_column"] = v.label_col;
        if (sub->count("--positive") > 0) j["positive_value"] = v.positive;
        if (sub->count("--kernel") > 0) j["kernel"] = v.kernel;
        if (sub->count("--methods") > 0) j["methods"] = v.methods;
        if (sub->count("--seeds") > 0) j["seeds"] = v.seeds;
        if (sub->count("--fractions") > 0) j["fractions"] = v.fractions;
        if (sub->count("--out") > 0) j["output_dir"] = v.out;
        if (sub->count("--test-fraction") > 0) j["test_fraction"] = v.test_fraction;
        if (sub == cleaning && sub->count("--flip-fraction") > 0)
            j["flip_fraction"] = v.flip_fraction;
        if (sub == roar && sub->count("--queries") > 0) j["roar_queries"] = v.queries;
        if (sub == runtime && sub->count("--reps") > 0) j["runtime_reps"] = v.reps;
        if (sub == case_study) {
            if (sub->count("--predicate-col") > 0) j["predicate_column"] = v.predicate_col;
            if (sub->count("--threshold") > 0) j["predicate_threshold"] = v.threshold;
            if (sub->count("--keep") > 0) j["keep_count"] = v.keep;
            if (sub->count("--flip") > 0) j["flip_count"] = v.flip;
        }
        j["experiment"] = sub->get_name();

        tea::run_experiment(tea::config_from_json(j));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
