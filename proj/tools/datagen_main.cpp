// Writes the bundled synthetic tabular dataset. The label depends on a few
// axis-aligned feature rules plus noise, and every row with age < 18 is
// labeled no, giving the case-study protocol a clean subgroup to corrupt.
// Minors also share a narrow feature profile (mid-band f values, category A),
// so the subgroup forms a tight cluster under the tree-structure kernels.

#include <cstdio>
#include <fstream>
#include <string>

#include "CLI11.hpp"

#include "tea/rng.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic tabular dataset generator"};
    std::string out = "data/tabular_synth.csv";
    int n = 2000;
    unsigned long long seed = 7;
    app.add_option("--out", out, "output CSV path");
    app.add_option("--n", n, "row count")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "generator seed");
    CLI11_PARSE(app, argc, argv);

    std::ofstream file(out, std::ios::binary);
    if (!file) {
        std::fprintf(stderr, "error: cannot open %s for writing\n", out.c_str());
        return 1;
    }

    tea::Rng rng(seed);
    file << "age,f1,f2,f3,f4,cat,label\n";
    char buf[160];
    for (int i = 0; i < n; ++i) {
        const bool minor = rng.uniform_double() < 0.18;
        const double age =
            minor ? 16.0 + 2.0 * rng.uniform_double() : 18.0 + 52.0 * rng.uniform_double();
        const auto feat = [&] {
            return minor ? 0.475 + 0.05 * rng.uniform_double() : rng.uniform_double();
        };
        const double f1 = feat();
        const double f2 = feat();
        const double f3 = feat();
        const double f4 = feat();
        const double cu = rng.uniform_double();
        const char cat = minor ? 'A' : (cu < 0.5 ? 'A' : (cu < 0.8 ? 'B' : 'C'));

        bool positive = false;
        if (!minor) {
            double score = 1.2 * f4 - 0.6;
            if (f1 > 0.55) score += 2.0;
            if (f2 > 0.6 && f3 < 0.4) score += 1.4;
            if (cat == 'B') score += 0.8;
            if (cat == 'C') score -= 0.7;
            if (age > 40.0) score += 0.8;
            score += 0.35 * rng.normal();
            positive = score > 1.75;
        }
        std::snprintf(buf, sizeof(buf), "%.2f,%.6f,%.6f,%.6f,%.6f,%c,%s\n", age, f1, f2, f3, f4,
                      cat, positive ? "yes" : "no");
        file << buf;
    }
    file.flush();
    if (!file) {
        std::fprintf(stderr, "error: write failed for %s\n", out.c_str());
        return 1;
    }
    return 0;
}
