#pragma once
// Command-line front end: configuration and dispatch.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace couette::cli {

struct RunConfig {
    std::string command;
    double epsilon = 1e-2;
    double kappa = 0.0;
    int m = 1;
    double sigma = 1e-3;
    double gamma = 0.5;
    int grid = 16;     // Gauss-Legendre order per panel
    int modes = 16;    // Fourier blocks checked / applied
    int nx = 32;       // x points of band fields
    std::map<std::string, double> tolerances{{"fixedpoint", 1e-12}, {"quad", 1e-12}};
    std::uint64_t seed = 1;
    std::string out;   // empty: stdout
    std::string format;   // empty: per-command default
    int points = 0;      // 0: per-command default
    int samples = 100;
    std::vector<double> sigmas{1e-2, 3e-3, 1e-3, 3e-4};
    std::vector<double> epsilons;
    std::vector<double> kappas;

    void validate() const;
};

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"profile-table", "lambda1",     "bifurcate", "range-check",
                                                "svd-spectrum",  "wave-export", "residual",  "norms",
                                                "sweep",         "validate-identities"};
    return names;
}

// Runs one command. Output goes to cfg.out (or `out` when empty); on any
// failure an error JSON is written to `out` and a nonzero status returned.
int run(const RunConfig& cfg, std::ostream& out);

// Parses argv (CLI11, optional TOML config via --config) and runs.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace couette::cli
