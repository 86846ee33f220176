#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vanishcost/analysis.hpp"
#include "vanishcost/costlab.hpp"
#include "vanishcost/flow.hpp"

namespace vanishcost::cli {

// Parsed and validated experiment description. The numeric and text
// parameter maps only contain keys documented for the experiment kind;
// parse_config rejects everything else with line numbers.
struct ExperimentConfig {
    std::string kind;
    geometry::Domain domain;
    std::optional<geometry::Region> omega;        // control / observation region
    std::optional<geometry::Region> omega0;       // inner region (dissipation)
    std::optional<geometry::Region> omega_prime;  // eta plateau region (carleman)
    velocity::VelocityField field;
    std::map<std::string, double> num;
    std::map<std::string, std::string> text;
    std::vector<double> epsilon_list;
    std::string out_dir = "out";
    unsigned long long seed = 0;

    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    int integer(const std::string& key) const;
    int integer_or(const std::string& key, int fallback) const;
};

// Parses the documented [section] / key = value grammar. All located
// errors (unknown key, type mismatch, missing section, out-of-range value)
// are collected and reported together in one config_error.
ExperimentConfig parse_config(const std::string& content);

struct RunManifest {
    std::string config_hash;
    std::vector<std::string> artifacts;
    double wall_seconds = 0;
    std::string version;
    std::vector<std::string> flags;  // per-row / per-step notes

    void write(const std::string& path) const;
};

struct TrendArtifacts {
    std::vector<costlab::SweepRow> rows;
    costlab::FitResult fit;
    std::vector<costlab::MeanLowerBound> mean_bounds;  // theorem2: one per row
    double measured_C0 = 0;                            // theorem1 diagnostics
    int chain_m = 0;
    bool chain_inequality_holds = false;
    std::vector<std::string> files;
};

// Bounded-cost experiment: verifies the boundary-sign and flushing
// certificates, sweeps the cost over the epsilon list at fixed T, fits the
// trend and reports the dissipation-chain diagnostics.
TrendArtifacts run_theorem1_trend(const ExperimentConfig& cfg);

// Blow-up experiment: verifies the witness-trajectory certificate, builds
// the bump terminal datum, and sweeps the certified lower-bound ratio
// ||phi(0)|| / ||phi||_{L2(omega_T)} over the epsilon list.
TrendArtifacts run_theorem2_trend(const ExperimentConfig& cfg, int workers = 1);

enum class PlotKind { K_vs_eps, logK_vs_inv_eps };

// Two-column TSV with fixed 17-significant-digit formatting; returns the
// number of rows dropped (flagged rows, and nonpositive K on log plots).
int emit_plotdata(const std::vector<costlab::SweepRow>& rows, PlotKind kind,
                  const std::string& path);
void emit_pairs(const std::vector<std::pair<double, double>>& points, const std::string& path);

// Full command-line entry point; returns the process exit code
// (0 ok, 2 config error, 3 certificate refusal, 4 numerical failure).
int run_command(int argc, char** argv);

}  // namespace vanishcost::cli
