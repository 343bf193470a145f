#pragma once

#include <optional>
#include <string>
#include <vector>

#include "overlay/miqp_solver.hpp"

namespace overlay {

/// One solved target on an efficient frontier. Infeasible and failed
/// targets keep their slot (status tells them apart); numeric fields are
/// NaN for such rows.
struct FrontierPoint {
    double mu = 0.0;
    SolveStatus status = SolveStatus::NumericalFailure;
    std::string status_detail;  // "stage1" etc. for two-stage failures
    double volatility = std::numeric_limits<double>::quiet_NaN();
    double variance = std::numeric_limits<double>::quiet_NaN();
    double total_overlay = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd overlay_by_country;
    std::vector<double> class_totals;
    double cash = std::numeric_limits<double>::quiet_NaN();
    int active_forwards = 0;
    std::vector<std::string> active_list;
    double cost_paid = std::numeric_limits<double>::quiet_NaN();
    long nodes = 0;
    double solve_seconds = 0.0;
};

struct Frontier {
    ProblemSpec spec;  // mu field is per-point
    std::vector<double> grid;
    std::vector<FrontierPoint> points;
};

/// Inclusive grid lo, lo+step, ..., <= hi (with round-off slack).
std::vector<double> make_grid(double lo, double hi, double step);

/// Solve one return target under the spec's mode and policy. Static
/// parameter contradictions come back as an infeasible point, never an
/// exception.
FrontierPoint solve_target(const AdjustedMoments& moments, const ProblemSpec& spec, double mu,
                           const MIQPOptions& options = {});

/// Sweep the grid. jobs = 1 runs the plain serial reference loop;
/// jobs = 0 uses all hardware threads, any other value that many. The
/// result is identical for every jobs value; only wall time changes.
Frontier sweep(const AdjustedMoments& moments, const ProblemSpec& spec, double mu_lo,
               double mu_hi, double step, int jobs = 0, const MIQPOptions& options = {});

struct ExperimentCell {
    std::string name;
    ProblemSpec spec;
    Frontier frontier;
};

struct ExperimentResult {
    std::string name;
    std::vector<ExperimentCell> cells;
    int base_cell = -1;  // reference cell for relative series, -1 when none
};

const std::vector<std::string>& experiment_names();

/// Run one of the five preset studies: approach {unified, two_stage},
/// hedging {fully_hedged, foreign_only, unrestricted},
/// margin M in {0, 3, 5, 7, 10, 30, 50}%, overlay_limit V_u in
/// {0, 10, 30, 50, 100}%, cardinality G in {0..6}. Every other
/// parameter comes from base_spec.
ExperimentResult run_experiment(const std::string& name, const AdjustedMoments& moments,
                                const ProblemSpec& base_spec, double mu_lo, double mu_hi,
                                double step, int jobs = 0, const MIQPOptions& options = {});

/// 100 * (sigma_other / sigma_base - 1) per grid cell; empty where either
/// point is not optimal. Grids must match exactly.
std::vector<std::optional<double>> relative_volatility_increase(const Frontier& base,
                                                                const Frontier& other);

/// Stable CSV layout: mu,volatility,status,V,overlay_<CCY>...,
/// <class>_total...,cash,active_forwards,cost_paid. Deterministic bytes
/// for identical inputs.
void write_frontier_csv(const Frontier& frontier, const std::string& path);
std::string frontier_csv_text(const Frontier& frontier);

/// Run manifest: grid, effective spec, spec hash, solver tolerances and
/// runtime. generated_at is the only non-reproducible field.
void write_manifest(const Frontier& frontier, double runtime_seconds, const std::string& path);

/// FNV-1a hash of the serialized spec, hex-encoded.
std::string spec_hash(const ProblemSpec& spec);

}  // namespace overlay
