#pragma once

#include <iosfwd>
#include <limits>

#include "overlay/problem_builder.hpp"
#include "overlay/qp_solver.hpp"

namespace overlay {

/// Portfolio-level view of a solved lifted vector.
struct DecodedSolution {
    Eigen::MatrixXd asset_weights;  // A x C
    double cash = 0.0;
    Eigen::VectorXd q;              // signed contract sizes
    std::vector<int> active;        // rounded activation binaries
    Eigen::VectorXd asset_exposure, overlay, currency_exposure;
    double total_overlay = 0.0;     // recomputed from q, not from the t auxiliaries
    double fixed_cost = 0.0, spread_cost = 0.0, total_cost = 0.0;
    double margin_required = 0.0;
    double achieved_return = 0.0;   // x'r - total_cost
    double variance = 0.0;
    double volatility = 0.0;
};

struct MIQPOptions {
    SolverConfig qp;
    long node_budget = 1000000;
    double prune_tol = 1e-12;       // prune when bound >= incumbent - prune_tol
    std::ostream* trace = nullptr;  // line-delimited node log when set
};

struct MIQPSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Eigen::VectorXd x;
    std::vector<int> binaries;
    double objective = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    double root_bound = -std::numeric_limits<double>::infinity();
    long nodes_explored = 0;
    double wall_time = 0.0;
    DecodedSolution decoded;
    std::string detail;
};

/// Global optimum of the linearized problem by best-first branch and
/// bound over the activation and sign binaries. Relaxations solve the
/// QP with binaries in [0,1]; branching picks the most fractional
/// binary, ties and node order resolved by lowest index for
/// deterministic output. Requires n_bin <= 24.
MIQPSolution solve_miqp(const MixedBinaryQP& qp, const MIQPOptions& options = {});

/// Enumerate all 2^n_bin binary assignments and solve each leaf QP.
/// Ground truth for tests; requires n_bin <= 16.
MIQPSolution brute_force(const MixedBinaryQP& qp, const MIQPOptions& options = {});

DecodedSolution decode_solution(const MixedBinaryQP& qp, const Eigen::VectorXd& y);

/// Re-derive every decoded quantity from the raw vector and check the
/// problem identities (budgets, margin coupling, achieved return, sign
/// exclusivity) at the given tolerance. Throws ContractViolation.
void verify_decoded(const MixedBinaryQP& qp, const MIQPSolution& sol, double tol = 1e-9);

}  // namespace overlay
