#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "overlay/errors.hpp"

namespace overlay {

/// Numeric tolerances shared by the QP and MIQP layers. Tests reference
/// these exact defaults; keep them in one place.
struct SolverConfig {
    double feasibility_tol = 1e-8;
    double optimality_tol = 1e-7;   // KKT stationarity residual
    double integrality_tol = 1e-6;  // binary rounding threshold
    double pivot_tol = 1e-12;       // rank decisions in factorizations
    int max_iter_factor = 50;       // active-set iteration cap = factor * n
};

enum class SolveStatus { Optimal, Infeasible, NumericalFailure };
const char* to_string(SolveStatus status);

struct QPSolution {
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    SolveStatus status = SolveStatus::NumericalFailure;
    std::vector<int> active_set;       // tight inequality rows at the optimum
    Eigen::VectorXd ineq_multipliers;  // one per inequality row, >= 0 at optimum
    double kkt_residual = std::numeric_limits<double>::quiet_NaN();
    double max_violation = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    std::string failure_reason;
};

/// Minimise x'Qx + c'x subject to A_eq x = b_eq, A_in x <= b_in and
/// lb <= x <= ub (entries may be +-inf). Q must be symmetric PSD within
/// a -1e-10 eigenvalue tolerance.
///
/// Method: primal active set on the equality-reduced system. Each
/// iteration solves the subproblem restricted to the null space of the
/// working set; flat (zero-curvature) directions fall back to a ray step
/// with a Bland-style lowest-index tie rule as the cycling guard, which
/// also makes phase 1 (a feasibility LP over the same machinery) work
/// unchanged. Deterministic for identical inputs.
QPSolution solve_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                    const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                    const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                    const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                    const SolverConfig& config = {});

/// Pure-quadratic convenience overload (zero linear term).
QPSolution solve_qp(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& A_eq,
                    const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& A_in,
                    const Eigen::VectorXd& b_in, const Eigen::VectorXd& lb,
                    const Eigen::VectorXd& ub, const SolverConfig& config = {});

namespace detail {

/// Root factor of the objective: x'Qx = 0.5 |S x|^2 with S = sqrt(2 L+) V'
/// restricted to eigenvalues above the rank tolerance. Throws if Q has an
/// eigenvalue below -1e-10.
Eigen::MatrixXd factor_objective(const Eigen::MatrixXd& Q, double rank_tol = 1e-12);

/// Objective pre-factored form, reusable across many solves that share Q
/// (branch-and-bound nodes only move variable bounds).
struct FactoredQP {
    Eigen::MatrixXd S;  // r x n
    Eigen::VectorXd c;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd A_in;
    Eigen::VectorXd b_in;
    Eigen::VectorXd lb, ub;
};

QPSolution solve_factored(const FactoredQP& qp, const SolverConfig& config);

}  // namespace detail

}  // namespace overlay
