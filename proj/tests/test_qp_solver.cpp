#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "overlay/qp_solver.hpp"

using namespace overlay;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXd no_rows(int n) { return MatrixXd(0, n); }
VectorXd no_rhs() { return VectorXd(0); }

// Reference solver for box (+ optional sum equality) QPs: projected
// gradient with exact projection onto {lb <= x <= ub, sum x = s}.
// Deliberately independent of the active-set implementation.
struct ProjectedGradientOracle {
    MatrixXd Q;
    VectorXd c, lb, ub;
    bool has_sum = false;
    double sum_target = 0.0;

    VectorXd project(const VectorXd& y) const {
        if (!has_sum) return y.cwiseMax(lb).cwiseMin(ub);
        double lo = -1e6, hi = 1e6;
        for (int it = 0; it < 200; ++it) {
            const double theta = 0.5 * (lo + hi);
            const double s = (y.array() - theta).cwiseMax(lb.array()).cwiseMin(ub.array()).sum();
            if (s > sum_target) lo = theta;
            else hi = theta;
        }
        const double theta = 0.5 * (lo + hi);
        return (y.array() - theta).cwiseMax(lb.array()).cwiseMin(ub.array());
    }

    double objective(const VectorXd& x) const { return x.dot(Q * x) + c.dot(x); }

    VectorXd solve(int iterations = 200000) const {
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Q);
        const double L = 2.0 * std::max(eig.eigenvalues().maxCoeff(), 1e-12);
        VectorXd x = project(VectorXd::Zero(Q.rows()));
        for (int it = 0; it < iterations; ++it) {
            const VectorXd g = 2.0 * (Q * x) + c;
            x = project(x - g / L);
        }
        return x;
    }
};

MatrixXd random_psd(std::mt19937& rng, int n, int rank) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd R(rank, n);
    for (int i = 0; i < rank; ++i)
        for (int j = 0; j < n; ++j) R(i, j) = u(rng);
    return R.transpose() * R / n;
}

}  // namespace

TEST_CASE("scalar bound: min x^2 subject to x >= 1") {
    MatrixXd Q(1, 1);
    Q << 1.0;
    MatrixXd A_in(1, 1);
    A_in << -1.0;  // -x <= -1
    VectorXd b_in(1);
    b_in << -1.0;
    VectorXd lb(1), ub(1);
    lb << -kInf;
    ub << kInf;

    const QPSolution sol = solve_qp(Q, no_rows(1), no_rhs(), A_in, b_in, lb, ub);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(sol.ineq_multipliers[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(sol.active_set == std::vector<int>{0});
}

TEST_CASE("uniform simplex: min x'Ix subject to sum x = 1, x >= 0") {
    const int n = 3;
    MatrixXd Q = MatrixXd::Identity(n, n);
    MatrixXd A_eq = MatrixXd::Ones(1, n);
    VectorXd b_eq = VectorXd::Ones(1);
    VectorXd lb = VectorXd::Zero(n);
    VectorXd ub = VectorXd::Constant(n, kInf);

    const QPSolution sol = solve_qp(Q, A_eq, b_eq, no_rows(n), no_rhs(), lb, ub);
    REQUIRE(sol.status == SolveStatus::Optimal);
    for (int i = 0; i < n; ++i) CHECK(sol.x[i] == doctest::Approx(1.0 / 3).epsilon(1e-10));
    CHECK(sol.objective == doctest::Approx(1.0 / 3).epsilon(1e-10));
    CHECK(sol.kkt_residual <= 1e-7);
}

TEST_CASE("equality-constrained least squares has analytic solution") {
    // min (x1-1)^2 + (x2-2)^2 s.t. x1 + x2 = 0 -> x = (-0.5, 0.5)
    MatrixXd Q = MatrixXd::Identity(2, 2);
    VectorXd c(2);
    c << -2.0, -4.0;
    MatrixXd A_eq(1, 2);
    A_eq << 1.0, 1.0;
    VectorXd b_eq(1);
    b_eq << 0.0;
    VectorXd lb = VectorXd::Constant(2, -10.0), ub = VectorXd::Constant(2, 10.0);

    const QPSolution sol = solve_qp(Q, c, A_eq, b_eq, no_rows(2), no_rhs(), lb, ub);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(-0.5).epsilon(1e-10));
    CHECK(sol.x[1] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("crossed constraints are reported infeasible") {
    MatrixXd Q = MatrixXd::Identity(1, 1);
    MatrixXd A_in(2, 1);
    A_in << 1.0, -1.0;  // x <= 0 and x >= 1
    VectorXd b_in(2);
    b_in << 0.0, -1.0;
    VectorXd lb(1), ub(1);
    lb << -5.0;
    ub << 5.0;

    const QPSolution sol = solve_qp(Q, no_rows(1), no_rhs(), A_in, b_in, lb, ub);
    CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("singular objective blocks are handled without perturbation") {
    // Second variable has zero curvature (cash-like); objective ignores it.
    MatrixXd Q = MatrixXd::Zero(2, 2);
    Q(0, 0) = 1.0;
    MatrixXd A_eq(1, 2);
    A_eq << 1.0, 1.0;
    VectorXd b_eq(1);
    b_eq << 1.0;
    VectorXd lb = VectorXd::Zero(2), ub = VectorXd::Ones(2);

    const QPSolution sol = solve_qp(Q, A_eq, b_eq, no_rows(2), no_rhs(), lb, ub);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sol.x[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("variables pinned by equal bounds are substituted out") {
    MatrixXd Q = MatrixXd::Identity(3, 3);
    MatrixXd A_eq = MatrixXd::Ones(1, 3);
    VectorXd b_eq = VectorXd::Ones(1);
    VectorXd lb(3), ub(3);
    lb << 0.0, 0.25, 0.0;
    ub << 1.0, 0.25, 1.0;  // x2 fixed at 0.25

    const QPSolution sol = solve_qp(Q, A_eq, b_eq, no_rows(3), no_rhs(), lb, ub);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x[1] == doctest::Approx(0.25));
    CHECK(sol.x[0] == doctest::Approx(0.375).epsilon(1e-10));
    CHECK(sol.x[2] == doctest::Approx(0.375).epsilon(1e-10));
}

TEST_CASE("random boxed problems match a projected-gradient reference") {
    std::mt19937 rng(7101);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> dim(2, 10);

    for (int trial = 0; trial < 25; ++trial) {
        const int n = dim(rng);
        ProjectedGradientOracle oracle;
        oracle.Q = random_psd(rng, n, trial % 3 == 0 ? std::max(1, n - 2) : n);
        oracle.c = VectorXd::NullaryExpr(n, [&] { return u(rng); });
        oracle.lb = VectorXd::Constant(n, -1.0);
        oracle.ub = VectorXd::Constant(n, 1.0);
        oracle.has_sum = trial % 2 == 0;
        if (oracle.has_sum) {
            VectorXd inside = VectorXd::NullaryExpr(n, [&] { return 0.8 * u(rng); });
            oracle.sum_target = inside.sum();
        }

        MatrixXd A_eq = oracle.has_sum ? MatrixXd::Ones(1, n) : no_rows(n);
        VectorXd b_eq = oracle.has_sum ? VectorXd::Constant(1, oracle.sum_target) : no_rhs();

        const QPSolution sol =
            solve_qp(oracle.Q, oracle.c, A_eq, b_eq, no_rows(n), no_rhs(), oracle.lb, oracle.ub);
        REQUIRE(sol.status == SolveStatus::Optimal);

        const VectorXd xref = oracle.solve();
        const double ref_obj = oracle.objective(xref);
        CHECK(sol.objective <= ref_obj + 1e-6 * std::max(1.0, std::abs(ref_obj)));
        CHECK(std::abs(sol.objective - ref_obj) <= 1e-6 * std::max(1.0, std::abs(ref_obj)));

        // Declared-optimal contract.
        CHECK(sol.max_violation <= 1e-8);
        CHECK(sol.kkt_residual <= 1e-7);
        if (sol.ineq_multipliers.size()) CHECK(sol.ineq_multipliers.minCoeff() >= -1e-9);
    }
}

TEST_CASE("identical inputs solve to identical outputs") {
    std::mt19937 rng(99);
    const int n = 6;
    MatrixXd Q = random_psd(rng, n, n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorXd c = VectorXd::NullaryExpr(n, [&] { return u(rng); });
    MatrixXd A_eq = MatrixXd::Ones(1, n);
    VectorXd b_eq = VectorXd::Constant(1, 0.5);
    MatrixXd A_in(1, n);
    A_in.setZero();
    A_in(0, 0) = 1.0;
    A_in(0, 1) = -1.0;
    VectorXd b_in = VectorXd::Constant(1, 0.1);
    VectorXd lb = VectorXd::Constant(n, -1.0), ub = VectorXd::Constant(n, 1.0);

    const QPSolution a = solve_qp(Q, c, A_eq, b_eq, A_in, b_in, lb, ub);
    const QPSolution b = solve_qp(Q, c, A_eq, b_eq, A_in, b_in, lb, ub);
    REQUIRE(a.status == SolveStatus::Optimal);
    REQUIRE(b.status == SolveStatus::Optimal);
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.objective == b.objective);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("indefinite objective is rejected") {
    MatrixXd Q(2, 2);
    Q << 1.0, 0.0, 0.0, -1.0;
    VectorXd lb = VectorXd::Zero(2), ub = VectorXd::Ones(2);
    CHECK_THROWS_AS(solve_qp(Q, no_rows(2), no_rhs(), no_rows(2), no_rhs(), lb, ub), DomainError);
}
