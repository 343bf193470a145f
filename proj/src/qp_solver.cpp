#include "overlay/qp_solver.hpp"

#include <algorithm>
#include <optional>
#include <cmath>

namespace overlay {

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::NumericalFailure: return "failure";
    }
    return "unknown";
}

namespace detail {

Eigen::MatrixXd factor_objective(const Eigen::MatrixXd& Q, double rank_tol) {
    if (Q.rows() != Q.cols()) throw ContractViolation("factor_objective: Q not square");
    const double asym = (Q - Q.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) throw ContractViolation("factor_objective: Q not symmetric");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((Q + Q.transpose()) / 2.0);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double lam_max = std::max(0.0, lam.maxCoeff());
    if (lam.minCoeff() < -1e-10 * std::max(1.0, lam_max))
        throw DomainError("factor_objective: Q is not positive semidefinite");

    const double cut = rank_tol * std::max(1.0, lam_max);
    std::vector<int> keep;
    for (int i = 0; i < lam.size(); ++i)
        if (lam[i] > cut) keep.push_back(i);

    Eigen::MatrixXd S(static_cast<Eigen::Index>(keep.size()), Q.rows());
    for (std::size_t r = 0; r < keep.size(); ++r)
        S.row(static_cast<Eigen::Index>(r)) =
            std::sqrt(2.0 * lam[keep[r]]) * eig.eigenvectors().col(keep[r]).transpose();
    return S;
}

namespace {

enum class RowKind { Equality, Inequality, UpperBound, LowerBound };

struct RowSet {
    Eigen::MatrixXd A;  // normalized rows
    Eigen::VectorXd b;
    std::vector<RowKind> kind;
    std::vector<int> origin;      // inequality row / variable index; -1 for equalities
    std::vector<double> scale;    // original row inf-norm

    int rows() const { return static_cast<int>(kind.size()); }
    bool is_eq(int i) const { return kind[i] == RowKind::Equality; }
};

struct EngineResult {
    bool ok = false;
    std::string reason;
    Eigen::VectorXd y;
    Eigen::VectorXd lambda;  // per row, normalized scale; 0 when inactive
    double kkt_residual = 0.0;
    int iterations = 0;
};

// Active-set loop for min 0.5 |S y + offset|^2 + c'y over the row set.
// Requires a feasible y0 (up to round-off). The working set always
// contains every equality row; bound rows tight at the start are seeded
// in as well, which saves most of the build-up pivots on vertex-like
// starting points.
EngineResult run_active_set(const Eigen::MatrixXd& S, const Eigen::VectorXd& offset,
                            const Eigen::VectorXd& c, const RowSet& rows, Eigen::VectorXd y,
                            const SolverConfig& cfg) {
    const int n = static_cast<int>(y.size());
    const int m = rows.rows();
    const int max_iter = cfg.max_iter_factor * std::max(n, 1) + 20;
    const double flat_tol = 1e-10 * std::max(1.0, c.size() ? c.cwiseAbs().maxCoeff() : 0.0);

    EngineResult out;
    out.lambda = Eigen::VectorXd::Zero(m);

    std::vector<int> working;
    {
        std::vector<bool> var_seeded(n, false);
        const Eigen::VectorXd res = rows.A * y - rows.b;
        for (int i = 0; i < m; ++i) {
            if (rows.is_eq(i)) {
                working.push_back(i);
                continue;
            }
            const bool is_bound =
                rows.kind[i] == RowKind::UpperBound || rows.kind[i] == RowKind::LowerBound;
            if (!is_bound || std::abs(res[i]) > 1e-11) continue;
            // One bound per variable keeps the seed linearly clean.
            int var = -1;
            for (int j = 0; j < n; ++j)
                if (rows.A(i, j) != 0.0) { var = j; break; }
            if (var >= 0 && !var_seeded[var]) {
                var_seeded[var] = true;
                working.push_back(i);
            }
        }
        std::sort(working.begin(), working.end());
    }

    Eigen::MatrixXd AW;   // |W| x n
    for (int iter = 0; iter < max_iter; ++iter) {
        out.iterations = iter + 1;

        const int nw = static_cast<int>(working.size());
        AW.resize(nw, n);
        for (int i = 0; i < nw; ++i) AW.row(i) = rows.A.row(working[i]);

        std::optional<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> qr;
        int rank = 0;
        if (nw > 0) {
            qr.emplace(AW.transpose());
            qr->setThreshold(1e-10);
            rank = static_cast<int>(qr->rank());
        }
        const int nf = n - rank;

        Eigen::MatrixXd Z;
        if (nw == 0) {
            Z = Eigen::MatrixXd::Identity(n, n);
        } else if (nf > 0) {
            Z = Eigen::MatrixXd::Zero(n, nf);
            Z.bottomRows(nf).setIdentity();
            Z = qr->householderQ() * Z;
        } else {
            Z.resize(n, 0);
        }

        const Eigen::VectorXd s_vec = S.rows() ? (S * y + offset).eval() : offset;
        const bool pure_quadratic = c.size() == 0 || c.cwiseAbs().maxCoeff() == 0.0;

        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        bool ray = false;
        if (nf > 0) {
            const Eigen::MatrixXd u = S.rows() ? (S * Z).eval() : Eigen::MatrixXd(0, nf);
            Eigen::VectorXd rg = Z.transpose() * c;
            if (u.rows() > 0) rg += u.transpose() * s_vec;

            Eigen::VectorXd w = Eigen::VectorXd::Zero(nf);
            Eigen::VectorXd r_flat = rg;
            if (u.rows() > 0 && pure_quadratic) {
                // Subproblem minimizer is the least-squares solution of
                // u w = -s; the residual normal component is the flat
                // part of the reduced gradient (zero for PSD objectives).
                Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(u);
                cod.setThreshold(cfg.pivot_tol);
                w = cod.solve(-s_vec);
                r_flat = rg + u.transpose() * (u * w);
            } else if (u.rows() > 0) {
                // Mixed linear + quadratic objective: split the reduced
                // gradient across the curved and flat eigenspaces.
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(u.transpose() * u);
                const double cut = cfg.pivot_tol * std::max(1.0, eig.eigenvalues().maxCoeff());
                const Eigen::VectorXd mg = eig.eigenvectors().transpose() * rg;
                Eigen::VectorXd w_eig = Eigen::VectorXd::Zero(nf);
                Eigen::VectorXd flat_eig = Eigen::VectorXd::Zero(nf);
                for (int i = 0; i < nf; ++i) {
                    if (eig.eigenvalues()[i] > cut) w_eig[i] = -mg[i] / eig.eigenvalues()[i];
                    else flat_eig[i] = mg[i];
                }
                w = eig.eigenvectors() * w_eig;
                r_flat = eig.eigenvectors() * flat_eig;
            }

            if (r_flat.size() && r_flat.cwiseAbs().maxCoeff() > flat_tol) {
                p = -(Z * r_flat);
                ray = true;
            } else {
                p = Z * w;
            }
        }

        const double step_tol = 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff());
        if (!ray && (p.size() == 0 || p.cwiseAbs().maxCoeff() <= step_tol)) {
            // Stationary on the working set: check multipliers.
            Eigen::VectorXd g = c;
            if (S.rows()) g += S.transpose() * s_vec;
            Eigen::VectorXd lam;
            double kkt = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
            if (nw > 0) {
                lam = qr->solve(-g);
                kkt = (AW.transpose() * lam + g).cwiseAbs().maxCoeff();
            }
            int drop = -1;
            for (int i = 0; i < nw; ++i) {
                if (rows.is_eq(working[i])) continue;
                if (lam[i] < -1e-9) {  // Bland: lowest row index wins
                    if (drop < 0 || working[i] < working[drop]) drop = i;
                }
            }
            if (drop < 0) {
                out.ok = true;
                out.y = std::move(y);
                out.kkt_residual = kkt;
                for (int i = 0; i < nw; ++i) out.lambda[working[i]] = lam.size() ? lam[i] : 0.0;
                return out;
            }
            working.erase(working.begin() + drop);
            continue;
        }

        // Work with a unit-size direction so the ratio-test tolerance is
        // absolute; the subproblem minimizer then sits at alpha = step
        // length instead of 1. Ill-conditioned reduced systems can emit
        // enormous directions, and scaling the tolerance with them would
        // hide genuine blocking rows.
        const double p_norm = p.cwiseAbs().maxCoeff();
        p /= p_norm;
        const double alpha_natural = ray ? std::numeric_limits<double>::infinity() : p_norm;

        const double d_tol = 1e-12;
        double alpha_block = std::numeric_limits<double>::infinity();
        int blocker = -1;
        {
            std::vector<bool> in_w(m, false);
            for (int i : working) in_w[i] = true;
            const Eigen::VectorXd Ap = rows.A * p;
            const Eigen::VectorXd res = rows.b - rows.A * y;
            for (int i = 0; i < m; ++i) {
                if (in_w[i] || rows.is_eq(i)) continue;
                const double d = Ap[i];
                if (d <= d_tol) continue;
                const double a = std::max(0.0, res[i] / d);
                if (blocker < 0) {
                    alpha_block = a;
                    blocker = i;
                    continue;
                }
                // Ascending scan keeps the lowest row index among ties
                // (Bland-style guard against cycling on degenerate steps).
                const double tie = 1e-12 * std::max(1.0, alpha_block);
                if (a < alpha_block - tie) {
                    alpha_block = a;
                    blocker = i;
                }
            }
        }

        if (ray && blocker < 0) {
            out.reason = "unbounded descent ray (missing variable bounds?)";
            out.y = std::move(y);
            return out;
        }
        const double alpha = std::min(alpha_natural, alpha_block);
        y += alpha * p;
        if (blocker >= 0 && alpha_block <= alpha_natural) {
            auto pos = std::lower_bound(working.begin(), working.end(), blocker);
            working.insert(pos, blocker);
        }
    }

    out.reason = "iteration cap exceeded (" + std::to_string(max_iter) + ")";
    out.y = std::move(y);
    return out;
}

double row_violation(const RowSet& rows, const Eigen::VectorXd& y) {
    double worst = 0.0;
    const Eigen::VectorXd res = rows.A * y - rows.b;
    for (int i = 0; i < rows.rows(); ++i)
        worst = std::max(worst, rows.is_eq(i) ? std::abs(res[i]) : res[i]);
    return worst;
}

}  // namespace

QPSolution solve_factored(const FactoredQP& qp, const SolverConfig& cfg) {
    const int n = static_cast<int>(qp.lb.size());
    const int m_eq = static_cast<int>(qp.b_eq.size());
    const int m_in = static_cast<int>(qp.b_in.size());
    if (qp.ub.size() != n || qp.c.size() != n || qp.S.cols() != n ||
        (m_eq && qp.A_eq.cols() != n) || (m_in && qp.A_in.cols() != n))
        throw ContractViolation("solve_qp: dimension mismatch");
    for (int i = 0; i < m_eq; ++i)
        if (!qp.b_eq.segment(i, 1).allFinite() || !qp.A_eq.row(i).allFinite())
            throw ContractViolation("solve_qp: non-finite equality row");
    for (int i = 0; i < m_in; ++i)
        if (!qp.b_in.segment(i, 1).allFinite() || !qp.A_in.row(i).allFinite())
            throw ContractViolation("solve_qp: non-finite inequality row");

    QPSolution sol;
    sol.ineq_multipliers = Eigen::VectorXd::Zero(m_in);

    // Presolve: substitute variables pinned by their bounds.
    std::vector<int> free_idx;
    Eigen::VectorXd fixed_val = Eigen::VectorXd::Zero(n);
    std::vector<bool> fixed(n, false);
    for (int i = 0; i < n; ++i) {
        if (qp.lb[i] > qp.ub[i] + 1e-14) {
            sol.status = SolveStatus::Infeasible;
            sol.max_violation = qp.lb[i] - qp.ub[i];
            sol.failure_reason = "crossed bounds on variable " + std::to_string(i);
            sol.x = Eigen::VectorXd::Zero(n);
            return sol;
        }
        if (std::isfinite(qp.lb[i]) && qp.ub[i] - qp.lb[i] <= 1e-14) {
            fixed[i] = true;
            fixed_val[i] = 0.5 * (qp.lb[i] + qp.ub[i]);
        } else {
            free_idx.push_back(i);
        }
    }
    const int nf = static_cast<int>(free_idx.size());

    auto expand = [&](const Eigen::VectorXd& yf) {
        Eigen::VectorXd full = fixed_val;
        for (int i = 0; i < nf; ++i) full[free_idx[i]] = yf[i];
        return full;
    };
    auto finish = [&](const Eigen::VectorXd& x) {
        sol.x = x;
        sol.objective = 0.5 * (qp.S * x).squaredNorm() + qp.c.dot(x);
        double worst = 0.0;
        for (int i = 0; i < m_eq; ++i) worst = std::max(worst, std::abs(qp.A_eq.row(i).dot(x) - qp.b_eq[i]));
        for (int i = 0; i < m_in; ++i) worst = std::max(worst, qp.A_in.row(i).dot(x) - qp.b_in[i]);
        for (int i = 0; i < n; ++i) {
            if (std::isfinite(qp.lb[i])) worst = std::max(worst, qp.lb[i] - x[i]);
            if (std::isfinite(qp.ub[i])) worst = std::max(worst, x[i] - qp.ub[i]);
        }
        sol.max_violation = worst;
    };

    Eigen::MatrixXd S_f(qp.S.rows(), nf);
    for (int i = 0; i < nf; ++i) S_f.col(i) = qp.S.col(free_idx[i]);
    // fixed_val is zero on free positions, so this is the fixed-part offset.
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(qp.S.rows());
    if (qp.S.rows()) offset = qp.S * fixed_val;
    Eigen::VectorXd c_f(nf);
    for (int i = 0; i < nf; ++i) c_f[i] = qp.c[free_idx[i]];

    // Rows in reduced space, normalized by their inf-norm.
    RowSet rows;
    std::vector<Eigen::VectorXd> row_vecs;
    std::vector<double> row_rhs;
    auto push_row = [&](const Eigen::VectorXd& full_row, double rhs, RowKind kind, int origin) -> bool {
        Eigen::VectorXd r(nf);
        double shift = 0.0;
        for (int i = 0; i < nf; ++i) r[i] = full_row[free_idx[i]];
        for (int i = 0; i < n; ++i)
            if (fixed[i]) shift += full_row[i] * fixed_val[i];
        const double rhs_red = rhs - shift;
        const double scale = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
        if (scale <= 1e-14) {
            // Row has no free variables: it is a pure feasibility fact.
            const bool bad = kind == RowKind::Equality ? std::abs(rhs_red) > cfg.feasibility_tol
                                                       : rhs_red < -cfg.feasibility_tol;
            return !bad;
        }
        row_vecs.push_back(r / scale);
        row_rhs.push_back(rhs_red / scale);
        rows.kind.push_back(kind);
        rows.origin.push_back(origin);
        rows.scale.push_back(scale);
        return true;
    };

    bool consistent = true;
    for (int i = 0; i < m_eq && consistent; ++i)
        consistent = push_row(qp.A_eq.row(i), qp.b_eq[i], RowKind::Equality, i);
    for (int i = 0; i < m_in && consistent; ++i)
        consistent = push_row(qp.A_in.row(i), qp.b_in[i], RowKind::Inequality, i);
    if (!consistent) {
        finish(expand(Eigen::VectorXd::Zero(nf)));
        sol.status = SolveStatus::Infeasible;
        sol.failure_reason = "constraint with all variables fixed is violated";
        return sol;
    }
    for (int i = 0; i < nf; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[free_idx[i]] = 1.0;
        if (std::isfinite(qp.ub[free_idx[i]]))
            push_row(e, qp.ub[free_idx[i]], RowKind::UpperBound, free_idx[i]);
        if (std::isfinite(qp.lb[free_idx[i]]))
            push_row(-e, -qp.lb[free_idx[i]], RowKind::LowerBound, free_idx[i]);
    }
    rows.A.resize(static_cast<int>(row_vecs.size()), nf);
    rows.b.resize(static_cast<int>(row_vecs.size()));
    for (std::size_t i = 0; i < row_vecs.size(); ++i) {
        rows.A.row(static_cast<Eigen::Index>(i)) = row_vecs[i];
        rows.b[static_cast<Eigen::Index>(i)] = row_rhs[i];
    }

    if (nf == 0) {
        finish(fixed_val);
        sol.status = sol.max_violation <= cfg.feasibility_tol ? SolveStatus::Optimal
                                                              : SolveStatus::Infeasible;
        sol.kkt_residual = 0.0;
        return sol;
    }

    // Starting point: zero clamped into the box. Most rows of a typical
    // portfolio problem are tight there, which keeps phase 1 short.
    Eigen::VectorXd y0(nf);
    for (int i = 0; i < nf; ++i) {
        const double lo = qp.lb[free_idx[i]], hi = qp.ub[free_idx[i]];
        y0[i] = std::min(std::max(0.0, lo), hi);
    }

    int iterations = 0;

    // Phase 1: minimize total constraint violation via elastic variables.
    if (row_violation(rows, y0) > cfg.feasibility_tol) {
        const int m = rows.rows();
        std::vector<int> elastic_of(m, -1);
        int n_z = 0;
        const Eigen::VectorXd res0 = rows.A * y0 - rows.b;
        for (int i = 0; i < m; ++i) {
            if (rows.is_eq(i) || res0[i] > 0) elastic_of[i] = n_z++;
        }

        const int na = nf + n_z;
        RowSet aug;
        aug.A = Eigen::MatrixXd::Zero(m + n_z, na);
        aug.b.resize(m + n_z);
        Eigen::VectorXd z0(n_z);
        for (int i = 0; i < m; ++i) {
            aug.A.row(i).head(nf) = rows.A.row(i);
            aug.b[i] = rows.b[i];
            aug.kind.push_back(rows.kind[i]);
            aug.origin.push_back(rows.origin[i]);
            aug.scale.push_back(1.0);
            const int z = elastic_of[i];
            if (z < 0) continue;
            if (rows.is_eq(i)) {
                const double gamma = res0[i] > 0 ? -1.0 : 1.0;  // a'y + gamma z = b
                aug.A(i, nf + z) = gamma;
                z0[z] = std::abs(res0[i]);
            } else {
                aug.A(i, nf + z) = -1.0;  // a'y - z <= b
                z0[z] = res0[i];
            }
        }
        for (int z = 0; z < n_z; ++z) {  // z >= 0
            aug.A(m + z, nf + z) = -1.0;
            aug.b[m + z] = 0.0;
            aug.kind.push_back(RowKind::LowerBound);
            aug.origin.push_back(-1);
            aug.scale.push_back(1.0);
        }

        Eigen::VectorXd c1 = Eigen::VectorXd::Zero(na);
        c1.tail(n_z).setOnes();
        Eigen::VectorXd start(na);
        start << y0, z0;

        EngineResult ph1 = run_active_set(Eigen::MatrixXd(0, na), Eigen::VectorXd(0), c1, aug,
                                          start, cfg);
        iterations += ph1.iterations;
        if (!ph1.ok) {
            finish(expand(ph1.y.head(nf)));
            sol.status = SolveStatus::NumericalFailure;
            sol.failure_reason = "phase 1: " + ph1.reason;
            sol.iterations = iterations;
            return sol;
        }
        if (ph1.y.tail(n_z).sum() > cfg.feasibility_tol) {
            finish(expand(ph1.y.head(nf)));
            sol.status = SolveStatus::Infeasible;
            sol.iterations = iterations;
            sol.failure_reason = "phase 1 residual " + std::to_string(ph1.y.tail(n_z).sum());
            return sol;
        }
        y0 = ph1.y.head(nf);
    }

    EngineResult ph2 = run_active_set(S_f, offset, c_f, rows, y0, cfg);
    iterations += ph2.iterations;
    sol.iterations = iterations;

    if (!ph2.ok) {
        finish(expand(ph2.y));
        sol.status = SolveStatus::NumericalFailure;
        sol.failure_reason = "phase 2: " + ph2.reason;
        return sol;
    }

    finish(expand(ph2.y));
    sol.kkt_residual = ph2.kkt_residual;
    for (int i = 0; i < rows.rows(); ++i)
        if (rows.kind[i] == RowKind::Inequality && ph2.lambda[i] != 0.0)
            sol.ineq_multipliers[rows.origin[i]] = ph2.lambda[i] / rows.scale[i];
    for (int i = 0; i < m_in; ++i)
        if (qp.A_in.row(i).dot(sol.x) - qp.b_in[i] >= -10 * cfg.feasibility_tol)
            sol.active_set.push_back(i);

    double min_dual = 0.0;
    if (sol.ineq_multipliers.size()) min_dual = sol.ineq_multipliers.minCoeff();
    const bool clean = sol.max_violation <= cfg.feasibility_tol &&
                       sol.kkt_residual <= cfg.optimality_tol && min_dual >= -1e-9;
    sol.status = clean ? SolveStatus::Optimal : SolveStatus::NumericalFailure;
    if (!clean)
        sol.failure_reason = "KKT check failed (viol " + std::to_string(sol.max_violation) +
                             ", kkt " + std::to_string(sol.kkt_residual) + ")";
    return sol;
}

}  // namespace detail

QPSolution solve_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                    const Eigen::MatrixXd& A_eq, const Eigen::VectorXd& b_eq,
                    const Eigen::MatrixXd& A_in, const Eigen::VectorXd& b_in,
                    const Eigen::VectorXd& lb, const Eigen::VectorXd& ub,
                    const SolverConfig& config) {
    detail::FactoredQP qp{detail::factor_objective(Q, config.pivot_tol), c, A_eq, b_eq,
                          A_in, b_in, lb, ub};
    return detail::solve_factored(qp, config);
}

QPSolution solve_qp(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& A_eq,
                    const Eigen::VectorXd& b_eq, const Eigen::MatrixXd& A_in,
                    const Eigen::VectorXd& b_in, const Eigen::VectorXd& lb,
                    const Eigen::VectorXd& ub, const SolverConfig& config) {
    return solve_qp(Q, Eigen::VectorXd::Zero(lb.size()), A_eq, b_eq, A_in, b_in, lb, ub, config);
}

}  // namespace overlay
