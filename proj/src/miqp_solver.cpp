#include "overlay/miqp_solver.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <queue>

namespace overlay {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Node {
    double bound;
    long id;
    std::vector<signed char> fixing;  // -1 free, 0/1 fixed
    int depth;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
        return a.id > b.id;
    }
};

void apply_fixing(const MixedBinaryQP& qp, const std::vector<signed char>& fixing,
                  Eigen::VectorXd& lb, Eigen::VectorXd& ub) {
    for (std::size_t i = 0; i < fixing.size(); ++i) {
        if (fixing[i] < 0) continue;
        lb[qp.binary_index[i]] = fixing[i];
        ub[qp.binary_index[i]] = fixing[i];
    }
}

}  // namespace

DecodedSolution decode_solution(const MixedBinaryQP& qp, const Eigen::VectorXd& y) {
    const DecodedVector parts = decode_vector(qp.map, y);

    DecodedSolution d;
    d.asset_weights = parts.asset_weights;
    d.cash = parts.cash;
    d.q = parts.q_pos - parts.q_neg;
    // Contracts switched off by their binary can carry solver dust up to
    // the feasibility tolerance; report them as exactly flat.
    for (int k = 0; k < qp.map.K; ++k)
        if (parts.b[k] < 0.5 && std::abs(d.q[k]) <= 1e-8) d.q[k] = 0.0;

    OverlayStructure s = qp.structure;
    s.q = d.q;
    const ExposureReport rep = exposure_report(parts.asset_weights, s);
    d.asset_exposure = rep.asset_exposure;
    d.overlay = rep.overlay;
    d.currency_exposure = rep.currency_exposure;
    // Cash is a base-currency holding even though it is not a market asset.
    d.currency_exposure[qp.spec.base_country] += d.cash;
    d.total_overlay = rep.total_overlay;

    d.active.resize(qp.map.K);
    std::vector<bool> flags(qp.map.K);
    for (int k = 0; k < qp.map.K; ++k) {
        d.active[k] = parts.b[k] >= 0.5 ? 1 : 0;
        flags[k] = d.active[k] != 0;
    }
    const TransactionCost tc = transaction_cost(s, flags, qp.spec.cost);
    d.fixed_cost = tc.fixed_total;
    d.spread_cost = tc.spread_total;
    d.total_cost = tc.total;
    d.margin_required = margin_cash(s, qp.spec.cost.margin_rate);

    const Eigen::VectorXd exposure = qp.exposure_map * y;
    d.achieved_return = exposure.dot(qp.r) - d.total_cost;
    d.variance = y.dot(qp.Q * y);
    d.volatility = std::sqrt(std::max(0.0, d.variance));
    return d;
}

void verify_decoded(const MixedBinaryQP& qp, const MIQPSolution& sol, double tol) {
    if (sol.status != SolveStatus::Optimal) return;
    const DecodedVector parts = decode_vector(qp.map, sol.x);
    const DecodedSolution& d = sol.decoded;

    auto fail = [](const std::string& what) { throw ContractViolation("verify_decoded: " + what); };

    if (std::abs(parts.asset_weights.sum() + parts.cash - 1.0) > tol) fail("asset budget broken");
    if (std::abs(d.currency_exposure.sum() - 1.0) > tol) fail("currency budget broken");
    if (std::abs(d.overlay.sum()) > tol) fail("overlay does not sum to zero");
    if (std::abs(parts.cash -
                 qp.spec.cost.margin_rate * (parts.q_pos.sum() + parts.q_neg.sum())) > tol)
        fail("margin coupling broken");
    for (int k = 0; k < qp.map.K; ++k) {
        if (parts.q_pos[k] * parts.q_neg[k] > tol) fail("sign exclusivity broken");
        if (std::abs(d.q[k]) > tol && !d.active[k]) fail("inactive contract carries exposure");
    }
    for (int j = 0; j < qp.map.C; ++j)
        if (std::abs(d.overlay[j]) > parts.t[j] + tol) fail("overlay exceeds its auxiliary");
    if (std::abs(d.achieved_return - qp.spec.mu) > 1e-8) fail("achieved return misses target");
    if (std::abs(d.variance - sol.objective) > tol * std::max(1.0, std::abs(sol.objective)))
        fail("variance does not match objective");

    const DecodedSolution re = decode_solution(qp, sol.x);
    if ((re.q - d.q).cwiseAbs().maxCoeff() > tol) fail("q decoding unstable");
    if (std::abs(re.total_overlay - d.total_overlay) > tol) fail("overlay decoding unstable");
    if (std::abs(re.total_cost - d.total_cost) > tol) fail("cost decoding unstable");
}

MIQPSolution solve_miqp(const MixedBinaryQP& qp, const MIQPOptions& options) {
    const auto start = Clock::now();
    const int nb = static_cast<int>(qp.binary_index.size());
    if (nb > 24) throw DomainError("solve_miqp: more than 24 binaries");

    MIQPSolution best;
    best.status = SolveStatus::Infeasible;

    detail::FactoredQP base{detail::factor_objective(qp.Q, options.qp.pivot_tol),
                            qp.c, qp.A_eq, qp.b_eq, qp.A_in, qp.b_in, qp.lb, qp.ub};

    // Position of each contract's sign binary inside binary_index.
    std::vector<int> bin_pos_of_sign(qp.map.K, -1);
    for (int i = 0; i < nb; ++i)
        for (int k = 0; k < qp.map.K; ++k)
            if (qp.binary_index[i] == qp.map.s(k)) bin_pos_of_sign[k] = i;

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    long next_id = 0;
    open.push(Node{-std::numeric_limits<double>::infinity(), next_id++,
                   std::vector<signed char>(nb, -1), 0});

    double incumbent = std::numeric_limits<double>::infinity();
    Eigen::VectorXd incumbent_x;
    std::vector<int> incumbent_bin;
    bool any_failure = false;
    bool budget_exceeded = false;
    std::string failure_note;
    double best_open_bound = -std::numeric_limits<double>::infinity();

    while (!open.empty()) {
        const Node node = open.top();
        open.pop();
        best_open_bound = node.bound;
        if (node.bound >= incumbent - options.prune_tol && std::isfinite(incumbent)) {
            if (options.trace)
                *options.trace << "node=" << node.id << " action=prune bound=" << node.bound
                               << " incumbent=" << incumbent << '\n';
            break;  // best-first: every remaining node is at least as bad
        }
        if (best.nodes_explored >= options.node_budget) {
            budget_exceeded = true;
            break;
        }

        Eigen::VectorXd lb = qp.lb, ub = qp.ub;
        apply_fixing(qp, node.fixing, lb, ub);
        detail::FactoredQP sub = base;
        sub.lb = lb;
        sub.ub = ub;
        const QPSolution rel = detail::solve_factored(sub, options.qp);
        ++best.nodes_explored;
        if (node.depth == 0) best.root_bound = rel.status == SolveStatus::Optimal
                                                   ? rel.objective
                                                   : best.root_bound;

        if (options.trace)
            *options.trace << "node=" << node.id << " action=solve depth=" << node.depth
                           << " status=" << to_string(rel.status) << " bound="
                           << (rel.status == SolveStatus::Optimal ? rel.objective
                                                                  : std::nan(""))
                           << " incumbent=" << incumbent << '\n';

        if (rel.status == SolveStatus::Infeasible) continue;
        if (rel.status == SolveStatus::NumericalFailure) {
            any_failure = true;
            failure_note = rel.failure_reason;
            continue;
        }
        if (rel.objective >= incumbent - options.prune_tol) continue;

        // Sign binaries whose split variable is flat gate nothing: pin
        // them to the feasible bound instead of branching on them.
        Eigen::VectorXd relx = rel.x;
        for (int k = 0; k < qp.map.K; ++k) {
            const int pos = bin_pos_of_sign.empty() ? -1 : bin_pos_of_sign[k];
            if (pos < 0 || node.fixing[pos] >= 0) continue;
            const double q_plus = relx[qp.map.q_pos(k)];
            const double q_minus = relx[qp.map.q_neg(k)];
            if (q_minus <= options.qp.integrality_tol)
                relx[qp.map.s(k)] = q_plus <= options.qp.integrality_tol ? 0.0 : 1.0;
            else if (q_plus <= options.qp.integrality_tol)
                relx[qp.map.s(k)] = 0.0;
        }

        // Integral check over the free binaries.
        int branch_var = -1;
        double branch_frac = -1.0;
        for (int i = 0; i < nb; ++i) {
            if (node.fixing[i] >= 0) continue;
            const double val = relx[qp.binary_index[i]];
            const double frac = std::min(val, 1.0 - val);
            if (frac > options.qp.integrality_tol && frac > branch_frac + 1e-15) {
                branch_frac = frac;
                branch_var = i;  // most fractional; first (lowest) index on ties
            }
        }

        if (branch_var < 0) {
            std::vector<signed char> full(nb);
            for (int i = 0; i < nb; ++i)
                full[i] = node.fixing[i] >= 0
                              ? node.fixing[i]
                              : static_cast<signed char>(relx[qp.binary_index[i]] >= 0.5);

            // Exactly integral relaxations (constraint-forced binaries)
            // need no cleanup pass.
            double worst = 0.0;
            for (int i = 0; i < nb; ++i)
                worst = std::max(worst, std::abs(relx[qp.binary_index[i]] - full[i]));
            if (worst <= 1e-12) {
                if (rel.objective < incumbent) {
                    incumbent = rel.objective;
                    incumbent_x = relx;
                    incumbent_bin.assign(full.begin(), full.end());
                    if (options.trace)
                        *options.trace << "node=" << node.id << " action=integral incumbent="
                                       << incumbent << '\n';
                }
                continue;
            }

            // Otherwise re-solve with all binaries pinned to their
            // rounded values so the incumbent is exactly feasible.
            Eigen::VectorXd lb2 = qp.lb, ub2 = qp.ub;
            apply_fixing(qp, full, lb2, ub2);
            detail::FactoredQP leaf = base;
            leaf.lb = lb2;
            leaf.ub = ub2;
            const QPSolution exact = detail::solve_factored(leaf, options.qp);
            ++best.nodes_explored;
            if (exact.status == SolveStatus::Optimal) {
                if (exact.objective < incumbent) {
                    incumbent = exact.objective;
                    incumbent_x = exact.x;
                    incumbent_bin.assign(full.begin(), full.end());
                    if (options.trace)
                        *options.trace << "node=" << node.id << " action=integral incumbent="
                                       << incumbent << '\n';
                }
                continue;
            }
            // Rounding killed feasibility: split on the first free
            // binary instead so exact leaves settle the subtree.
            branch_var = -1;
            for (int i = 0; i < nb && branch_var < 0; ++i)
                if (node.fixing[i] < 0) branch_var = i;
            if (branch_var < 0) continue;  // fully fixed leaf, genuinely infeasible
        }

        for (int value = 0; value <= 1; ++value) {
            Node child{rel.objective, next_id++, node.fixing, node.depth + 1};
            child.fixing[branch_var] = static_cast<signed char>(value);
            open.push(child);
        }
        if (options.trace)
            *options.trace << "node=" << node.id << " action=branch var=" << branch_var
                           << " frac=" << branch_frac << '\n';
    }

    best.wall_time = seconds_since(start);
    if (std::isfinite(incumbent)) {
        best.objective = incumbent;
        best.x = incumbent_x;
        best.binaries = incumbent_bin;
        const double open_bound = open.empty() ? incumbent : best_open_bound;
        best.gap = std::max(0.0, incumbent - std::min(open_bound, incumbent));
        best.decoded = decode_solution(qp, best.x);
        if (budget_exceeded) {
            best.status = SolveStatus::NumericalFailure;
            best.detail = "node budget exceeded";
        } else if (any_failure) {
            best.status = SolveStatus::NumericalFailure;
            best.detail = "relaxation failure left the tree incomplete: " + failure_note;
        } else {
            best.status = SolveStatus::Optimal;
        }
    } else if (budget_exceeded) {
        best.status = SolveStatus::NumericalFailure;
        best.detail = "node budget exceeded with no incumbent";
    } else if (any_failure) {
        best.status = SolveStatus::NumericalFailure;
        best.detail = "relaxation failure: " + failure_note;
    } else {
        best.status = SolveStatus::Infeasible;
        best.detail = "all leaves infeasible";
    }
    return best;
}

MIQPSolution brute_force(const MixedBinaryQP& qp, const MIQPOptions& options) {
    const auto start = Clock::now();
    const int nb = static_cast<int>(qp.binary_index.size());
    if (nb > 16) throw DomainError("brute_force: more than 16 binaries");

    detail::FactoredQP base{detail::factor_objective(qp.Q, options.qp.pivot_tol),
                            qp.c, qp.A_eq, qp.b_eq, qp.A_in, qp.b_in, qp.lb, qp.ub};

    MIQPSolution best;
    best.status = SolveStatus::Infeasible;
    double incumbent = std::numeric_limits<double>::infinity();
    long failures = 0;
    std::string failure_note;

    const long total = 1L << nb;
    for (long mask = 0; mask < total; ++mask) {
        Eigen::VectorXd lb = qp.lb, ub = qp.ub;
        for (int i = 0; i < nb; ++i) {
            const double v = (mask >> i) & 1;
            lb[qp.binary_index[i]] = v;
            ub[qp.binary_index[i]] = v;
        }
        detail::FactoredQP leaf = base;
        leaf.lb = lb;
        leaf.ub = ub;
        const QPSolution sol = detail::solve_factored(leaf, options.qp);
        ++best.nodes_explored;
        if (sol.status == SolveStatus::NumericalFailure) {
            ++failures;
            if (failure_note.empty()) failure_note = sol.failure_reason;
            continue;
        }
        if (sol.status != SolveStatus::Optimal) continue;
        if (sol.objective < incumbent) {
            incumbent = sol.objective;
            best.x = sol.x;
            best.binaries.clear();
            for (int i = 0; i < nb; ++i) best.binaries.push_back((mask >> i) & 1);
        }
    }

    best.wall_time = seconds_since(start);
    if (std::isfinite(incumbent)) {
        best.objective = incumbent;
        best.gap = 0.0;
        best.status = SolveStatus::Optimal;
        best.decoded = decode_solution(qp, best.x);
    }
    if (failures > 0)
        best.detail = std::to_string(failures) + " leaf failures (" + failure_note + ")";
    return best;
}

}  // namespace overlay
