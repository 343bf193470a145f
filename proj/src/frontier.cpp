#include "overlay/frontier.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace overlay {

namespace {

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

FrontierPoint point_from_solution(double mu, const MIQPSolution& sol, const MixedBinaryQP& qp,
                                  const std::string& detail) {
    FrontierPoint p;
    p.mu = mu;
    p.status = sol.status;
    p.status_detail = detail;
    p.nodes = sol.nodes_explored;
    p.solve_seconds = sol.wall_time;
    if (sol.status != SolveStatus::Optimal) return p;

    const DecodedSolution& d = sol.decoded;
    p.volatility = d.volatility;
    p.variance = d.variance;
    p.total_overlay = d.total_overlay;
    p.overlay_by_country = d.overlay;
    p.class_totals.resize(qp.map.A);
    for (int i = 0; i < qp.map.A; ++i) p.class_totals[i] = d.asset_weights.row(i).sum();
    p.cash = d.cash;
    p.cost_paid = d.total_cost;
    for (int k = 0; k < qp.map.K; ++k) {
        if (!d.active[k]) continue;
        ++p.active_forwards;
        p.active_list.push_back(qp.spec.currency_labels[qp.structure.pairs[k].first] +
                                qp.spec.currency_labels[qp.structure.pairs[k].second]);
    }
    return p;
}

}  // namespace

std::vector<double> make_grid(double lo, double hi, double step) {
    if (step <= 0) throw DomainError("grid step must be positive");
    if (lo > hi) throw DomainError("grid low end exceeds high end");
    const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> grid(count);
    for (int i = 0; i < count; ++i) grid[i] = lo + i * step;
    return grid;
}

FrontierPoint solve_target(const AdjustedMoments& moments, const ProblemSpec& spec, double mu,
                           const MIQPOptions& options) {
    ProblemSpec target = spec;
    target.mu = mu;
    try {
        if (spec.mode == OptimisationMode::TwoStage) {
            const TwoStageProblem two = build_two_stage(moments, target);
            const MIQPSolution first = solve_miqp(two.stage1, options);
            if (first.status != SolveStatus::Optimal) {
                FrontierPoint p = point_from_solution(mu, first, two.stage1, "stage1");
                return p;
            }
            const MixedBinaryQP stage2 = two.make_stage2(first.decoded.asset_weights);
            const MIQPSolution second = solve_miqp(stage2, options);
            FrontierPoint p = point_from_solution(
                mu, second, stage2, second.status == SolveStatus::Optimal ? "" : "stage2");
            p.nodes += first.nodes_explored;
            p.solve_seconds += first.wall_time;
            return p;
        }
        const MixedBinaryQP qp = build_problem(moments, target);
        return point_from_solution(mu, solve_miqp(qp, options), qp, "");
    } catch (const InfeasibleSpecError&) {
        FrontierPoint p;
        p.mu = mu;
        p.status = SolveStatus::Infeasible;
        p.status_detail = "static_bounds";
        return p;
    }
}

Frontier sweep(const AdjustedMoments& moments, const ProblemSpec& spec, double mu_lo,
               double mu_hi, double step, int jobs, const MIQPOptions& options) {
    Frontier f;
    f.spec = spec;
    f.grid = make_grid(mu_lo, mu_hi, step);
    f.points.resize(f.grid.size());

    const int n = static_cast<int>(f.grid.size());
    if (jobs == 1) {
        // Serial reference path, kept deliberately plain; the parallel
        // loop below must produce identical results.
        for (int i = 0; i < n; ++i) f.points[i] = solve_target(moments, spec, f.grid[i], options);
        return f;
    }

#ifdef _OPENMP
    const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n; ++i) {
        try {
            f.points[i] = solve_target(moments, spec, f.grid[i], options);
        } catch (const std::exception& e) {
            FrontierPoint p;
            p.mu = f.grid[i];
            p.status = SolveStatus::NumericalFailure;
            p.status_detail = e.what();
            f.points[i] = p;
        }
    }
#else
    for (int i = 0; i < n; ++i) f.points[i] = solve_target(moments, spec, f.grid[i], options);
#endif
    return f;
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"approach", "hedging", "margin", "overlay_limit",
                                                "cardinality"};
    return names;
}

ExperimentResult run_experiment(const std::string& name, const AdjustedMoments& moments,
                                const ProblemSpec& base_spec, double mu_lo, double mu_hi,
                                double step, int jobs, const MIQPOptions& options) {
    ExperimentResult result;
    result.name = name;

    auto trimmed = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };

    std::vector<ExperimentCell> cells;
    if (name == "approach") {
        for (OptimisationMode mode : {OptimisationMode::Unified, OptimisationMode::TwoStage}) {
            ProblemSpec spec = base_spec;
            spec.mode = mode;
            cells.push_back({to_string(mode), spec, {}});
        }
    } else if (name == "hedging") {
        for (HedgingPolicy policy : {HedgingPolicy::FullyHedged, HedgingPolicy::ForeignOnly,
                                     HedgingPolicy::Unrestricted}) {
            ProblemSpec spec = base_spec;
            spec.policy = policy;
            cells.push_back({to_string(policy), spec, {}});
        }
    } else if (name == "margin") {
        for (double m : {0.0, 0.03, 0.05, 0.07, 0.10, 0.30, 0.50}) {
            ProblemSpec spec = base_spec;
            spec.cost.margin_rate = m;
            cells.push_back({"M_" + trimmed(m), spec, {}});
        }
        result.base_cell = 0;  // no margin requirement
    } else if (name == "overlay_limit") {
        for (double vu : {0.0, 0.1, 0.3, 0.5, 1.0}) {
            ProblemSpec spec = base_spec;
            spec.V_u = vu;
            cells.push_back({"Vu_" + trimmed(vu), spec, {}});
        }
        result.base_cell = 4;  // unrestricted overlay
    } else if (name == "cardinality") {
        const int top = std::min(6, base_spec.K());
        for (int g = 0; g <= top; ++g) {
            ProblemSpec spec = base_spec;
            spec.G = g;
            cells.push_back({"G_" + std::to_string(g), spec, {}});
        }
        result.base_cell = top;  // all contracts allowed
    } else {
        std::string valid;
        for (const auto& n : experiment_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw DomainError("unknown experiment '" + name + "' (valid: " + valid + ")");
    }

    for (ExperimentCell& cell : cells) {
        cell.frontier = sweep(moments, cell.spec, mu_lo, mu_hi, step, jobs, options);
        result.cells.push_back(std::move(cell));
    }
    return result;
}

std::vector<std::optional<double>> relative_volatility_increase(const Frontier& base,
                                                                const Frontier& other) {
    if (base.grid.size() != other.grid.size())
        throw ContractViolation("relative_volatility_increase: grid size mismatch");
    for (std::size_t i = 0; i < base.grid.size(); ++i)
        if (base.grid[i] != other.grid[i])
            throw ContractViolation("relative_volatility_increase: grids differ");

    std::vector<std::optional<double>> rel(base.grid.size());
    for (std::size_t i = 0; i < base.grid.size(); ++i) {
        const FrontierPoint& b = base.points[i];
        const FrontierPoint& o = other.points[i];
        if (b.status != SolveStatus::Optimal || o.status != SolveStatus::Optimal) continue;
        rel[i] = 100.0 * (o.volatility / b.volatility - 1.0);
    }
    return rel;
}

std::string frontier_csv_text(const Frontier& f) {
    std::ostringstream out;
    out << "mu,volatility,status,V";
    for (const std::string& ccy : f.spec.currency_labels) out << ",overlay_" << ccy;
    for (const std::string& cls : f.spec.class_labels) out << ',' << cls << "_total";
    out << ",cash,active_forwards,cost_paid\n";

    for (const FrontierPoint& p : f.points) {
        out << format_number(p.mu) << ',';
        const bool ok = p.status == SolveStatus::Optimal;
        out << (ok ? format_number(p.volatility) : "") << ',';
        out << to_string(p.status);
        if (!p.status_detail.empty()) out << '_' << p.status_detail;
        out << ',' << (ok ? format_number(p.total_overlay) : "");
        for (int j = 0; j < f.spec.countries_n; ++j)
            out << ',' << (ok ? format_number(p.overlay_by_country[j]) : "");
        for (int i = 0; i < f.spec.classes_n; ++i)
            out << ',' << (ok ? format_number(p.class_totals[i]) : "");
        out << ',' << (ok ? format_number(p.cash) : "");
        out << ',' << (ok ? std::to_string(p.active_forwards) : "");
        out << ',' << (ok ? format_number(p.cost_paid) : "");
        out << '\n';
    }
    return out.str();
}

void write_frontier_csv(const Frontier& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << frontier_csv_text(f);
}

std::string spec_hash(const ProblemSpec& spec) {
    const nlohmann::json j = spec;
    const std::string text = j.dump();
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_manifest(const Frontier& f, double runtime_seconds, const std::string& path) {
    const SolverConfig tol;
    nlohmann::json j{
        {"grid",
         {{"lo", f.grid.front()},
          {"hi", f.grid.back()},
          {"points", f.grid.size()},
          {"step", f.grid.size() > 1 ? f.grid[1] - f.grid[0] : 0.0}}},
        {"spec", f.spec},
        {"spec_hash", spec_hash(f.spec)},
        {"tolerances",
         {{"feasibility", tol.feasibility_tol},
          {"optimality", tol.optimality_tol},
          {"integrality", tol.integrality_tol}}},
        {"runtime_seconds", runtime_seconds},
    };
    {
        std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["generated_at"] = buf;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace overlay
