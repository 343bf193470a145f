#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "overlay/market_data.hpp"
#include "overlay/overlay_model.hpp"

namespace overlay {

enum class HedgingPolicy { Unrestricted, FullyHedged, ForeignOnly };
enum class OptimisationMode { Unified, TwoStage };

const char* to_string(HedgingPolicy policy);
const char* to_string(OptimisationMode mode);
HedgingPolicy hedging_policy_from_string(const std::string& name);
OptimisationMode mode_from_string(const std::string& name);

/// Full parameter set of one optimization run. Bounds and rates are
/// decimal fractions throughout (1.0 = 100%).
struct ProblemSpec {
    int countries_n = 0;  // C
    int classes_n = 0;    // A, risky classes only (cash is implicit)
    int base_country = 0;
    std::vector<std::string> country_labels;
    std::vector<std::string> currency_labels;
    std::vector<std::string> class_labels;

    double mu = 0.01;     // target monthly return
    double V_u = 1.0;     // total overlay cap
    Eigen::VectorXd E_l;  // per-country currency exposure bounds
    Eigen::VectorXd E_u;
    Eigen::VectorXd l;    // per-contract size bounds, l <= 0 <= u
    Eigen::VectorXd u;
    int G = 0;            // max active contracts
    CostModel cost;       // alpha, beta, margin rate M
    HedgingPolicy policy = HedgingPolicy::Unrestricted;
    OptimisationMode mode = OptimisationMode::Unified;
    bool no_short_assets = true;

    int K() const { return countries_n * (countries_n - 1) / 2; }

    /// Default parameters: V_u = 1, E in [0,1], l = -1, u = 1, G = K,
    /// M = 10%, alpha = 1e-6, beta zeroed (load a spread table for real
    /// runs).
    static ProblemSpec defaults(int countries, int classes);

    void validate() const;  // throws DomainError on malformed parameters
};

void to_json(nlohmann::json& j, const ProblemSpec& spec);
void from_json(const nlohmann::json& j, ProblemSpec& spec);
ProblemSpec load_problem_spec(const std::string& path);

/// Index layout of the lifted variable vector:
///   [ a_ij | cash | q+_k | q-_k | t_j | b_k | s_k ]
/// a ordered class-major then country (matching the moments vector),
/// t_j are overlay absolute-value auxiliaries, b_k activation binaries,
/// s_k sign-exclusivity binaries.
struct VarMap {
    int A = 0, C = 0, K = 0;
    int n_cont = 0, n_bin = 0, n = 0;
    std::vector<std::string> names;

    int a(int klass, int country) const { return klass * C + country; }
    int cash() const { return A * C; }
    int q_pos(int k) const { return A * C + 1 + k; }
    int q_neg(int k) const { return A * C + 1 + K + k; }
    int t(int country) const { return A * C + 1 + 2 * K + country; }
    int b(int k) const { return n_cont + k; }
    int s(int k) const { return n_cont + K + k; }
    int index_of(const std::string& name) const;
};

/// Mixed-binary convex QP: minimize x'Qx over the lifted variables with
/// equality rows A_eq x = b_eq, inequality rows A_in x <= b_in, finite
/// box bounds, and binary_index listing the b_k then s_k positions.
struct MixedBinaryQP {
    VarMap map;
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;  // zero: pure variance minimization
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd A_in;
    Eigen::VectorXd b_in;
    Eigen::VectorXd lb, ub;
    std::vector<int> binary_index;
    std::vector<std::string> eq_labels, in_labels;

    // Decoding context.
    Eigen::MatrixXd exposure_map;  // (A*C + C) x n, x_exposure = E y
    Eigen::VectorXd r;             // adjusted expected returns
    OverlayStructure structure;    // pairs and T (q zeroed)
    ProblemSpec spec;
};

/// Encode the mean-variance problem with overlay constraints for one
/// return target. Throws InfeasibleSpecError when the static parameter
/// set is contradictory before any solve (e.g. sum of E_l above 1).
MixedBinaryQP assemble(const AdjustedMoments& moments, const ProblemSpec& spec);

/// Add the hedging-policy row: fully hedged pins base-currency exposure
/// (including cash) to 1, foreign-only pins it to 0.
MixedBinaryQP apply_policy(const MixedBinaryQP& qp, HedgingPolicy policy, int base_country);

/// assemble + apply_policy in one call.
MixedBinaryQP build_problem(const AdjustedMoments& moments, const ProblemSpec& spec);

/// Stage 1 drops the overlay entirely (q = 0, hence cash = 0); stage 2
/// freezes the stage-1 asset mix, scales it by (1 - cash) so margin cash
/// can be funded, and re-optimizes forwards and cash at the same target.
struct TwoStageProblem {
    MixedBinaryQP stage1;
    std::function<MixedBinaryQP(const Eigen::MatrixXd& stage1_assets)> make_stage2;
};

TwoStageProblem build_two_stage(const AdjustedMoments& moments, const ProblemSpec& spec);

/// Split a feasible lifted vector into named parts and re-encode it;
/// used by tests and by solution decoding.
struct DecodedVector {
    Eigen::MatrixXd asset_weights;  // A x C
    double cash = 0.0;
    Eigen::VectorXd q_pos, q_neg, t;
    Eigen::VectorXd b, s;
};

DecodedVector decode_vector(const VarMap& map, const Eigen::VectorXd& y);
Eigen::VectorXd encode_vector(const VarMap& map, const DecodedVector& parts);

}  // namespace overlay
