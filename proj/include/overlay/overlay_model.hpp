#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "overlay/errors.hpp"

namespace overlay {

/// Combinatorics of FX forward contracts over C currencies. Contract k
/// trades the country pair pairs[k] = (first, second) in lexicographic
/// order; q[k] > 0 buys the first currency and sells the second, q[k] < 0
/// the reverse. Row k of T holds +1 at first, -1 at second, 0 elsewhere.
struct OverlayStructure {
    int C = 0;
    int K = 0;
    std::vector<std::pair<int, int>> pairs;  // 0-based country indices
    Eigen::MatrixXd T;                       // K x C
    Eigen::VectorXd q;                       // K, fraction of portfolio, signed
};

/// All C-choose-2 contracts in lexicographic pair order, q zeroed.
/// Requires 2 <= C <= 12.
OverlayStructure build_combinatorics(int C);

/// F(k,j) = T(k,j) * q(k). Every row sums to zero.
Eigen::MatrixXd forward_exposure_matrix(const OverlayStructure& s);

/// Per-country exposure decomposition of a portfolio.
struct ExposureReport {
    Eigen::VectorXd asset_exposure;     // sum of asset weights per country
    Eigen::VectorXd overlay;            // column sums of F
    Eigen::VectorXd currency_exposure;  // asset_exposure + overlay
    double total_overlay = 0.0;         // V = half the L1 norm of overlay
};

ExposureReport exposure_report(const Eigen::MatrixXd& asset_weights, const OverlayStructure& s);

/// Transaction-cost and margin parameters for the contract set.
struct CostModel {
    double alpha = 0.0;      // fixed cost per active contract, fraction of portfolio
    Eigen::VectorXd beta;    // percent spread per contract, decimal fraction
    double margin_rate = 0.0;  // M, fraction of gross forward exposure held as cash

    void validate(int K) const;
};

/// Interest differential earned by each contract at the portfolio level.
/// carry[k] = q_k * (rate[buy] - rate[sell]); the total equals
/// sum_j overlay_j * rate_j, which is how the carry folds into adjusted
/// returns. Reported for diagnostics only: adding it to a portfolio
/// return computed from adjusted moments would double count it.
struct CarryReport {
    Eigen::VectorXd per_contract;
    double total = 0.0;
};

CarryReport cost_of_carry(const OverlayStructure& s, const Eigen::VectorXd& rates);

/// No-arbitrage forward price of one unit of foreign currency in base
/// currency: spot * (1 + i_base) / (1 + i_foreign).
double forward_rate(double spot, double i_base, double i_foreign);

struct TransactionCost {
    Eigen::VectorXd per_contract;
    double fixed_total = 0.0;
    double spread_total = 0.0;
    double total = 0.0;
};

/// phi_k = alpha * active_k + beta_k * |q_k|. A nonzero q on an inactive
/// contract violates the activation contract.
TransactionCost transaction_cost(const OverlayStructure& s, const std::vector<bool>& active,
                                 const CostModel& cm);

/// Cash collateral required by the margin rate: M * sum_k |q_k|.
double margin_cash(const OverlayStructure& s, double margin_rate);

/// Express a target overlay vector (sum zero) using only the C-1 star
/// contracts that pair the base country with each other country.
/// Demonstrates that C-1 contracts span every feasible overlay.
Eigen::VectorXd represent_overlay(const Eigen::VectorXd& target_overlay, const OverlayStructure& s);

/// Read a `pair,beta` CSV of percent spreads (values in % of ask price,
/// e.g. 0.0036) into a decimal beta vector in contract order. Pair names
/// concatenate the two currency codes, first country first (USDEUR).
Eigen::VectorXd load_spread_table(const std::string& path,
                                  const std::vector<std::string>& currencies,
                                  const std::vector<std::pair<int, int>>& pairs);

}  // namespace overlay
