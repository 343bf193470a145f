#include "overlay/overlay_model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace overlay {

OverlayStructure build_combinatorics(int C) {
    if (C < 2) throw DomainError("build_combinatorics: need at least 2 countries");
    if (C > 12) throw DomainError("build_combinatorics: C > 12 not supported");

    OverlayStructure s;
    s.C = C;
    s.K = C * (C - 1) / 2;
    s.pairs.reserve(s.K);
    s.T = Eigen::MatrixXd::Zero(s.K, C);
    int k = 0;
    for (int a = 0; a < C; ++a) {
        for (int b = a + 1; b < C; ++b) {
            s.pairs.emplace_back(a, b);
            s.T(k, a) = 1.0;
            s.T(k, b) = -1.0;
            ++k;
        }
    }
    s.q = Eigen::VectorXd::Zero(s.K);
    return s;
}

Eigen::MatrixXd forward_exposure_matrix(const OverlayStructure& s) {
    return s.q.asDiagonal() * s.T;
}

ExposureReport exposure_report(const Eigen::MatrixXd& asset_weights, const OverlayStructure& s) {
    if (asset_weights.cols() != s.C)
        throw ContractViolation("exposure_report: asset weight columns != country count");
    ExposureReport rep;
    rep.asset_exposure = asset_weights.colwise().sum().transpose();
    rep.overlay = forward_exposure_matrix(s).colwise().sum().transpose();
    rep.currency_exposure = rep.asset_exposure + rep.overlay;
    rep.total_overlay = rep.overlay.cwiseAbs().sum() / 2.0;
    return rep;
}

void CostModel::validate(int K) const {
    if (alpha < 0) throw DomainError("cost model: alpha must be >= 0");
    if (beta.size() != K) throw DomainError("cost model: beta length != contract count");
    if ((beta.array() < 0).any()) throw DomainError("cost model: beta entries must be >= 0");
    if (margin_rate < 0 || margin_rate > 1) throw DomainError("cost model: M must be in [0,1]");
}

CarryReport cost_of_carry(const OverlayStructure& s, const Eigen::VectorXd& rates) {
    if (rates.size() != s.C) throw ContractViolation("cost_of_carry: rates length != C");
    CarryReport rep;
    rep.per_contract.resize(s.K);
    for (int k = 0; k < s.K; ++k) {
        // q > 0 buys pairs[k].first and sells pairs[k].second; q < 0 flips
        // both legs, so the signed product covers both cases.
        rep.per_contract[k] = s.q[k] * (rates[s.pairs[k].first] - rates[s.pairs[k].second]);
    }
    rep.total = rep.per_contract.sum();

    const Eigen::VectorXd overlay = forward_exposure_matrix(s).colwise().sum().transpose();
    const double via_overlay = overlay.dot(rates);
    if (std::abs(rep.total - via_overlay) > 1e-12 * std::max(1.0, std::abs(rep.total)))
        throw ContractViolation("cost_of_carry: contract-level and overlay-level totals disagree");
    return rep;
}

double forward_rate(double spot, double i_base, double i_foreign) {
    if (spot <= 0) throw DomainError("forward_rate: spot must be positive");
    if (i_base <= -1 || i_foreign <= -1) throw DomainError("forward_rate: rates must exceed -100%");
    return spot * (1.0 + i_base) / (1.0 + i_foreign);
}

TransactionCost transaction_cost(const OverlayStructure& s, const std::vector<bool>& active,
                                 const CostModel& cm) {
    if (static_cast<int>(active.size()) != s.K)
        throw ContractViolation("transaction_cost: activation flags length != K");
    cm.validate(s.K);

    TransactionCost tc;
    tc.per_contract.resize(s.K);
    for (int k = 0; k < s.K; ++k) {
        if (s.q[k] != 0.0 && !active[k])
            throw ContractViolation("transaction_cost: contract " + std::to_string(k) +
                                    " has nonzero size but is flagged inactive");
        const double fixed = active[k] ? cm.alpha : 0.0;
        const double spread = cm.beta[k] * std::abs(s.q[k]);
        tc.per_contract[k] = fixed + spread;
        tc.fixed_total += fixed;
        tc.spread_total += spread;
    }
    tc.total = tc.fixed_total + tc.spread_total;
    return tc;
}

double margin_cash(const OverlayStructure& s, double margin_rate) {
    return margin_rate * s.q.cwiseAbs().sum();
}

Eigen::VectorXd represent_overlay(const Eigen::VectorXd& target_overlay, const OverlayStructure& s) {
    if (target_overlay.size() != s.C)
        throw ContractViolation("represent_overlay: target length != C");
    if (std::abs(target_overlay.sum()) > 1e-9)
        throw DomainError("represent_overlay: overlay must sum to zero");

    // Star construction on the base country: contract (0, j) is the only
    // one touching country j, so q_{0j} = -target_j; the base entry then
    // balances automatically because the target sums to zero.
    Eigen::VectorXd q = Eigen::VectorXd::Zero(s.K);
    for (int k = 0; k < s.K; ++k) {
        if (s.pairs[k].first == 0) q[k] = -target_overlay[s.pairs[k].second];
    }
    return q;
}

Eigen::VectorXd load_spread_table(const std::string& path,
                                  const std::vector<std::string>& currencies,
                                  const std::vector<std::pair<int, int>>& pairs) {
    std::ifstream in(path);
    if (!in) throw ParseError("spread table not found: " + path);

    std::map<std::string, double> table;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        std::stringstream ss(line);
        std::string name, value;
        if (!std::getline(ss, name, ',')) continue;
        std::getline(ss, value, ',');
        if (row == 1 && name == "pair") continue;  // header
        if (name.empty()) continue;
        try {
            table[name] = std::stod(value);
        } catch (const std::exception&) {
            throw ParseError(path + ": non-numeric spread at row " + std::to_string(row));
        }
    }

    Eigen::VectorXd beta(static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const std::string name = currencies[pairs[k].first] + currencies[pairs[k].second];
        auto it = table.find(name);
        if (it == table.end()) throw SchemaError(path + ": missing spread for pair " + name);
        beta[static_cast<Eigen::Index>(k)] = it->second / 100.0;  // file is in percent
    }
    return beta;
}

}  // namespace overlay
