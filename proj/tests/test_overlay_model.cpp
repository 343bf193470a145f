#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <random>

#include "overlay/overlay_model.hpp"

using namespace overlay;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("pair combinatorics for four currencies") {
    const OverlayStructure s = build_combinatorics(4);
    CHECK(s.K == 6);
    REQUIRE(s.pairs.size() == 6);
    CHECK(s.pairs[0] == std::pair<int, int>{0, 1});
    CHECK(s.pairs[1] == std::pair<int, int>{0, 2});
    CHECK(s.pairs[2] == std::pair<int, int>{0, 3});
    CHECK(s.pairs[3] == std::pair<int, int>{1, 2});
    CHECK(s.pairs[4] == std::pair<int, int>{1, 3});
    CHECK(s.pairs[5] == std::pair<int, int>{2, 3});

    MatrixXd expected(6, 4);
    expected << 1, -1, 0, 0,
                1, 0, -1, 0,
                1, 0, 0, -1,
                0, 1, -1, 0,
                0, 1, 0, -1,
                0, 0, 1, -1;
    CHECK((s.T - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two currencies yield a single contract") {
    const OverlayStructure s = build_combinatorics(2);
    CHECK(s.K == 1);
    CHECK(s.T(0, 0) == 1.0);
    CHECK(s.T(0, 1) == -1.0);
}

TEST_CASE("each of five countries appears in exactly four contracts") {
    const OverlayStructure s = build_combinatorics(5);
    CHECK(s.K == 10);
    // Oracle: count pair memberships combinatorially.
    std::vector<int> appearances(5, 0);
    for (const auto& [a, b] : s.pairs) {
        ++appearances[a];
        ++appearances[b];
    }
    for (int j = 0; j < 5; ++j) {
        CHECK(appearances[j] == 4);
        CHECK(s.T.col(j).cwiseAbs().sum() == 4.0);
    }
}

TEST_CASE("combinatorics rejects degenerate country counts") {
    CHECK_THROWS_AS(build_combinatorics(1), DomainError);
    CHECK_THROWS_AS(build_combinatorics(0), DomainError);
}

TEST_CASE("forward exposure matrix rows") {
    OverlayStructure s = build_combinatorics(4);

    SUBCASE("zero sizes give the zero matrix") {
        CHECK(forward_exposure_matrix(s).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("matches the elementwise product layout") {
        s.q << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
        MatrixXd F = forward_exposure_matrix(s);
        MatrixXd expected(6, 4);
        expected << 0.1, -0.1, 0, 0,
                    0.2, 0, -0.2, 0,
                    0.3, 0, 0, -0.3,
                    0, 0.4, -0.4, 0,
                    0, 0.5, 0, -0.5,
                    0, 0, 0.6, -0.6;
        CHECK((F - expected).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("rows sum to zero for random sizes") {
        std::mt19937 rng(42);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 200; ++trial) {
            for (int k = 0; k < s.K; ++k) s.q[k] = u(rng);
            const VectorXd row_sums = forward_exposure_matrix(s).rowwise().sum();
            CHECK(row_sums.cwiseAbs().maxCoeff() <= 1e-15);
        }
    }
}

TEST_CASE("exposure report on the three-country sample portfolio") {
    // Assets 35/45/20 with overlay -8/+10/-2 -> currency 27/55/18, V = 10%.
    OverlayStructure s = build_combinatorics(3);
    s.q << -0.08, 0.0, 0.02;  // pairs (0,1), (0,2), (1,2)
    MatrixXd a(1, 3);
    a << 0.35, 0.45, 0.20;

    const ExposureReport rep = exposure_report(a, s);
    CHECK(rep.asset_exposure[0] == doctest::Approx(0.35));
    CHECK(rep.overlay[0] == doctest::Approx(-0.08));
    CHECK(rep.overlay[1] == doctest::Approx(0.10));
    CHECK(rep.overlay[2] == doctest::Approx(-0.02));
    CHECK(rep.currency_exposure[0] == doctest::Approx(0.27));
    CHECK(rep.currency_exposure[1] == doctest::Approx(0.55));
    CHECK(rep.currency_exposure[2] == doctest::Approx(0.18));
    CHECK(rep.total_overlay == doctest::Approx(0.10));
}

TEST_CASE("zero overlay: currency exposure equals asset exposure") {
    OverlayStructure s = build_combinatorics(3);
    MatrixXd a(2, 3);
    a << 0.2, 0.1, 0.15,
         0.3, 0.05, 0.2;
    const ExposureReport rep = exposure_report(a, s);
    CHECK((rep.currency_exposure - rep.asset_exposure).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rep.total_overlay == 0.0);
}

TEST_CASE("carry of the three-contract sample book") {
    // Rates 2/4/1% annual; sell JPY buy USD 1%, sell USD buy GBP 9%,
    // sell GBP buy JPY 2%. Legs +0.18%, +0.01%, -0.06% in contract
    // order, total +0.13%, overlay (-8, +7, +1) with V = 8%.
    OverlayStructure s = build_combinatorics(3);
    VectorXd rates(3);
    rates << 0.02, 0.04, 0.01;
    s.q << -0.09, 0.01, -0.02;

    const CarryReport carry = cost_of_carry(s, rates);
    CHECK(carry.per_contract[0] == doctest::Approx(0.0018).epsilon(1e-12));
    CHECK(carry.per_contract[1] == doctest::Approx(0.0001).epsilon(1e-12));
    CHECK(carry.per_contract[2] == doctest::Approx(-0.0006).epsilon(1e-12));
    CHECK(carry.total == doctest::Approx(0.0013).epsilon(1e-12));

    MatrixXd a = MatrixXd::Zero(1, 3);
    const ExposureReport rep = exposure_report(a, s);
    CHECK(rep.overlay[0] == doctest::Approx(-0.08));
    CHECK(rep.overlay[1] == doctest::Approx(0.07));
    CHECK(rep.overlay[2] == doctest::Approx(0.01));
    CHECK(rep.total_overlay == doctest::Approx(0.08));
}

TEST_CASE("carry is zero without positions") {
    OverlayStructure s = build_combinatorics(4);
    VectorXd rates(4);
    rates << 0.02, 0.01, 0.04, 0.005;
    const CarryReport carry = cost_of_carry(s, rates);
    CHECK(carry.per_contract.cwiseAbs().maxCoeff() == 0.0);
    CHECK(carry.total == 0.0);
}

TEST_CASE("contract-level carry equals overlay-level carry on random books") {
    // The bridge that lets adjusted moments absorb the carry exactly.
    std::mt19937 rng(2026);
    std::uniform_real_distribution<double> uq(-1.0, 1.0);
    std::uniform_real_distribution<double> ur(-0.01, 0.05);
    for (int trial = 0; trial < 1000; ++trial) {
        const int C = 2 + static_cast<int>(rng() % 5);
        OverlayStructure s = build_combinatorics(C);
        for (int k = 0; k < s.K; ++k) s.q[k] = uq(rng);
        VectorXd rates(C);
        for (int j = 0; j < C; ++j) rates[j] = ur(rng);

        const CarryReport carry = cost_of_carry(s, rates);
        const VectorXd overlay = forward_exposure_matrix(s).colwise().sum().transpose();
        CHECK(std::abs(carry.total - overlay.dot(rates)) <= 1e-12);
    }
}

TEST_CASE("forward pricing follows the worked convention") {
    CHECK(forward_rate(1.5000, 0.02, 0.04) == doctest::Approx(1.4712).epsilon(1e-4));
    CHECK(forward_rate(1.2345, 0.03, 0.03) == doctest::Approx(1.2345).epsilon(1e-15));
    CHECK(forward_rate(100.0, 0.01, 0.0) == doctest::Approx(101.0).epsilon(1e-15));
    CHECK_THROWS_AS(forward_rate(-1.0, 0.01, 0.01), DomainError);
}

TEST_CASE("transaction costs: fixed plus proportional") {
    OverlayStructure s = build_combinatorics(4);
    CostModel cm;
    cm.alpha = 0.000001;
    cm.beta = VectorXd::Zero(6);
    cm.beta[0] = 0.000036;  // USDEUR

    SUBCASE("single 10% position") {
        s.q[0] = 0.10;
        std::vector<bool> active{true, false, false, false, false, false};
        const TransactionCost tc = transaction_cost(s, active, cm);
        CHECK(tc.total == doctest::Approx(0.0000046).epsilon(1e-12));
        CHECK(tc.fixed_total == doctest::Approx(0.000001));
        CHECK(tc.spread_total == doctest::Approx(0.0000036));
    }

    SUBCASE("no positions, no cost") {
        std::vector<bool> active(6, false);
        CHECK(transaction_cost(s, active, cm).total == 0.0);
    }

    SUBCASE("doubling sizes doubles only the variable part") {
        s.q[0] = 0.10;
        std::vector<bool> active{true, false, false, false, false, false};
        const TransactionCost tc1 = transaction_cost(s, active, cm);
        s.q[0] = 0.20;
        const TransactionCost tc2 = transaction_cost(s, active, cm);
        CHECK(tc2.spread_total == doctest::Approx(2 * tc1.spread_total));
        CHECK(tc2.fixed_total == tc1.fixed_total);
    }

    SUBCASE("exposure on an inactive contract is a contract violation") {
        s.q[2] = 0.05;
        std::vector<bool> active(6, false);
        CHECK_THROWS_AS(transaction_cost(s, active, cm), ContractViolation);
    }
}

TEST_CASE("margin cash") {
    OverlayStructure s = build_combinatorics(4);

    SUBCASE("direct arithmetic") {
        s.q << 0.2, -0.3, 0, 0, 0, 0;
        CHECK(margin_cash(s, 0.10) == doctest::Approx(0.05).epsilon(1e-15));
        CHECK(margin_cash(s, 0.0) == 0.0);
    }

    SUBCASE("matches an independent summation on random books") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            for (int k = 0; k < s.K; ++k) s.q[k] = u(rng);
            double gross = 0.0;
            for (int k = 0; k < s.K; ++k) gross += std::abs(s.q[k]);
            CHECK(margin_cash(s, 0.10) == doctest::Approx(0.10 * gross).epsilon(1e-15));
        }
    }
}

TEST_CASE("costs are positively homogeneous in the sizes") {
    OverlayStructure s = build_combinatorics(4);
    CostModel cm;
    cm.alpha = 0.000001;
    cm.beta = VectorXd::Constant(6, 0.00005);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
        for (int k = 0; k < s.K; ++k) s.q[k] = u(rng);
        std::vector<bool> active(6, true);
        const double c1 = transaction_cost(s, active, cm).spread_total;
        const double m1 = margin_cash(s, 0.1);
        OverlayStructure s3 = s;
        s3.q *= 3.0;
        CHECK(transaction_cost(s3, active, cm).spread_total == doctest::Approx(3 * c1).epsilon(1e-12));
        CHECK(margin_cash(s3, 0.1) == doctest::Approx(3 * m1).epsilon(1e-12));
    }
}

TEST_CASE("total overlay: permutation invariance and triangle bound") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    OverlayStructure s = build_combinatorics(5);
    for (int trial = 0; trial < 100; ++trial) {
        for (int k = 0; k < s.K; ++k) s.q[k] = u(rng);
        const MatrixXd F = forward_exposure_matrix(s);
        const ExposureReport rep = exposure_report(MatrixXd::Zero(1, 5), s);

        // Summing rows in a shuffled order cannot change the overlay.
        std::vector<int> order(s.K);
        for (int k = 0; k < s.K; ++k) order[k] = k;
        std::shuffle(order.begin(), order.end(), rng);
        VectorXd overlay = VectorXd::Zero(5);
        for (int k : order) overlay += F.row(k).transpose();
        CHECK((overlay - rep.overlay).cwiseAbs().maxCoeff() <= 1e-15);

        CHECK(rep.total_overlay <= s.q.cwiseAbs().sum() + 1e-15);
    }
}

TEST_CASE("any zero-sum overlay is spanned by the base-country star") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int C = 3 + static_cast<int>(rng() % 4);
        OverlayStructure s = build_combinatorics(C);
        VectorXd target(C);
        for (int j = 1; j < C; ++j) target[j] = u(rng);
        target[0] = -target.tail(C - 1).sum();

        s.q = represent_overlay(target, s);
        const VectorXd achieved = forward_exposure_matrix(s).colwise().sum().transpose();
        CHECK((achieved - target).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK((s.q.array() != 0.0).count() <= C - 1);
    }
}

TEST_CASE("spread table loading") {
    const std::string path = "test_spreads_tmp.csv";
    {
        std::ofstream out(path);
        out << "pair,beta\n"
            << "USDEUR,0.0036\nUSDGBP,0.0051\nUSDJPY,0.0050\n"
            << "EURGBP,0.0042\nEURJPY,0.0068\nGBPJPY,0.0122\n";
    }
    const std::vector<std::string> ccys{"USD", "EUR", "GBP", "JPY"};
    const OverlayStructure s = build_combinatorics(4);

    const VectorXd beta = load_spread_table(path, ccys, s.pairs);
    CHECK(beta[0] == doctest::Approx(0.000036).epsilon(1e-15));
    CHECK(beta[5] == doctest::Approx(0.000122).epsilon(1e-15));

    {
        std::ofstream out(path);
        out << "pair,beta\nUSDEUR,0.0036\n";
    }
    CHECK_THROWS_AS(load_spread_table(path, ccys, s.pairs), SchemaError);
    CHECK_THROWS_AS(load_spread_table("does_not_exist.csv", ccys, s.pairs), ParseError);
    std::remove(path.c_str());
}
