#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixture_env.hpp"
#include "overlay/frontier.hpp"

using namespace overlay;

namespace {

const Frontier& coarse_frontier() {
    static const Frontier f = sweep(fixture_moments(), fixture_spec(), 0.006, 0.014, 0.001, 1);
    return f;
}

}  // namespace

TEST_CASE("grid arithmetic") {
    CHECK(make_grid(0.005, 0.018, 0.0001).size() == 131);
    CHECK(make_grid(0.012, 0.012, 0.0001).size() == 1);
    const auto grid = make_grid(0.005, 0.018, 0.0001);
    CHECK(grid.front() == doctest::Approx(0.005));
    CHECK(grid.back() == doctest::Approx(0.018));
    CHECK_THROWS_AS(make_grid(0.01, 0.02, 0.0), DomainError);
    CHECK_THROWS_AS(make_grid(0.02, 0.01, 0.001), DomainError);
}

TEST_CASE("coarse fixture sweep is sane") {
    const Frontier& f = coarse_frontier();
    REQUIRE(f.points.size() == 9);

    int optimal = 0;
    for (const FrontierPoint& p : f.points) {
        if (p.status != SolveStatus::Optimal) continue;
        ++optimal;
        double assets = 0.0;
        for (double t : p.class_totals) assets += t;
        CHECK(assets + p.cash == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(p.volatility >= 0.0);
        CHECK(p.total_overlay >= -1e-12);
        CHECK(p.total_overlay <= f.spec.V_u + 1e-9);
    }
    CHECK(optimal >= 7);

    // Volatility is non-decreasing above the minimum-variance point.
    int min_idx = 0;
    for (int i = 1; i < 9; ++i)
        if (f.points[i].status == SolveStatus::Optimal &&
            f.points[i].volatility < f.points[min_idx].volatility)
            min_idx = i;
    for (int i = min_idx + 1; i < 9; ++i) {
        if (f.points[i].status != SolveStatus::Optimal) continue;
        CHECK(f.points[i].volatility >= f.points[i - 1].volatility - 1e-9);
    }
}

TEST_CASE("parallel sweep replicates the serial reference exactly") {
    const Frontier serial = coarse_frontier();
    const Frontier parallel = sweep(fixture_moments(), fixture_spec(), 0.006, 0.014, 0.001, 2);
    REQUIRE(serial.points.size() == parallel.points.size());
    for (std::size_t i = 0; i < serial.points.size(); ++i) {
        CHECK(serial.points[i].status == parallel.points[i].status);
        if (serial.points[i].status != SolveStatus::Optimal) continue;
        CHECK(serial.points[i].volatility == parallel.points[i].volatility);  // bitwise
        CHECK(serial.points[i].total_overlay == parallel.points[i].total_overlay);
        CHECK(serial.points[i].cash == parallel.points[i].cash);
    }
}

TEST_CASE("unreachable targets stay in the output as infeasible rows") {
    const Frontier f = sweep(fixture_moments(), fixture_spec(), 0.030, 0.036, 0.002, 1);
    CHECK(f.points.size() == 4);
    int infeasible = 0;
    for (const FrontierPoint& p : f.points)
        if (p.status == SolveStatus::Infeasible) ++infeasible;
    CHECK(infeasible >= 1);
    CHECK(f.points.back().status == SolveStatus::Infeasible);
}

TEST_CASE("two-stage frontier is dominated by the unified one") {
    ProblemSpec two_stage = fixture_spec();
    two_stage.mode = OptimisationMode::TwoStage;
    const Frontier twostage = sweep(fixture_moments(), two_stage, 0.007, 0.013, 0.002, 1);
    const Frontier unified = sweep(fixture_moments(), fixture_spec(), 0.007, 0.013, 0.002, 1);

    int compared = 0;
    for (std::size_t i = 0; i < unified.points.size(); ++i) {
        if (unified.points[i].status != SolveStatus::Optimal) continue;
        if (twostage.points[i].status != SolveStatus::Optimal) continue;
        ++compared;
        CHECK(unified.points[i].volatility <= twostage.points[i].volatility + 1e-8);
    }
    CHECK(compared >= 2);
}

TEST_CASE("relative volatility series") {
    const Frontier& f = coarse_frontier();

    SUBCASE("a frontier against itself is identically zero") {
        const auto rel = relative_volatility_increase(f, f);
        for (const auto& cell : rel) {
            if (!cell) continue;
            CHECK(*cell == doctest::Approx(0.0));
        }
    }

    SUBCASE("hand arithmetic") {
        Frontier base = f, other = f;
        base.points[0].status = SolveStatus::Optimal;
        other.points[0].status = SolveStatus::Optimal;
        base.points[0].volatility = 0.02;
        other.points[0].volatility = 0.023;
        const auto rel = relative_volatility_increase(base, other);
        REQUIRE(rel[0].has_value());
        CHECK(*rel[0] == doctest::Approx(15.0).epsilon(1e-12));
    }

    SUBCASE("grid mismatch is a contract violation") {
        Frontier other = sweep(fixture_moments(), fixture_spec(), 0.006, 0.012, 0.001, 1);
        CHECK_THROWS_AS(relative_volatility_increase(f, other), ContractViolation);
    }

    SUBCASE("non-optimal cells are absent") {
        Frontier other = f;
        other.points[2].status = SolveStatus::Infeasible;
        const auto rel = relative_volatility_increase(f, other);
        CHECK(!rel[2].has_value());
    }
}

TEST_CASE("experiment presets") {
    SUBCASE("unknown name lists the valid ones") {
        try {
            run_experiment("volatility_targeting", fixture_moments(), fixture_spec(), 0.01, 0.01,
                           0.001, 1);
            FAIL("expected DomainError");
        } catch (const DomainError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("margin") != std::string::npos);
            CHECK(msg.find("cardinality") != std::string::npos);
        }
    }

    SUBCASE("margin grid has seven cells with the no-margin base") {
        const ExperimentResult r = run_experiment("margin", fixture_moments(), fixture_spec(),
                                                  0.009, 0.011, 0.002, 0);
        REQUIRE(r.cells.size() == 7);
        CHECK(r.base_cell == 0);
        CHECK(r.cells[0].name == "M_0");
        CHECK(r.cells[0].spec.cost.margin_rate == 0.0);
        CHECK(r.cells[6].name == "M_0.5");
        CHECK(r.cells[6].spec.cost.margin_rate == 0.5);
        for (const auto& cell : r.cells) CHECK(cell.frontier.points.size() == 2);

        // Tighter margin cannot help: volatility non-decreasing in M.
        for (std::size_t i = 1; i < r.cells.size(); ++i)
            for (std::size_t p = 0; p < 2; ++p) {
                const FrontierPoint& lo = r.cells[i - 1].frontier.points[p];
                const FrontierPoint& hi = r.cells[i].frontier.points[p];
                if (lo.status != SolveStatus::Optimal || hi.status != SolveStatus::Optimal)
                    continue;
                CHECK(hi.volatility >= lo.volatility - 1e-8);
            }
    }

    SUBCASE("cardinality grid spans G = 0..6") {
        const ExperimentResult r = run_experiment("cardinality", fixture_moments(), fixture_spec(),
                                                  0.010, 0.010, 0.001, 0);
        REQUIRE(r.cells.size() == 7);
        CHECK(r.cells[0].spec.G == 0);
        CHECK(r.cells[6].spec.G == 6);
        CHECK(r.base_cell == 6);
    }

    SUBCASE("approach and hedging have no relative base") {
        const ExperimentResult a = run_experiment("approach", fixture_moments(), fixture_spec(),
                                                  0.010, 0.010, 0.001, 0);
        CHECK(a.cells.size() == 2);
        CHECK(a.base_cell == -1);
        const ExperimentResult h = run_experiment("hedging", fixture_moments(), fixture_spec(),
                                                  0.010, 0.010, 0.001, 0);
        CHECK(h.cells.size() == 3);
        CHECK(h.cells[0].name == "fully_hedged");
    }
}

TEST_CASE("frontier CSV bytes are deterministic and carry every row") {
    const Frontier& f = coarse_frontier();
    const std::string text1 = frontier_csv_text(f);
    const std::string text2 = frontier_csv_text(f);
    CHECK(text1 == text2);

    std::istringstream in(text1);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "mu,volatility,status,V,overlay_USD,overlay_EUR,overlay_GBP,overlay_JPY,"
          "bond_total,equity_total,cash,active_forwards,cost_paid");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 9);

    // Infeasible rows keep their slot with empty numeric cells.
    Frontier with_gap = f;
    with_gap.points[4].status = SolveStatus::Infeasible;
    with_gap.points[4].status_detail = "stage1";
    const std::string gap_text = frontier_csv_text(with_gap);
    CHECK(gap_text.find("infeasible_stage1") != std::string::npos);
}

TEST_CASE("manifest is valid JSON with the run parameters") {
    const Frontier& f = coarse_frontier();
    const std::string path = "manifest_tmp.json";
    write_manifest(f, 1.25, path);
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    CHECK(j.at("grid").at("points").get<int>() == 9);
    CHECK(j.at("tolerances").at("feasibility").get<double>() == 1e-8);
    CHECK(j.at("spec_hash").get<std::string>() == spec_hash(f.spec));
    CHECK(j.contains("runtime_seconds"));
    std::remove(path.c_str());
}

TEST_CASE("spec hash distinguishes parameter changes") {
    ProblemSpec a = fixture_spec();
    ProblemSpec b = fixture_spec();
    b.V_u = 0.5;
    CHECK(spec_hash(a) == spec_hash(fixture_spec()));
    CHECK(spec_hash(a) != spec_hash(b));
}
