#pragma once

#include <string>

#include "overlay/market_data.hpp"
#include "overlay/overlay_model.hpp"
#include "overlay/problem_builder.hpp"

// Paths and cached objects for the bundled fixture dataset.

inline std::string fixture_dir() { return FIXTURE_DIR; }
inline std::string fixture_returns_path() { return fixture_dir() + "/fixture_returns.csv"; }
inline std::string fixture_config_path() { return fixture_dir() + "/fixture_config.json"; }
inline std::string fixture_spreads_path() { return fixture_dir() + "/spreads.csv"; }

inline const overlay::MarketDataSet& fixture_dataset() {
    static const overlay::MarketDataSet data =
        overlay::load_dataset(fixture_returns_path(), fixture_config_path());
    return data;
}

inline const overlay::AdjustedMoments& fixture_moments() {
    static const overlay::AdjustedMoments moments = overlay::compute_moments(fixture_dataset());
    return moments;
}

/// Default parameters over the fixture universe with the bundled spread
/// table loaded.
inline overlay::ProblemSpec fixture_spec() {
    using namespace overlay;
    ProblemSpec spec = ProblemSpec::defaults(4, 2);
    spec.country_labels = {"US", "DE", "UK", "JP"};
    spec.currency_labels = {"USD", "EUR", "GBP", "JPY"};
    spec.class_labels = {"bond", "equity"};
    spec.cost.beta = load_spread_table(fixture_spreads_path(), spec.currency_labels,
                                       build_combinatorics(4).pairs);
    return spec;
}
