#pragma once

#include <string>

namespace overlay::fixture {

/// Seed of the bundled dataset under data/. Regenerating with this seed
/// reproduces the committed files byte for byte.
inline constexpr unsigned kDefaultSeed = 20120601;

/// Four countries (US base, DE, UK, JP), two risky classes (bond,
/// equity), 150 months of synthetic returns from a fixed-seed factor
/// model whose means and volatilities track the documented monthly
/// summary statistics. The text is fully deterministic in the seed.
std::string returns_csv_text(unsigned seed = kDefaultSeed);

/// Column-mapping config for the fixture CSV.
std::string config_json_text();

/// Average 1-month forward percent spreads for the six currency pairs
/// (percent of ask price).
std::string spreads_csv_text();

/// Write returns CSV, config JSON and spread CSV into dir using the
/// canonical file names (fixture_returns.csv, fixture_config.json,
/// spreads.csv).
void write_all(const std::string& dir, unsigned seed = kDefaultSeed);

}  // namespace overlay::fixture
