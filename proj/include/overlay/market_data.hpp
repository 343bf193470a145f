#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "overlay/errors.hpp"

namespace overlay {

enum class SeriesKind { Asset, Currency, Rate };

/// One aligned monthly return/yield series. Values are decimal fractions
/// (0.01 = 1%); rate series hold monthly yields (annual yield / 12).
struct ReturnSeries {
    std::string label;
    SeriesKind kind = SeriesKind::Asset;
    int country = -1;      // 0-based country index, 0 = base
    int asset_class = -1;  // 0-based class index, assets only
    Eigen::VectorXd values;
    std::string period_start;  // YYYY-MM
    std::string period_end;
};

/// Column mapping and estimation options for a dataset.
struct DatasetConfig {
    std::vector<std::string> countries;     // country codes, [0] = base
    std::vector<std::string> currencies;    // parallel currency codes
    std::vector<std::string> asset_classes; // risky classes only (no cash)
    int rate_window_months = 12;            // trailing window for expected rates

    int country_index(const std::string& code) const;
};

/// Load the JSON config mapping described in the README ("countries",
/// "currencies", "asset_classes", "base_country", "rate_window_months").
DatasetConfig load_dataset_config(const std::string& path);

/// Aligned raw series for one investment universe. One asset series per
/// (class, country), one currency and one rate series per country; the
/// base-currency series is identically zero (it is created on load when
/// the file omits it).
class MarketDataSet {
public:
    MarketDataSet(DatasetConfig config, std::vector<ReturnSeries> series);

    int countries() const { return static_cast<int>(config_.countries.size()); }
    int asset_classes() const { return static_cast<int>(config_.asset_classes.size()); }
    int months() const { return static_cast<int>(rate(0).values.size()); }

    const DatasetConfig& config() const { return config_; }
    const ReturnSeries& asset(int klass, int country) const;
    const ReturnSeries& currency(int country) const;
    const ReturnSeries& rate(int country) const;

    /// Mean of each country's rate series over the trailing config window.
    const Eigen::VectorXd& expected_rates() const { return expected_rates_; }

private:
    DatasetConfig config_;
    std::vector<ReturnSeries> series_;
    std::vector<int> asset_slot_;  // klass*C + country -> series index
    std::vector<int> ccy_slot_;
    std::vector<int> rate_slot_;
    Eigen::VectorXd expected_rates_;
};

/// Parse the dataset CSV (first column `month`, remaining columns named
/// `asset:<class>:<country>`, `ccy:<currency>` or `rate:<country>`) and
/// validate it against the config.
MarketDataSet load_dataset(const std::string& csv_path, const DatasetConfig& config);
MarketDataSet load_dataset(const std::string& csv_path, const std::string& config_path);

/// Matrix of carry-adjusted series, one column per entry of the moments
/// vector: assets ordered class-major then country, followed by one
/// currency column per country. Column means of the *raw* series ride
/// along because expected returns are estimated over a different window
/// than the covariance.
struct AdjustedSeries {
    Eigen::MatrixXd values;  // months x (A*C + C)
    Eigen::VectorXd raw_means;
    std::vector<std::string> labels;
};

/// Fold the local rate into each series: assets lose it, currencies gain
/// it; the base currency column becomes the base rate series itself.
AdjustedSeries adjust_series(const MarketDataSet& data);

struct PsdRepairInfo {
    bool changed = false;
    double min_eigenvalue_before = 0.0;
    double frobenius_delta = 0.0;
};

/// Adjusted expected returns and covariance in the fixed ordering:
/// position of (class i, country j) is i*C + j, currencies at A*C + j.
struct AdjustedMoments {
    Eigen::VectorXd r;
    Eigen::MatrixXd omega;
    std::vector<std::string> labels;
    int n_obs = 0;
    PsdRepairInfo repair;

    int index_of(const std::string& label) const;
    static int asset_index(int klass, int country, int C) { return klass * C + country; }
    static int currency_index(int country, int A, int C) { return A * C + country; }
};

/// Expected-return vector from raw means and expected rates; assets are
/// shifted down by the local rate, currencies up.
Eigen::VectorXd adjusted_return_vector(const Eigen::VectorXd& raw_means,
                                       const Eigen::VectorXd& expected_rates, int A, int C);

/// Sample moments over the adjusted series (n-1 covariance divisor),
/// followed by psd_repair.
AdjustedMoments estimate_moments(const AdjustedSeries& adjusted,
                                 const Eigen::VectorXd& expected_rates, int A, int C);

/// Clip negative eigenvalues to zero. Returns the input unchanged when
/// the smallest eigenvalue is already >= -1e-10.
Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& omega, PsdRepairInfo* info = nullptr);

/// Convenience: load + adjust + estimate.
AdjustedMoments compute_moments(const MarketDataSet& data);

}  // namespace overlay
