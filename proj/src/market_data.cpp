#include "overlay/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace overlay {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

}  // namespace

int DatasetConfig::country_index(const std::string& code) const {
    for (std::size_t j = 0; j < countries.size(); ++j)
        if (countries[j] == code) return static_cast<int>(j);
    return -1;
}

DatasetConfig load_dataset_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    DatasetConfig cfg;
    cfg.countries = j.at("countries").get<std::vector<std::string>>();
    cfg.currencies = j.at("currencies").get<std::vector<std::string>>();
    cfg.asset_classes = j.at("asset_classes").get<std::vector<std::string>>();
    cfg.rate_window_months = j.value("rate_window_months", 12);
    if (j.contains("base_country")) {
        const auto base = j.at("base_country").get<std::string>();
        const int bi = cfg.country_index(base);
        if (bi < 0) throw SchemaError("base_country '" + base + "' not in countries list");
        // Base country always occupies slot 0.
        if (bi != 0) {
            std::rotate(cfg.countries.begin(), cfg.countries.begin() + bi, cfg.countries.begin() + bi + 1);
            std::rotate(cfg.currencies.begin(), cfg.currencies.begin() + bi, cfg.currencies.begin() + bi + 1);
        }
    }
    if (cfg.countries.empty()) throw SchemaError("config lists no countries");
    if (cfg.countries.size() != cfg.currencies.size())
        throw SchemaError("countries and currencies lists differ in length");
    if (cfg.asset_classes.empty()) throw SchemaError("config lists no asset classes");
    if (cfg.rate_window_months < 1) throw DomainError("rate_window_months must be >= 1");
    return cfg;
}

MarketDataSet::MarketDataSet(DatasetConfig config, std::vector<ReturnSeries> series)
    : config_(std::move(config)), series_(std::move(series)) {
    const int C = countries();
    const int A = asset_classes();
    asset_slot_.assign(static_cast<std::size_t>(A) * C, -1);
    ccy_slot_.assign(C, -1);
    rate_slot_.assign(C, -1);

    Eigen::Index len = -1;
    for (std::size_t idx = 0; idx < series_.size(); ++idx) {
        const ReturnSeries& s = series_[idx];
        if (s.values.size() == 0) throw AlignmentError("series '" + s.label + "' is empty");
        if (len < 0) len = s.values.size();
        if (s.values.size() != len)
            throw AlignmentError("series '" + s.label + "' has " + std::to_string(s.values.size()) +
                                 " rows, expected " + std::to_string(len));
        if (s.country < 0 || s.country >= C)
            throw SchemaError("series '" + s.label + "' has out-of-range country index");
        switch (s.kind) {
            case SeriesKind::Asset: {
                if (s.asset_class < 0 || s.asset_class >= A)
                    throw SchemaError("series '" + s.label + "' has out-of-range class index");
                int& slot = asset_slot_[static_cast<std::size_t>(s.asset_class) * C + s.country];
                if (slot >= 0) throw SchemaError("duplicate asset series '" + s.label + "'");
                slot = static_cast<int>(idx);
                break;
            }
            case SeriesKind::Currency: {
                int& slot = ccy_slot_[s.country];
                if (slot >= 0) throw SchemaError("duplicate currency series '" + s.label + "'");
                slot = static_cast<int>(idx);
                break;
            }
            case SeriesKind::Rate: {
                int& slot = rate_slot_[s.country];
                if (slot >= 0) throw SchemaError("duplicate rate series '" + s.label + "'");
                slot = static_cast<int>(idx);
                break;
            }
        }
    }

    for (int i = 0; i < A; ++i)
        for (int j = 0; j < C; ++j)
            if (asset_slot_[static_cast<std::size_t>(i) * C + j] < 0)
                throw SchemaError("missing asset series (" + config_.asset_classes[i] + ", " +
                                  config_.countries[j] + ")");
    for (int j = 0; j < C; ++j) {
        if (rate_slot_[j] < 0)
            throw SchemaError("missing rate series for country " + config_.countries[j]);
        if (ccy_slot_[j] < 0) {
            if (j != 0)
                throw SchemaError("missing currency series " + config_.currencies[j]);
            // Base currency measured against itself: identically zero.
            ReturnSeries zero;
            zero.label = "ccy:" + config_.currencies[0];
            zero.kind = SeriesKind::Currency;
            zero.country = 0;
            zero.values = Eigen::VectorXd::Zero(len);
            zero.period_start = series_.front().period_start;
            zero.period_end = series_.front().period_end;
            ccy_slot_[0] = static_cast<int>(series_.size());
            series_.push_back(std::move(zero));
        }
    }

    const int window = std::min<int>(config_.rate_window_months, static_cast<int>(len));
    expected_rates_.resize(C);
    for (int j = 0; j < C; ++j)
        expected_rates_[j] = rate(j).values.tail(window).mean();
}

const ReturnSeries& MarketDataSet::asset(int klass, int country) const {
    return series_[asset_slot_[static_cast<std::size_t>(klass) * countries() + country]];
}
const ReturnSeries& MarketDataSet::currency(int country) const { return series_[ccy_slot_[country]]; }
const ReturnSeries& MarketDataSet::rate(int country) const { return series_[rate_slot_[country]]; }

MarketDataSet load_dataset(const std::string& csv_path, const DatasetConfig& config) {
    std::ifstream in(csv_path);
    if (!in) throw ParseError("cannot open dataset file: " + csv_path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError(csv_path + ": empty file");
    const auto header = split(line, ',');
    if (header.empty() || header[0] != "month")
        throw SchemaError(csv_path + ": first column must be 'month'");

    const int ncol = static_cast<int>(header.size());
    std::vector<ReturnSeries> series(ncol - 1);
    for (int c = 1; c < ncol; ++c) {
        const auto parts = split(header[c], ':');
        ReturnSeries& s = series[c - 1];
        s.label = header[c];
        if (parts.size() == 3 && parts[0] == "asset") {
            s.kind = SeriesKind::Asset;
            auto it = std::find(config.asset_classes.begin(), config.asset_classes.end(), parts[1]);
            if (it == config.asset_classes.end())
                throw SchemaError(csv_path + ": unknown asset class in column '" + header[c] + "'");
            s.asset_class = static_cast<int>(it - config.asset_classes.begin());
            s.country = config.country_index(parts[2]);
            if (s.country < 0)
                throw SchemaError(csv_path + ": unknown country in column '" + header[c] + "'");
        } else if (parts.size() == 2 && parts[0] == "ccy") {
            s.kind = SeriesKind::Currency;
            auto it = std::find(config.currencies.begin(), config.currencies.end(), parts[1]);
            if (it == config.currencies.end())
                throw SchemaError(csv_path + ": unknown currency in column '" + header[c] + "'");
            s.country = static_cast<int>(it - config.currencies.begin());
        } else if (parts.size() == 2 && parts[0] == "rate") {
            s.kind = SeriesKind::Rate;
            s.country = config.country_index(parts[1]);
            if (s.country < 0)
                throw SchemaError(csv_path + ": unknown country in column '" + header[c] + "'");
        } else {
            throw SchemaError(csv_path + ": unrecognised column '" + header[c] + "'");
        }
    }

    std::vector<std::vector<double>> cols(ncol - 1);
    std::string first_month, last_month;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (static_cast<int>(cells.size()) != ncol)
            throw AlignmentError(csv_path + ": row " + std::to_string(row) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(ncol));
        if (first_month.empty()) first_month = cells[0];
        last_month = cells[0];
        for (int c = 1; c < ncol; ++c) {
            std::size_t pos = 0;
            double v = 0;
            try {
                v = std::stod(cells[c], &pos);
            } catch (const std::exception&) {
                pos = std::string::npos;
            }
            if (pos != cells[c].size() || cells[c].empty())
                throw ParseError(csv_path + ": non-numeric cell at row " + std::to_string(row) +
                                 ", column '" + header[c] + "'");
            cols[c - 1].push_back(v);
        }
    }
    if (cols.empty() || cols[0].empty()) throw ParseError(csv_path + ": no data rows");

    for (int c = 1; c < ncol; ++c) {
        series[c - 1].values =
            Eigen::Map<const Eigen::VectorXd>(cols[c - 1].data(), static_cast<Eigen::Index>(cols[c - 1].size()));
        series[c - 1].period_start = first_month;
        series[c - 1].period_end = last_month;
    }
    return MarketDataSet(config, std::move(series));
}

MarketDataSet load_dataset(const std::string& csv_path, const std::string& config_path) {
    return load_dataset(csv_path, load_dataset_config(config_path));
}

AdjustedSeries adjust_series(const MarketDataSet& data) {
    const int C = data.countries();
    const int A = data.asset_classes();
    const int n = data.months();
    const int dim = A * C + C;

    AdjustedSeries out;
    out.values.resize(n, dim);
    out.raw_means.resize(dim);
    out.labels.resize(dim);

    for (int i = 0; i < A; ++i) {
        for (int j = 0; j < C; ++j) {
            const int col = AdjustedMoments::asset_index(i, j, C);
            out.values.col(col) = data.asset(i, j).values - data.rate(j).values;
            out.raw_means[col] = data.asset(i, j).values.mean();
            out.labels[col] = data.asset(i, j).label;
        }
    }
    for (int j = 0; j < C; ++j) {
        const int col = AdjustedMoments::currency_index(j, A, C);
        out.values.col(col) = data.currency(j).values + data.rate(j).values;
        out.raw_means[col] = data.currency(j).values.mean();
        out.labels[col] = data.currency(j).label;
    }
    return out;
}

Eigen::VectorXd adjusted_return_vector(const Eigen::VectorXd& raw_means,
                                       const Eigen::VectorXd& expected_rates, int A, int C) {
    if (raw_means.size() != A * C + C || expected_rates.size() != C)
        throw ContractViolation("adjusted_return_vector: dimension mismatch");
    Eigen::VectorXd r(raw_means.size());
    for (int i = 0; i < A; ++i)
        for (int j = 0; j < C; ++j)
            r[AdjustedMoments::asset_index(i, j, C)] =
                raw_means[AdjustedMoments::asset_index(i, j, C)] - expected_rates[j];
    for (int j = 0; j < C; ++j)
        r[AdjustedMoments::currency_index(j, A, C)] =
            raw_means[AdjustedMoments::currency_index(j, A, C)] + expected_rates[j];
    return r;
}

AdjustedMoments estimate_moments(const AdjustedSeries& adjusted,
                                 const Eigen::VectorXd& expected_rates, int A, int C) {
    const Eigen::Index n = adjusted.values.rows();
    if (n < 3)
        throw InsufficientDataError("need at least 3 observations, got " + std::to_string(n));

    AdjustedMoments m;
    m.labels = adjusted.labels;
    m.n_obs = static_cast<int>(n);
    m.r = adjusted_return_vector(adjusted.raw_means, expected_rates, A, C);

    const Eigen::MatrixXd centered = adjusted.values.rowwise() - adjusted.values.colwise().mean();
    Eigen::MatrixXd omega = (centered.transpose() * centered) / static_cast<double>(n - 1);
    omega = ((omega + omega.transpose()) / 2.0).eval();
    m.omega = psd_repair(omega, &m.repair);
    return m;
}

Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& omega, PsdRepairInfo* info) {
    if (omega.rows() != omega.cols()) throw ContractViolation("psd_repair: matrix not square");
    const double asym = (omega - omega.transpose()).cwiseAbs().maxCoeff();
    if (asym >= 1e-12)
        throw ContractViolation("psd_repair: matrix not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(omega);
    const double min_eig = eig.eigenvalues().minCoeff();
    if (info) {
        info->min_eigenvalue_before = min_eig;
        info->changed = false;
        info->frobenius_delta = 0.0;
    }
    if (min_eig >= -1e-10) return omega;

    Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd repaired =
        eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    repaired = ((repaired + repaired.transpose()) / 2.0).eval();
    if (info) {
        info->changed = true;
        info->frobenius_delta = (repaired - omega).norm();
    }
    return repaired;
}

int AdjustedMoments::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    throw DomainError("unknown series label '" + label + "'");
}

AdjustedMoments compute_moments(const MarketDataSet& data) {
    return estimate_moments(adjust_series(data), data.expected_rates(), data.asset_classes(),
                            data.countries());
}

}  // namespace overlay
