#include "overlay/fixture.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "overlay/errors.hpp"

namespace overlay::fixture {

namespace {

// Standard normals via explicit Box-Muller so the stream depends only on
// the mt19937 sequence, which the standard pins down exactly.
class NormalStream {
public:
    explicit NormalStream(unsigned seed) : rng_(seed) {}

    double next() {
        const double u1 = (static_cast<double>(rng_()) + 0.5) / 4294967296.0;
        const double u2 = (static_cast<double>(rng_()) + 0.5) / 4294967296.0;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937 rng_;
};

struct SeriesSpec {
    double mean;       // adjusted mean, decimal per month
    double vol;        // adjusted volatility, decimal per month
    double load_group; // factor loading within the asset family
    double load_glob;
};

std::string month_stamp(int index) {
    const int year = 2000 + index / 12;
    const int month = index % 12 + 1;
    char buf[8];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
}

}  // namespace

std::string returns_csv_text(unsigned seed) {
    constexpr int kMonths = 150;  // 2000-01 through 2012-06
    constexpr int kCountries = 4;

    // Monthly percent levels converted to decimals.
    const double rate_level[kCountries] = {0.00004, 0.00012, 0.00053, 0.00008};

    // bond, equity per country; then the three foreign currencies.
    const SeriesSpec bonds[kCountries] = {
        {0.00446, 0.01003, 0.55, 0.25},
        {0.00408, 0.00833, 0.55, 0.25},
        {0.00457, 0.00893, 0.55, 0.25},
        {0.00132, 0.00478, 0.55, 0.25},
    };
    const SeriesSpec equities[kCountries] = {
        {0.01426, 0.04692, 0.55, 0.35},
        {0.00948, 0.06714, 0.55, 0.35},
        {0.01007, 0.04297, 0.55, 0.35},
        {0.00752, 0.05828, 0.55, 0.35},
    };
    const SeriesSpec currencies[3] = {  // EUR, GBP, JPY against USD
        {0.00902, 0.03203, 0.60, 0.10},
        {0.00593, 0.02870, 0.60, 0.10},
        {0.00018, 0.02567, 0.60, 0.10},
    };

    NormalStream normals(seed);

    // Rate paths: persistent AR(1) around the level with level-sized
    // innovations, floored at zero so yields stay plausible.
    std::vector<std::vector<double>> rates(kCountries, std::vector<double>(kMonths));
    {
        double state[kCountries] = {0, 0, 0, 0};
        for (int t = 0; t < kMonths; ++t) {
            for (int j = 0; j < kCountries; ++j) {
                state[j] = 0.95 * state[j] + 0.15 * rate_level[j] * normals.next();
                rates[j][t] = std::max(0.0, rate_level[j] + state[j]);
            }
        }
    }

    std::ostringstream out;
    out << "month";
    const char* country[kCountries] = {"US", "DE", "UK", "JP"};
    const char* ccy[3] = {"EUR", "GBP", "JPY"};
    for (int j = 0; j < kCountries; ++j) out << ",asset:bond:" << country[j];
    for (int j = 0; j < kCountries; ++j) out << ",asset:equity:" << country[j];
    for (int c = 0; c < 3; ++c) out << ",ccy:" << ccy[c];
    for (int j = 0; j < kCountries; ++j) out << ",rate:" << country[j];
    out << '\n';

    auto emit = [&out](double v) {
        char buf[24];
        std::snprintf(buf, sizeof buf, ",%.8f", v);
        out << buf;
    };

    for (int t = 0; t < kMonths; ++t) {
        const double f_glob = normals.next();
        const double f_bond = normals.next();
        const double f_eq = normals.next();
        const double f_fx = normals.next();

        double adj_bond[kCountries], adj_eq[kCountries], adj_fx[3];
        for (int j = 0; j < kCountries; ++j) {
            const SeriesSpec& s = bonds[j];
            const double idio = std::sqrt(1.0 - s.load_group * s.load_group -
                                          s.load_glob * s.load_glob);
            adj_bond[j] = s.mean + s.vol * (s.load_group * f_bond + s.load_glob * f_glob +
                                            idio * normals.next());
        }
        for (int j = 0; j < kCountries; ++j) {
            const SeriesSpec& s = equities[j];
            const double idio = std::sqrt(1.0 - s.load_group * s.load_group -
                                          s.load_glob * s.load_glob);
            adj_eq[j] = s.mean + s.vol * (s.load_group * f_eq + s.load_glob * f_glob +
                                          idio * normals.next());
        }
        for (int c = 0; c < 3; ++c) {
            const SeriesSpec& s = currencies[c];
            const double idio = std::sqrt(1.0 - s.load_group * s.load_group -
                                          s.load_glob * s.load_glob);
            adj_fx[c] = s.mean + s.vol * (s.load_group * f_fx + s.load_glob * f_glob +
                                          idio * normals.next());
        }

        out << month_stamp(t);
        // Raw asset return carries the local rate; raw currency return
        // sheds it (the loader's adjustment reverses both).
        for (int j = 0; j < kCountries; ++j) emit(adj_bond[j] + rates[j][t]);
        for (int j = 0; j < kCountries; ++j) emit(adj_eq[j] + rates[j][t]);
        for (int c = 0; c < 3; ++c) emit(adj_fx[c] - rates[c + 1][t]);
        for (int j = 0; j < kCountries; ++j) emit(rates[j][t]);
        out << '\n';
    }
    return out.str();
}

std::string config_json_text() {
    return R"({
  "countries": ["US", "DE", "UK", "JP"],
  "currencies": ["USD", "EUR", "GBP", "JPY"],
  "asset_classes": ["bond", "equity"],
  "base_country": "US",
  "rate_window_months": 12
}
)";
}

std::string spreads_csv_text() {
    return "pair,beta\n"
           "USDEUR,0.0036\n"
           "USDGBP,0.0051\n"
           "USDJPY,0.0050\n"
           "EURGBP,0.0042\n"
           "EURJPY,0.0068\n"
           "GBPJPY,0.0122\n";
}

void write_all(const std::string& dir, unsigned seed) {
    auto write = [&dir](const std::string& name, const std::string& body) {
        const std::string path = dir + "/" + name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write " + path);
        out << body;
    };
    write("fixture_returns.csv", returns_csv_text(seed));
    write("fixture_config.json", config_json_text());
    write("spreads.csv", spreads_csv_text());
}

}  // namespace overlay::fixture
