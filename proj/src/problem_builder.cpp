#include "overlay/problem_builder.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace overlay {

const char* to_string(HedgingPolicy policy) {
    switch (policy) {
        case HedgingPolicy::Unrestricted: return "unrestricted";
        case HedgingPolicy::FullyHedged: return "fully_hedged";
        case HedgingPolicy::ForeignOnly: return "foreign_only";
    }
    return "unknown";
}

const char* to_string(OptimisationMode mode) {
    return mode == OptimisationMode::Unified ? "unified" : "two_stage";
}

HedgingPolicy hedging_policy_from_string(const std::string& name) {
    if (name == "unrestricted") return HedgingPolicy::Unrestricted;
    if (name == "fully_hedged") return HedgingPolicy::FullyHedged;
    if (name == "foreign_only") return HedgingPolicy::ForeignOnly;
    throw DomainError("unknown hedging policy '" + name +
                      "' (expected unrestricted, fully_hedged or foreign_only)");
}

OptimisationMode mode_from_string(const std::string& name) {
    if (name == "unified") return OptimisationMode::Unified;
    if (name == "two_stage") return OptimisationMode::TwoStage;
    throw DomainError("unknown mode '" + name + "' (expected unified or two_stage)");
}

ProblemSpec ProblemSpec::defaults(int countries, int classes) {
    ProblemSpec spec;
    spec.countries_n = countries;
    spec.classes_n = classes;
    const int K = spec.K();
    spec.E_l = Eigen::VectorXd::Zero(countries);
    spec.E_u = Eigen::VectorXd::Ones(countries);
    spec.l = Eigen::VectorXd::Constant(K, -1.0);
    spec.u = Eigen::VectorXd::Ones(K);
    spec.G = K;
    spec.cost.alpha = 0.000001;  // 0.0001% of portfolio value
    spec.cost.beta = Eigen::VectorXd::Zero(K);
    spec.cost.margin_rate = 0.10;
    for (int j = 0; j < countries; ++j) {
        spec.country_labels.push_back("C" + std::to_string(j + 1));
        spec.currency_labels.push_back("CCY" + std::to_string(j + 1));
    }
    for (int i = 0; i < classes; ++i) spec.class_labels.push_back("class" + std::to_string(i + 1));
    return spec;
}

void ProblemSpec::validate() const {
    if (countries_n < 1) throw DomainError("spec: need at least one country");
    if (classes_n < 1) throw DomainError("spec: need at least one asset class");
    if (base_country < 0 || base_country >= countries_n)
        throw DomainError("spec: base_country out of range");
    const int K = this->K();
    if (E_l.size() != countries_n || E_u.size() != countries_n)
        throw DomainError("spec: E_l/E_u must have one entry per country");
    if ((E_l.array() > E_u.array()).any()) throw DomainError("spec: E_l must be <= E_u");
    if (l.size() != K || u.size() != K) throw DomainError("spec: l/u must have one entry per contract");
    if ((l.array() > 0).any() || (u.array() < 0).any())
        throw DomainError("spec: contract bounds must satisfy l <= 0 <= u");
    if (G < 0 || G > K) throw DomainError("spec: G must be in [0, K]");
    if (V_u < 0 || V_u > 1) throw DomainError("spec: V_u must be in [0, 1]");
    if (!std::isfinite(mu)) throw DomainError("spec: mu must be finite");
    cost.validate(K);
    if (static_cast<int>(country_labels.size()) != countries_n ||
        static_cast<int>(currency_labels.size()) != countries_n)
        throw DomainError("spec: country/currency labels out of sync");
    if (static_cast<int>(class_labels.size()) != classes_n)
        throw DomainError("spec: class labels out of sync");
}

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j, Eigen::Index size,
                                 const std::string& key) {
    if (j.is_number()) return Eigen::VectorXd::Constant(size, j.get<double>());
    const auto vals = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(vals.size()) != size)
        throw DomainError("spec key '" + key + "' has wrong length");
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), size);
}

}  // namespace

void to_json(nlohmann::json& j, const ProblemSpec& spec) {
    j = nlohmann::json{
        {"countries", spec.country_labels},
        {"currencies", spec.currency_labels},
        {"asset_classes", spec.class_labels},
        {"base_country", spec.country_labels.empty() ? "" : spec.country_labels[spec.base_country]},
        {"mu", spec.mu},
        {"V_u", spec.V_u},
        {"E_l", std::vector<double>(spec.E_l.data(), spec.E_l.data() + spec.E_l.size())},
        {"E_u", std::vector<double>(spec.E_u.data(), spec.E_u.data() + spec.E_u.size())},
        {"l", std::vector<double>(spec.l.data(), spec.l.data() + spec.l.size())},
        {"u", std::vector<double>(spec.u.data(), spec.u.data() + spec.u.size())},
        {"G", spec.G},
        {"M", spec.cost.margin_rate},
        {"alpha", spec.cost.alpha},
        {"beta",
         std::vector<double>(spec.cost.beta.data(), spec.cost.beta.data() + spec.cost.beta.size())},
        {"policy", to_string(spec.policy)},
        {"mode", to_string(spec.mode)},
        {"no_short_assets", spec.no_short_assets},
    };
}

void from_json(const nlohmann::json& j, ProblemSpec& spec) {
    const auto countries = j.at("countries").get<std::vector<std::string>>();
    const auto classes = j.at("asset_classes").get<std::vector<std::string>>();
    spec = ProblemSpec::defaults(static_cast<int>(countries.size()),
                                 static_cast<int>(classes.size()));
    spec.country_labels = countries;
    spec.class_labels = classes;
    if (j.contains("currencies"))
        spec.currency_labels = j.at("currencies").get<std::vector<std::string>>();
    else
        spec.currency_labels = countries;
    if (j.contains("base_country")) {
        const auto base = j.at("base_country").get<std::string>();
        spec.base_country = -1;
        for (std::size_t i = 0; i < countries.size(); ++i)
            if (countries[i] == base) spec.base_country = static_cast<int>(i);
        if (spec.base_country < 0) throw DomainError("spec: base_country not in countries");
    }
    const int C = spec.countries_n;
    const int K = spec.K();
    if (j.contains("mu")) spec.mu = j.at("mu").get<double>();
    if (j.contains("V_u")) spec.V_u = j.at("V_u").get<double>();
    if (j.contains("E_l")) spec.E_l = vector_from_json(j.at("E_l"), C, "E_l");
    if (j.contains("E_u")) spec.E_u = vector_from_json(j.at("E_u"), C, "E_u");
    if (j.contains("l")) spec.l = vector_from_json(j.at("l"), K, "l");
    if (j.contains("u")) spec.u = vector_from_json(j.at("u"), K, "u");
    if (j.contains("G")) spec.G = j.at("G").get<int>();
    if (j.contains("M")) spec.cost.margin_rate = j.at("M").get<double>();
    if (j.contains("alpha")) spec.cost.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) spec.cost.beta = vector_from_json(j.at("beta"), K, "beta");
    if (j.contains("policy")) spec.policy = hedging_policy_from_string(j.at("policy").get<std::string>());
    if (j.contains("mode")) spec.mode = mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("no_short_assets")) spec.no_short_assets = j.at("no_short_assets").get<bool>();
    spec.validate();
}

ProblemSpec load_problem_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open spec file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("spec " + path + ": " + e.what());
    }
    return j.get<ProblemSpec>();
}

int VarMap::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    throw DomainError("unknown variable '" + name + "'");
}

namespace {

VarMap make_var_map(const ProblemSpec& spec, const OverlayStructure& s) {
    VarMap m;
    m.A = spec.classes_n;
    m.C = spec.countries_n;
    m.K = s.K;
    m.n_cont = m.A * m.C + 1 + 2 * m.K + m.C;
    m.n_bin = 2 * m.K;
    m.n = m.n_cont + m.n_bin;

    m.names.resize(m.n);
    for (int i = 0; i < m.A; ++i)
        for (int j = 0; j < m.C; ++j)
            m.names[m.a(i, j)] = "a:" + spec.class_labels[i] + ":" + spec.country_labels[j];
    m.names[m.cash()] = "cash";
    auto pair_name = [&](int k) {
        return spec.currency_labels[s.pairs[k].first] + spec.currency_labels[s.pairs[k].second];
    };
    for (int k = 0; k < m.K; ++k) {
        m.names[m.q_pos(k)] = "qp:" + pair_name(k);
        m.names[m.q_neg(k)] = "qm:" + pair_name(k);
        m.names[m.b(k)] = "b:" + pair_name(k);
        m.names[m.s(k)] = "s:" + pair_name(k);
    }
    for (int j = 0; j < m.C; ++j) m.names[m.t(j)] = "t:" + spec.country_labels[j];
    return m;
}

}  // namespace

MixedBinaryQP assemble(const AdjustedMoments& moments, const ProblemSpec& spec) {
    spec.validate();
    const int A = spec.classes_n;
    const int C = spec.countries_n;
    if (moments.r.size() != A * C + C)
        throw DomainError("assemble: moments dimension does not match spec (expected " +
                          std::to_string(A * C + C) + ", got " + std::to_string(moments.r.size()) +
                          ")");

    // Static contradictions that no target can repair.
    if (spec.E_l.sum() > 1.0 + 1e-12)
        throw InfeasibleSpecError("currency exposure lower bounds sum to " +
                                  std::to_string(spec.E_l.sum()) + " > 1");
    if (spec.E_u.sum() < 1.0 - 1e-12)
        throw InfeasibleSpecError("currency exposure upper bounds sum to " +
                                  std::to_string(spec.E_u.sum()) + " < 1");

    MixedBinaryQP qp;
    qp.spec = spec;
    qp.structure = build_combinatorics(C);
    qp.map = make_var_map(spec, qp.structure);
    qp.r = moments.r;

    const VarMap& v = qp.map;
    const int K = v.K;
    const int n = v.n;
    const Eigen::MatrixXd& T = qp.structure.T;

    // Exposure map: x = [a; c] with c_j = sum_i a_ij + cash(base) + sum_k F_kj.
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(A * C + C, n);
    for (int i = 0; i < A; ++i)
        for (int j = 0; j < C; ++j) E(v.a(i, j), v.a(i, j)) = 1.0;
    for (int j = 0; j < C; ++j) {
        const int row = A * C + j;
        for (int i = 0; i < A; ++i) E(row, v.a(i, j)) = 1.0;
        if (j == spec.base_country) E(row, v.cash()) = 1.0;
        for (int k = 0; k < K; ++k) {
            if (T(k, j) == 0.0) continue;
            E(row, v.q_pos(k)) = T(k, j);
            E(row, v.q_neg(k)) = -T(k, j);
        }
    }
    qp.exposure_map = E;
    qp.Q = E.transpose() * moments.omega * E;
    qp.Q = ((qp.Q + qp.Q.transpose()) / 2.0).eval();
    qp.c = Eigen::VectorXd::Zero(n);

    std::vector<Eigen::VectorXd> eq_rows, in_rows;
    std::vector<double> eq_rhs, in_rhs;
    auto add_eq = [&](const Eigen::VectorXd& row, double rhs, const std::string& label) {
        eq_rows.push_back(row);
        eq_rhs.push_back(rhs);
        qp.eq_labels.push_back(label);
    };
    auto add_in = [&](const Eigen::VectorXd& row, double rhs, const std::string& label) {
        in_rows.push_back(row);
        in_rhs.push_back(rhs);
        qp.in_labels.push_back(label);
    };

    // Return target: x'r - sum_k (alpha b_k + beta_k (q+ + q-)) = mu.
    {
        Eigen::VectorXd row = E.transpose() * moments.r;
        for (int k = 0; k < K; ++k) {
            row[v.q_pos(k)] -= spec.cost.beta[k];
            row[v.q_neg(k)] -= spec.cost.beta[k];
            row[v.b(k)] -= spec.cost.alpha;
        }
        add_eq(row, spec.mu, "return_target");
    }

    // Margin coupling: cash = M sum_k (q+ + q-).
    {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        row[v.cash()] = 1.0;
        for (int k = 0; k < K; ++k) {
            row[v.q_pos(k)] = -spec.cost.margin_rate;
            row[v.q_neg(k)] = -spec.cost.margin_rate;
        }
        add_eq(row, 0.0, "margin_cash");
    }

    // Asset budget: sum a + cash = 1 (the currency budget sum c = 1 then
    // holds identically because every F row sums to zero).
    {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < A; ++i)
            for (int j = 0; j < C; ++j) row[v.a(i, j)] = 1.0;
        row[v.cash()] = 1.0;
        add_eq(row, 1.0, "asset_budget");
    }

    // Overlay magnitude auxiliaries: +-overlay_j <= t_j.
    for (int j = 0; j < C; ++j) {
        Eigen::VectorXd plus = Eigen::VectorXd::Zero(n);
        for (int k = 0; k < K; ++k) {
            if (T(k, j) == 0.0) continue;
            plus[v.q_pos(k)] = T(k, j);
            plus[v.q_neg(k)] = -T(k, j);
        }
        Eigen::VectorXd minus = -plus;
        plus[v.t(j)] = -1.0;
        minus[v.t(j)] = -1.0;
        add_in(plus, 0.0, "overlay_abs_pos:" + spec.country_labels[j]);
        add_in(minus, 0.0, "overlay_abs_neg:" + spec.country_labels[j]);
    }

    // Total overlay cap: half the sum of t_j.
    {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < C; ++j) row[v.t(j)] = 0.5;
        add_in(row, spec.V_u, "total_overlay_cap");
    }

    // Currency exposure bounds.
    for (int j = 0; j < C; ++j) {
        const Eigen::VectorXd crow = E.row(A * C + j).transpose();
        add_in(crow, spec.E_u[j], "exposure_upper:" + spec.country_labels[j]);
        add_in(-crow, -spec.E_l[j], "exposure_lower:" + spec.country_labels[j]);
    }

    // Contract size / activation coupling, l_k b_k <= q_k <= u_k b_k,
    // written on the split variables: q+ <= u+ b and q- <= (-l)+ b.
    // Equivalent at integer points once sign exclusivity holds, and the
    // relaxation can no longer inflate q+ and q- together on a switched-
    // off contract.
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd upper = Eigen::VectorXd::Zero(n);
        upper[v.q_pos(k)] = 1.0;
        upper[v.b(k)] = -std::max(spec.u[k], 0.0);
        add_in(upper, 0.0, "size_upper:" + std::to_string(k));

        Eigen::VectorXd lower = Eigen::VectorXd::Zero(n);
        lower[v.q_neg(k)] = 1.0;
        lower[v.b(k)] = -std::max(-spec.l[k], 0.0);
        add_in(lower, 0.0, "size_lower:" + std::to_string(k));
    }

    // Cardinality.
    {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(n);
        for (int k = 0; k < K; ++k) row[v.b(k)] = 1.0;
        add_in(row, static_cast<double>(spec.G), "cardinality");
    }

    // Sign exclusivity: q+ <= u+ s_k, q- <= (-l)+ (1 - s_k); at any
    // feasible point q+ and q- cannot both be positive, so the split is
    // exact and the margin row really charges M |q_k|.
    for (int k = 0; k < K; ++k) {
        const double up = std::max(spec.u[k], 0.0);
        const double um = std::max(-spec.l[k], 0.0);
        Eigen::VectorXd pos = Eigen::VectorXd::Zero(n);
        pos[v.q_pos(k)] = 1.0;
        pos[v.s(k)] = -up;
        add_in(pos, 0.0, "sign_pos:" + std::to_string(k));

        Eigen::VectorXd neg = Eigen::VectorXd::Zero(n);
        neg[v.q_neg(k)] = 1.0;
        neg[v.s(k)] = um;
        add_in(neg, um, "sign_neg:" + std::to_string(k));
    }

    qp.A_eq.resize(static_cast<Eigen::Index>(eq_rows.size()), n);
    qp.b_eq.resize(static_cast<Eigen::Index>(eq_rows.size()));
    for (std::size_t i = 0; i < eq_rows.size(); ++i) {
        qp.A_eq.row(static_cast<Eigen::Index>(i)) = eq_rows[i];
        qp.b_eq[static_cast<Eigen::Index>(i)] = eq_rhs[i];
    }
    qp.A_in.resize(static_cast<Eigen::Index>(in_rows.size()), n);
    qp.b_in.resize(static_cast<Eigen::Index>(in_rows.size()));
    for (std::size_t i = 0; i < in_rows.size(); ++i) {
        qp.A_in.row(static_cast<Eigen::Index>(i)) = in_rows[i];
        qp.b_in[static_cast<Eigen::Index>(i)] = in_rhs[i];
    }

    // Bounds: everything boxed.
    qp.lb = Eigen::VectorXd::Zero(n);
    qp.ub = Eigen::VectorXd::Zero(n);
    const double asset_lb = spec.no_short_assets ? 0.0 : -1.0;
    for (int i = 0; i < A; ++i)
        for (int j = 0; j < C; ++j) {
            qp.lb[v.a(i, j)] = asset_lb;
            qp.ub[v.a(i, j)] = 1.0;
        }
    qp.lb[v.cash()] = 0.0;
    qp.ub[v.cash()] = 1.0;
    for (int k = 0; k < K; ++k) {
        qp.lb[v.q_pos(k)] = 0.0;
        qp.ub[v.q_pos(k)] = std::max(spec.u[k], 0.0);
        qp.lb[v.q_neg(k)] = 0.0;
        qp.ub[v.q_neg(k)] = std::max(-spec.l[k], 0.0);
        qp.lb[v.b(k)] = 0.0;
        qp.ub[v.b(k)] = 1.0;
        qp.lb[v.s(k)] = 0.0;
        qp.ub[v.s(k)] = 1.0;
    }
    for (int j = 0; j < C; ++j) {
        double cap = 0.0;
        for (int k = 0; k < K; ++k)
            if (T(k, j) != 0.0) cap += std::max(std::max(spec.u[k], 0.0), std::max(-spec.l[k], 0.0));
        qp.lb[v.t(j)] = 0.0;
        qp.ub[v.t(j)] = cap;
    }

    for (int k = 0; k < K; ++k) qp.binary_index.push_back(v.b(k));
    for (int k = 0; k < K; ++k) qp.binary_index.push_back(v.s(k));
    return qp;
}

MixedBinaryQP apply_policy(const MixedBinaryQP& qp, HedgingPolicy policy, int base_country) {
    if (policy == HedgingPolicy::Unrestricted) return qp;
    if (base_country < 0 || base_country >= qp.map.C)
        throw DomainError("apply_policy: base country out of range");

    MixedBinaryQP out = qp;
    const Eigen::VectorXd row =
        qp.exposure_map.row(qp.map.A * qp.map.C + base_country).transpose();
    const double rhs = policy == HedgingPolicy::FullyHedged ? 1.0 : 0.0;

    out.A_eq.conservativeResize(qp.A_eq.rows() + 1, Eigen::NoChange);
    out.b_eq.conservativeResize(qp.b_eq.size() + 1);
    out.A_eq.row(out.A_eq.rows() - 1) = row;
    out.b_eq[out.b_eq.size() - 1] = rhs;
    out.eq_labels.push_back(std::string("policy_") + to_string(policy));
    return out;
}

MixedBinaryQP build_problem(const AdjustedMoments& moments, const ProblemSpec& spec) {
    return apply_policy(assemble(moments, spec), spec.policy, spec.base_country);
}

TwoStageProblem build_two_stage(const AdjustedMoments& moments, const ProblemSpec& spec) {
    if (spec.mode != OptimisationMode::TwoStage)
        throw DomainError("build_two_stage: spec.mode must be two_stage");

    // Stage 1: no overlay at all. V_u = 0 and G = 0 force q = 0, and the
    // margin row then forces cash = 0.
    ProblemSpec stage1_spec = spec;
    stage1_spec.V_u = 0.0;
    stage1_spec.G = 0;
    stage1_spec.mode = OptimisationMode::Unified;
    stage1_spec.policy = HedgingPolicy::Unrestricted;

    TwoStageProblem out;
    out.stage1 = assemble(moments, stage1_spec);

    out.make_stage2 = [moments, spec](const Eigen::MatrixXd& stage1_assets) {
        if (stage1_assets.rows() != spec.classes_n || stage1_assets.cols() != spec.countries_n)
            throw ContractViolation("stage 2: asset matrix has wrong shape");
        const double total = stage1_assets.sum();
        if (std::abs(total - 1.0) > 1e-6)
            throw ContractViolation("stage 2: stage-1 assets must sum to 1, got " +
                                    std::to_string(total));

        ProblemSpec stage2_spec = spec;
        stage2_spec.mode = OptimisationMode::Unified;
        MixedBinaryQP qp = build_problem(moments, stage2_spec);

        // Freeze relative asset weights: a_ij = w_ij (1 - cash), i.e.
        // a_ij + w_ij cash = w_ij.
        const VarMap& v = qp.map;
        const int rows0 = static_cast<int>(qp.A_eq.rows());
        qp.A_eq.conservativeResize(rows0 + v.A * v.C, Eigen::NoChange);
        qp.b_eq.conservativeResize(rows0 + v.A * v.C);
        int r = rows0;
        for (int i = 0; i < v.A; ++i) {
            for (int j = 0; j < v.C; ++j, ++r) {
                Eigen::VectorXd row = Eigen::VectorXd::Zero(v.n);
                row[v.a(i, j)] = 1.0;
                row[v.cash()] = stage1_assets(i, j);
                qp.A_eq.row(r) = row;
                qp.b_eq[r] = stage1_assets(i, j);
                qp.eq_labels.push_back("stage2_freeze:" + std::to_string(i) + ":" +
                                       std::to_string(j));
            }
        }
        return qp;
    };
    return out;
}

DecodedVector decode_vector(const VarMap& map, const Eigen::VectorXd& y) {
    if (y.size() != map.n) throw ContractViolation("decode_vector: wrong vector length");
    DecodedVector d;
    d.asset_weights.resize(map.A, map.C);
    for (int i = 0; i < map.A; ++i)
        for (int j = 0; j < map.C; ++j) d.asset_weights(i, j) = y[map.a(i, j)];
    d.cash = y[map.cash()];
    d.q_pos.resize(map.K);
    d.q_neg.resize(map.K);
    d.b.resize(map.K);
    d.s.resize(map.K);
    for (int k = 0; k < map.K; ++k) {
        d.q_pos[k] = y[map.q_pos(k)];
        d.q_neg[k] = y[map.q_neg(k)];
        d.b[k] = y[map.b(k)];
        d.s[k] = y[map.s(k)];
    }
    d.t.resize(map.C);
    for (int j = 0; j < map.C; ++j) d.t[j] = y[map.t(j)];
    return d;
}

Eigen::VectorXd encode_vector(const VarMap& map, const DecodedVector& d) {
    Eigen::VectorXd y(map.n);
    for (int i = 0; i < map.A; ++i)
        for (int j = 0; j < map.C; ++j) y[map.a(i, j)] = d.asset_weights(i, j);
    y[map.cash()] = d.cash;
    for (int k = 0; k < map.K; ++k) {
        y[map.q_pos(k)] = d.q_pos[k];
        y[map.q_neg(k)] = d.q_neg[k];
        y[map.b(k)] = d.b[k];
        y[map.s(k)] = d.s[k];
    }
    for (int j = 0; j < map.C; ++j) y[map.t(j)] = d.t[j];
    return y;
}

}  // namespace overlay
