#include "commands.hpp"

#include "kamwb/errors.hpp"
#include "kamwb/io.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

namespace kamwb::cli {

namespace {

struct Globals {
    int threads = 1;
};

Globals& globals()
{
    static Globals g;
    return g;
}

/// Relative paths that do not exist are looked up in $KAMWB_CONFIG_DIR.
std::string resolve_config(const std::string& path)
{
    namespace fs = std::filesystem;
    if (path.empty())
        throw ConfigError("--config is required");
    if (fs::exists(path))
        return path;
    if (const char* dir = std::getenv("KAMWB_CONFIG_DIR"); dir && fs::path(path).is_relative()) {
        fs::path p = fs::path(dir) / path;
        if (fs::exists(p))
            return p.string();
    }
    throw ConfigError("config not found: " + path);
}

json read_config(const std::string& path) { return load_config(resolve_config(path)); }

std::uint64_t config_seed(const json& cfg, long long flag)
{
    if (flag >= 0)
        return static_cast<std::uint64_t>(flag);
    if (cfg.contains("seed"))
        return cfg.at("seed").get<std::uint64_t>();
    return 0;
}

/// Writes text to path (atomically) or stdout, and echoes the effective config next to it.
void emit(const std::string& path, const std::string& text, const json& cfg)
{
    if (path.empty()) {
        std::cout << text;
        return;
    }
    write_atomic(path, text);
    write_atomic(path + ".config.json", cfg.dump(2) + "\n");
}

std::string json_report(const json& cfg, std::uint64_t seed, const json& body)
{
    json out = body;
    out["version"] = KAMWB_VERSION;
    out["seed"] = seed;
    out["config"] = config_hash(cfg);
    return out.dump(2) + "\n";
}

std::vector<int> parse_int_list(const std::string& s)
{
    std::vector<int> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            v.push_back(std::stoi(item));
    return v;
}

std::string join(const std::vector<int>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ' ';
        s += std::to_string(v[i]);
    }
    return s;
}

int config_n(const json& cfg) { return cfg.value("n", 1); }

ProductStructure product_from_json(const json& cfg)
{
    return ProductStructure(structure_from_json(cfg), config_n(cfg));
}

// ---------------------------------------------------------------- lattice

void add_lattice(CLI::App& app)
{
    auto* lat = app.add_subcommand("lattice", "weights, distribution counts and index enumeration");
    lat->require_subcommand(1);

    auto* w = lat->add_subcommand("weight", "weight of an index set");
    auto set = std::make_shared<std::string>();
    auto rho_w = std::make_shared<double>(3.0);
    w->add_option("--set", *set, "comma separated indices, e.g. 1,-1")->required();
    w->add_option("--rho-w", *rho_w, "weight exponent (> 2)");
    w->callback([set, rho_w] {
        if (!(*rho_w > 2))
            throw ConfigError("rho_w must exceed 2");
        std::cout << fmt(weight(parse_int_list(*set), *rho_w)) << "\n";
    });

    auto* c = lat->add_subcommand("count", "distribution count N_i(t)");
    auto cfg_path = std::make_shared<std::string>();
    auto i = std::make_shared<int>(1);
    auto t = std::make_shared<double>(1.0);
    c->add_option("--config", *cfg_path)->required();
    c->add_option("--i", *i, "subset cardinality")->required();
    c->add_option("--t", *t, "weight threshold")->required();
    c->callback([cfg_path, i, t] {
        auto cfg = read_config(*cfg_path);
        std::cout << distribution_count(structure_from_json(cfg), *i, *t) << "\n";
    });

    auto* e = lat->add_subcommand("enumerate", "index pairs (k, kt) within the caps");
    auto cfg2 = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto angles = std::make_shared<bool>(false);
    e->add_option("--config", *cfg2)->required();
    e->add_option("--out", *out, "CSV output (stdout if omitted)");
    e->add_flag("--angles", *angles, "include the angle block (kt != 0)");
    e->callback([cfg2, out, angles] {
        auto cfg = read_config(*cfg2);
        auto entries = scan_entries(product_from_json(cfg), *angles, caps_from_json(cfg));
        CsvWriter csv(cfg, 0, {"k", "kt", "order", "support_weight"});
        for (auto& en : entries)
            csv.row_text({join(en.k), join(en.kt), std::to_string(en.order), fmt(en.support_weight)});
        emit(*out, csv.str(), cfg);
    });
}

// ---------------------------------------------------------------- approx

void add_approx(CLI::App& app)
{
    auto* ap = app.add_subcommand("approx", "approximation functions and the step schedule");
    ap->require_subcommand(1);

    auto* g = ap->add_subcommand("gamma", "Gamma_0(mu) and Gamma_1(rho)");
    auto cfg_path = std::make_shared<std::string>();
    auto mu = std::make_shared<double>(0.1);
    auto rho = std::make_shared<double>(0.1);
    g->add_option("--config", *cfg_path)->required();
    g->add_option("--mu", *mu);
    g->add_option("--rho", *rho);
    g->callback([cfg_path, mu, rho] {
        auto cfg = read_config(*cfg_path);
        auto d = delta_from_json(cfg);
        json body = {{"delta", d.name()},
                     {"mu", *mu},
                     {"rho", *rho},
                     {"log_gamma0", log_gamma0(d, *mu)},
                     {"log_gamma1", log_gamma1(d, *rho)}};
        std::cout << json_report(cfg, 0, body);
    });

    auto* s = ap->add_subcommand("schedule", "per-step schedule and identity checks");
    auto cfg2 = std::make_shared<std::string>();
    auto jmax = std::make_shared<int>(12);
    auto out = std::make_shared<std::string>();
    s->add_option("--config", *cfg2)->required();
    s->add_option("--jmax", *jmax);
    s->add_option("--out", *out, "CSV output (stdout if omitted)");
    s->callback([cfg2, jmax, out] {
        auto cfg = read_config(*cfg2);
        auto k = schedule_from_json(cfg);
        CsvWriter csv(cfg, 0,
                      {"j", "m_j", "r_j", "log_s_j", "log_h_j", "log_E_j", "log_Gamma_j", "K_j", "f2_ratio",
                       "f3_defect"});
        for (int j = 0; j <= *jmax; ++j)
            csv.row({double(j), k.m_j(j), k.r_j(j), std::log(k.s_j(j)), std::log(k.h_j(j)), k.log_E(j),
                     std::log(k.Gamma(j)), k.K_j(j), k.f2_ratio(j), k.f3_defect(j)});
        emit(*out, csv.str(), cfg);
    });

    auto* p = ap->add_subcommand("psi", "the product Psi_0 Psi_1");
    auto cfg3 = std::make_shared<std::string>();
    p->add_option("--config", *cfg3)->required();
    p->callback([cfg3] {
        auto cfg = read_config(*cfg3);
        auto k = schedule_from_json(cfg);
        auto r = psi_product(k.delta, k.seq);
        json body = {{"log_psi", r.log_value}, {"terms", r.terms}, {"tail_estimate", r.tail_estimate},
                     {"E0", k.E0()}};
        std::cout << json_report(cfg, 0, body);
    });
}

// ---------------------------------------------------------------- resonance

void add_resonance(CLI::App& app)
{
    auto* res = app.add_subcommand("resonance", "nonresonance scans and measure estimates");
    res->require_subcommand(1);

    auto* sc = res->add_subcommand("scan", "exhaustive nonresonance check within the caps");
    auto cfg_path = std::make_shared<std::string>();
    auto alpha = std::make_shared<double>(-1);
    auto out = std::make_shared<std::string>();
    sc->add_option("--config", *cfg_path)->required();
    sc->add_option("--alpha", *alpha, "overrides the config value");
    sc->add_option("--out", *out, "JSON output (stdout if omitted)");
    sc->callback([cfg_path, alpha, out] {
        auto cfg = read_config(*cfg_path);
        double a = *alpha > 0 ? *alpha : cfg.value("alpha", 1e-3);
        std::optional<std::vector<double>> wt;
        if (cfg.contains("omega_tilde"))
            wt = cfg.at("omega_tilde").get<std::vector<double>>();
        auto cert = scan_report(frequency_from_json(cfg), wt, product_from_json(cfg), delta_from_json(cfg), a,
                                caps_from_json(cfg));
        json body = {{"alpha", cert.alpha},     {"delta", cert.delta_name},
                     {"passed", cert.passed},   {"scanned", cert.scanned},
                     {"worst_k", cert.worst_k}, {"worst_kt", cert.worst_kt},
                     {"worst_divisor", cert.worst_divisor}, {"worst_bound", cert.worst_bound},
                     {"margin", cert.margin},   {"weight_cap", cert.caps.weight_cap},
                     {"order_cap", cert.caps.order_cap}};
        emit(*out, json_report(cfg, 0, body), cfg);
        if (!cert.passed) {
            std::ostringstream os;
            os << "|divisor| = " << cert.worst_divisor << " < " << cert.worst_bound;
            throw Violation(os.str());
        }
    });

    auto* me = res->add_subcommand("measure", "Monte Carlo fraction of resonant parameters");
    auto cfg2 = std::make_shared<std::string>();
    auto alphas = std::make_shared<std::vector<double>>();
    auto samples = std::make_shared<std::size_t>(100000);
    auto seed = std::make_shared<long long>(-1);
    auto out2 = std::make_shared<std::string>();
    me->add_option("--config", *cfg2)->required();
    me->add_option("--alpha", *alphas, "one or more alpha values")->required();
    me->add_option("--samples", *samples);
    me->add_option("--seed", *seed);
    me->add_option("--out", *out2, "CSV output (stdout if omitted)");
    me->callback([cfg2, alphas, samples, seed, out2] {
        auto cfg = read_config(*cfg2);
        auto sd = config_seed(cfg, *seed);
        auto omega = frequency_from_json(cfg);
        auto S = product_from_json(cfg);
        auto d = delta_from_json(cfg);
        auto box = box_from_json(cfg);
        auto caps = caps_from_json(cfg);
        CsvWriter csv(cfg, sd, {"alpha", "fraction", "ci_lo", "ci_hi", "union_bound", "seed"});
        for (double a : *alphas) {
            auto r = measure_estimate(omega, S, d, a, box, caps, *samples, sd, globals().threads);
            csv.row_text({fmt(a), fmt(r.fraction), fmt(r.ci_lo), fmt(r.ci_hi), fmt(r.union_bound),
                          std::to_string(sd)});
        }
        emit(*out2, csv.str(), cfg);
    });
}

// ---------------------------------------------------------------- kam

void add_kam(CLI::App& app)
{
    auto* kam = app.add_subcommand("kam", "KAM iteration");
    kam->require_subcommand(1);
    auto* run = kam->add_subcommand("run", "iterate KAM steps on the oscillator Hamiltonian");
    auto cfg_path = std::make_shared<std::string>();
    auto jmax = std::make_shared<int>(-1);
    auto out = std::make_shared<std::string>();
    run->add_option("--config", *cfg_path)->required();
    run->add_option("--jmax", *jmax, "number of steps (config kam.jmax, default 8)");
    run->add_option("--out", *out, "report CSV (stdout if omitted)");
    run->callback([cfg_path, jmax, out] {
        auto cfg = read_config(*cfg_path);
        const json& kc = cfg.contains("kam") ? cfg.at("kam") : json::object();
        auto spec = forcing_from_json(cfg);
        auto chart = chart_from_json(cfg);
        auto sched = schedule_from_json(cfg);
        auto ho = hamiltonian_options_from_json(cfg);
        // alpha normalization: the engine runs at alpha~ = 2
        double alpha = kc.value("alpha", 2.0);
        if (!(alpha > 0))
            throw ConfigError("kam.alpha must be positive");
        double lam = 2.0 / alpha;
        auto b = build_hamiltonian(spec, chart, rho0_from_json(cfg), sched, ho);
        sched.s = b.s;
        Hamiltonian H = lam == 1.0 ? b.H : scale_time(b.H, lam);
        RunOptions ro;
        ro.j_max = *jmax >= 0 ? *jmax : kc.value("jmax", 8);
        ro.stop_rel = kc.value("stop_rel", ro.stop_rel);
        auto res = kam_run(H, sched, ro);
        const double back = 1.0 / lam;
        CsvWriter csv(cfg, config_seed(cfg, -1),
                      {"j", "m_j", "r_j", "s_j", "h_j", "E_j", "measured_norm", "bound_rhs", "homolog_residual",
                       "sympl_residual", "freq_shift"});
        for (auto& r : res.rows)
            csv.row({double(r.j), r.m, r.r, r.s, r.h, r.E, back * r.measured_norm, back * r.bound_rhs,
                     r.homolog_residual, r.sympl_residual, back * r.freq_shift});
        emit(*out, csv.str(), cfg);
        std::cerr << "entry " << res.entry_lhs << " <= E0 " << res.E0 << "; " << res.rows.size()
                  << " steps; final " << res.final_gate_lhs << " <= " << res.final_E << " "
                  << (res.final_gate_ok ? "ok" : "FAILED") << "\n";
        if (!res.final_gate_ok)
            throw BoundViolated("final gate s^-1|||P||| <= E failed");
    });
}

// ---------------------------------------------------------------- osc

void add_osc(CLI::App& app)
{
    auto* osc = app.add_subcommand("osc", "the superquadratic oscillator");
    osc->require_subcommand(1);

    auto* tr = osc->add_subcommand("trig", "generalized trig functions and their identities");
    auto l = std::make_shared<int>(1);
    auto points = std::make_shared<int>(0);
    auto out = std::make_shared<std::string>();
    tr->add_option("--l", *l)->check(CLI::NonNegativeNumber);
    tr->add_option("--points", *points, "tabulate C, S at this many points per period");
    tr->add_option("--out", *out, "CSV of the tabulation");
    tr->callback([l, points, out] {
        GenTrig g(*l);
        auto c = g.verify();
        json body = {{"l", *l},
                     {"period", g.period()},
                     {"samples", g.samples()},
                     {"periodicity", c.periodicity},
                     {"table", c.table},
                     {"derivative", c.derivative},
                     {"energy", c.energy},
                     {"parity", c.parity}};
        json cfg = {{"l", *l}};
        std::cout << json_report(cfg, 0, body);
        if (*points > 0) {
            CsvWriter csv(cfg, 0, {"t", "C", "S"});
            for (int i = 0; i <= *points; ++i) {
                double t = g.period() * i / *points;
                auto [cc, ss] = g.eval(t);
                csv.row({t, cc, ss});
            }
            emit(*out, csv.str(), cfg);
        }
    });

    auto* pe = osc->add_subcommand("period", "T_* by quadrature and by ODE");
    auto l2 = std::make_shared<int>(1);
    pe->add_option("--l", *l2)->check(CLI::NonNegativeNumber);
    pe->callback([l2] {
        json body = {{"l", *l2},
                     {"quadrature", period_quadrature(*l2)},
                     {"ode", period_ode(*l2)},
                     {"period", period(*l2)}};
        std::cout << json_report(json{{"l", *l2}}, 0, body);
    });

    auto* bh = osc->add_subcommand("build-ham", "assemble N + P and check the smallness gate");
    auto cfg_path = std::make_shared<std::string>();
    auto out2 = std::make_shared<std::string>();
    auto no_gate = std::make_shared<bool>(false);
    bh->add_option("--config", *cfg_path)->required();
    bh->add_option("--out", *out2, "JSON with the perturbation series");
    bh->add_flag("--no-gate", *no_gate, "report the gate instead of failing on it");
    bh->callback([cfg_path, out2, no_gate] {
        auto cfg = read_config(*cfg_path);
        auto spec = forcing_from_json(cfg);
        auto chart = chart_from_json(cfg);
        auto sched = schedule_from_json(cfg);
        auto ho = hamiltonian_options_from_json(cfg);
        if (*no_gate)
            ho.check_gate = false;
        auto b = build_hamiltonian(spec, chart, rho0_from_json(cfg), sched, ho);
        json body = {{"epsilon", spec.epsilon},
                     {"s", b.s},
                     {"omega_tilde", b.omega_tilde},
                     {"P_norm", b.P_norm},
                     {"C_star", b.C_star},
                     {"truncation_tail", b.truncation_tail},
                     {"gate_lhs", b.gate_lhs},
                     {"E0", b.gate_rhs},
                     {"gate_ok", b.gate_ok},
                     {"modes", b.H.P.mode_count()},
                     {"grid_nodes", b.space->G()}};
        std::cout << json_report(cfg, 0, body);
        if (!out2->empty()) {
            json full = body;
            full["e"] = b.H.normal.e;
            full["P"] = b.H.P.to_json();
            emit(*out2, full.dump(1) + "\n", cfg);
        }
    });

    auto* si = osc->add_subcommand("simulate", "integrate the (rescaled) oscillator");
    auto cfg2 = std::make_shared<std::string>();
    auto T = std::make_shared<double>(-1);
    auto out3 = std::make_shared<std::string>();
    auto section = std::make_shared<std::string>();
    auto original = std::make_shared<bool>(false);
    si->add_option("--config", *cfg2)->required();
    si->add_option("--T", *T, "final time (config simulate.T)");
    si->add_option("--out", *out3, "trajectory CSV (stdout if omitted)");
    si->add_option("--section", *section, "stroboscopic section CSV");
    si->add_flag("--original", *original, "integrate the unscaled system");
    si->callback([cfg2, T, out3, section, original] {
        auto cfg = read_config(*cfg2);
        auto spec = forcing_from_json(cfg);
        auto opt = sim_options_from_json(cfg);
        const json& sc = cfg.contains("simulate") ? cfg.at("simulate") : json::object();
        double x0 = sc.value("x0", 1.0), v0 = sc.value("v0", 0.0);
        double Tf = *T > 0 ? *T : sc.value("T", 1000.0);
        auto sys = *original ? original_system(spec) : rescale(spec);
        auto r = simulate(sys, x0, v0, Tf, opt);
        auto seed = config_seed(cfg, -1);
        CsvWriter csv(cfg, seed, {"t", "x", "v", "energy", "sup_so_far"});
        for (auto& row : r.rows)
            csv.row({row.t, row.x, row.v, row.energy, row.sup_so_far});
        emit(*out3, csv.str(), cfg);
        if (!section->empty()) {
            CsvWriter sec(cfg, seed, {"n", "x", "v"});
            for (std::size_t i = 0; i < r.section.size(); ++i)
                sec.row({double(i), r.section[i].first, r.section[i].second});
            emit(*section, sec.str(), cfg);
        }
        std::cerr << "sup|x| " << r.sup_abs_x << ", energy drift " << r.max_energy_drift << ", slope "
                  << amplitude_slope(r) << "\n";
    });
}

} // namespace

void register_commands(CLI::App& app)
{
    app.add_option("--threads", globals().threads, "worker cap")->check(CLI::PositiveNumber);
    add_lattice(app);
    add_approx(app);
    add_resonance(app);
    add_kam(app);
    add_osc(app);
}

} // namespace kamwb::cli
