#include "kamwb/io.hpp"

#include "kamwb/errors.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace kamwb {

json parse_config(const std::string& text, const std::string& origin)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream os;
        os << origin << ":" << line << ":" << col << ": " << e.what();
        throw ConfigError(os.str());
    }
}

json load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

std::string config_hash(const json& config)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string output_header(const json& config, std::uint64_t seed)
{
    std::ostringstream os;
    os << "# kamwb " << KAMWB_VERSION << "\n# seed " << seed << "\n# config " << config_hash(config)
       << "\n";
    return os.str();
}

void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    fs::path p(path);
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw ConfigError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out)
            throw ConfigError("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string fmt(double x)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const json& config, std::uint64_t seed, const std::vector<std::string>& columns)
    : text_(output_header(config, seed)), ncol_(columns.size())
{
    row_text(columns);
}

CsvWriter& CsvWriter::row(const std::vector<double>& values)
{
    std::vector<std::string> s;
    for (double v : values)
        s.push_back(fmt(v));
    return row_text(s);
}

CsvWriter& CsvWriter::row_text(const std::vector<std::string>& values)
{
    if (values.size() != ncol_)
        throw ConfigError("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            text_ += ',';
        text_ += values[i];
    }
    text_ += '\n';
    return *this;
}

// ---------------------------------------------------------------- sections

namespace {

template <class T>
T get_or(const json& j, const char* key, T def)
{
    if (!j.is_object() || !j.contains(key))
        return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

const json& need(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(std::string("missing field '") + key + "'");
    return j.at(key);
}

std::map<int, int> mode_from_json(const json& j)
{
    std::map<int, int> k;
    if (!j.is_object())
        throw ConfigError("mode must be an object {index: value}");
    for (auto& [key, val] : j.items()) {
        int idx = 0;
        auto r = std::from_chars(key.data(), key.data() + key.size(), idx);
        if (r.ec != std::errc() || r.ptr != key.data() + key.size())
            throw ConfigError("mode index '" + key + "' is not an integer");
        if (!val.is_number_integer())
            throw ConfigError("mode entries must be integers");
        if (val.get<int>() != 0)
            k[idx] = val.get<int>();
    }
    return k;
}

} // namespace

SpatialStructure structure_from_json(const json& j)
{
    auto w = need(j, "window").get<std::vector<int>>();
    if (w.size() != 2)
        throw ConfigError("window must be [lo, hi]");
    auto subsets = need(j, "subsets").get<std::vector<std::vector<int>>>();
    return SpatialStructure(IndexWindow(w[0], w[1]), subsets, get_or(j, "rho_w", 3.0));
}

Frequency frequency_from_json(const json& j)
{
    auto w = need(j, "window").get<std::vector<int>>();
    if (w.size() != 2)
        throw ConfigError("window must be [lo, hi]");
    Frequency f;
    f.window = IndexWindow(w[0], w[1]);
    f.omega = need(j, "omega").get<std::vector<double>>();
    if (static_cast<int>(f.omega.size()) != f.window.size())
        throw ConfigError("omega must have one entry per window index");
    return f;
}

ApproxFunction delta_from_json(const json& j)
{
    if (!j.contains("delta"))
        return default_delta();
    const json& d = j.at("delta");
    std::string kind = d.is_string() ? d.get<std::string>() : get_or<std::string>(d, "kind", "default");
    if (kind == "default")
        return ApproxFunction::default_kind();
    if (kind == "power_exp" || kind == "power-exp")
        return ApproxFunction::power_exp(need(d, "sigma").get<double>());
    if (kind == "unit")
        return ApproxFunction::unit();
    if (kind == "table")
        return ApproxFunction::table(need(d, "nodes").get<std::vector<std::pair<double, double>>>());
    throw ConfigError("unknown delta kind '" + kind + "'");
}

SequenceSchedule sequence_from_json(const json& j)
{
    SequenceSchedule s;
    const json& k = j.contains("schedule") ? j.at("schedule") : json::object();
    s.mu_total = get_or(k, "mu_total", s.mu_total);
    s.rho_total = get_or(k, "rho_total", s.rho_total);
    s.kappa = get_or(k, "kappa", s.kappa);
    s.decay_q = get_or(k, "decay_q", s.decay_q);
    s.tail_tol = get_or(k, "tail_tol", s.tail_tol);
    if (!(s.decay_q > 0 && s.decay_q < 1))
        throw ConfigError("decay_q must lie in (0,1)");
    return s;
}

KamSchedule schedule_from_json(const json& j)
{
    KamSchedule k;
    const json& s = j.contains("schedule") ? j.at("schedule") : json::object();
    k.a = get_or(s, "a", k.a);
    k.b = get_or(s, "b", k.b);
    k.c = get_or(s, "c", k.c);
    k.d = get_or(s, "d", k.d);
    k.e = get_or(s, "e", k.e);
    k.kappa = get_or(s, "kappa", k.kappa);
    k.m = get_or(s, "m", k.m);
    k.r = get_or(s, "r", k.r);
    k.s = get_or(s, "s", k.s);
    k.w = get_or(s, "w", k.w);
    k.seq = sequence_from_json(j);
    k.seq.kappa = k.kappa;
    k.delta = delta_from_json(j);
    if (!(k.kappa > 1))
        throw ConfigError("kappa must exceed 1");
    if (!(k.seq.mu_total < k.m) || !(2 * k.seq.rho_total < k.r))
        throw ConfigError("schedule needs mu_total < m and 2 rho_total < r");
    return k;
}

ScanCaps caps_from_json(const json& j)
{
    ScanCaps c;
    const json& k = j.contains("caps") ? j.at("caps") : json::object();
    c.weight_cap = get_or(k, "weight_cap", c.weight_cap);
    c.order_cap = get_or(k, "order_cap", c.order_cap);
    if (c.order_cap < 1)
        throw ConfigError("order_cap must be positive");
    return c;
}

FrequencyBox box_from_json(const json& j)
{
    FrequencyBox b;
    b.bounds = need(j, "box").get<std::vector<std::pair<double, double>>>();
    for (auto [lo, hi] : b.bounds)
        if (!(hi > lo))
            throw ConfigError("box bounds must satisfy lo < hi");
    return b;
}

ForcingSpec forcing_from_json(const json& j)
{
    ForcingSpec f;
    const json& o = need(j, "oscillator");
    f.l = get_or(o, "l", 1);
    f.epsilon = get_or(o, "epsilon", 1e-6);
    f.omega = frequency_from_json(j);
    f.subsets = need(j, "subsets").get<std::vector<std::vector<int>>>();
    f.rho_w = get_or(j, "rho_w", 3.0);
    if (o.contains("p")) {
        for (auto& pj : o.at("p")) {
            ApSignal sig;
            for (auto& t : pj) {
                ForcingTerm term;
                term.k = mode_from_json(need(t, "k"));
                term.a = get_or(t, "a", 0.0);
                term.b = get_or(t, "b", 0.0);
                sig.terms.push_back(term);
            }
            f.p.push_back(sig);
        }
    }
    f.validate();
    return f;
}

HamiltonianOptions hamiltonian_options_from_json(const json& j)
{
    HamiltonianOptions h;
    const json& o = j.contains("hamiltonian") ? j.at("hamiltonian") : json::object();
    h.degree_cap = get_or(o, "degree_cap", h.degree_cap);
    h.order_cap = get_or(o, "order_cap", h.order_cap);
    h.fft_points = get_or(o, "fft_points", h.fft_points);
    h.nodes_per_dim = get_or(o, "nodes_per_dim", h.nodes_per_dim);
    h.h = get_or(o, "h", h.h);
    h.coeff_tol = get_or(o, "coeff_tol", h.coeff_tol);
    h.check_gate = get_or(o, "check_gate", h.check_gate);
    const json& s = j.contains("schedule") ? j.at("schedule") : json::object();
    h.m = get_or(s, "m", h.m);
    h.r = get_or(s, "r", h.r);
    h.w = get_or(s, "w", h.w);
    return h;
}

SimOptions sim_options_from_json(const json& j)
{
    SimOptions s;
    const json& o = j.contains("simulate") ? j.at("simulate") : json::object();
    std::string m = get_or<std::string>(o, "method", "yoshida8");
    if (m == "verlet")
        s.method = Integrator::Verlet;
    else if (m == "yoshida8")
        s.method = Integrator::Yoshida8;
    else if (m == "rk78")
        s.method = Integrator::RK78;
    else
        throw ConfigError("unknown integrator '" + m + "'");
    s.dt = get_or(o, "dt", s.dt);
    s.sample_every = get_or(o, "sample_every", s.sample_every);
    s.section_lambda = get_or(o, "section_lambda", s.section_lambda);
    s.section_phase = get_or(o, "section_phase", s.section_phase);
    s.rk_tol = get_or(o, "rk_tol", s.rk_tol);
    s.windows = get_or(o, "windows", s.windows);
    if (!(s.dt > 0))
        throw ConfigError("dt must be positive");
    return s;
}

ActionAngleChart chart_from_json(const json& cfg)
{
    const json& o = need(cfg, "oscillator");
    auto w = o.value("action_window", std::vector<double>{0.5, 2.0});
    if (w.size() != 2 || !(w[0] > 0) || !(w[1] > w[0]))
        throw ConfigError("action_window must be [lo, hi] with 0 < lo < hi");
    return ActionAngleChart(o.value("l", 1), w[0], w[1]);
}

double rho0_from_json(const json& cfg) { return get_or(need(cfg, "oscillator"), "rho0", 1.0); }

} // namespace kamwb
