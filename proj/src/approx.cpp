#include "kamwb/approx.hpp"
#include "kamwb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kamwb {

ApproxFunction ApproxFunction::default_kind()
{
    return ApproxFunction{};
}

ApproxFunction ApproxFunction::power_exp(double sigma)
{
    if (!(sigma > 0 && sigma < 1))
        throw ConfigError("power-exp sigma must lie in (0,1)");
    ApproxFunction d;
    d.kind_ = Kind::PowerExp;
    d.sigma_ = sigma;
    return d;
}

ApproxFunction ApproxFunction::table(std::vector<std::pair<double, double>> nodes)
{
    if (nodes.empty())
        throw ConfigError("table approximation function needs nodes");
    std::sort(nodes.begin(), nodes.end());
    if (nodes.front().first != 0.0 || std::abs(nodes.front().second - 1.0) > 1e-15)
        throw ConfigError("table approximation function must start at (0, 1)");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (nodes[i].second < nodes[i - 1].second)
            throw ConfigError("table approximation function must be nondecreasing");
    ApproxFunction d;
    d.kind_ = Kind::Table;
    d.nodes_ = std::move(nodes);
    return d;
}

ApproxFunction ApproxFunction::unit()
{
    return table({{0.0, 1.0}});
}

std::string ApproxFunction::name() const
{
    std::ostringstream os;
    switch (kind_) {
    case Kind::Default: os << "default"; break;
    case Kind::PowerExp: os << "power-exp(sigma=" << sigma_ << ")"; break;
    case Kind::Table: os << "table(" << nodes_.size() << " nodes)"; break;
    }
    return os.str();
}

double ApproxFunction::log_value(double t) const
{
    if (t <= 0)
        return 0.0;
    switch (kind_) {
    case Kind::Default: {
        double d = 1.0 + std::log1p(t);
        return t / (d * d);
    }
    case Kind::PowerExp:
        return std::pow(t, sigma_);
    case Kind::Table: {
        if (t >= nodes_.back().first)
            return std::log(nodes_.back().second);
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), std::make_pair(t, 0.0),
                                   [](auto& a, auto& b) { return a.first < b.first; });
        auto hi = *it;
        auto lo = *(it - 1);
        double w = (t - lo.first) / (hi.first - lo.first);
        return (1 - w) * std::log(lo.second) + w * std::log(hi.second);
    }
    }
    return 0.0;
}

double ApproxFunction::operator()(double t) const
{
    return std::exp(log_value(t));
}

ApproxFunction default_delta()
{
    return ApproxFunction::default_kind();
}

namespace {

struct SupResult {
    double t;
    double g;
};

SupResult log_sup(const ApproxFunction& delta, double decay, bool lin, const SupOptions& opt)
{
    if (!(decay > 0))
        throw ConfigError("decay rate must be positive");
    auto g = [&](double t) {
        double v = delta.log_value(t) - decay * t;
        if (lin)
            v += std::log1p(t);
        return v;
    };
    // past T the integrand is below its value at 0
    double T = 1.0;
    for (;;) {
        double slope = delta.log_value(T) / T + (lin ? std::log1p(T) / T : 0.0);
        if (slope <= 0.5 * decay)
            break;
        T *= 2;
        if (T > opt.t_limit)
            throw NoConvergence("no tail bound below t_max for decay " + std::to_string(decay));
    }
    int n = std::max(opt.grid_points, 8);
    std::vector<double> ts(n), gs(n);
    ts[0] = 0.0;
    double lmin = std::log(T) - std::log(1e12);
    for (int i = 1; i < n; ++i)
        ts[i] = std::exp(lmin + (std::log(T) - lmin) * (i - 1) / (n - 2));
    int best = 0;
    for (int i = 0; i < n; ++i) {
        gs[i] = g(ts[i]);
        if (gs[i] > gs[best])
            best = i;
    }
    double a = ts[std::max(best - 1, 0)];
    double b = ts[std::min(best + 1, n - 1)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double gc = g(c), gd = g(d);
    int it = 0;
    while (b - a > opt.rel_tol * std::max(std::abs(c), 1e-300) && it < 400) {
        if (gc > gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
        ++it;
    }
    SupResult r{ts[best], gs[best]};
    double tm = 0.5 * (a + b);
    for (auto [t, v] : {std::pair{c, gc}, std::pair{d, gd}, std::pair{tm, g(tm)}})
        if (v > r.g)
            r = {t, v};
    if (r.g < 0)
        r = {0.0, 0.0};
    return r;
}

} // namespace

double log_gamma0(const ApproxFunction& delta, double mu, const SupOptions& opt)
{
    return log_sup(delta, mu, false, opt).g;
}

double log_gamma1(const ApproxFunction& delta, double rho, const SupOptions& opt)
{
    return log_sup(delta, rho, true, opt).g;
}

double gamma0(const ApproxFunction& delta, double mu, const SupOptions& opt)
{
    return std::exp(log_gamma0(delta, mu, opt));
}

double gamma1(const ApproxFunction& delta, double rho, const SupOptions& opt)
{
    return std::exp(log_gamma1(delta, rho, opt));
}

double argmax_gamma(const ApproxFunction& delta, double decay, bool with_linear_factor,
                    const SupOptions& opt)
{
    return log_sup(delta, decay, with_linear_factor, opt).t;
}

double SequenceSchedule::mu(int nu) const
{
    return mu_total * (1 - decay_q) * std::pow(decay_q, nu);
}

double SequenceSchedule::rho(int nu) const
{
    return rho_total * (1 - decay_q) * std::pow(decay_q, nu);
}

double SequenceSchedule::kappa_nu(int nu) const
{
    return (kappa - 1) / std::pow(kappa, nu + 1);
}

double SequenceSchedule::kappa_tail(int n) const
{
    return std::pow(kappa, -n);
}

static double psi_term(const ApproxFunction& delta, const SequenceSchedule& s, int nu)
{
    return s.kappa_nu(nu) * (log_gamma0(delta, s.mu(nu)) + log_gamma1(delta, s.rho(nu)));
}

PsiResult psi_product(const ApproxFunction& delta, const SequenceSchedule& sched, int max_terms)
{
    if (!(sched.mu_total > 0 && sched.rho_total > 0))
        throw ConfigError("psi_product needs mu, rho > 0");
    if (!(sched.decay_q > 0 && sched.decay_q < 1) || !(sched.kappa > 1))
        throw ConfigError("schedule needs 0 < q < 1 and kappa > 1");
    PsiResult res;
    std::vector<double> terms;
    double sum = 0;
    int rising = 0;
    for (int nu = 0; nu < max_terms; ++nu) {
        double L;
        try {
            L = psi_term(delta, sched, nu);
        } catch (const NoConvergence& e) {
            throw Divergence("Gamma evaluation failed at nu=" + std::to_string(nu) + ": " + e.what());
        }
        terms.push_back(L);
        sum += L;
        if (!std::isfinite(sum))
            throw Divergence("partial log product overflowed at nu=" + std::to_string(nu));
        if (nu >= 1 && L >= terms[nu - 1] && L > 0)
            ++rising;
        else
            rising = 0;
        if (nu >= 8 && rising >= 4)
            throw Divergence("log terms grow faster than kappa_nu decays (nu=" +
                             std::to_string(nu) + ", term=" + std::to_string(L) + ")");
        if (nu < 3)
            continue;
        double r = 0;
        bool all_zero = true;
        for (int i = nu - 2; i <= nu; ++i) {
            if (terms[i - 1] > 0)
                r = std::max(r, terms[i] / terms[i - 1]);
            if (terms[i] != 0)
                all_zero = false;
        }
        if (all_zero) {
            res.terms = nu + 1;
            res.tail_estimate = 0;
            break;
        }
        if (r < 1) {
            double geo_tail = L * r / (1 - r);
            double frozen_tail = sched.kappa_tail(nu + 1) *
                                 (log_gamma0(delta, sched.mu(nu)) + log_gamma1(delta, sched.rho(nu)));
            if (geo_tail < sched.tail_tol && frozen_tail < sched.tail_tol) {
                res.terms = nu + 1;
                res.tail_estimate = geo_tail;
                break;
            }
        }
        if (nu == max_terms - 1)
            throw Divergence("tail not below tail_tol after " + std::to_string(max_terms) + " terms");
    }
    if (res.terms == 0)
        res.terms = static_cast<int>(terms.size());
    res.log_value = sum + res.tail_estimate;
    res.value = std::exp(res.log_value);
    return res;
}

double psi_partial_log(const ApproxFunction& delta, const SequenceSchedule& sched, int n)
{
    double s = 0;
    for (int nu = 0; nu < n; ++nu)
        s += psi_term(delta, sched, nu);
    return s;
}

} // namespace kamwb
