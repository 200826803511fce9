#include "kamwb/errors.hpp"
#include "kamwb/kam.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <sstream>

namespace kamwb {

int truncation_order(double weight, double mu, double rho, double K)
{
    if (!(rho > 0))
        throw ConfigError("rho must be positive");
    double t = (K - mu * weight) / rho;
    if (t <= 0)
        return 0;
    double c = std::ceil(t - 1e-12 * std::max(1.0, t));
    if (c > INT_MAX / 4)
        return INT_MAX / 4;
    return static_cast<int>(c);
}

TruncateResult truncate(const TorusSeries& P, double m, double r, double s, double mu, double rho,
                        double K, double eta)
{
    if (!(mu > 0 && mu < m) || !(rho > 0 && rho < r) || !(eta > 0 && eta < 1))
        throw ConfigError("truncate needs 0<mu<m, 0<rho<r, 0<eta<1");
    const auto& sp = *P.space();
    TruncateResult res;
    res.R = TorusSeries(P.space());
    res.R.domain() = P.domain();
    TorusSeries rest(P.space());
    rest.domain() = P.domain();
    res.orders.resize(sp.structure().size());
    for (std::size_t a = 0; a < sp.structure().size(); ++a)
        res.orders[a] = truncation_order(sp.structure().component_weight(a), mu, rho, K);
    const int M = sp.M(), G = sp.G();
    for (auto& [a, comp] : P.components())
        for (auto& [mode, b] : comp) {
            bool keep_mode = SeriesSpace::order(mode) <= res.orders[a];
            TorusSeries::Block low(b.size(), 0.0), high(b.size(), 0.0);
            bool any_low = false, any_high = false;
            for (int g = 0; g < G; ++g)
                for (int mm = 0; mm < M; ++mm) {
                    cplx c = b[g * M + mm];
                    if (c == cplx(0))
                        continue;
                    if (keep_mode && sp.monomial_degree(mm) <= 1) {
                        low[g * M + mm] = c;
                        any_low = true;
                    } else {
                        high[g * M + mm] = c;
                        any_high = true;
                    }
                }
            if (any_low)
                res.R.components()[a][mode] = std::move(low);
            if (any_high)
                rest.components()[a][mode] = std::move(high);
        }
    res.P_norm = norm_total(P, m, r, s);
    res.R_norm = norm_total(res.R, m, r, s);
    res.discarded_norm = norm_total(rest, m - mu, r - rho, eta * s);
    res.discarded_bound = (std::exp(-K) + eta * eta / (1 - eta)) * res.P_norm;
    if (res.discarded_norm > res.discarded_bound * (1 + 1e-12)) {
        std::ostringstream os;
        os << "discarded norm " << res.discarded_norm << " exceeds " << res.discarded_bound;
        throw BoundViolated(os.str());
    }
    if (res.R_norm > 2 * res.P_norm * (1 + 1e-12))
        throw BoundViolated("|||R||| exceeds 2|||P|||");
    return res;
}

// ---------------------------------------------------------------- schedule

double KamSchedule::eps_star() const
{
    return std::ldexp(1.0, -e);
}

double KamSchedule::psi() const
{
    std::ostringstream key;
    key.precision(17);
    key << delta.name() << ' ' << seq.mu_total << ' ' << seq.rho_total << ' ' << seq.decay_q << ' '
        << kappa << ' ' << seq.tail_tol;
    if (key.str() != psi_key_) {
        SequenceSchedule sq = seq;
        sq.kappa = kappa;
        psi_cache_ = psi_product(delta, sq, 4000).value;
        psi_key_ = key.str();
    }
    return psi_cache_;
}

double KamSchedule::E0() const
{
    return alpha_tilde * eps_star() / psi();
}

static double log_gamma_j(const KamSchedule& k, int j)
{
    return (j + k.a) * std::log(2.0) + log_gamma0(k.delta, k.seq.mu(j)) +
           log_gamma1(k.delta, k.seq.rho(j));
}

double KamSchedule::Gamma(int j) const
{
    return std::exp(log_gamma_j(*this, j));
}

static double log_theta(const KamSchedule& k, int j)
{
    double acc = 0;
    for (int nu = 0; nu < j; ++nu)
        acc += (k.kappa - 1) / std::pow(k.kappa, nu + 1) * log_gamma_j(k, nu);
    return acc;
}

double KamSchedule::Theta(int j) const
{
    return std::exp(log_theta(*this, j));
}

double KamSchedule::log_E(int j) const
{
    return std::pow(kappa, j) * (log_theta(*this, j) + std::log(E0()));
}

double KamSchedule::E(int j) const
{
    return std::exp(log_E(j));
}

double KamSchedule::m_j(int j) const
{
    double acc = m;
    for (int nu = 0; nu < j; ++nu)
        acc -= seq.mu(nu);
    return acc;
}

double KamSchedule::r_j(int j) const
{
    double acc = r;
    for (int nu = 0; nu < j; ++nu)
        acc -= 2 * seq.rho(nu);
    return acc;
}

double KamSchedule::eta_j(int j) const
{
    return std::exp(0.5 * (-2.0 * b * std::log(2.0) + log_gamma_j(*this, j) + log_E(j)));
}

double KamSchedule::s_j(int j) const
{
    double acc = s;
    for (int nu = 0; nu < j; ++nu)
        acc *= eta_j(nu) / 2;
    return acc;
}

double KamSchedule::h_j(int j) const
{
    return std::exp((j + c) * std::log(2.0) + log_E(j));
}

double KamSchedule::K_j(int j) const
{
    return d * std::log(2.0) - log_gamma_j(*this, j) - log_E(j);
}

double KamSchedule::f3_defect(int j) const
{
    double lhs = (kappa - 1) * log_gamma_j(*this, j) + kappa * log_E(j);
    double rhs = log_E(j + 1);
    return std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
}

double KamSchedule::f2_ratio(int j) const
{
    double lhs = log_gamma_j(*this, j) + log_E(j);
    double rhs = std::pow(kappa, j) * ((2 + a) * std::log(2.0) + std::log(psi()) + std::log(E0()));
    return std::exp(lhs - rhs);
}

} // namespace kamwb
