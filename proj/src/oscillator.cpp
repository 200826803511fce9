#include "kamwb/oscillator.hpp"

#include "kamwb/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/numeric/odeint.hpp>
#include <fftw3.h>

namespace kamwb {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, 2>;

namespace {

struct TrigRhs {
    int l;
    void operator()(const State& x, State& dx, double) const
    {
        dx[0] = x[1];
        dx[1] = -std::pow(x[0], 2 * l + 1);
    }
};

auto rk78(double tol)
{
    return odeint::make_controlled(tol, tol, odeint::runge_kutta_fehlberg78<State>());
}

/// States at the given times (monotone, same sign) starting from (1,0) at 0.
std::vector<State> integrate_at(int l, const std::vector<double>& times, double tol = 1e-15)
{
    std::vector<State> out;
    std::vector<double> ts{0.0};
    ts.insert(ts.end(), times.begin(), times.end());
    State x{1.0, 0.0};
    double dt0 = times.empty() || times.back() >= 0 ? 1e-3 : -1e-3;
    odeint::integrate_times(rk78(tol), TrigRhs{l}, x, ts.begin(), ts.end(), dt0,
                            [&](const State& s, double) { out.push_back(s); });
    out.erase(out.begin());
    return out;
}

} // namespace

double period_quadrature(int l)
{
    if (l < 0)
        throw ConfigError("l must be nonnegative");
    const double p = 2.0 * l + 2.0;
    // u = 1 - y moves the singularity to y = 0, where 1 - u^p = -expm1(p log1p(-y))
    auto f = [p](double y) {
        double g = -std::expm1(p * std::log1p(-y));
        return 1.0 / std::sqrt(g);
    };
    boost::math::quadrature::tanh_sinh<double> ts(20);
    double err = 0;
    double I = ts.integrate(f, 0.0, 1.0, 1e-15, &err);
    return 4.0 * std::sqrt(l + 1.0) * I;
}

double period_ode(int l)
{
    if (l < 0)
        throw ConfigError("l must be nonnegative");
    odeint::bulirsch_stoer_dense_out<State> bs(1e-14, 1e-14);
    bs.initialize(State{1.0, 0.0}, 0.0, 1e-2);
    TrigRhs rhs{l};
    for (int it = 0; it < 1000000; ++it) {
        auto [t0, t1] = bs.do_step(rhs);
        if (bs.current_state()[0] > 0)
            continue;
        double a = t0, b = t1;
        State x;
        for (int k = 0; k < 200 && b - a > 1e-16 * b; ++k) {
            double c = 0.5 * (a + b);
            bs.calc_state(c, x);
            (x[0] > 0 ? a : b) = c;
        }
        return 4.0 * 0.5 * (a + b);
    }
    throw QuadratureStall("no zero crossing of C found");
}

double period(int l)
{
    double q = period_quadrature(l);
    double o = period_ode(l);
    if (!(std::abs(q - o) <= 1e-8 * q)) {
        std::ostringstream os;
        os.precision(17);
        os << "quadrature " << q << " vs ODE " << o;
        throw QuadratureStall(os.str());
    }
    return q;
}

// ---------------------------------------------------------------- GenTrig

double TrigCheck::worst() const
{
    return std::max({periodicity, table, derivative, energy, parity});
}

GenTrig::GenTrig(int l, int quarter_intervals) : l_(l), N_(quarter_intervals)
{
    if (l < 0)
        throw ConfigError("l must be nonnegative");
    if (N_ < 16)
        throw ConfigError("quarter table needs at least 16 intervals");
    T_ = kamwb::period(l);
    tau_ = T_ / 4;
    dt_ = tau_ / N_;
    std::vector<double> times;
    for (int i = 1; i <= N_; ++i)
        times.push_back(i * dt_);
    auto st = integrate_at(l, times);
    c_.assign(1, 1.0);
    s_.assign(1, 0.0);
    for (auto& x : st) {
        c_.push_back(x[0]);
        s_.push_back(x[1]);
    }
}

std::pair<double, double> GenTrig::eval_quarter(double t) const
{
    int i = std::clamp(static_cast<int>(std::floor(t / dt_)), 0, N_ - 1);
    double x = t / dt_ - i;
    const int p = 2 * l_ + 1;
    auto hermite = [&](double f0, double d0, double s0, double f1, double d1, double s1) {
        double x2 = x * x, x3 = x2 * x, x4 = x3 * x, x5 = x4 * x;
        double H0 = 1 - 10 * x3 + 15 * x4 - 6 * x5;
        double H1 = x - 6 * x3 + 8 * x4 - 3 * x5;
        double H2 = 0.5 * (x2 - 3 * x3 + 3 * x4 - x5);
        double H3 = 0.5 * (x3 - 2 * x4 + x5);
        double H4 = -4 * x3 + 7 * x4 - 3 * x5;
        double H5 = 10 * x3 - 15 * x4 + 6 * x5;
        return f0 * H0 + d0 * dt_ * H1 + s0 * dt_ * dt_ * H2 + s1 * dt_ * dt_ * H3 + d1 * dt_ * H4 +
               f1 * H5;
    };
    double c0 = c_[i], c1 = c_[i + 1], s0 = s_[i], s1 = s_[i + 1];
    double f0 = std::pow(c0, p), f1 = std::pow(c1, p);
    double g0 = l_ == 0 ? 1.0 : p * std::pow(c0, p - 1);
    double g1 = l_ == 0 ? 1.0 : p * std::pow(c1, p - 1);
    double C = hermite(c0, s0, -f0, c1, s1, -f1);
    double S = hermite(s0, -f0, -g0 * s0, s1, -f1, -g1 * s1);
    return {C, S};
}

std::pair<double, double> GenTrig::eval(double t) const
{
    double r = std::fmod(t, T_);
    if (r < 0)
        r += T_;
    if (r > 2 * tau_) {
        auto [c, s] = eval(T_ - r);
        return {c, -s};
    }
    if (r > tau_) {
        auto [c, s] = eval_quarter(2 * tau_ - r);
        return {-c, s};
    }
    return eval_quarter(r);
}

TrigCheck GenTrig::verify(double tol, int n_random, std::uint64_t seed) const
{
    TrigCheck ck;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> U(0.0, T_);
    std::vector<double> ts(n_random);
    for (auto& t : ts)
        t = U(gen);
    std::sort(ts.begin(), ts.end());

    auto full = integrate_at(l_, {T_});
    ck.periodicity = std::abs(full[0][0] - 1) + std::abs(full[0][1]);

    auto direct = integrate_at(l_, ts);
    std::vector<double> neg(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i)
        neg[i] = -ts[i];
    auto back = integrate_at(l_, neg);
    const double hd = 1e-3;
    double worst_at[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double t = ts[i];
        auto [c, s] = eval(t);
        double e_tab = std::max(std::abs(c - direct[i][0]), std::abs(s - direct[i][1]));
        double d = (-C(t + 2 * hd) + 8 * C(t + hd) - 8 * C(t - hd) + C(t - 2 * hd)) / (12 * hd);
        double e_der = std::abs(d - s);
        double e_en = std::abs((l_ + 1) * s * s + std::pow(c, 2 * l_ + 2) - 1);
        double e_par = std::abs(back[i][0] - c) + std::abs(back[i][1] + s);
        if (e_tab > ck.table) { ck.table = e_tab; worst_at[0] = t; }
        if (e_der > ck.derivative) { ck.derivative = e_der; worst_at[1] = t; }
        if (e_en > ck.energy) { ck.energy = e_en; worst_at[2] = t; }
        if (e_par > ck.parity) { ck.parity = e_par; worst_at[3] = t; }
    }
    auto fail = [&](const char* what, double val, double t) {
        std::ostringstream os;
        os.precision(6);
        os << what << " deviation " << val << " at t = " << t << " (l = " << l_ << ")";
        throw PropertyViolation(os.str());
    };
    if (!(ck.periodicity <= tol))
        fail("periodicity", ck.periodicity, T_);
    if (!(ck.table <= tol))
        fail("table", ck.table, worst_at[0]);
    if (!(ck.derivative <= tol))
        fail("C' = S", ck.derivative, worst_at[1]);
    if (!(ck.energy <= tol))
        fail("energy", ck.energy, worst_at[2]);
    if (!(ck.parity <= tol))
        fail("parity", ck.parity, worst_at[3]);
    return ck;
}

// ---------------------------------------------------------------- chart

ActionAngleChart::ActionAngleChart(int l, double lo, double hi)
    : trig(std::make_shared<GenTrig>(l)), action_lo(lo), action_hi(hi)
{
    if (!(lo > 0 && hi > lo))
        throw ConfigError("action window must satisfy 0 < lo < hi");
    c1 = 2 * std::numbers::pi * (l + 2) / trig->period();
}

std::pair<double, double> ActionAngleChart::forward(double rho, double phi) const
{
    if (!(rho > 0))
        throw DomainViolation("action must be positive");
    const int l = trig->l();
    auto [c, s] = trig->eval(trig->period() * phi / (2 * std::numbers::pi));
    double a = std::pow(c1 * rho, 1.0 / (l + 2));
    return {a * c, std::pow(a, l + 1) * s};
}

double ActionAngleChart::energy(double u, double v) const
{
    const int l = trig->l();
    return 0.5 * v * v + std::pow(u, 2 * l + 2) / (2 * l + 2);
}

double ActionAngleChart::energy_of_action(double rho) const
{
    const int l = trig->l();
    return std::pow(c1 * rho, (2.0 * l + 2) / (l + 2)) / (2 * l + 2);
}

std::pair<double, double> ActionAngleChart::inverse(double u, double v) const
{
    if (u == 0 && v == 0)
        throw OriginExcluded("(u,v) = (0,0)");
    const int l = trig->l();
    const double T = trig->period();
    double h = energy(u, v);
    double rho = std::pow((2 * l + 2) * h, (l + 2) / (2.0 * l + 2)) / c1;
    double a = std::pow(c1 * rho, 1.0 / (l + 2));
    double cu = u / a, sv = v / std::pow(a, l + 1);
    // nearest table phase, then Newton on the better-conditioned coordinate
    const int coarse = 4096;
    double best = 0, bd = 1e300;
    for (int i = 0; i < coarse; ++i) {
        double t = T * i / coarse;
        auto [c, s] = trig->eval(t);
        double d = (c - cu) * (c - cu) + (s - sv) * (s - sv);
        if (d < bd) {
            bd = d;
            best = t;
        }
    }
    double t = best;
    for (int it = 0; it < 50; ++it) {
        auto [c, s] = trig->eval(t);
        double dc = s, ds = -std::pow(c, 2 * l + 1);
        // minimise distance along the level set: Gauss-Newton step
        double num = (c - cu) * dc + (s - sv) * ds;
        double den = dc * dc + ds * ds;
        double step = num / den;
        t -= step;
        if (std::abs(step) < 1e-16 * T)
            break;
    }
    double phi = 2 * std::numbers::pi * std::fmod(t, T) / T;
    if (phi < 0)
        phi += 2 * std::numbers::pi;
    return {rho, phi};
}

double ActionAngleChart::jacobian_det(double rho, double phi, double step) const
{
    double hr = step * rho;
    auto [ur1, vr1] = forward(rho + hr, phi);
    auto [ur0, vr0] = forward(rho - hr, phi);
    auto [up1, vp1] = forward(rho, phi + step);
    auto [up0, vp0] = forward(rho, phi - step);
    double u_r = (ur1 - ur0) / (2 * hr), v_r = (vr1 - vr0) / (2 * hr);
    double u_p = (up1 - up0) / (2 * step), v_p = (vp1 - vp0) / (2 * step);
    return u_p * v_r - u_r * v_p;
}

double omega_tilde(const ActionAngleChart& chart, double rho0)
{
    const int l = chart.l();
    return std::pow(chart.c1, (2.0 * l + 2) / (l + 2)) * std::pow(rho0, double(l) / (l + 2)) / (l + 2);
}

double omega_tilde_derivative(const ActionAngleChart& chart, double rho0)
{
    const int l = chart.l();
    return l / std::pow(l + 2.0, 2) * std::pow(chart.c1, (2.0 * l + 2) / (l + 2)) *
           std::pow(rho0, -2.0 / (l + 2));
}

double action_of_frequency(const ActionAngleChart& chart, double wt)
{
    const int l = chart.l();
    if (l == 0)
        throw DegenerateJacobian("the harmonic oscillator is isochronous");
    double base = wt * (l + 2) / std::pow(chart.c1, (2.0 * l + 2) / (l + 2));
    return std::pow(base, (l + 2.0) / l);
}

// ---------------------------------------------------------------- forcing

double ApSignal::eval(const Frequency& omega, double t) const
{
    double acc = 0;
    for (auto& term : terms) {
        double ph = 0;
        for (auto [lam, kv] : term.k)
            ph += kv * omega.at(lam);
        ph *= t;
        acc += term.a * std::cos(ph) + term.b * std::sin(ph);
    }
    return acc;
}

void ForcingSpec::validate() const
{
    if (l < 0)
        throw ConfigError("l must be nonnegative");
    if (!(epsilon > 0))
        throw ConfigError("epsilon must be positive");
    if (static_cast<int>(omega.omega.size()) != omega.window.size())
        throw ConfigError("frequency vector does not match the window");
    if (static_cast<int>(p.size()) > 2 * l + 1)
        throw ConfigError("forcing has terms beyond j = 2l");
    for (auto& pj : p)
        for (auto& term : pj.terms)
            for (auto [lam, kv] : term.k)
                if (!omega.window.contains(lam))
                    throw ConfigError("forcing index " + std::to_string(lam) + " outside the window");
}

SpatialStructure ForcingSpec::structure() const
{
    return SpatialStructure(omega.window, subsets, rho_w);
}

double OscSystem::force(double x, double t) const
{
    double f = -std::pow(x, 2 * l + 1);
    double xj = 1;
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (coeff[j] != 0 && !p[j].empty())
            f += coeff[j] * p[j].eval(omega, time_scale * t) * xj;
        xj *= x;
    }
    return f;
}

double OscSystem::energy(double x, double v) const
{
    return 0.5 * v * v + std::pow(x, 2 * l + 2) / (2 * l + 2);
}

bool OscSystem::unforced() const
{
    for (std::size_t j = 0; j < p.size(); ++j)
        if (coeff[j] != 0 && !p[j].empty())
            return false;
    return true;
}

OscSystem original_system(const ForcingSpec& spec)
{
    spec.validate();
    OscSystem sys;
    sys.l = spec.l;
    sys.omega = spec.omega;
    sys.p = spec.p;
    sys.coeff.assign(spec.p.size(), 1.0);
    return sys;
}

OscSystem rescale(const ForcingSpec& spec)
{
    OscSystem sys = original_system(spec);
    for (std::size_t j = 0; j < sys.coeff.size(); ++j)
        sys.coeff[j] = std::pow(spec.epsilon, 2 * spec.l + 1 - static_cast<int>(j));
    sys.time_scale = std::pow(spec.epsilon, spec.l);
    return sys;
}

// ---------------------------------------------------------------- Hamiltonian

/// Fourier coefficients c_q of C^{p}(T phi / 2pi), q = -N/2+1 .. N/2-1.
static std::vector<cplx> trig_power_coefficients(const GenTrig& trig, int p, int N)
{
    std::vector<cplx> buf(N);
    for (int i = 0; i < N; ++i)
        buf[i] = std::pow(trig.C(trig.period() * i / N), p);
    fftw_plan plan = fftw_plan_dft_1d(N, reinterpret_cast<fftw_complex*>(buf.data()),
                                      reinterpret_cast<fftw_complex*>(buf.data()), FFTW_FORWARD,
                                      FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    for (auto& c : buf)
        c /= static_cast<double>(N);
    return buf;
}

/// binom(a, d) for real a
static double gbinom(double a, int d)
{
    double r = 1;
    for (int i = 0; i < d; ++i)
        r *= (a - i) / (i + 1);
    return r;
}

BuiltHamiltonian build_hamiltonian(const ForcingSpec& spec, const ActionAngleChart& chart, double rho0,
                                   const KamSchedule& sched, const HamiltonianOptions& opt)
{
    spec.validate();
    if (chart.l() != spec.l)
        throw ConfigError("chart and forcing disagree on l");
    if (!(rho0 >= chart.action_lo && rho0 <= chart.action_hi))
        throw ConfigError("rho0 outside the action window");
    const int l = spec.l;
    const double eps = spec.epsilon;
    BuiltHamiltonian out;
    out.s = std::sqrt(eps);
    out.omega_tilde = omega_tilde(chart, rho0);

    ProductStructure ps(spec.structure(), 1);
    double h = opt.h < 0 ? sched.h_j(0) : opt.h;
    ParamGrid grid = make_grid({out.omega_tilde}, h, opt.nodes_per_dim);
    auto space = std::make_shared<SeriesSpace>(ps, opt.degree_cap, opt.order_cap, grid);
    out.space = space;
    const int G = grid.size(), D = opt.degree_cap;
    for (int g = 0; g < G; ++g) {
        double r0 = action_of_frequency(chart, grid.node(g)[0]);
        if (!(r0 > 0))
            throw DegenerateJacobian("frequency map not invertible on the parameter box");
        out.rho0.push_back(r0);
    }

    Hamiltonian& H = out.H;
    H.normal.omega = spec.omega;
    for (auto& w : H.normal.omega.omega)
        w *= std::pow(eps, l);
    H.P = TorusSeries(space);
    H.P.domain() = Domain{opt.m, opt.r, out.s, grid.h(), opt.w};
    const auto zero = H.P.zero_mode();
    const int comp0 = space->rebin(zero);

    // Taylor remainder of h0(rho0 + I) beyond the linear term
    const double beta = (2.0 * l + 2) / (l + 2);
    const double A = std::pow(chart.c1, beta) / (2 * l + 2);
    for (int g = 0; g < G; ++g)
        H.normal.e.push_back(A * std::pow(out.rho0[g], beta));
    const int tail_degree = D + 40;
    auto add_tail = [&](int comp, const TorusSeries::Mode& mode, double sum_over_d) {
        double wa = comp >= 0 ? space->structure().component_weight(comp) : 0.0;
        out.truncation_tail += sum_over_d * std::exp(opt.r * SeriesSpace::order(mode) + opt.m * wa);
    };
    for (int d = 2; d <= D; ++d) {
        std::vector<cplx> vals(G);
        for (int g = 0; g < G; ++g)
            vals[g] = gbinom(beta, d) * A * std::pow(out.rho0[g], beta - d);
        H.P.add_term_grid(comp0, zero, {d}, vals);
    }
    {
        double worst = 0;
        for (int g = 0; g < G; ++g) {
            double acc = 0;
            for (int d = D + 1; d <= tail_degree; ++d)
                acc += std::abs(gbinom(beta, d) * A * std::pow(out.rho0[g], beta - d)) * std::pow(out.s, d);
            worst = std::max(worst, acc);
        }
        add_tail(comp0, zero, worst);
    }

    // forcing: -sum_j eps^{2l+1-j}/(j+1) p_j(theta) c1^{(j+1)/(l+2)} (rho0+I)^{(j+1)/(l+2)} C^{j+1}
    const int N = opt.fft_points;
    for (std::size_t j = 0; j < spec.p.size(); ++j) {
        const auto& pj = spec.p[j];
        if (pj.empty())
            continue;
        const double amp = -std::pow(eps, 2 * l + 1 - static_cast<int>(j)) / (j + 1.0);
        const double al = (j + 1.0) / (l + 2);
        auto cq = trig_power_coefficients(*chart.trig, static_cast<int>(j) + 1, N);
        double cmax = 0;
        for (auto& c : cq)
            cmax = std::max(cmax, std::abs(c));
        // geometric decay of |c_q| fitted above the round-off floor, used for the dropped tail
        double sq = 0, sl = 0, sqq = 0, sql = 0, cnt = 0;
        int qfit = 0;
        for (int q = 1; q < N / 2; ++q) {
            double a = std::abs(cq[q]);
            if (a <= 1e-12 * cmax)
                continue;
            qfit = q;
            sq += q;
            sl += std::log(a);
            sqq += double(q) * q;
            sql += q * std::log(a);
            cnt += 1;
        }
        double decay = 0, icpt = std::log(cmax);
        if (cnt >= 2) {
            decay = -(cnt * sql - sq * sl) / (cnt * sqq - sq * sq);
            icpt = (sl + decay * sq) / cnt;
        }
        for (int q = -N / 2 + 1; q < N / 2; ++q) {
            cplx c = cq[(q + N) % N];
            const bool small = std::abs(c) <= opt.coeff_tol * cmax;
            const double cabs =
                std::abs(q) <= qfit || std::abs(c) > 1e-12 * cmax ? std::abs(c) : std::exp(icpt - decay * std::abs(q));
            for (auto& term : pj.terms) {
                // a cos<k,theta> + b sin<k,theta> = (a - ib)/2 e^{i<k,theta>} + (a + ib)/2 e^{-i<k,theta>}
                std::map<int, int> kp = term.k, km;
                for (auto [lam, kv] : term.k)
                    km[lam] = -kv;
                bool k_zero = true;
                for (auto [lam, kv] : term.k)
                    k_zero = k_zero && kv == 0;
                std::vector<std::pair<std::map<int, int>, cplx>> parts;
                if (k_zero) {
                    parts.push_back({kp, cplx(term.a, 0)});
                } else {
                    parts.push_back({kp, cplx(term.a, -term.b) / 2.0});
                    parts.push_back({km, cplx(term.a, term.b) / 2.0});
                }
                for (auto& [k, pc] : parts) {
                    auto mode = H.P.make_mode(k, {q});
                    int comp = space->rebin(mode);
                    auto coef = [&](int d, int g) {
                        return amp * pc * c * std::pow(chart.c1, al) * gbinom(al, d) * std::pow(out.rho0[g], al - d);
                    };
                    const bool keep = !small && SeriesSpace::order(mode) <= opt.order_cap;
                    double worst = 0;
                    for (int g = 0; g < G; ++g) {
                        double acc = 0;
                        for (int d = keep ? D + 1 : 0; d <= tail_degree; ++d)
                            acc += std::abs(amp * pc * std::pow(chart.c1, al) * gbinom(al, d)) * cabs *
                                   std::pow(out.rho0[g], al - d) * std::pow(out.s, d);
                        worst = std::max(worst, acc);
                    }
                    add_tail(comp, mode, worst);
                    if (!keep)
                        continue;
                    if (comp < 0)
                        throw SupportOverflow("forcing mode has no covering set");
                    for (int d = 0; d <= D; ++d) {
                        std::vector<cplx> vals(G);
                        for (int g = 0; g < G; ++g)
                            vals[g] = coef(d, g);
                        H.P.add_term_grid(comp, mode, {d}, vals);
                    }
                }
            }
        }
    }
    H.P.prune(0.0);

    out.P_norm = norm_total(H.P, opt.m, opt.r, out.s);
    out.C_star = out.P_norm / eps;
    out.gate_lhs = out.P_norm / out.s;
    out.gate_rhs = sched.E0();
    out.gate_ok = out.gate_lhs <= out.gate_rhs;
    if (opt.check_gate && !out.gate_ok) {
        std::ostringstream os;
        os << "s^-1|||P||| = " << out.gate_lhs << " > E_0 = " << out.gate_rhs << " at eps = " << eps;
        throw GateFailed(os.str());
    }
    return out;
}

// ---------------------------------------------------------------- simulation

namespace {

// Yoshida 8th order, solution A, listed w7 .. w1
constexpr std::array<double, 7> kY8w = {
    1.04242620869991, 1.82020630970714, 0.157739928123617, 2.44002732616735,
    -0.00716989419708120, -2.44699182370524, -1.61582374150097};

std::vector<double> yoshida8_coeffs()
{
    double w0 = 1;
    for (double w : kY8w)
        w0 -= 2 * w;
    std::vector<double> c(kY8w.begin(), kY8w.end());
    c.push_back(w0);
    c.insert(c.end(), kY8w.rbegin(), kY8w.rend());
    return c;
}

} // namespace

SimResult simulate(const OscSystem& sys, double x0, double v0, double T, const SimOptions& opt)
{
    if (!(opt.dt > 0) || !(T > 0))
        throw ConfigError("simulate needs dt > 0 and T > 0");
    SimResult res;
    res.energy0 = sys.energy(x0, v0);
    const double escale = std::max(std::abs(res.energy0), 1e-300);
    const int W = std::max(1, opt.windows);
    const double wlen = T / W;
    std::vector<double> wmax(W, 0.0);
    double sec_omega = 0;
    if (opt.section_lambda >= 0 && sys.omega.window.contains(opt.section_lambda))
        sec_omega = sys.omega.at(opt.section_lambda) * sys.time_scale;
    long next_sec = 0;

    double t = 0, x = x0, v = v0;
    long steps = static_cast<long>(std::ceil(T / opt.dt - 1e-9));
    auto record = [&](long i) {
        res.sup_abs_x = std::max(res.sup_abs_x, std::abs(x));
        int w = std::min(W - 1, static_cast<int>(t / wlen));
        wmax[w] = std::max(wmax[w], std::abs(x));
        double e = sys.energy(x, v);
        res.max_energy_drift = std::max(res.max_energy_drift, std::abs(e - res.energy0) / escale);
        if (opt.sample_every > 0 && (i % opt.sample_every == 0 || i == steps))
            res.rows.push_back({t, x, v, e, res.sup_abs_x});
        if (!std::isfinite(x) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "non-finite state at t = " << t;
            throw StepRejected(os.str());
        }
    };
    auto section = [&](double t_prev, double x_prev, double v_prev) {
        if (sec_omega <= 0)
            return;
        double ts = (opt.section_phase + 2 * std::numbers::pi * next_sec) / sec_omega;
        while (ts <= t) {
            if (ts > t_prev || (ts == 0 && t_prev == 0)) {
                double f = (ts - t_prev) / (t - t_prev);
                res.section.push_back({x_prev + f * (x - x_prev), v_prev + f * (v - v_prev)});
            }
            ++next_sec;
            ts = (opt.section_phase + 2 * std::numbers::pi * next_sec) / sec_omega;
        }
    };
    record(0);

    if (opt.method == Integrator::RK78) {
        auto rhs = [&sys](const State& s, State& ds, double tt) {
            ds[0] = s[1];
            ds[1] = sys.force(s[0], tt);
        };
        auto stepper = odeint::make_controlled(opt.rk_tol, opt.rk_tol,
                                               odeint::runge_kutta_fehlberg78<State>());
        State s{x0, v0};
        long i = 0;
        try {
            odeint::integrate_n_steps(stepper, rhs, s, 0.0, opt.dt, steps, [&](const State& st, double tt) {
                if (tt == 0)
                    return;
                double tp = t, xp = x, vp = v;
                t = tt;
                x = st[0];
                v = st[1];
                ++i;
                section(tp, xp, vp);
                record(i);
            });
        } catch (const std::exception& e) {
            throw StepRejected(e.what());
        }
        res.steps = i;
    } else {
        const std::vector<double> cs =
            opt.method == Integrator::Verlet ? std::vector<double>{1.0} : yoshida8_coeffs();
        const double dt = opt.dt;
        for (long i = 1; i <= steps; ++i) {
            double tp = t, xp = x, vp = v;
            // kick-drift-kick per substep; force evaluated at the substep time
            double tt = t;
            for (double c : cs) {
                double h = c * dt;
                v += 0.5 * h * sys.force(x, tt);
                x += h * v;
                tt += h;
                v += 0.5 * h * sys.force(x, tt);
            }
            t = i * dt;
            section(tp, xp, vp);
            record(i);
        }
        res.steps = steps;
    }
    for (int w = 0; w < W; ++w)
        res.window_max.push_back({(w + 0.5) * wlen, wmax[w]});
    return res;
}

double amplitude_slope(const SimResult& r)
{
    const auto& pts = r.window_max;
    if (pts.size() < 2)
        return 0;
    double mt = 0, my = 0;
    for (auto& [t, y] : pts) {
        mt += t;
        my += y;
    }
    mt /= pts.size();
    my /= pts.size();
    double num = 0, den = 0;
    for (auto& [t, y] : pts) {
        num += (t - mt) * (y - my);
        den += (t - mt) * (t - mt);
    }
    return den > 0 ? num / den : 0;
}

} // namespace kamwb
