#pragma once

#include "kamwb/kam.hpp"
#include "kamwb/lattice.hpp"
#include "kamwb/resonance.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace kamwb {

/// T_* by tanh-sinh quadrature of 4 sqrt(l+1) int_0^1 (1-u^{2l+2})^{-1/2} du.
double period_quadrature(int l);
/// T_* as four times the first zero of C from an ODE integration.
double period_ode(int l);
/// Quadrature value, cross-checked against the ODE. Throws QuadratureStall.
double period(int l);

/// Per-identity maximum deviations found by GenTrig::verify.
struct TrigCheck {
    double periodicity = 0; ///< |(C,S)(T_*) - (1,0)| by direct integration
    double table = 0;       ///< table vs direct integration at random t
    double derivative = 0;  ///< |C' - S| by 4th-order differences
    double energy = 0;      ///< |(l+1) S^2 + C^{2l+2} - 1|
    double parity = 0;      ///< |C(-t) - C(t)| + |S(-t) + S(t)| with backward integration
    double worst() const;
};

/// Generalized trig pair: C' = S, S' = -C^{2l+1}, (C,S)(0) = (1,0).
class GenTrig {
public:
    GenTrig() = default;
    /// quarter_intervals >= 1024 gives at least 4096 samples per period.
    GenTrig(int l, int quarter_intervals = 1024);

    int l() const { return l_; }
    double period() const { return T_; }
    int samples() const { return 4 * N_; }

    /// (C(t), S(t)) for any real t.
    std::pair<double, double> eval(double t) const;
    double C(double t) const { return eval(t).first; }
    double S(double t) const { return eval(t).second; }

    /// Throws PropertyViolation when any deviation exceeds tol.
    TrigCheck verify(double tol = 1e-10, int n_random = 1000, std::uint64_t seed = 7) const;

private:
    int l_ = 1;
    double T_ = 0;
    double tau_ = 0; ///< quarter period
    int N_ = 0;
    double dt_ = 0;
    std::vector<double> c_, s_; ///< quarter-period table, N_+1 nodes

    std::pair<double, double> eval_quarter(double t) const;
};

/// Action-angle chart u = (c1 rho)^{1/(l+2)} C(T phi/2pi), v = (c1 rho)^{(l+1)/(l+2)} S(T phi/2pi).
struct ActionAngleChart {
    std::shared_ptr<const GenTrig> trig;
    double c1 = 0;
    double action_lo = 0.1; ///< admissible action window
    double action_hi = 10.0;

    explicit ActionAngleChart(int l, double action_lo = 0.1, double action_hi = 10.0);
    ActionAngleChart() = default;
    int l() const { return trig->l(); }
    double period() const { return trig->period(); }

    std::pair<double, double> forward(double rho, double phi) const;
    /// (rho, phi) with phi in [0, 2pi). Throws OriginExcluded.
    std::pair<double, double> inverse(double u, double v) const;
    /// h0(u,v) = v^2/2 + u^{2l+2}/(2l+2)
    double energy(double u, double v) const;
    /// h0 as a function of the action
    double energy_of_action(double rho) const;
    /// Central-difference det d(u,v)/d(phi,rho).
    double jacobian_det(double rho, double phi, double step = 1e-5) const;
};

/// wt(rho0) = c1^{(2l+2)/(l+2)} rho0^{l/(l+2)} / (l+2)
double omega_tilde(const ActionAngleChart& chart, double rho0);
/// d wt / d rho0
double omega_tilde_derivative(const ActionAngleChart& chart, double rho0);
/// rho0 with omega_tilde(rho0) = wt. Throws DegenerateJacobian for l = 0.
double action_of_frequency(const ActionAngleChart& chart, double wt);

/// a cos<k,theta> + b sin<k,theta>, k over the window
struct ForcingTerm {
    std::map<int, int> k;
    double a = 0;
    double b = 0;
};

/// Real almost periodic coefficient p(theta), truncated to finitely many modes.
struct ApSignal {
    std::vector<ForcingTerm> terms;
    double eval(const Frequency& omega, double t) const;
    bool empty() const { return terms.empty(); }
};

/// x'' + x^{2l+1} = sum_{j<=2l} p_j(t) x^j with the small parameter epsilon.
struct ForcingSpec {
    int l = 1;
    double epsilon = 1e-6;
    Frequency omega;
    std::vector<std::vector<int>> subsets; ///< spatial structure over omega.window
    double rho_w = 3.0;
    std::vector<ApSignal> p; ///< p[j], j = 0..2l; missing entries are zero

    void validate() const;
    SpatialStructure structure() const;
};

/// x'' + x^{2l+1} = sum_j coeff[j] p_j(time_scale t) x^j
struct OscSystem {
    int l = 1;
    Frequency omega;
    std::vector<ApSignal> p;
    std::vector<double> coeff;
    double time_scale = 1.0;

    double force(double x, double t) const;
    double energy(double x, double v) const;
    bool unforced() const;
};

/// The system as given.
OscSystem original_system(const ForcingSpec& spec);
/// u = eps x, tau = eps^{-l} t: coefficients eps^{2l+1-j}, forcing frequencies eps^l omega.
OscSystem rescale(const ForcingSpec& spec);

struct HamiltonianOptions {
    int degree_cap = 4;
    int order_cap = 12;
    int fft_points = 256;
    int nodes_per_dim = 5;
    double m = 1.0, r = 1.0, w = 0.0;
    double h = -1;          ///< parameter half-width; schedule h_0 when negative
    double coeff_tol = 1e-17; ///< drop Fourier coefficients of C^{j+1} below this
    bool check_gate = true;
};

struct BuiltHamiltonian {
    Hamiltonian H;
    SpacePtr space;
    double s = 0;          ///< eps^{1/2}
    double omega_tilde = 0;
    double P_norm = 0;     ///< |||P|||_{m,r,s,h}
    double C_star = 0;     ///< |||P||| / eps
    double gate_lhs = 0;   ///< s^{-1} |||P|||
    double gate_rhs = 0;   ///< E_0
    bool gate_ok = false;
    /// weighted norm of the terms dropped by order_cap, coeff_tol and degree_cap
    double truncation_tail = 0;
    std::vector<double> rho0; ///< action per grid node
};

/// Assembles N + P in the coordinates (theta, J, phi, I = rho - rho0) for the rescaled system.
/// Throws GateFailed when check_gate is set and s^{-1}|||P||| > E_0.
BuiltHamiltonian build_hamiltonian(const ForcingSpec& spec, const ActionAngleChart& chart, double rho0,
                                   const KamSchedule& sched, const HamiltonianOptions& opt = {});

enum class Integrator { Verlet, Yoshida8, RK78 };

struct SimOptions {
    Integrator method = Integrator::Yoshida8;
    double dt = 0.01;
    long sample_every = 100; ///< steps between trajectory rows (0: none)
    int section_lambda = -1; ///< forcing index for the section; -1: none
    double section_phase = 0;
    double rk_tol = 1e-13;
    int windows = 50; ///< amplitude windows over [0, T]
};

struct TrajectoryRow {
    double t, x, v, energy, sup_so_far;
};

struct SimResult {
    std::vector<TrajectoryRow> rows;
    std::vector<std::pair<double, double>> section;
    double sup_abs_x = 0;
    double energy0 = 0;
    double max_energy_drift = 0; ///< relative to energy0
    std::vector<std::pair<double, double>> window_max; ///< (window midpoint, max |x|)
    long steps = 0;
};

/// Integrates from (x0, v0) over [0, T]. Throws StepRejected.
SimResult simulate(const OscSystem& sys, double x0, double v0, double T, const SimOptions& opt = {});

/// Least-squares slope of the per-window maximum of |x| against time.
double amplitude_slope(const SimResult& r);

} // namespace kamwb
