#pragma once

#include "kamwb/approx.hpp"
#include "kamwb/apseries.hpp"
#include "kamwb/resonance.hpp"

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kamwb {

/// C_0 in the composition estimate of the error term.
constexpr double c0_flow = 8.0;

/// N = e(wt) + <omega,J> + <wt,z>; e sampled on the parameter grid of the perturbation.
struct NormalForm {
    Frequency omega;
    std::vector<double> e; ///< one value per grid node
};

struct Hamiltonian {
    NormalForm normal;
    TorusSeries P;
};

/// Smallest nonnegative integer <A> with mu [A] + rho <A> >= K.
int truncation_order(double weight, double mu, double rho, double K);

struct TruncateResult {
    TorusSeries R;
    double P_norm = 0;         ///< |||P|||_{m,r,s}
    double R_norm = 0;         ///< |||R|||_{m,r,s}
    double discarded_norm = 0; ///< |||P-R|||_{m-mu,r-rho,eta s}
    double discarded_bound = 0;
    std::vector<int> orders;   ///< <A> per component
};

/// Keeps orders <= <A> per component and z-degree <= 1. Throws BoundViolated.
TruncateResult truncate(const TorusSeries& P, double m, double r, double s, double mu, double rho,
                        double K, double eta);

/// Generating function F = F0 + <F1, z>.
struct Generator {
    TorusSeries F;
    TorusSeries F0() const;
    TorusSeries F1(int i) const;
};

struct HomologicalResult {
    Generator F;
    TorusSeries Nhat;            ///< mean terms: e-hat + <v, z>
    double residual = 0;         ///< |||{F,N} + Nhat - R|||
    double R_norm = 0;
    double min_divisor = 0;      ///< smallest |divisor| over retained modes and nodes
    std::vector<std::vector<double>> v; ///< frequency shift per grid node
    std::vector<double> ehat;           ///< energy shift per grid node
};

/// {F,N} = <omega, d_theta F> + <wt, d_x F>, the x/z part through poisson_bracket.
TorusSeries bracket_with_normal_form(const TorusSeries& F, const Frequency& omega);

/// Solves {F,N} + Nhat = R mode by mode. Throws ZeroDivisor.
HomologicalResult solve_homological(const TorusSeries& R, const Frequency& omega);

/// Parameters of the pseudo-spectral flow and composition.
struct FlowOptions {
    int gauss_nodes = 8;
    double abs_tol = 1e-15;
    double rel_tol = 1e-13;
    int min_grid = 4;
    int max_grid_points = 1 << 22;
    double prune_rel = 1e-18;
};

/// Time-1 map x = U1, J = J+ + U2 + U3 z+, z = U4 + U5 z+ sampled on a tensor grid over the
/// active angles, one block per parameter node.
struct TransformationMap {
    std::vector<int> theta_dims;  ///< active window positions
    std::vector<int> grid_shape;  ///< per active theta dim, then per x dim
    int G = 1;
    int n = 1;
    std::vector<double> U1;       ///< [g][point][n]
    std::vector<double> U2;       ///< [g][point][La]
    std::vector<double> U3;       ///< [g][point][La*n]
    std::vector<double> U4;       ///< [g][point][n]
    std::vector<double> U5;       ///< [g][point][n*n]
    double symplectic_residual = 0; ///< 2-form pullback defect
    double displacement = 0;        ///< |W(Phi - id)| on the real grid
    std::size_t points() const;
};

struct FlowInput {
    const Generator* F = nullptr;
    const TorusSeries* R = nullptr;    ///< for the Lie integral, may be null
    const TorusSeries* Nhat = nullptr;
    const TorusSeries* PminusR = nullptr;
    double rho = 0.1;  ///< weights of |W .|
    double s = 1.0;
    double w = 0.0;
};

struct FlowOutput {
    TransformationMap map;
    std::optional<TorusSeries> Pplus; ///< int {R_t,F} o X^t dt + (P-R) o Phi
    double alias_level = 0;           ///< largest coefficient magnitude in the top band, relative
};

/// Flow of X_F to t=1 on the grid, optionally composing the new error term.
FlowOutput flow_time1(const FlowInput& in, const FlowOptions& opt = {});

struct FrequencyInverse {
    std::vector<std::vector<double>> phi; ///< phi(wt+) per new grid node
    double max_shift = 0;                 ///< |phi - id|
    double max_derivative_defect = 0;     ///< |D phi - Id|
    double residual = 0;                  ///< |phi + v(phi) - wt+|
    int iterations = 0;
};

/// Solves wt + v(wt) = wt+ by Newton for each node of new_grid; v given on old_grid.
FrequencyInverse invert_frequency_map(const ParamGrid& old_grid,
                                      const std::vector<std::vector<double>>& v,
                                      const ParamGrid& new_grid, int max_iter = 50);

struct StepParams {
    double m = 0.5, r = 0.5, s = 1.0, h = 0.0, w = 0.0;
    double mu = 0.1, rho = 0.1, K = 10, eta = 0.1;
    double h_next = 0.0; ///< half-width of the new parameter box
    double eps_override = 0.0; ///< scheduled epsilon for the bounds; measured norm when 0
    double alpha_tilde = 2.0;
    ApproxFunction delta;
    bool strict = true;  ///< throw on violated bounds
    FlowOptions flow;
};

struct KamStepReport {
    double measured_P_norm = 0; ///< epsilon = |||P|||_{m,r,s}
    double E = 0;
    double gamma_mu = 1, gamma_rho = 1;
    double bound_E_j = 0;
    double truncation_residual = 0; ///< measured |||P-R|||
    double truncation_bound = 0;
    double homological_residual = 0;   ///< relative to |||R|||
    double new_norm = 0;               ///< |||P+|||_{m-mu,r-2rho,eta s/2}
    double new_error_bound_rhs = 0;
    double symplectic_residual = 0;
    double displacement = 0;
    double displacement_bound = 0;
    double frequency_shift = 0;        ///< |v|
    double inversion_shift = 0;        ///< |phi - id|
    double inversion_derivative = 0;   ///< (h/4)|D phi - Id|
    double inversion_residual = 0;
    double divisor_margin = 0;         ///< min over retained kt != 0 of |div| Delta Delta / alpha~ - 1
    double h_bound = 0;                ///< min_A 1/(Delta([A]) <A> Delta(<A>))
    double min_divisor = 0;
    double alias_level = 0;
    bool smallness_ok = false;         ///< 16 Gamma Gamma E <= 1
    bool eta_ok = false;               ///< 4 C0 Gamma Gamma E <= eta <= 1/2
    bool e15_ok = false;               ///< E <= h/16
    bool e6_ok = false;                ///< h <= h_bound
    bool bound_ok = false;
};

struct KamStepResult {
    Hamiltonian H;            ///< on the new parameter grid
    TorusSeries Pplus_raw;    ///< new error on the old grid, before reparametrisation
    TransformationMap map;
    FrequencyInverse phi;
    KamStepReport report;
};

KamStepResult kam_step(const Hamiltonian& H, const StepParams& p);

/// Constants and sequences of the iteration.
struct KamSchedule {
    int a = 13, b = 4, c = 6, d = 8, e = 22;
    double kappa = 1.5;
    double alpha_tilde = 2.0;
    double m = 1.0, r = 1.0, s = 1.0, w = 0.0;
    SequenceSchedule seq;      ///< mu_total, rho_total
    ApproxFunction delta;

    double eps_star() const;
    double psi() const;        ///< Psi_0 Psi_1
    double E0() const;         ///< alpha~ eps_* / (Psi_0 Psi_1)
    double Gamma(int j) const; ///< 2^{j+a} Gamma_0(mu_j) Gamma_1(rho_j)
    double Theta(int j) const;
    double E(int j) const;     ///< (Theta_j E_0)^{kappa^j}
    double log_E(int j) const;
    double m_j(int j) const;
    double r_j(int j) const;
    double s_j(int j) const;
    double h_j(int j) const;
    double eta_j(int j) const;
    double K_j(int j) const;

    /// Relative defect of Gamma_j^{kappa-1} E_j^kappa = E_{j+1}.
    double f3_defect(int j) const;
    /// (Gamma_j E_j) / (2^{2+a} Psi E_0)^{kappa^j}, must be <= 1.
    double f2_ratio(int j) const;

private:
    mutable std::string psi_key_;
    mutable double psi_cache_ = 1.0;
};

struct KamRunRow {
    int j = 0;
    double m = 0, r = 0, s = 0, h = 0, E = 0;
    double measured_norm = 0; ///< |||P_{j+1}||| after step j
    double bound_rhs = 0;
    double homolog_residual = 0;
    double sympl_residual = 0;
    double freq_shift = 0;
    double gate_lhs = 0;      ///< s_j^{-1} |||P_j|||
    bool gate_ok = false;
    double h_ratio = 0;       ///< h_{j+1}/h_j
    double displacement_bound = 0; ///< 4 max(2^{1-a-j} Gamma_j E_j, 2 E_j/h_j)
    double f3_defect = 0;
    double f2_ratio = 0;
    KamStepReport step;
};

struct KamRunResult {
    std::vector<KamRunRow> rows;
    double entry_lhs = 0;   ///< s^{-1} |||P|||
    double E0 = 0;
    double h_over_2c = 0;
    bool stopped_small = false;
    double final_gate_lhs = 0; ///< s_J^{-1} |||P_J||| after the last step
    double final_E = 0;
    bool final_gate_ok = false;
    Hamiltonian final_H;
};

struct RunOptions {
    int j_max = 8;
    double stop_rel = 1e-14; ///< stop when |||P_j||| < stop_rel s_j
    FlowOptions flow;
};

/// Multiplies the Hamiltonian by lam, which rescales time by 1/lam.
Hamiltonian scale_time(const Hamiltonian& H, double lam);

/// Iterates kam_step with the scheduled parameters. Throws GateFailed.
KamRunResult kam_run(const Hamiltonian& H, const KamSchedule& sched, const RunOptions& opt = {});

/// Grid on the box of half-width h; a single node when h is below double resolution.
ParamGrid make_grid(const std::vector<double>& center, double h, int nodes_per_dim);

/// Re-samples f at the points wt (one per node of new_grid) by barycentric interpolation.
TorusSeries resample(const TorusSeries& f, SpacePtr new_space, const std::vector<std::vector<double>>& wt);

/// Result of the Legendre change of variables.
struct ParameterFamily {
    std::vector<std::vector<double>> y0; ///< g(wt) per grid node
    TorusSeries quadratic;               ///< int_0^1 (1-t) <h_yy(g+tz) z, z> dt as z-polynomial
    std::vector<double> e;               ///< h(g) - <wt, g> is not needed; h(g) per node
    int newton_iterations = 0;
};

using VecFn = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;
using MatFn = std::function<Eigen::MatrixXcd(const Eigen::VectorXcd&)>;
using ScalarFn = std::function<std::complex<double>(const Eigen::VectorXcd&)>;

/// Inverts h_y(y) = wt on every grid node by Newton from y_guess and Taylor-fits the
/// quadratic remainder on circles of radius fit_radius. Throws DegenerateJacobian.
ParameterFamily introduce_parameters(SpacePtr space, const ScalarFn& h, const VecFn& h_y,
                                     const MatFn& h_yy, const Eigen::VectorXd& y_guess,
                                     double fit_radius);

} // namespace kamwb
