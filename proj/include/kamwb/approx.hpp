#pragma once

#include <string>
#include <utility>
#include <vector>

namespace kamwb {

/// Approximation function Delta, evaluated in log form to avoid overflow.
class ApproxFunction {
public:
    enum class Kind { Default, PowerExp, Table };

    /// exp(t / (1 + ln(1+t))^2)
    static ApproxFunction default_kind();
    /// exp(t^sigma), 0 < sigma < 1
    static ApproxFunction power_exp(double sigma);
    /// Piecewise-linear log Delta through (t_i, Delta_i); constant past the last node.
    static ApproxFunction table(std::vector<std::pair<double, double>> nodes);
    /// Delta == 1
    static ApproxFunction unit();

    Kind kind() const { return kind_; }
    double sigma() const { return sigma_; }
    const std::vector<std::pair<double, double>>& nodes() const { return nodes_; }
    std::string name() const;

    double log_value(double t) const;
    double operator()(double t) const;

private:
    Kind kind_ = Kind::Default;
    double sigma_ = 0.5;
    std::vector<std::pair<double, double>> nodes_;
};

ApproxFunction default_delta();

struct SupOptions {
    int grid_points = 512;
    double rel_tol = 1e-10;
    double t_limit = 1e250;
};

/// log of Gamma_0(mu) = sup_{t>=0} Delta(t) e^{-mu t}
double log_gamma0(const ApproxFunction& delta, double mu, const SupOptions& opt = {});
/// log of Gamma_1(rho) = sup_{t>=0} (1+t) Delta(t) e^{-rho t}
double log_gamma1(const ApproxFunction& delta, double rho, const SupOptions& opt = {});
double gamma0(const ApproxFunction& delta, double mu, const SupOptions& opt = {});
double gamma1(const ApproxFunction& delta, double rho, const SupOptions& opt = {});

/// Argmax location of the supremum, for diagnostics.
double argmax_gamma(const ApproxFunction& delta, double decay, bool with_linear_factor,
                    const SupOptions& opt = {});

/// Loss sequences mu_nu, rho_nu and exponent weights kappa_nu.
struct SequenceSchedule {
    double mu_total = 1.0;
    double rho_total = 1.0;
    double kappa = 1.5;
    double decay_q = 0.5;
    double tail_tol = 1e-12;

    double mu(int nu) const;
    double rho(int nu) const;
    double kappa_nu(int nu) const;
    /// sum_{nu >= n} kappa_nu
    double kappa_tail(int n) const;
};

struct PsiResult {
    double log_value = 0;
    double value = 1;
    int terms = 0;
    double tail_estimate = 0;
};

/// Psi_0(mu) Psi_1(rho) = prod_nu Gamma_0(mu_nu)^kappa_nu Gamma_1(rho_nu)^kappa_nu.
/// Throws Divergence when the log terms do not decay.
PsiResult psi_product(const ApproxFunction& delta, const SequenceSchedule& sched, int max_terms = 400);

/// Direct partial product with exactly n terms, in log form.
double psi_partial_log(const ApproxFunction& delta, const SequenceSchedule& sched, int n);

} // namespace kamwb
