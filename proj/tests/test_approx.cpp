#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kamwb/approx.hpp"
#include "kamwb/errors.hpp"

#include <cmath>

using namespace kamwb;

namespace {

/// dense-grid supremum of log(f), the oracle for the Gamma functions
double grid_sup_log(const std::function<double(double)>& logf, double tmax, int n)
{
    double best = logf(0);
    for (int i = 1; i <= n; ++i)
        best = std::max(best, logf(tmax * i / n));
    return best;
}

auto sqrt_exp = [] { return ApproxFunction::power_exp(0.5); };

} // namespace

TEST_CASE("default delta values")
{
    auto d = default_delta();
    CHECK(d(0) == 1.0);
    CHECK(d(std::exp(1.0) - 1) == doctest::Approx(std::exp((std::exp(1.0) - 1) / 4)).epsilon(1e-14));
    CHECK(d.log_value(1e3) / 1e3 > d.log_value(1e4) / 1e4);
}

TEST_CASE("default delta is an approximation function")
{
    auto d = default_delta();
    double prev = 0;
    for (int i = 0; i < 10000; ++i) {
        double t = std::pow(10.0, -3 + 9.0 * i / 9999);
        double v = d.log_value(t);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }
    // dyadic blocks of int log Delta / t^2 shrink geometrically
    auto block = [&](double a) {
        double s = 0;
        const int n = 2000;
        for (int i = 0; i < n; ++i) {
            double t = a * std::pow(2.0, (i + 0.5) / n);
            s += d.log_value(t) / (t * t) * t * std::log(2.0) / n;
        }
        return s;
    };
    double last = block(1.0);
    double ratio_max = 0;
    for (double a = 2; a < 1e8; a *= 2) {
        double b = block(a);
        ratio_max = std::max(ratio_max, b / last);
        last = b;
    }
    CHECK(ratio_max < 1.0);
}

TEST_CASE("gamma0 examples")
{
    CHECK(gamma0(ApproxFunction::unit(), 1.0) == doctest::Approx(1.0));
    CHECK(gamma0(sqrt_exp(), 0.5) == doctest::Approx(std::exp(0.5)).epsilon(1e-9));
    CHECK(gamma0(sqrt_exp(), 0.25) == doctest::Approx(std::exp(1.0)).epsilon(1e-9));
}

TEST_CASE("gamma1 examples against a grid oracle")
{
    CHECK(gamma1(ApproxFunction::unit(), 1.0) == doctest::Approx(1.0));
    CHECK(gamma1(ApproxFunction::unit(), 0.5) == doctest::Approx(2 * std::exp(-0.5)).epsilon(1e-9));
    double oracle = std::exp(grid_sup_log(
        [](double t) { return std::log1p(t) + std::sqrt(t) - 0.5 * t; }, 60.0, 60000000));
    CHECK(gamma1(sqrt_exp(), 0.5) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("gamma monotone and ordered")
{
    auto d = default_delta();
    CHECK(gamma0(d, 0.2) >= gamma0(d, 0.4));
    CHECK(gamma0(sqrt_exp(), 0.1) >= gamma0(sqrt_exp(), 0.3));
    for (double rho : {0.1, 0.5, 1.0, 2.0})
        CHECK(gamma0(d, rho) <= gamma1(d, rho) * (1 + 1e-12));
}

TEST_CASE("sequence schedule identities")
{
    SequenceSchedule s;
    s.mu_total = 0.7;
    s.rho_total = 0.3;
    double mu = 0, rho = 0, kap = 0;
    for (int nu = 0; nu < 200; ++nu) {
        mu += s.mu(nu);
        rho += s.rho(nu);
        kap += s.kappa_nu(nu);
    }
    CHECK(mu == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(rho == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(kap == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.kappa_nu(0) == doctest::Approx(1.0 / 3));
    CHECK(s.kappa_nu(1) == doctest::Approx(2.0 / 9));
    CHECK(s.kappa_nu(2) == doctest::Approx(4.0 / 27));
    CHECK(s.kappa_tail(3) == doctest::Approx(1 - 1.0 / 3 - 2.0 / 9 - 4.0 / 27));
}

TEST_CASE("psi product")
{
    SequenceSchedule s;
    // unit: Gamma_0 = 1 and log Gamma_1(rho) = rho - 1 - log rho for rho < 1
    double unit_log = 0;
    for (int nu = 0; nu < 200; ++nu) {
        double r = s.rho(nu);
        unit_log += s.kappa_nu(nu) * (r < 1 ? r - 1 - std::log(r) : 0.0);
    }
    CHECK(psi_product(ApproxFunction::unit(), s).log_value == doctest::Approx(unit_log).epsilon(1e-9));
    auto d = ApproxFunction::power_exp(1.0 / 3);
    s.decay_q = 0.75;
    auto p = psi_product(d, s, 4000);
    CHECK(p.value > 1);
    double direct = psi_partial_log(d, s, p.terms + 10);
    CHECK(p.log_value == doctest::Approx(direct).epsilon(1e-10));
    // refining the truncation point changes nothing within the tail tolerance
    CHECK(std::abs(psi_partial_log(d, s, p.terms + 20) - psi_partial_log(d, s, p.terms + 10)) <
          s.tail_tol * 10);
}

TEST_CASE("psi product diverges when the factors outgrow the exponents")
{
    SequenceSchedule s;
    s.decay_q = 0.5;
    CHECK_THROWS_AS(psi_product(sqrt_exp(), s, 4000), Divergence);
}
