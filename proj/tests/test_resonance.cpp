#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kamwb/errors.hpp"
#include "kamwb/resonance.hpp"

#include <cmath>
#include <random>

using namespace kamwb;

namespace {

Frequency two_freq()
{
    Frequency f;
    f.window = IndexWindow(0, 1);
    f.omega = {1.0, std::sqrt(2.0)};
    return f;
}

ProductStructure two_site(int n = 1)
{
    return ProductStructure(SpatialStructure(IndexWindow(0, 1), {{0}, {1}, {0, 1}}), n);
}

const double golden = (1 + std::sqrt(5.0)) / 2;

} // namespace

TEST_CASE("divisor examples")
{
    auto w = two_freq();
    CHECK(divisor(IndexVector(), {0}, w, {0.3}) == 0.0);
    CHECK(divisor(IndexVector(std::map<int, int>{{0, 1}, {1, -1}}), {0}, w, {0.3}) ==
          doctest::Approx(1 - std::sqrt(2.0)).epsilon(1e-15));
    CHECK(divisor(IndexVector(), {2}, w, {0.75}) == 1.5);
}

TEST_CASE("divisor is bilinear")
{
    auto w = two_freq();
    std::mt19937_64 gen(4);
    std::uniform_int_distribution<int> K(-5, 5);
    for (int t = 0; t < 50; ++t) {
        int a0 = K(gen), a1 = K(gen), b0 = K(gen), b1 = K(gen), p = K(gen), q = K(gen);
        double wt = 1.37;
        double lhs = divisor(IndexVector(std::map<int, int>{{0, a0 + b0}, {1, a1 + b1}}), {p + q}, w, {wt});
        double rhs = divisor(IndexVector(std::map<int, int>{{0, a0}, {1, a1}}), {p}, w, {wt}) +
                     divisor(IndexVector(std::map<int, int>{{0, b0}, {1, b1}}), {q}, w, {wt});
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
    }
}

TEST_CASE("scan of the two-site frequency passes and is monotone in alpha")
{
    auto w = two_freq();
    auto S = two_site();
    ScanCaps caps{5.0, 6};
    auto cert = scan(w, std::nullopt, S, default_delta(), 1e-3, caps);
    CHECK(cert.passed);
    CHECK(cert.scanned > 0);
    CHECK(cert.margin >= 0);
    CHECK(cert.worst_k.size() == 2);
    for (double a : {5e-4, 1e-5})
        CHECK(scan(w, std::nullopt, S, default_delta(), a, caps).passed);
    // the worst pair fails once alpha passes it
    double a_fail = 1e-3 * (1 + cert.margin) * 1.01;
    CHECK_THROWS_AS(scan(w, std::nullopt, S, default_delta(), a_fail, caps), Violation);
    CHECK_FALSE(scan_report(w, std::nullopt, S, default_delta(), 1e3, caps).passed);
}

TEST_CASE("golden ratio worst cases match brute force")
{
    Frequency w;
    w.window = IndexWindow(0, 0);
    w.omega = {1.0};
    ProductStructure S(SpatialStructure(IndexWindow(0, 0), {{0}}), 1);
    ScanCaps caps{1e300, 34};
    auto cert = scan_report(w, std::vector<double>{golden}, S, ApproxFunction::unit(), 1e-3, caps);
    double best = 1e300;
    int best_q = 0;
    for (int q = -34; q <= 34; ++q) {
        if (q == 0)
            continue;
        for (int p = -34; p <= 34; ++p) {
            if (std::abs(p) + std::abs(q) > 34)
                continue;
            double d = std::abs(p + q * golden);
            if (d < best) {
                best = d;
                best_q = q;
            }
        }
    }
    CHECK(std::abs(best_q) == 13);
    CHECK(best == doctest::Approx(std::pow(golden, -7)).epsilon(1e-12));
    CHECK(std::abs(cert.worst_divisor) == doctest::Approx(best).epsilon(1e-12));
    CHECK(std::abs(cert.worst_kt.at(0)) == 13);
    CHECK(cert.margin == doctest::Approx(best / 1e-3 - 1).epsilon(1e-10));
}

TEST_CASE("extended divisor estimate on a small parameter box")
{
    auto w = two_freq();
    auto S = two_site();
    ScanCaps caps{1e300, 5};
    auto d = ApproxFunction::power_exp(1.0 / 3);
    const double wt0 = 1.2345;
    // find an alpha with twice the constant passing at wt0
    auto cert = scan_report(w, std::vector<double>{wt0}, S, d, 1.0, caps);
    double alpha = (1 + cert.margin) / 2 * 0.9;
    REQUIRE(scan(w, std::vector<double>{wt0}, S, d, 2 * alpha, caps).passed);
    // |kt| h <= alpha / (Delta Delta) on every scanned pair
    double h = 1e300;
    for (auto& e : scan_entries(S, true, caps)) {
        int kt = std::abs(e.kt.at(0));
        h = std::min(h, alpha / (d(e.support_weight) * d(e.order) * kt));
    }
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> U(-h, h);
    for (int t = 0; t < 100; ++t)
        CHECK(scan_report(w, std::vector<double>{wt0 + U(gen)}, S, d, alpha, caps).passed);
}

TEST_CASE("measure estimate")
{
    auto w = two_freq();
    auto S = two_site();
    FrequencyBox box{{{1.0, 2.0}}};
    ScanCaps caps{1e300, 4};
    auto d = ApproxFunction::power_exp(1.0 / 3);
    auto z = measure_estimate(w, S, d, 0.0, box, caps, 2000, 1);
    CHECK(z.fraction == 0.0);
    CHECK(z.hits == 0);

    auto a = measure_estimate(w, S, d, 2e-3, box, caps, 1000000, 42);
    auto b = measure_estimate(w, S, d, 1e-3, box, caps, 1000000, 42);
    CHECK(a.hits > 100);
    CHECK(b.fraction <= a.fraction);
    double ratio = a.fraction / b.fraction;
    CHECK(ratio > 1.8);
    CHECK(ratio < 2.2);
    CHECK(a.ci_lo <= 2 * b.ci_hi);
    CHECK(2 * b.ci_lo <= a.ci_hi);
    CHECK(a.union_bound >= a.fraction);
    CHECK(b.union_bound >= b.fraction);
    CHECK(a.ci_lo <= a.fraction);
    CHECK(a.ci_hi >= a.fraction);

    auto c = measure_estimate(w, S, d, 2e-3, box, caps, 1000000, 42, 4);
    CHECK(c.hits == a.hits);
    CHECK(c.union_bound == a.union_bound);
    CHECK_THROWS_AS(measure_estimate(w, S, d, 1e-2, box, caps, 10, 42), ConfigError);
}

TEST_CASE("counter generator is deterministic and uniform")
{
    CHECK(counter_uniform(5, 9) == counter_uniform(5, 9));
    CHECK(counter_uniform(5, 9) != counter_uniform(6, 9));
    double sum = 0;
    const int N = 100000;
    for (int i = 0; i < N; ++i) {
        double u = counter_uniform(3, i);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / N - 0.5) < 0.005);
}
