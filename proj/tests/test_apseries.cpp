#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kamwb/apseries.hpp"
#include "kamwb/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace kamwb;

namespace {

SpacePtr make_space(int D = 4, int K = 12, ParamGrid grid = ParamGrid({1.0}, 0.0, 1))
{
    SpatialStructure S(IndexWindow(0, 1), {{0}, {1}, {0, 1}});
    return std::make_shared<SeriesSpace>(ProductStructure(S, 1), D, K, grid);
}

/// real series with a few low-order modes
TorusSeries random_series(SpacePtr sp, std::mt19937_64& gen, int terms = 4, int max_deg = 1)
{
    std::uniform_int_distribution<int> ki(-1, 1), di(0, max_deg);
    std::uniform_real_distribution<double> c(-1, 1);
    TorusSeries f(sp);
    for (int t = 0; t < terms; ++t) {
        auto mode = f.make_mode({{0, ki(gen)}, {1, ki(gen)}}, {ki(gen)});
        int comp = sp->rebin(mode);
        f.add_cos(comp, mode, {di(gen)}, c(gen));
        f.add_sin(comp, mode, {di(gen)}, c(gen));
    }
    f.prune();
    return f;
}

double max_abs_diff(const TorusSeries& a, const TorusSeries& b)
{
    auto d = subtract(a, b);
    double m = 0;
    for (auto& [k, comp] : d.components())
        for (auto& [mode, blk] : comp)
            for (auto& v : blk)
                m = std::max(m, std::abs(v));
    return m;
}

} // namespace

TEST_CASE("evaluation examples")
{
    auto sp = make_space();
    TorusSeries zero(sp);
    CHECK(std::abs(zero.eval({0.3, 0.1}, {0.2}, {0.0})) == 0.0);
    TorusSeries f(sp);
    auto mode = f.make_mode({{0, 1}}, {2});
    f.add_cos(sp->rebin(mode), mode, {0}, 1.0);
    CHECK(f.eval_real({0.0, 0.0}, {0.0}, {0.0}) == doctest::Approx(1.0));
    CHECK(f.eval_real({std::numbers::pi / 3, 0.0}, {std::numbers::pi / 6}, {0.0}) ==
          doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("norm examples")
{
    auto sp = make_space();
    TorusSeries f(sp);
    CHECK(norm_component(f, 0, 0.5, 1.0) == 0.0);
    CHECK(norm_total(f, 0.5, 0.5, 1.0) == 0.0);
    auto mode = f.make_mode({{0, 1}, {1, 1}}, {1});
    int comp = sp->rebin(mode);
    f.add_term(comp, mode, {0}, cplx(0.6, 0.8));
    CHECK(norm_component(f, comp, 0.7, 1.0) == doctest::Approx(std::exp(3 * 0.7)));
    TorusSeries g(sp);
    g.add_term(0, g.zero_mode(), {0}, 1.0);
    g.add_term(0, g.zero_mode(), {1}, 1.0);
    CHECK(norm_component(g, 0, 0.3, 0.5) == doctest::Approx(1.5));
    TorusSeries h(sp);
    h.add_term(0, h.zero_mode(), {0}, 2.0);
    double w = sp->structure().component_weight(0);
    CHECK(norm_total(h, 0.5, 0.3, 1.0) == doctest::Approx(2 * std::exp(0.5 * w)));
}

TEST_CASE("norm is a norm")
{
    auto sp = make_space();
    std::mt19937_64 gen(11);
    for (int t = 0; t < 20; ++t) {
        auto f = random_series(sp, gen), g = random_series(sp, gen);
        double nf = norm_total(f, 0.4, 0.3, 0.7), ng = norm_total(g, 0.4, 0.3, 0.7);
        CHECK(norm_total(add(f, g).canonical(), 0.4, 0.3, 0.7) <= nf + ng + 1e-14);
        CHECK(norm_total(scale(f, -2.5), 0.4, 0.3, 0.7) == doctest::Approx(2.5 * nf));
    }
}

TEST_CASE("multiply examples")
{
    auto sp = make_space();
    TorusSeries f(sp);
    auto e1 = f.make_mode({{0, 1}}, {0});
    auto em1 = f.make_mode({{0, -1}}, {0});
    TorusSeries a(sp), b(sp);
    a.add_term(0, e1, {0}, 1.0);
    b.add_term(0, em1, {0}, 1.0);
    auto p = multiply(a, b);
    CHECK(p.mode_count() == 1);
    CHECK(std::abs(p.find(sp->rebin(p.zero_mode()), p.zero_mode())->at(0) - 1.0) < 1e-15);

    TorusSeries c(sp);
    c.add_cos(0, e1, {0}, 1.0);
    auto cc = multiply(c, c);
    TorusSeries want(sp);
    want.add_term(sp->rebin(want.zero_mode()), want.zero_mode(), {0}, 0.5);
    want.add_cos(0, f.make_mode({{0, 2}}, {0}), {0}, 0.5);
    CHECK(max_abs_diff(cc.canonical(), want.canonical()) < 1e-15);
    CHECK(max_abs_diff(add(c, TorusSeries(sp)), c) == 0.0);
}

TEST_CASE("multiply is commutative and associative below the caps")
{
    auto sp = make_space(6, 20);
    std::mt19937_64 gen(5);
    for (int t = 0; t < 5; ++t) {
        auto f = random_series(sp, gen, 3), g = random_series(sp, gen, 3), h = random_series(sp, gen, 3);
        CHECK(max_abs_diff(multiply(f, g), multiply(g, f)) < 1e-14);
        CHECK(max_abs_diff(multiply(multiply(f, g), h), multiply(f, multiply(g, h))) < 1e-13);
    }
}

TEST_CASE("derivative examples")
{
    auto sp = make_space();
    TorusSeries c(sp);
    c.add_term(0, c.zero_mode(), {0}, 3.0);
    CHECK(derivative(c, {Var::Theta, 0}).mode_count() == 0);
    TorusSeries f(sp);
    auto m2 = f.make_mode({{0, 2}}, {0});
    f.add_term(0, m2, {0}, 1.0);
    auto d = derivative(f, {Var::Theta, 0});
    CHECK(std::abs(d.find(0, m2)->at(0) - cplx(0, 2)) < 1e-15);
}

TEST_CASE("derivatives match finite differences of eval")
{
    auto sp = make_space();
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> U(0, 2 * std::numbers::pi), Z(-0.5, 0.5);
    auto f = random_series(sp, gen, 6, 3);
    f.domain().s = 1.0;
    auto dth = derivative(f, {Var::Theta, 1});
    auto dx = derivative(f, {Var::X, 0});
    auto dz = derivative(f, {Var::Z, 0});
    const double h = 1e-5;
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        std::vector<double> th{U(gen), U(gen)}, x{U(gen)}, z{Z(gen)};
        auto th1 = th, th0 = th;
        th1[1] += h;
        th0[1] -= h;
        double fd = (f.eval_real(th1, x, z) - f.eval_real(th0, x, z)) / (2 * h);
        worst = std::max(worst, std::abs(fd - dth.eval_real(th, x, z)));
        fd = (f.eval_real(th, {x[0] + h}, z) - f.eval_real(th, {x[0] - h}, z)) / (2 * h);
        worst = std::max(worst, std::abs(fd - dx.eval_real(th, x, z)));
        fd = (f.eval_real(th, x, {z[0] + h}) - f.eval_real(th, x, {z[0] - h})) / (2 * h);
        worst = std::max(worst, std::abs(fd - dz.eval_real(th, x, z)));
    }
    CHECK(worst < 1e-7);
}

TEST_CASE("Cauchy estimate for the x derivative")
{
    auto sp = make_space();
    std::mt19937_64 gen(8);
    auto f = random_series(sp, gen, 6, 1);
    const double r = 0.6, rho = 0.2;
    for (auto& [a, comp] : f.components()) {
        double lhs = norm_component(derivative(f, {Var::X, 0}), a, r - rho, 1.0);
        CHECK(lhs <= norm_component(f, a, r, 1.0) / (rho * std::exp(1.0)) * (1 + 1e-12));
    }
}

TEST_CASE("bracket sign follows the x-z convention")
{
    auto sp = make_space();
    TorusSeries s(sp), z(sp);
    auto m1 = s.make_mode({}, {1});
    s.add_sin(sp->rebin(m1), m1, {0}, 1.0);
    z.add_term(sp->rebin(z.zero_mode()), z.zero_mode(), {1}, 1.0);
    auto b = poisson_bracket(s, z);
    // {sin x, z} = d_x sin x * d_z z = cos x
    for (double x : {0.0, 0.4, 2.0})
        CHECK(b.eval_real({0, 0}, {x}, {0}) == doctest::Approx(std::cos(x)).epsilon(1e-14));
    CHECK(norm_total(poisson_bracket(s, s), 0, 0, 1) == 0.0);
}

TEST_CASE("Jacobi identity")
{
    auto sp = make_space(6, 20);
    std::mt19937_64 gen(21);
    for (int t = 0; t < 3; ++t) {
        auto f = random_series(sp, gen, 3, 2), g = random_series(sp, gen, 3, 2),
             h = random_series(sp, gen, 3, 2);
        auto j = add(add(poisson_bracket(f, poisson_bracket(g, h)), poisson_bracket(g, poisson_bracket(h, f))),
                     poisson_bracket(h, poisson_bracket(f, g)));
        CHECK(norm_total(j.canonical(), 0, 0, 1) < 1e-10);
    }
}

TEST_CASE("real data evaluates to real values")
{
    auto sp = make_space();
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> U(0, 6.28);
    for (int t = 0; t < 10; ++t) {
        auto f = random_series(sp, gen, 5, 2);
        CHECK(f.conjugate_defect() < 1e-15);
        auto v = f.eval({U(gen), U(gen)}, {U(gen)}, {0.3});
        CHECK(std::abs(v.imag()) < 1e-12);
    }
}

TEST_CASE("grid interpolation reproduces smooth parameter dependence")
{
    auto sp = make_space(4, 12, ParamGrid({2.0}, 0.1, 9));
    TorusSeries f(sp);
    std::vector<cplx> vals;
    for (int g = 0; g < sp->G(); ++g)
        vals.push_back(std::exp(sp->grid().node(g)[0]));
    f.add_term_grid(0, f.zero_mode(), {0}, vals);
    CHECK(f.eval_real({0, 0}, {0}, {0}, {2.037}) == doctest::Approx(std::exp(2.037)).epsilon(1e-11));
    CHECK_THROWS_AS(f.eval({0, 0}, {0}, {0}, {2.5}), DomainViolation);
}

TEST_CASE("support overflow and json round trip")
{
    SpatialStructure S(IndexWindow(0, 1), {{0}, {1}});
    auto sp = std::make_shared<SeriesSpace>(ProductStructure(S, 1), 2, 8, ParamGrid({1.0}, 0.0, 1));
    TorusSeries a(sp), b(sp);
    a.add_term(0, a.make_mode({{0, 1}}, {0}), {0}, 1.0);
    b.add_term(1, b.make_mode({{1, 1}}, {0}), {0}, 1.0);
    CHECK_THROWS_AS(multiply(a, b), SupportOverflow);

    auto sp2 = make_space();
    std::mt19937_64 gen(2);
    auto f = random_series(sp2, gen, 5, 2);
    auto g = TorusSeries::from_json(f.to_json(), sp2);
    CHECK(max_abs_diff(f, g) == 0.0);
}
