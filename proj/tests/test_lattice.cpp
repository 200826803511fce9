#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kamwb/errors.hpp"
#include "kamwb/lattice.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>

using namespace kamwb;

TEST_CASE("weight formula")
{
    CHECK(weight({}) == 1.0);
    CHECK(weight({0}) == 1.0);
    CHECK(weight({1, -1}, 3.0) == doctest::Approx(1 + 2 * std::pow(std::log(2.0), 3)).epsilon(1e-14));
    CHECK(weight({1, -1}, 3.0) == doctest::Approx(1.66605).epsilon(1e-5));
}

TEST_CASE("weight is monotone under inclusion")
{
    std::vector<int> A = {0, 3};
    std::vector<int> B = {0, 3, -7, 11};
    CHECK(weight(A) <= weight(B));
    CHECK(weight({5}) <= weight({5, 6}));
}

TEST_CASE("support weight")
{
    SpatialStructure S(IndexWindow(0, 1), {{0}, {0, 1}});
    CHECK(support_weight(IndexVector(std::map<int, int>{{1, 2}}), S) == doctest::Approx(1 + std::pow(std::log(2.0), 3)).epsilon(1e-14));
    CHECK(support_weight(IndexVector(), SpatialStructure(IndexWindow(0, 0), {{0}})) == 1.0);
    SpatialStructure T(IndexWindow(0, 1), {{1}, {0, 1}});
    CHECK(support_weight(IndexVector(std::map<int, int>{{1, -1}}), T) == doctest::Approx(1 + std::pow(std::log(2.0), 3)));
    SpatialStructure U(IndexWindow(0, 2), {{0}, {1}, {2}});
    CHECK_THROWS_AS(support_weight(IndexVector(std::map<int, int>{{0, 1}, {2, 1}}), U), NoCoveringSet);
}

TEST_CASE("support weight is the minimum over covers")
{
    SpatialStructure S(IndexWindow(-2, 2), {{-2, -1}, {-1, 0, 1}, {1, 2}, {-2, -1, 0, 1, 2}});
    IndexVector k({{-1, 3}, {0, -1}});
    double w = support_weight(k, S);
    CHECK(w >= 1.0);
    for (auto& A : S.subsets())
        if (std::includes(A.begin(), A.end(), k.support().begin(), k.support().end()))
            CHECK(w <= weight(A) + 1e-15);
}

TEST_CASE("distribution count")
{
    SpatialStructure S(IndexWindow(0, 1), {{0}, {1}, {0, 1}});
    CHECK(distribution_count(S, 1, 0.5) == 0);
    CHECK(distribution_count(S, 1, 1.4) == 2);
    CHECK(distribution_count(S, 2, 1.0) == 0);
    // brute force and monotone in t
    long prev = 0;
    for (double t = 0; t < 3; t += 0.01) {
        long brute = 0;
        for (auto& A : S.subsets())
            brute += (A.size() == 1 && weight(A) <= t);
        long c = distribution_count(S, 1, t);
        CHECK(c == brute);
        CHECK(c >= prev);
        prev = c;
    }
}

TEST_CASE("rho_w must exceed 2")
{
    CHECK_THROWS_AS(SpatialStructure(IndexWindow(0, 0), {{0}}, 2.0), ConfigError);
    CHECK_THROWS_AS(SpatialStructure(IndexWindow(0, 1), {{0}}), ConfigError);
}

TEST_CASE("enumerate indices")
{
    CHECK(enumerate_indices(ProductSet{}, 5).size() == 1);
    auto v1 = enumerate_indices(ProductSet{{0}, {1}}, 1);
    CHECK(v1.size() == 5);
    CHECK(enumerate_indices(ProductSet{{0}, {1}}, 2).size() == 13);
    // distinct and in the ball
    std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
    for (auto& p : enumerate_indices(ProductSet{{0, 4}, {1}}, 3)) {
        CHECK(p.order() <= 3);
        CHECK(seen.insert({p.k, p.kt}).second);
    }
    CHECK_THROWS_AS(enumerate_indices(ProductSet{{0, 1, 2, 3}, {1, 2}}, 30, 1000), CapTooLarge);
}

TEST_CASE("enumeration count equals brute-force l1 ball")
{
    for (int d = 1; d <= 3; ++d)
        for (int c = 0; c <= 6; ++c) {
            std::size_t brute = 0;
            std::vector<int> x(d, -c);
            std::function<void(int)> rec = [&](int i) {
                if (i == d) {
                    int s = 0;
                    for (int v : x)
                        s += std::abs(v);
                    brute += s <= c;
                    return;
                }
                for (int v = -c; v <= c; ++v) {
                    x[i] = v;
                    rec(i + 1);
                }
            };
            rec(0);
            ProductSet set;
            for (int i = 0; i < d; ++i)
                set.theta.push_back(i);
            CHECK(enumerate_indices(set, c).size() == brute);
            CHECK(l1_ball_count(d, c) == brute);
        }
}

TEST_CASE("product structure weights")
{
    SpatialStructure S(IndexWindow(0, 1), {{0}, {1}, {0, 1}});
    ProductStructure P(S, 1);
    for (std::size_t a = 0; a < S.size(); ++a) {
        CHECK(P.component_weight(a) >= S.subset_weight(a));
        auto A = S.subsets()[a];
        A.push_back(P.angle_slot(1));
        CHECK(P.component_weight(a) == doctest::Approx(weight(A)));
    }
}
