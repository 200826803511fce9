#include "kamwb/lattice.hpp"
#include "kamwb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <string>

namespace kamwb {

IndexWindow::IndexWindow(int lo_, int hi_) : lo(lo_), hi(hi_)
{
    if (lo > hi)
        throw ConfigError("window lo > hi");
}

IndexVector::IndexVector(const std::map<int, int>& entries)
{
    for (auto [i, v] : entries)
        set(i, v);
}

void IndexVector::set(int index, int value)
{
    if (value == 0)
        entries_.erase(index);
    else
        entries_[index] = value;
}

int IndexVector::get(int index) const
{
    auto it = entries_.find(index);
    return it == entries_.end() ? 0 : it->second;
}

std::vector<int> IndexVector::support() const
{
    std::vector<int> s;
    for (auto& e : entries_)
        s.push_back(e.first);
    return s;
}

int IndexVector::norm() const
{
    int n = 0;
    for (auto& e : entries_)
        n += std::abs(e.second);
    return n;
}

double weight(const std::vector<int>& A, double rho_w)
{
    double w = 1.0;
    for (int i : A)
        w += std::pow(std::log1p(std::abs(static_cast<double>(i))), rho_w);
    return w;
}

static bool covers(const std::vector<int>& A, const std::vector<int>& supp)
{
    // both sorted
    return std::includes(A.begin(), A.end(), supp.begin(), supp.end());
}

SpatialStructure::SpatialStructure(IndexWindow window, std::vector<std::vector<int>> subsets,
                                   double rho_w)
    : window_(window), subsets_(std::move(subsets)), rho_w_(rho_w)
{
    if (!(rho_w_ > 2.0))
        throw ConfigError("rho_w must exceed 2");
    std::set<int> seen;
    for (auto& A : subsets_) {
        std::sort(A.begin(), A.end());
        A.erase(std::unique(A.begin(), A.end()), A.end());
        for (int i : A) {
            if (!window_.contains(i))
                throw ConfigError("subset index " + std::to_string(i) + " outside window");
            seen.insert(i);
        }
        weights_.push_back(weight(A, rho_w_));
    }
    for (int i = window_.lo; i <= window_.hi; ++i)
        if (!seen.count(i))
            throw ConfigError("index " + std::to_string(i) + " not covered by any subset");
}

int SpatialStructure::min_cover(const std::vector<int>& supp) const
{
    int best = -1;
    for (std::size_t a = 0; a < subsets_.size(); ++a)
        if (covers(subsets_[a], supp) && (best < 0 || weights_[a] < weights_[best]))
            best = static_cast<int>(a);
    return best;
}

double support_weight(const IndexVector& k, const SpatialStructure& S)
{
    int a = S.min_cover(k.support());
    if (a < 0)
        throw NoCoveringSet("support not contained in any subset");
    return S.subset_weight(a);
}

long distribution_count(const SpatialStructure& S, int i, double t)
{
    long count = 0;
    for (std::size_t a = 0; a < S.size(); ++a)
        if (static_cast<int>(S.subsets()[a].size()) == i && S.subset_weight(a) <= t)
            ++count;
    return count;
}

ProductStructure::ProductStructure(SpatialStructure base, int n, int slot_offset)
    : base_(std::move(base)), n_(n), offset_(slot_offset)
{
    if (n_ < 1)
        throw ConfigError("angle block needs n >= 1");
    for (std::size_t a = 0; a < base_.size(); ++a) {
        std::vector<int> U = base_.subsets()[a];
        for (int i = 1; i <= n_; ++i)
            U.push_back(angle_slot(i));
        weights_.push_back(weight(U, base_.rho_w()));
    }
}

int ProductStructure::min_cover(const std::vector<int>& supp) const
{
    int best = -1;
    for (std::size_t a = 0; a < base_.size(); ++a)
        if (covers(base_.subsets()[a], supp) && (best < 0 || weights_[a] < weights_[best]))
            best = static_cast<int>(a);
    return best;
}

double ProductStructure::support_weight(const IndexVector& k) const
{
    int a = min_cover(k.support());
    if (a < 0)
        throw NoCoveringSet("support not contained in any product set");
    return weights_[a];
}

int IndexPair::order() const
{
    int s = 0;
    for (int v : k)
        s += std::abs(v);
    for (int v : kt)
        s += std::abs(v);
    return s;
}

std::size_t l1_ball_count(int d, int c)
{
    // B(d,c) = sum_j 2^j C(d,j) C(c,j)
    double total = 0;
    for (int j = 0; j <= std::min(d, c); ++j) {
        double cd = 1, cc = 1;
        for (int t = 0; t < j; ++t) {
            cd = cd * (d - t) / (t + 1);
            cc = cc * (c - t) / (t + 1);
        }
        total += std::ldexp(cd * cc, j);
    }
    if (total > static_cast<double>(std::numeric_limits<std::size_t>::max() / 2))
        return std::numeric_limits<std::size_t>::max() / 2;
    return static_cast<std::size_t>(std::llround(total));
}

static void enumerate_rec(std::vector<int>& cur, int pos, int left,
                          std::vector<std::vector<int>>& out)
{
    if (pos == static_cast<int>(cur.size())) {
        out.push_back(cur);
        return;
    }
    for (int v = -left; v <= left; ++v) {
        cur[pos] = v;
        enumerate_rec(cur, pos + 1, left - std::abs(v), out);
    }
    cur[pos] = 0;
}

std::vector<IndexPair> enumerate_indices(const ProductSet& set, int order_cap, std::size_t budget)
{
    if (order_cap < 0)
        throw ConfigError("order_cap must be >= 0");
    int d = static_cast<int>(set.theta.size() + set.angles.size());
    std::size_t count = l1_ball_count(d, order_cap);
    if (count > budget)
        throw CapTooLarge(std::to_string(count) + " index pairs exceed budget " +
                          std::to_string(budget));
    std::vector<std::vector<int>> raw;
    raw.reserve(count);
    std::vector<int> cur(d, 0);
    enumerate_rec(cur, 0, order_cap, raw);
    std::vector<IndexPair> out;
    out.reserve(raw.size());
    std::size_t nt = set.theta.size();
    for (auto& v : raw)
        out.push_back({std::vector<int>(v.begin(), v.begin() + nt),
                       std::vector<int>(v.begin() + nt, v.end())});
    return out;
}

} // namespace kamwb
