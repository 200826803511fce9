#pragma once

#include <cstddef>
#include <map>
#include <vector>

namespace kamwb {

/// Inclusive range [lo, hi] of active lattice indices.
struct IndexWindow {
    int lo = 0;
    int hi = 0;

    IndexWindow() = default;
    IndexWindow(int lo_, int hi_);
    int size() const { return hi - lo + 1; }
    bool contains(int i) const { return i >= lo && i <= hi; }
};

/// Finitely supported integer vector over a window. Zero entries are never stored.
class IndexVector {
public:
    IndexVector() = default;
    explicit IndexVector(const std::map<int, int>& entries);

    void set(int index, int value);
    int get(int index) const;
    const std::map<int, int>& entries() const { return entries_; }
    std::vector<int> support() const;
    /// l1 norm |k|
    int norm() const;
    bool empty() const { return entries_.empty(); }

private:
    std::map<int, int> entries_;
};

/// weight [A] = 1 + sum_{i in A} ln(1+|i|)^rho_w
double weight(const std::vector<int>& A, double rho_w = 3.0);

/// Finite family of index subsets with the logarithmic weight rule.
class SpatialStructure {
public:
    SpatialStructure() = default;
    SpatialStructure(IndexWindow window, std::vector<std::vector<int>> subsets, double rho_w = 3.0);

    const IndexWindow& window() const { return window_; }
    const std::vector<std::vector<int>>& subsets() const { return subsets_; }
    double rho_w() const { return rho_w_; }
    double subset_weight(std::size_t a) const { return weights_[a]; }
    std::size_t size() const { return subsets_.size(); }

    /// Index of the minimum-weight subset containing supp, first in list order on ties; -1 if none.
    int min_cover(const std::vector<int>& supp) const;

private:
    IndexWindow window_;
    std::vector<std::vector<int>> subsets_;
    double rho_w_ = 3.0;
    std::vector<double> weights_;
};

/// [[k]] = min{[A] : supp k subset of A}. Throws NoCoveringSet.
double support_weight(const IndexVector& k, const SpatialStructure& S);

/// N_i(t) = #{A in S : |A| = i, [A] <= t}
long distribution_count(const SpatialStructure& S, int i, double t);

/// Product structure A x B where B = {1..n} are the internal angles.
/// The angle block is weighted as n fresh slots at hi + offset + 1, ..., hi + offset + n.
class ProductStructure {
public:
    ProductStructure() = default;
    ProductStructure(SpatialStructure base, int n, int slot_offset = 0);

    const SpatialStructure& base() const { return base_; }
    int n() const { return n_; }
    int slot_offset() const { return offset_; }
    std::size_t size() const { return base_.size(); }
    /// [A~] for the component built on base subset a.
    double component_weight(std::size_t a) const { return weights_[a]; }
    /// Slot index used for angle i (1-based).
    int angle_slot(int i) const { return base_.window().hi + offset_ + i; }

    /// Component index of the minimum-weight A~ covering supp k; -1 if none.
    int min_cover(const std::vector<int>& supp) const;
    /// [[(k,kt)]]; the angle part is always covered by B.
    double support_weight(const IndexVector& k) const;

private:
    SpatialStructure base_;
    int n_ = 1;
    int offset_ = 0;
    std::vector<double> weights_;
};

/// Index set A~ given by explicit theta indices and angle indices.
struct ProductSet {
    std::vector<int> theta;  ///< indices lambda
    std::vector<int> angles; ///< 1-based angle indices
};

/// Pair (k, kt) as dense vectors over the dimensions of a ProductSet.
struct IndexPair {
    std::vector<int> k;
    std::vector<int> kt;
    int order() const;
    bool operator==(const IndexPair& o) const { return k == o.k && kt == o.kt; }
};

/// All (k,kt) supported in the set with |k|+|kt| <= cap, lexicographic in (k,kt).
/// Throws CapTooLarge when the count would exceed budget.
std::vector<IndexPair> enumerate_indices(const ProductSet& set, int order_cap,
                                         std::size_t budget = 10000000);

/// Number of integer points of l1 norm <= c in Z^d.
std::size_t l1_ball_count(int d, int c);

} // namespace kamwb
