#pragma once

#include "kamwb/approx.hpp"
#include "kamwb/lattice.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace kamwb {

/// Forcing frequencies omega_lambda over a window.
struct Frequency {
    IndexWindow window;
    std::vector<double> omega; ///< omega[lambda - lo]

    double at(int lambda) const { return omega[lambda - window.lo]; }
    double sup_norm() const;
};

/// <k,omega> + <kt,wt>
double divisor(const IndexVector& k, const std::vector<int>& kt, const Frequency& omega,
               const std::vector<double>& wt);

struct ScanCaps {
    double weight_cap = 1e300; ///< W_max on [[(k,kt)]]
    int order_cap = 6;         ///< K_max on |k|+|kt|
};

struct NonresonanceCertificate {
    double alpha = 0;
    std::string delta_name;
    ScanCaps caps;
    bool passed = true;
    std::vector<int> worst_k;  ///< over the window
    std::vector<int> worst_kt;
    double worst_divisor = 0;
    double worst_bound = 0;    ///< alpha / (Delta Delta) at the argmin
    double margin = 0;         ///< |div| Delta Delta / alpha - 1 at the argmin
    std::size_t scanned = 0;
};

/// One enumerated index pair with its weight data.
struct ScanEntry {
    std::vector<int> k;  ///< dense over the window
    std::vector<int> kt; ///< length n (empty when the angle block is not scanned)
    double support_weight = 1;
    int order = 0;
};

/// Index pairs within the caps: kt != 0 when with_angles, else kt empty and k != 0.
/// Deterministic: component order, then lexicographic, duplicates removed.
std::vector<ScanEntry> scan_entries(const ProductStructure& S, bool with_angles, const ScanCaps& caps);

/// Exhaustive scan; never throws on failure (see passed).
NonresonanceCertificate scan_report(const Frequency& omega, const std::optional<std::vector<double>>& wt,
                                    const ProductStructure& S, const ApproxFunction& delta,
                                    double alpha, const ScanCaps& caps);
/// As scan_report but throws Violation with both sides of the failed inequality.
NonresonanceCertificate scan(const Frequency& omega, const std::optional<std::vector<double>>& wt,
                             const ProductStructure& S, const ApproxFunction& delta, double alpha,
                             const ScanCaps& caps);

struct FrequencyBox {
    std::vector<std::pair<double, double>> bounds;
    double volume() const;
};

struct MeasureResult {
    double alpha = 0;
    double fraction = 0;
    double ci_lo = 0;
    double ci_hi = 0;
    double union_bound = 0; ///< as a fraction of the box volume
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::size_t hits = 0;
    std::size_t slabs = 0;
};

/// Counter-based generator: uniform double in [0,1) for (seed, counter).
double counter_uniform(std::uint64_t seed, std::uint64_t counter);

/// Monte Carlo fraction of the box violating the nonresonance inequality within caps.
MeasureResult measure_estimate(const Frequency& omega, const ProductStructure& S,
                               const ApproxFunction& delta, double alpha, const FrequencyBox& box,
                               const ScanCaps& caps, std::size_t n_samples, std::uint64_t seed,
                               int threads = 1);

} // namespace kamwb
