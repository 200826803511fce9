#include "kamwb/resonance.hpp"
#include "kamwb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include <boost/math/distributions/binomial.hpp>

namespace kamwb {

double Frequency::sup_norm() const
{
    double s = 0;
    for (double w : omega)
        s = std::max(s, std::abs(w));
    return s;
}

double divisor(const IndexVector& k, const std::vector<int>& kt, const Frequency& omega,
               const std::vector<double>& wt)
{
    double d = 0;
    for (auto [i, v] : k.entries()) {
        if (!omega.window.contains(i))
            throw ConfigError("index outside frequency window");
        d += v * omega.at(i);
    }
    if (kt.size() > wt.size())
        throw ConfigError("kt longer than parameter vector");
    for (std::size_t i = 0; i < kt.size(); ++i)
        d += kt[i] * wt[i];
    return d;
}

std::vector<ScanEntry> scan_entries(const ProductStructure& S, bool with_angles, const ScanCaps& caps)
{
    const auto& base = S.base();
    int lo = base.window().lo;
    int L = base.window().size();
    std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
    std::vector<ScanEntry> out;
    for (std::size_t a = 0; a < S.size(); ++a) {
        ProductSet set;
        set.theta = base.subsets()[a];
        if (with_angles)
            for (int i = 1; i <= S.n(); ++i)
                set.angles.push_back(i);
        for (auto& p : enumerate_indices(set, caps.order_cap)) {
            bool kt_zero = std::all_of(p.kt.begin(), p.kt.end(), [](int v) { return v == 0; });
            bool k_zero = std::all_of(p.k.begin(), p.k.end(), [](int v) { return v == 0; });
            if (with_angles ? kt_zero : k_zero)
                continue;
            std::vector<int> dense(L, 0);
            IndexVector iv;
            for (std::size_t t = 0; t < set.theta.size(); ++t) {
                dense[set.theta[t] - lo] = p.k[t];
                iv.set(set.theta[t], p.k[t]);
            }
            if (!seen.insert({dense, p.kt}).second)
                continue;
            double w = S.support_weight(iv);
            if (w > caps.weight_cap)
                continue;
            out.push_back({dense, p.kt, w, p.order()});
        }
    }
    return out;
}

static double entry_divisor(const ScanEntry& e, const Frequency& omega, const std::vector<double>& wt)
{
    double d = 0;
    for (std::size_t i = 0; i < e.k.size(); ++i)
        d += e.k[i] * omega.omega[i];
    for (std::size_t i = 0; i < e.kt.size(); ++i)
        d += e.kt[i] * wt[i];
    return d;
}

NonresonanceCertificate scan_report(const Frequency& omega, const std::optional<std::vector<double>>& wt,
                                    const ProductStructure& S, const ApproxFunction& delta,
                                    double alpha, const ScanCaps& caps)
{
    if (!(alpha > 0))
        throw ConfigError("alpha must be positive");
    if (static_cast<int>(omega.omega.size()) != S.base().window().size())
        throw ConfigError("frequency vector does not match the window");
    if (wt && static_cast<int>(wt->size()) != S.n())
        throw ConfigError("parameter vector must have length n");
    NonresonanceCertificate cert;
    cert.alpha = alpha;
    cert.delta_name = delta.name();
    cert.caps = caps;
    cert.margin = std::numeric_limits<double>::infinity();
    auto entries = scan_entries(S, wt.has_value(), caps);
    std::vector<double> w = wt.value_or(std::vector<double>{});
    for (auto& e : entries) {
        double d = entry_divisor(e, omega, w);
        double dd = delta(e.support_weight) * delta(e.order);
        double margin = std::abs(d) * dd / alpha - 1.0;
        if (margin < cert.margin) {
            cert.margin = margin;
            cert.worst_k = e.k;
            cert.worst_kt = e.kt;
            cert.worst_divisor = d;
            cert.worst_bound = alpha / dd;
        }
    }
    cert.scanned = entries.size();
    cert.passed = cert.margin >= 0;
    return cert;
}

NonresonanceCertificate scan(const Frequency& omega, const std::optional<std::vector<double>>& wt,
                             const ProductStructure& S, const ApproxFunction& delta, double alpha,
                             const ScanCaps& caps)
{
    auto cert = scan_report(omega, wt, S, delta, alpha, caps);
    if (!cert.passed) {
        std::ostringstream os;
        os.precision(12);
        os << "k=(";
        for (std::size_t i = 0; i < cert.worst_k.size(); ++i)
            os << (i ? "," : "") << cert.worst_k[i];
        os << ") kt=(";
        for (std::size_t i = 0; i < cert.worst_kt.size(); ++i)
            os << (i ? "," : "") << cert.worst_kt[i];
        os << "): |divisor| = " << std::abs(cert.worst_divisor) << " < alpha/(Delta Delta) = "
           << cert.worst_bound;
        throw Violation(os.str());
    }
    return cert;
}

double FrequencyBox::volume() const
{
    double v = 1;
    for (auto& [a, b] : bounds)
        v *= b - a;
    return v;
}

static std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter)
{
    std::uint64_t r = splitmix64(splitmix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL));
    return static_cast<double>(r >> 11) * 0x1.0p-53;
}

MeasureResult measure_estimate(const Frequency& omega, const ProductStructure& S,
                               const ApproxFunction& delta, double alpha, const FrequencyBox& box,
                               const ScanCaps& caps, std::size_t n_samples, std::uint64_t seed,
                               int threads)
{
    const int n = S.n();
    if (static_cast<int>(box.bounds.size()) != n)
        throw ConfigError("frequency box dimension must equal n");
    for (auto& [a, b] : box.bounds)
        if (!(b > a))
            throw ConfigError("frequency box sides must be nonempty");
    if (n_samples < 1000)
        throw ConfigError("measure_estimate needs at least 1000 samples");
    if (alpha < 0)
        throw ConfigError("alpha must be >= 0");
    MeasureResult res;
    res.alpha = alpha;
    res.seed = seed;
    res.samples = n_samples;

    struct Slab {
        std::vector<double> kt;
        double c;
        double half; ///< alpha / (Delta Delta)
    };
    std::vector<Slab> slabs;
    if (alpha > 0) {
        for (auto& e : scan_entries(S, true, caps)) {
            Slab sl;
            sl.c = 0;
            for (std::size_t i = 0; i < e.k.size(); ++i)
                sl.c += e.k[i] * omega.omega[i];
            sl.kt.assign(e.kt.begin(), e.kt.end());
            sl.half = alpha / (delta(e.support_weight) * delta(e.order));
            // range of the divisor over the box
            double lo = sl.c, hi = sl.c;
            for (int i = 0; i < n; ++i) {
                double u = sl.kt[i] * box.bounds[i].first, v = sl.kt[i] * box.bounds[i].second;
                lo += std::min(u, v);
                hi += std::max(u, v);
            }
            if (hi <= -sl.half || lo >= sl.half)
                continue;
            int jmax = 0;
            for (int i = 1; i < n; ++i)
                if (std::abs(sl.kt[i]) > std::abs(sl.kt[jmax]))
                    jmax = i;
            double delta_w = sl.half / std::abs(sl.kt[jmax]);
            double side = box.bounds[jmax].second - box.bounds[jmax].first;
            res.union_bound += 2.0 * delta_w / side;
            slabs.push_back(std::move(sl));
        }
    }
    res.slabs = slabs.size();

    auto count = [&](std::size_t begin, std::size_t end) {
        std::size_t hits = 0;
        std::vector<double> w(n);
        for (std::size_t s = begin; s < end; ++s) {
            for (int i = 0; i < n; ++i) {
                double u = counter_uniform(seed, s * n + i);
                w[i] = box.bounds[i].first + u * (box.bounds[i].second - box.bounds[i].first);
            }
            for (auto& sl : slabs) {
                double d = sl.c;
                for (int i = 0; i < n; ++i)
                    d += sl.kt[i] * w[i];
                if (std::abs(d) < sl.half) {
                    ++hits;
                    break;
                }
            }
        }
        return hits;
    };
    threads = std::max(1, threads);
    std::vector<std::size_t> partial(threads, 0);
    if (threads == 1) {
        partial[0] = count(0, n_samples);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            std::size_t b = n_samples * t / threads, e = n_samples * (t + 1) / threads;
            pool.emplace_back([&, t, b, e] { partial[t] = count(b, e); });
        }
        for (auto& th : pool)
            th.join();
    }
    for (auto p : partial)
        res.hits += p;
    res.fraction = static_cast<double>(res.hits) / n_samples;
    using boost::math::binomial_distribution;
    double N = static_cast<double>(n_samples), k = static_cast<double>(res.hits);
    res.ci_lo = binomial_distribution<>::find_lower_bound_on_p(N, k, 0.025);
    res.ci_hi = binomial_distribution<>::find_upper_bound_on_p(N, k, 0.025);
    return res;
}

} // namespace kamwb
