#include "kamwb/errors.hpp"
#include "kamwb/kam.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace kamwb {

TorusSeries Generator::F0() const
{
    const auto& sp = *F.space();
    TorusSeries out(F.space());
    out.domain() = F.domain();
    const int M = sp.M(), G = sp.G();
    for (auto& [a, comp] : F.components())
        for (auto& [mode, b] : comp) {
            TorusSeries::Block ob(b.size(), 0.0);
            for (int g = 0; g < G; ++g)
                ob[g * M] = b[g * M];
            out.components()[a][mode] = std::move(ob);
        }
    out.prune();
    return out;
}

TorusSeries Generator::F1(int i) const
{
    TorusSeries d = derivative(F, {Var::Z, i});
    const auto& sp = *F.space();
    const int M = sp.M(), G = sp.G();
    for (auto& [a, comp] : d.components())
        for (auto& [mode, b] : comp)
            for (int g = 0; g < G; ++g)
                for (int m = 1; m < M; ++m)
                    b[g * M + m] = 0;
    d.prune();
    return d;
}

TorusSeries bracket_with_normal_form(const TorusSeries& F, const Frequency& omega)
{
    const auto& sp = *F.space();
    // <wt, z> as a series with grid-dependent coefficients
    TorusSeries Nz(F.space());
    for (int i = 0; i < sp.n(); ++i) {
        std::vector<cplx> vals(sp.G());
        for (int g = 0; g < sp.G(); ++g)
            vals[g] = sp.grid().node(g).empty() ? 0.0 : sp.grid().node(g)[i];
        std::vector<int> deg(sp.n(), 0);
        deg[i] = 1;
        Nz.add_term_grid(0, F.zero_mode(), deg, vals);
    }
    TorusSeries out = poisson_bracket(F, Nz);
    for (int lam = sp.lo(); lam < sp.lo() + sp.L(); ++lam) {
        double w = omega.at(lam);
        if (w == 0)
            continue;
        out = add(out, scale(derivative(F, {Var::Theta, lam}), w));
    }
    return out;
}

HomologicalResult solve_homological(const TorusSeries& R, const Frequency& omega)
{
    const auto& sp = *R.space();
    if (static_cast<int>(omega.omega.size()) != sp.L())
        throw ConfigError("frequency vector does not match the window");
    if (sp.grid().dim() != sp.n())
        throw ConfigError("series has no parameter grid");
    const int M = sp.M(), G = sp.G(), L = sp.L(), n = sp.n();
    HomologicalResult res;
    res.F.F = TorusSeries(R.space());
    res.F.F.domain() = R.domain();
    res.Nhat = TorusSeries(R.space());
    res.Nhat.domain() = R.domain();
    res.min_divisor = std::numeric_limits<double>::infinity();
    for (auto& [a, comp] : R.components())
        for (auto& [mode, b] : comp) {
            bool zero = true;
            for (int v : mode)
                zero = zero && v == 0;
            if (zero) {
                auto& nb = res.Nhat.block(a, mode);
                for (std::size_t i = 0; i < b.size(); ++i)
                    nb[i] += b[i];
                continue;
            }
            double base = 0;
            for (int i = 0; i < L; ++i)
                base += mode[i] * omega.omega[i];
            TorusSeries::Block fb(b.size(), 0.0);
            for (int g = 0; g < G; ++g) {
                double d = base;
                for (int i = 0; i < n; ++i)
                    d += mode[L + i] * sp.grid().node(g)[i];
                if (std::abs(d) < 1e-300) {
                    std::ostringstream os;
                    os << "divisor " << d << " at grid node " << g;
                    throw ZeroDivisor(os.str());
                }
                res.min_divisor = std::min(res.min_divisor, std::abs(d));
                for (int m = 0; m < M; ++m)
                    fb[g * M + m] = b[g * M + m] / cplx(0, d);
            }
            res.F.F.components()[a][mode] = std::move(fb);
        }
    res.v.assign(G, std::vector<double>(n, 0.0));
    res.ehat.assign(G, 0.0);
    for (auto& [a, comp] : res.Nhat.components())
        for (auto& [mode, b] : comp)
            for (int g = 0; g < G; ++g) {
                res.ehat[g] += b[g * M].real();
                for (int i = 0; i < n; ++i)
                    res.v[g][i] += b[g * M + sp.linear_monomial(i)].real();
            }
    // independent check through the bracket
    TorusSeries lhs = add(bracket_with_normal_form(res.F.F, omega), res.Nhat);
    TorusSeries diff = subtract(lhs, R);
    const auto& d = R.domain();
    res.R_norm = norm_total(R, d.m, d.r, d.s);
    res.residual = norm_total(diff, d.m, d.r, d.s);
    return res;
}

} // namespace kamwb
