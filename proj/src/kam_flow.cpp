#include "kamwb/errors.hpp"
#include "kamwb/kam.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <boost/numeric/odeint.hpp>
#include <fftw3.h>

namespace kamwb {

std::size_t TransformationMap::points() const
{
    std::size_t p = 1;
    for (int s : grid_shape)
        p *= static_cast<std::size_t>(s);
    return p;
}

namespace {

using State = std::vector<double>;

/// A series summed over its theta modes at a fixed angle point: sum_kt c_kt(z) e^{i<kt,x>}.
struct Collapsed {
    int n = 1;
    int ncoef = 1;
    std::vector<std::vector<double>> kt;
    std::vector<cplx> c; ///< [group][ncoef]

    void eval(const double* x, double* val, double* dx) const
    {
        std::fill(val, val + ncoef, 0.0);
        if (dx)
            std::fill(dx, dx + n * ncoef, 0.0);
        for (std::size_t gi = 0; gi < kt.size(); ++gi) {
            double ph = 0;
            for (int i = 0; i < n; ++i)
                ph += kt[gi][i] * x[i];
            cplx e = std::polar(1.0, ph);
            const cplx* cc = &c[gi * ncoef];
            for (int q = 0; q < ncoef; ++q) {
                cplx t = cc[q] * e;
                val[q] += t.real();
                if (dx)
                    for (int i = 0; i < n; ++i)
                        dx[i * ncoef + q] -= kt[gi][i] * t.imag();
            }
        }
    }
};

/// Grouping of a series' modes by kt, with the active theta part of each mode.
struct Grouped {
    std::vector<std::vector<int>> kt;
    struct Entry {
        std::vector<int> k; ///< over active dims
        const TorusSeries::Block* b;
    };
    std::vector<std::vector<Entry>> entries;
};

Grouped group_series(const TorusSeries& f, const std::vector<int>& active_pos)
{
    const auto& sp = *f.space();
    std::map<std::vector<int>, std::size_t> idx;
    Grouped g;
    for (auto& [a, comp] : f.components())
        for (auto& [mode, b] : comp) {
            std::vector<int> kt(mode.begin() + sp.L(), mode.end());
            auto it = idx.find(kt);
            if (it == idx.end()) {
                it = idx.emplace(kt, g.kt.size()).first;
                g.kt.push_back(kt);
                g.entries.emplace_back();
            }
            Grouped::Entry e;
            for (int p : active_pos)
                e.k.push_back(mode[p]);
            e.b = &b;
            g.entries[it->second].push_back(e);
        }
    return g;
}

/// Collapse at angle point theta and node g. coef(m) picks stored monomials; with
/// theta_derivs the output holds (1 + La) blocks: the value and each d/dtheta_a.
Collapsed collapse(const Grouped& gr, const std::vector<double>& theta, int g, int M,
                   const std::vector<int>& mons, bool theta_derivs, int n)
{
    int La = static_cast<int>(theta.size());
    int nb = static_cast<int>(mons.size());
    Collapsed c;
    c.n = n;
    c.ncoef = nb * (theta_derivs ? 1 + La : 1);
    for (std::size_t gi = 0; gi < gr.kt.size(); ++gi) {
        std::vector<cplx> acc(c.ncoef, 0.0);
        bool any = false;
        for (auto& e : gr.entries[gi]) {
            double ph = 0;
            for (int a = 0; a < La; ++a)
                ph += e.k[a] * theta[a];
            cplx ex = std::polar(1.0, ph);
            for (int q = 0; q < nb; ++q) {
                cplx v = (*e.b)[static_cast<std::size_t>(g) * M + mons[q]];
                if (v == cplx(0))
                    continue;
                any = true;
                cplx t = v * ex;
                acc[q] += t;
                if (theta_derivs)
                    for (int a = 0; a < La; ++a)
                        acc[(1 + a) * nb + q] += cplx(0, e.k[a]) * t;
            }
        }
        if (!any)
            continue;
        c.kt.emplace_back(gr.kt[gi].begin(), gr.kt[gi].end());
        c.c.insert(c.c.end(), acc.begin(), acc.end());
    }
    return c;
}

int next_pow2(int v)
{
    int p = 1;
    while (p < v)
        p <<= 1;
    return p;
}

/// Gauss-Legendre nodes and weights on [0,1].
void gauss_legendre(int q, std::vector<double>& t, std::vector<double>& w)
{
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(q, q);
    for (int k = 1; k < q; ++k) {
        double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    t.resize(q);
    w.resize(q);
    for (int i = 0; i < q; ++i) {
        t[i] = 0.5 * (1 + es.eigenvalues()(i));
        double v = es.eigenvectors()(0, i);
        w[i] = v * v; // 2 v^2 on [-1,1], halved
    }
}

/// Multi-dimensional FFT of howmany contiguous arrays, in place.
void fft_many(std::vector<cplx>& data, const std::vector<int>& shape, int howmany, int sign)
{
    int total = 1;
    for (int s : shape)
        total *= s;
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan = fftw_plan_many_dft(static_cast<int>(shape.size()), shape.data(), howmany, ptr,
                                        nullptr, 1, total, ptr, nullptr, 1, total, sign,
                                        FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
}

/// Signed frequency of FFT index j on a grid of size N.
inline int freq(int j, int N)
{
    return j <= N / 2 ? j : j - N;
}

/// Spectral derivative along dim d of howmany real fields sampled on the grid.
std::vector<double> spectral_derivative(const std::vector<double>& f, const std::vector<int>& shape,
                                        int d)
{
    int total = static_cast<int>(f.size());
    std::vector<cplx> buf(f.begin(), f.end());
    fft_many(buf, shape, 1, FFTW_FORWARD);
    int D = static_cast<int>(shape.size());
    std::vector<int> stride(D, 1);
    for (int i = D - 2; i >= 0; --i)
        stride[i] = stride[i + 1] * shape[i + 1];
    for (int p = 0; p < total; ++p) {
        int j = (p / stride[d]) % shape[d];
        int k = freq(j, shape[d]);
        if (2 * std::abs(k) == shape[d])
            k = 0;
        buf[p] *= cplx(0, k) / static_cast<double>(total);
    }
    fft_many(buf, shape, 1, FFTW_BACKWARD);
    std::vector<double> out(total);
    for (int p = 0; p < total; ++p)
        out[p] = buf[p].real();
    return out;
}

} // namespace

FlowOutput flow_time1(const FlowInput& in, const FlowOptions& opt)
{
    if (!in.F)
        throw ConfigError("flow_time1 needs a generator");
    const TorusSeries& F = in.F->F;
    const auto& sp = *F.space();
    const int L = sp.L(), n = sp.n(), M = sp.M(), G = sp.G();
    for (auto& [a, comp] : F.components())
        for (auto& [mode, b] : comp)
            for (int g = 0; g < G; ++g)
                for (int m = 0; m < M; ++m)
                    if (sp.monomial_degree(m) > 1 && b[g * M + m] != cplx(0))
                        throw ConfigError("generator must have z-degree <= 1");

    // active angles and content per dimension
    std::vector<const TorusSeries*> inputs{&F};
    if (in.R)
        inputs.push_back(in.R);
    if (in.PminusR)
        inputs.push_back(in.PminusR);
    std::vector<int> cF(L + n, 0), cP(L + n, 0);
    for (std::size_t s = 0; s < inputs.size(); ++s)
        for (auto& [a, comp] : inputs[s]->components())
            for (auto& [mode, b] : comp)
                for (int i = 0; i < L + n; ++i) {
                    auto& c = s == 0 ? cF : cP;
                    c[i] = std::max(c[i], std::abs(mode[i]));
                }
    FlowOutput out;
    auto& map = out.map;
    map.G = G;
    map.n = n;
    std::vector<int> active_pos;
    for (int i = 0; i < L; ++i)
        if (cF[i] > 0 || cP[i] > 0) {
            active_pos.push_back(i);
            map.theta_dims.push_back(sp.lo() + i);
        }
    const int La = static_cast<int>(active_pos.size());
    std::vector<int> dims_pos = active_pos;
    for (int i = 0; i < n; ++i)
        dims_pos.push_back(L + i);
    const int D = La + n;
    for (int p : dims_pos)
        map.grid_shape.push_back(next_pow2(std::max(opt.min_grid, 2 * (cP[p] + cF[p]) + 2)));
    const std::size_t NP = map.points();
    if (NP * static_cast<std::size_t>(G) > static_cast<std::size_t>(opt.max_grid_points))
        throw ConfigError("pseudo-spectral grid too large: " + std::to_string(NP * G) + " points");
    std::vector<int> stride(D, 1);
    for (int i = D - 2; i >= 0; --i)
        stride[i] = stride[i + 1] * map.grid_shape[i + 1];
    int NT = 1;
    for (int a = 0; a < La; ++a)
        NT *= map.grid_shape[a];
    int NX = static_cast<int>(NP) / NT;

    map.U1.assign(G * NP * n, 0.0);
    map.U2.assign(G * NP * La, 0.0);
    map.U3.assign(G * NP * La * n, 0.0);
    map.U4.assign(G * NP * n, 0.0);
    map.U5.assign(G * NP * n * n, 0.0);

    std::vector<double> tq, wq;
    gauss_legendre(opt.gauss_nodes, tq, wq);
    std::vector<double> times{0.0};
    times.insert(times.end(), tq.begin(), tq.end());
    times.push_back(1.0);

    Grouped gF = group_series(F, active_pos);
    Grouped gR, gPR;
    if (in.R)
        gR = group_series(*in.R, active_pos);
    if (in.PminusR)
        gPR = group_series(*in.PminusR, active_pos);
    std::vector<int> monsF{0}, monsAll(M);
    for (int i = 0; i < n; ++i)
        monsF.push_back(sp.linear_monomial(i));
    for (int m = 0; m < M; ++m)
        monsAll[m] = m;

    const bool compose = in.R || in.PminusR;
    std::vector<cplx> values; // [m][point], per node
    if (compose) {
        out.Pplus = TorusSeries(F.space());
        out.Pplus->domain() = F.domain();
    }
    // polynomial helpers
    auto polymul = [&](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> c(M, 0.0);
        for (int i = 0; i < M; ++i) {
            if (a[i] == 0)
                continue;
            for (int j = 0; j < M; ++j) {
                int p = sp.monomial_product(i, j);
                if (p >= 0)
                    c[p] += a[i] * b[j];
            }
        }
        return c;
    };

    const int S_X = 0, S_V = n, S_U4 = S_V + n * n, S_U5 = S_U4 + n, S_U2 = S_U5 + n * n,
              S_U3 = S_U2 + La, S_END = S_U3 + La * n;
    const int nbF = 1 + n;
    double alias_num = 0, coef_max = 0;
    double escape = 0;

    std::vector<double> vnode(n);
    for (int g = 0; g < G; ++g) {
        std::fill(vnode.begin(), vnode.end(), 0.0);
        if (in.Nhat)
            for (auto& [a, comp] : in.Nhat->components())
                if (auto jt = comp.find(F.zero_mode()); jt != comp.end())
                    for (int i = 0; i < n; ++i)
                        vnode[i] += jt->second[g * M + sp.linear_monomial(i)].real();
        if (compose)
            values.assign(static_cast<std::size_t>(M) * NP, 0.0);
        for (int it = 0; it < NT; ++it) {
            std::vector<double> theta(La);
            {
                int rem = it;
                for (int a = La - 1; a >= 0; --a) {
                    int j = rem % map.grid_shape[a];
                    rem /= map.grid_shape[a];
                    theta[a] = 2 * std::numbers::pi * j / map.grid_shape[a];
                }
            }
            Collapsed cF = collapse(gF, theta, g, M, monsF, true, n);
            Collapsed cR, cPR;
            if (in.R)
                cR = collapse(gR, theta, g, M, monsF, false, n);
            if (in.PminusR)
                cPR = collapse(gPR, theta, g, M, monsAll, false, n);

            std::vector<double> fv(cF.ncoef), fdx(n * cF.ncoef);
            auto rhs = [&](const State& y, State& dy, double) {
                cF.eval(y.data() + S_X, fv.data(), fdx.data());
                // M_ij = d x_i F1_j
                for (int i = 0; i < n; ++i)
                    dy[S_X + i] = fv[1 + i];
                auto Mij = [&](int i, int j) { return fdx[i * cF.ncoef + 1 + j]; };
                for (int a = 0; a < n; ++a)
                    for (int b = 0; b < n; ++b) {
                        double s = 0, s5 = 0;
                        for (int c = 0; c < n; ++c) {
                            s += Mij(c, a) * y[S_V + c * n + b];
                            s5 += Mij(a, c) * y[S_U5 + c * n + b];
                        }
                        dy[S_V + a * n + b] = s;
                        dy[S_U5 + a * n + b] = -s5;
                    }
                for (int i = 0; i < n; ++i) {
                    double s = fdx[i * cF.ncoef + 0];
                    for (int j = 0; j < n; ++j)
                        s += Mij(i, j) * y[S_U4 + j];
                    dy[S_U4 + i] = -s;
                }
                for (int a = 0; a < La; ++a) {
                    const double* blk = &fv[(1 + a) * nbF];
                    double s = blk[0];
                    for (int j = 0; j < n; ++j)
                        s += blk[1 + j] * y[S_U4 + j];
                    dy[S_U2 + a] = -s;
                    for (int b = 0; b < n; ++b) {
                        double s3 = 0;
                        for (int j = 0; j < n; ++j)
                            s3 += blk[1 + j] * y[S_U5 + j * n + b];
                        dy[S_U3 + a * n + b] = -s3;
                    }
                }
            };

            for (int ix = 0; ix < NX; ++ix) {
                std::size_t p = static_cast<std::size_t>(it) * NX + ix;
                State y(S_END, 0.0);
                {
                    int rem = ix;
                    for (int i = n - 1; i >= 0; --i) {
                        int j = rem % map.grid_shape[La + i];
                        rem /= map.grid_shape[La + i];
                        y[S_X + i] = 2 * std::numbers::pi * j / map.grid_shape[La + i];
                    }
                }
                for (int i = 0; i < n; ++i) {
                    y[S_V + i * n + i] = 1;
                    y[S_U5 + i * n + i] = 1;
                }
                std::vector<double> lie(M, 0.0);
                std::vector<double> rv(cR.ncoef), rdx(n * cR.ncoef);
                int qi = 0;
                auto observer = [&](const State& st, double t) {
                    if (t == 0.0)
                        return;
                    // escape from D_L along the flow
                    for (int i = 0; i < n; ++i) {
                        double zi = std::abs(st[S_U4 + i]);
                        for (int j = 0; j < n; ++j)
                            zi += std::abs(st[S_U5 + i * n + j]) * in.s / 4;
                        escape = std::max(escape, zi / (in.s / 2));
                    }
                    if (t == 1.0 || !in.R) {
                        if (t == 1.0 && in.PminusR) {
                            std::vector<double> q(M);
                            cPR.eval(st.data() + S_X, q.data(), nullptr);
                            // substitute z = U4 + U5 z+
                            std::vector<std::vector<std::vector<double>>> pw(n);
                            for (int i = 0; i < n; ++i) {
                                std::vector<double> lin(M, 0.0);
                                lin[0] = st[S_U4 + i];
                                for (int k = 0; k < n; ++k)
                                    lin[sp.linear_monomial(k)] = st[S_U5 + i * n + k];
                                pw[i].push_back(std::vector<double>(M, 0.0));
                                pw[i][0][0] = 1;
                                for (int e = 1; e <= sp.degree_cap(); ++e)
                                    pw[i].push_back(polymul(pw[i][e - 1], lin));
                            }
                            for (int m = 0; m < M; ++m) {
                                if (q[m] == 0)
                                    continue;
                                std::vector<double> term(M, 0.0);
                                term[0] = 1;
                                for (int i = 0; i < n; ++i)
                                    if (sp.monomial(m)[i] > 0)
                                        term = polymul(term, pw[i][sp.monomial(m)[i]]);
                                for (int k = 0; k < M; ++k)
                                    lie[k] += q[m] * term[k];
                            }
                        }
                        return;
                    }
                    // Lie integrand {R_t, F} at the quadrature node
                    double w = wq[qi++];
                    cF.eval(st.data() + S_X, fv.data(), fdx.data());
                    cR.eval(st.data() + S_X, rv.data(), rdx.data());
                    for (int i = 0; i < n; ++i) {
                        // d x_i R (z) and d x_i F (z), affine in z+
                        std::vector<double> dR(1 + n, 0.0), dF(1 + n, 0.0);
                        double r0 = rdx[i * cR.ncoef + 0], f0 = fdx[i * cF.ncoef + 0];
                        dR[0] = r0;
                        dF[0] = f0;
                        for (int j = 0; j < n; ++j) {
                            double rj = rdx[i * cR.ncoef + 1 + j], fj = fdx[i * cF.ncoef + 1 + j];
                            dR[0] += rj * st[S_U4 + j];
                            dF[0] += fj * st[S_U4 + j];
                            for (int k = 0; k < n; ++k) {
                                dR[1 + k] += rj * st[S_U5 + j * n + k];
                                dF[1 + k] += fj * st[S_U5 + j * n + k];
                            }
                        }
                        double F1i = fv[1 + i];
                        double dzR = (1 - t) * vnode[i] + t * rv[1 + i];
                        lie[0] += w * (t * dR[0] * F1i - dzR * dF[0]);
                        for (int k = 0; k < n; ++k)
                            lie[sp.linear_monomial(k)] += w * (t * dR[1 + k] * F1i - dzR * dF[1 + k]);
                    }
                };
                auto stepper = boost::numeric::odeint::make_dense_output(
                    opt.abs_tol, opt.rel_tol, boost::numeric::odeint::runge_kutta_dopri5<State>());
                boost::numeric::odeint::integrate_times(stepper, rhs, y, times.begin(), times.end(),
                                                        0.25, observer);
                std::size_t base = static_cast<std::size_t>(g) * NP + p;
                for (int i = 0; i < n; ++i) {
                    map.U1[base * n + i] = y[S_X + i];
                    map.U4[base * n + i] = y[S_U4 + i];
                    for (int j = 0; j < n; ++j)
                        map.U5[(base * n + i) * n + j] = y[S_U5 + i * n + j];
                }
                for (int a = 0; a < La; ++a) {
                    map.U2[base * La + a] = y[S_U2 + a];
                    for (int j = 0; j < n; ++j)
                        map.U3[(base * La + a) * n + j] = y[S_U3 + a * n + j];
                }
                if (compose)
                    for (int m = 0; m < M; ++m)
                        values[static_cast<std::size_t>(m) * NP + p] = lie[m];
            }
        }
        if (!compose)
            continue;
        // back to Fourier modes
        std::vector<double> scale_m(M, 0.0);
        for (int m = 0; m < M; ++m)
            for (std::size_t p = 0; p < NP; ++p)
                scale_m[m] = std::max(scale_m[m], std::abs(values[m * NP + p]));
        fft_many(values, map.grid_shape, M, FFTW_FORWARD);
        for (std::size_t p = 0; p < NP; ++p) {
            std::vector<int> kk(D);
            int ord = 0;
            bool nyq = false, top = false;
            for (int d = 0; d < D; ++d) {
                int j = static_cast<int>((p / stride[d]) % map.grid_shape[d]);
                kk[d] = freq(j, map.grid_shape[d]);
                nyq = nyq || 2 * std::abs(kk[d]) == map.grid_shape[d];
                top = top || 4 * std::abs(kk[d]) >= 3 * (map.grid_shape[d] / 2);
                ord += std::abs(kk[d]);
            }
            double mag = 0;
            bool keep = false;
            for (int m = 0; m < M; ++m) {
                double a = std::abs(values[m * NP + p]) / NP;
                mag = std::max(mag, a);
                if (a > opt.prune_rel * scale_m[m])
                    keep = true;
            }
            coef_max = std::max(coef_max, mag);
            if (top || nyq)
                alias_num = std::max(alias_num, mag);
            if (!keep || nyq || ord > sp.order_cap())
                continue;
            TorusSeries::Mode mode = F.zero_mode();
            for (int d = 0; d < D; ++d)
                mode[dims_pos[d]] = kk[d];
            int comp = sp.rebin(mode);
            if (comp < 0)
                throw SupportOverflow("composed error has a support covered by no product set");
            auto& blk = out.Pplus->block(comp, mode);
            for (int m = 0; m < M; ++m)
                blk[g * M + m] += values[m * NP + p] / static_cast<double>(NP);
        }
    }
    out.alias_level = coef_max > 0 ? alias_num / coef_max : 0.0;
    if (escape >= 1.0) {
        std::ostringstream os;
        os << "trajectory leaves D_L: |z|/(s/2) = " << escape;
        throw FlowEscape(os.str());
    }

    // 2-form pullback and displacement on the real grid
    double sres = 0, disp = 0;
    const int nv = La + 2 * n; // theta, x+, z+
    for (int g = 0; g < G; ++g) {
        auto field = [&](auto getter) {
            std::vector<double> f(NP);
            for (std::size_t p = 0; p < NP; ++p)
                f[p] = getter(static_cast<std::size_t>(g) * NP + p, p);
            return f;
        };
        auto x_of = [&](std::size_t p, int i) {
            int j = static_cast<int>((p / stride[La + i]) % map.grid_shape[La + i]);
            return 2 * std::numbers::pi * j / map.grid_shape[La + i];
        };
        // derivative tables: [field][dim][point]
        std::vector<std::vector<double>> f1, f4, f5, f2, f3;
        for (int i = 0; i < n; ++i) {
            f1.push_back(field([&](std::size_t b, std::size_t p) { return map.U1[b * n + i] - x_of(p, i); }));
            f4.push_back(field([&](std::size_t b, std::size_t) { return map.U4[b * n + i]; }));
            for (int j = 0; j < n; ++j)
                f5.push_back(field([&](std::size_t b, std::size_t) { return map.U5[(b * n + i) * n + j]; }));
        }
        for (int a = 0; a < La; ++a) {
            f2.push_back(field([&](std::size_t b, std::size_t) { return map.U2[b * La + a]; }));
            for (int j = 0; j < n; ++j)
                f3.push_back(field([&](std::size_t b, std::size_t) { return map.U3[(b * La + a) * n + j]; }));
        }
        auto derivs = [&](const std::vector<std::vector<double>>& fs) {
            std::vector<std::vector<std::vector<double>>> d(fs.size());
            for (std::size_t q = 0; q < fs.size(); ++q)
                for (int dd = 0; dd < D; ++dd)
                    d[q].push_back(spectral_derivative(fs[q], map.grid_shape, dd));
            return d;
        };
        auto d1 = derivs(f1), d4 = derivs(f4), d5 = derivs(f5), d2 = derivs(f2), d3 = derivs(f3);
        for (std::size_t p = 0; p < NP; ++p) {
            std::size_t b = static_cast<std::size_t>(g) * NP + p;
            // evaluate the 2-form at z+ = 0 and its z+-linear parts
            for (int zk = -1; zk < n; ++zk) {
                Eigen::MatrixXd Om = Eigen::MatrixXd::Zero(nv, nv);
                auto wedge = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
                    Om += u * v.transpose() - v * u.transpose();
                };
                for (int a = 0; a < La; ++a) {
                    Eigen::VectorXd e = Eigen::VectorXd::Zero(nv), dW = Eigen::VectorXd::Zero(nv);
                    e(a) = 1;
                    for (int dd = 0; dd < D; ++dd) {
                        double v = zk < 0 ? d2[a][dd][p] : 0.0;
                        if (zk >= 0)
                            v += d3[a * n + zk][dd][p];
                        dW(dd) = v;
                    }
                    if (zk < 0)
                        for (int k = 0; k < n; ++k)
                            dW(La + n + k) = map.U3[(b * La + a) * n + k];
                    wedge(e, dW);
                }
                for (int i = 0; i < n; ++i) {
                    Eigen::VectorXd dU1 = Eigen::VectorXd::Zero(nv), dZ = Eigen::VectorXd::Zero(nv);
                    for (int dd = 0; dd < D; ++dd)
                        dU1(dd) = d1[i][dd][p] + (dd == La + i ? 1.0 : 0.0);
                    for (int dd = 0; dd < D; ++dd) {
                        double v = zk < 0 ? d4[i][dd][p] : d5[i * n + zk][dd][p];
                        dZ(dd) = v;
                    }
                    if (zk < 0)
                        for (int k = 0; k < n; ++k)
                            dZ(La + n + k) = map.U5[(b * n + i) * n + k];
                    wedge(dU1, dZ);
                    if (zk < 0) {
                        Eigen::VectorXd ex = Eigen::VectorXd::Zero(nv), ez = Eigen::VectorXd::Zero(nv);
                        ex(La + i) = 1;
                        ez(La + n + i) = 1;
                        Om -= ex * ez.transpose() - ez * ex.transpose();
                    }
                }
                sres = std::max(sres, Om.cwiseAbs().maxCoeff());
            }
            // displacement, weights rho^-1 on x, 2/s on J and z, over |z+| <= s/4
            double dx = 0, dz = 0, dj = 0;
            for (int i = 0; i < n; ++i) {
                double u = map.U1[b * n + i] - x_of(p, i);
                u = std::remainder(u, 2 * std::numbers::pi);
                dx = std::max(dx, std::abs(u));
                double zz = std::abs(map.U4[b * n + i]);
                for (int k = 0; k < n; ++k)
                    zz += std::abs(map.U5[(b * n + i) * n + k] - (i == k ? 1.0 : 0.0)) * in.s / 4;
                dz = std::max(dz, zz);
            }
            for (int a = 0; a < La; ++a) {
                double jj = std::abs(map.U2[b * La + a]);
                for (int k = 0; k < n; ++k)
                    jj += std::abs(map.U3[(b * La + a) * n + k]) * in.s / 4;
                jj *= std::exp(in.w * weight({map.theta_dims[a]}, sp.structure().base().rho_w()));
                dj += jj;
            }
            disp = std::max({disp, dx / in.rho, 2 * dj / in.s, 2 * dz / in.s});
        }
    }
    map.symplectic_residual = sres;
    map.displacement = disp;
    return out;
}

} // namespace kamwb
