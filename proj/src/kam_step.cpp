#include "kamwb/errors.hpp"
#include "kamwb/kam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kamwb {

ParamGrid make_grid(const std::vector<double>& center, double h, int nodes_per_dim)
{
    double scale = 1.0;
    for (double c : center)
        scale = std::max(scale, std::abs(c));
    if (h < 1e-11 * scale)
        return ParamGrid(center, 0.0, 1);
    return ParamGrid(center, h, nodes_per_dim);
}

static std::vector<double> interp_vec(const ParamGrid& grid, const std::vector<std::vector<double>>& v,
                                      const std::vector<double>& wt)
{
    auto w = grid.interpolation_weights(wt);
    std::vector<double> out(v.empty() ? 0 : v[0].size(), 0.0);
    for (int g = 0; g < grid.size(); ++g)
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += w[g] * v[g][i];
    return out;
}

FrequencyInverse invert_frequency_map(const ParamGrid& old_grid,
                                      const std::vector<std::vector<double>>& v,
                                      const ParamGrid& new_grid, int max_iter)
{
    const int n = new_grid.dim();
    if (static_cast<int>(v.size()) != old_grid.size())
        throw ConfigError("frequency shift must be sampled on the old grid");
    FrequencyInverse res;
    auto solve = [&](const std::vector<double>& target, int& iters) {
        std::vector<double> w = target;
        double scale = 1.0;
        for (double t : target)
            scale = std::max(scale, std::abs(t));
        for (int it = 0; it <= max_iter; ++it) {
            auto vv = interp_vec(old_grid, v, w);
            Eigen::VectorXd r(n);
            double rn = 0;
            for (int i = 0; i < n; ++i) {
                r(i) = w[i] + vv[i] - target[i];
                rn = std::max(rn, std::abs(r(i)));
            }
            if (rn <= 4e-16 * scale) {
                iters = std::max(iters, it);
                return w;
            }
            if (it == max_iter)
                break;
            Eigen::MatrixXd Jm = Eigen::MatrixXd::Identity(n, n);
            if (old_grid.h() > 0) {
                double dlt = 1e-6 * old_grid.h();
                for (int j = 0; j < n; ++j) {
                    auto wp = w, wm = w;
                    wp[j] += dlt;
                    wm[j] -= dlt;
                    auto vp = interp_vec(old_grid, v, wp), vm = interp_vec(old_grid, v, wm);
                    for (int i = 0; i < n; ++i)
                        Jm(i, j) += (vp[i] - vm[i]) / (2 * dlt);
                }
            }
            Eigen::VectorXd step = Jm.partialPivLu().solve(r);
            for (int i = 0; i < n; ++i)
                w[i] -= step(i);
            if (!std::isfinite(step.norm()))
                break;
        }
        throw NewtonDiverged("frequency map inversion did not converge in " + std::to_string(max_iter) +
                             " iterations");
    };
    for (int g = 0; g < new_grid.size(); ++g) {
        const auto& target = new_grid.node(g);
        auto w = solve(target, res.iterations);
        auto vv = interp_vec(old_grid, v, w);
        for (int i = 0; i < n; ++i) {
            res.max_shift = std::max(res.max_shift, std::abs(w[i] - target[i]));
            res.residual = std::max(res.residual, std::abs(w[i] + vv[i] - target[i]));
        }
        if (new_grid.h() > 0) {
            double dlt = 1e-4 * new_grid.h();
            for (int j = 0; j < n; ++j) {
                auto tp = target, tm = target;
                tp[j] += dlt;
                tm[j] -= dlt;
                auto wp = solve(tp, res.iterations), wm = solve(tm, res.iterations);
                for (int i = 0; i < n; ++i) {
                    double d = (wp[i] - wm[i]) / (2 * dlt) - (i == j ? 1.0 : 0.0);
                    res.max_derivative_defect = std::max(res.max_derivative_defect, std::abs(d));
                }
            }
        }
        res.phi.push_back(w);
    }
    return res;
}

TorusSeries resample(const TorusSeries& f, SpacePtr new_space, const std::vector<std::vector<double>>& wt)
{
    const auto& old = *f.space();
    const int M = old.M(), G0 = old.G(), G1 = new_space->G();
    if (static_cast<int>(wt.size()) != G1)
        throw ConfigError("one resampling point per new node is required");
    std::vector<std::vector<double>> w(G1);
    for (int g = 0; g < G1; ++g)
        w[g] = old.grid().interpolation_weights(wt[g]);
    TorusSeries out(new_space);
    out.domain() = f.domain();
    for (auto& [a, comp] : f.components())
        for (auto& [mode, b] : comp) {
            TorusSeries::Block nb(static_cast<std::size_t>(G1) * M, 0.0);
            for (int g = 0; g < G1; ++g)
                for (int h = 0; h < G0; ++h) {
                    if (w[g][h] == 0)
                        continue;
                    for (int m = 0; m < M; ++m)
                        nb[g * M + m] += w[g][h] * b[h * M + m];
                }
            out.components()[a][mode] = std::move(nb);
        }
    return out;
}

KamStepResult kam_step(const Hamiltonian& H, const StepParams& p)
{
    const TorusSeries& P = H.P;
    const auto& sp = *P.space();
    const int L = sp.L(), n = sp.n(), M = sp.M(), G = sp.G();
    if (static_cast<int>(H.normal.e.size()) != G)
        throw ConfigError("normal form energy must be sampled on the grid");
    if (!(p.mu > 0 && p.mu < p.m) || !(p.rho > 0 && 2 * p.rho < p.r))
        throw ConfigError("kam_step needs 0 < mu < m and 0 < 2 rho < r");
    if (p.m - p.mu < p.w)
        throw SmallnessViolated("m - mu < w");
    KamStepResult res;
    auto& rep = res.report;
    rep.gamma_mu = gamma0(p.delta, p.mu);
    rep.gamma_rho = gamma1(p.delta, p.rho);
    const double GG = rep.gamma_mu * rep.gamma_rho;
    rep.measured_P_norm = norm_total(P, p.m, p.r, p.s);
    const double eps = p.eps_override > 0 ? p.eps_override : rep.measured_P_norm;
    if (p.eps_override > 0 && rep.measured_P_norm > p.eps_override * (1 + 1e-12))
        throw SmallnessViolated("measured |||P||| exceeds the scheduled epsilon");
    rep.E = eps / p.s;
    rep.bound_E_j = rep.E;
    rep.smallness_ok = 16 * GG * rep.E <= 1;
    rep.eta_ok = 4 * c0_flow * GG * rep.E <= p.eta && p.eta <= 0.5;
    rep.e15_ok = rep.E <= p.h / 16;
    std::vector<int> orders(sp.structure().size());
    rep.h_bound = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < sp.structure().size(); ++a) {
        double wa = sp.structure().component_weight(a);
        orders[a] = truncation_order(wa, p.mu, p.rho, p.K);
        if (orders[a] > 0)
            rep.h_bound = std::min(rep.h_bound, std::exp(-p.delta.log_value(wa) - std::log(orders[a]) -
                                                         p.delta.log_value(orders[a])));
    }
    rep.e6_ok = p.h <= rep.h_bound;
    if (p.strict) {
        std::ostringstream os;
        if (!rep.smallness_ok)
            os << "16 Gamma Gamma E = " << 16 * GG * rep.E << " > 1; ";
        if (!rep.eta_ok)
            os << "eta = " << p.eta << " outside [" << 4 * c0_flow * GG * rep.E << ", 1/2]; ";
        if (!rep.e15_ok)
            os << "E = " << rep.E << " > h/16 = " << p.h / 16 << "; ";
        if (!rep.e6_ok)
            os << "h = " << p.h << " > " << rep.h_bound << "; ";
        if (!os.str().empty())
            throw SmallnessViolated(os.str());
    }

    auto new_grid = make_grid(sp.grid().center(), p.h_next, sp.grid().nodes_per_dim());
    SpacePtr new_space = sp.with_grid(new_grid);
    Domain nd{p.m - p.mu, p.r - 2 * p.rho, p.eta * p.s / 2, p.h_next, p.w};

    if (P.empty()) {
        res.H.normal = H.normal;
        res.H.P = TorusSeries(new_space);
        res.H.P.domain() = nd;
        std::vector<std::vector<double>> zero(G, std::vector<double>(n, 0.0));
        res.phi = invert_frequency_map(sp.grid(), zero, new_grid);
        std::vector<std::vector<double>> e1(G, std::vector<double>{0.0});
        for (int g = 0; g < G; ++g)
            e1[g][0] = H.normal.e[g];
        res.H.normal.e.clear();
        for (auto& ph : res.phi.phi)
            res.H.normal.e.push_back(interp_vec(sp.grid(), e1, ph)[0]);
        rep.bound_ok = true;
        rep.divisor_margin = std::numeric_limits<double>::infinity();
        return res;
    }

    TorusSeries Pd = P;
    Pd.domain() = {p.m, p.r, p.s, p.h, p.w};
    auto tr = truncate(Pd, p.m, p.r, p.s, p.mu, p.rho, p.K, p.eta);
    rep.truncation_residual = tr.discarded_norm;
    rep.truncation_bound = (std::exp(-p.K) + p.eta * p.eta / (1 - p.eta)) * eps;

    auto hom = solve_homological(tr.R, H.normal.omega);
    rep.homological_residual = tr.R_norm > 0 ? hom.residual / tr.R_norm : 0.0;
    rep.min_divisor = hom.min_divisor;
    if (p.strict && rep.homological_residual > 1e-10)
        throw BoundViolated("homological residual " + std::to_string(rep.homological_residual) +
                            " exceeds 1e-10 |||R|||");

    // nonresonance margins on the retained kt != 0 modes
    rep.divisor_margin = std::numeric_limits<double>::infinity();
    for (auto& [a, comp] : tr.R.components())
        for (auto& [mode, b] : comp) {
            bool kt0 = true;
            for (int i = 0; i < n; ++i)
                kt0 = kt0 && mode[L + i] == 0;
            if (kt0)
                continue;
            IndexVector k;
            for (int i = 0; i < L; ++i)
                if (mode[i] != 0)
                    k.set(sp.lo() + i, mode[i]);
            double dd = p.delta(sp.structure().support_weight(k)) * p.delta(SeriesSpace::order(mode));
            for (int g = 0; g < G; ++g) {
                double d = 0;
                for (int i = 0; i < L; ++i)
                    d += mode[i] * H.normal.omega.omega[i];
                for (int i = 0; i < n; ++i)
                    d += mode[L + i] * sp.grid().node(g)[i];
                rep.divisor_margin = std::min(rep.divisor_margin, std::abs(d) * dd / p.alpha_tilde - 1);
            }
        }

    TorusSeries PmR = subtract(Pd, tr.R);
    PmR.prune();
    FlowInput fin;
    fin.F = &hom.F;
    fin.R = &tr.R;
    fin.Nhat = &hom.Nhat;
    fin.PminusR = &PmR;
    fin.rho = p.rho;
    fin.s = p.s;
    fin.w = p.w;
    auto fo = flow_time1(fin, p.flow);
    rep.symplectic_residual = fo.map.symplectic_residual;
    rep.displacement = fo.map.displacement;
    rep.displacement_bound = 4 * GG * rep.E;
    rep.alias_level = fo.alias_level;
    res.Pplus_raw = std::move(*fo.Pplus);
    res.Pplus_raw.domain() = {nd.m, nd.r, nd.s, p.h, p.w};
    rep.new_norm = norm_total(res.Pplus_raw, nd.m, nd.r, nd.s);
    rep.new_error_bound_rhs = 32 * GG * rep.E * eps + 2 * std::exp(-p.K) * eps + 4 * p.eta * p.eta * eps;
    rep.bound_ok = rep.new_norm <= rep.new_error_bound_rhs;
    if (p.strict && !rep.bound_ok) {
        std::ostringstream os;
        os << "|||P+||| = " << rep.new_norm << " > " << rep.new_error_bound_rhs;
        throw ErrorBoundExceeded(os.str());
    }
    res.map = std::move(fo.map);

    for (auto& v : hom.v)
        for (double x : v)
            rep.frequency_shift = std::max(rep.frequency_shift, std::abs(x));
    res.phi = invert_frequency_map(sp.grid(), hom.v, new_grid);
    rep.inversion_shift = res.phi.max_shift;
    rep.inversion_derivative = p.h / 4 * res.phi.max_derivative_defect;
    rep.inversion_residual = res.phi.residual;

    res.H.normal.omega = H.normal.omega;
    std::vector<std::vector<double>> e1(G, std::vector<double>{0.0});
    for (int g = 0; g < G; ++g)
        e1[g][0] = H.normal.e[g] + hom.ehat[g];
    for (auto& ph : res.phi.phi)
        res.H.normal.e.push_back(interp_vec(sp.grid(), e1, ph)[0]);
    res.H.P = resample(res.Pplus_raw, new_space, res.phi.phi);
    res.H.P.domain() = nd;
    (void)M;
    return res;
}

KamRunResult kam_run(const Hamiltonian& H, const KamSchedule& sched, const RunOptions& opt)
{
    KamRunResult out;
    const auto& sp0 = *H.P.space();
    const double s = sched.s;
    out.entry_lhs = norm_total(H.P, sched.m, sched.r, s) / s;
    out.E0 = sched.E0();
    double h = sp0.grid().h();
    out.h_over_2c = std::ldexp(h, -sched.c);
    if (out.entry_lhs > out.E0 || out.E0 > out.h_over_2c * (1 + 1e-12)) {
        std::ostringstream os;
        os << "entry gate: s^-1|||P||| = " << out.entry_lhs << ", alpha eps*/Psi = " << out.E0
           << ", h/2^c = " << out.h_over_2c;
        throw GateFailed(os.str());
    }
    // restrict to O_{h_0}
    double h0 = sched.h_j(0);
    auto g0 = make_grid(sp0.grid().center(), h0, sp0.grid().nodes_per_dim());
    SpacePtr space0 = sp0.with_grid(g0);
    std::vector<std::vector<double>> pts;
    for (int g = 0; g < g0.size(); ++g)
        pts.push_back(g0.node(g));
    Hamiltonian cur;
    cur.normal.omega = H.normal.omega;
    cur.P = resample(H.P, space0, pts);
    {
        std::vector<std::vector<double>> e1;
        for (double e : H.normal.e)
            e1.push_back({e});
        for (auto& pt : pts)
            cur.normal.e.push_back(interp_vec(sp0.grid(), e1, pt)[0]);
    }
    for (int j = 0; j < opt.j_max; ++j) {
        KamRunRow row;
        row.j = j;
        row.m = sched.m_j(j);
        row.r = sched.r_j(j);
        row.s = sched.s_j(j);
        row.h = sched.h_j(j);
        row.E = sched.E(j);
        double Pn = norm_total(cur.P, row.m, row.r, row.s);
        row.gate_lhs = Pn / row.s;
        row.gate_ok = row.gate_lhs <= row.E;
        row.h_ratio = sched.h_j(j + 1) / row.h;
        row.f3_defect = sched.f3_defect(j);
        row.f2_ratio = sched.f2_ratio(j);
        row.displacement_bound =
            4 * std::max(std::ldexp(sched.Gamma(j) * row.E, 1 - sched.a - j), 2 * row.E / row.h);
        if (!row.gate_ok) {
            std::ostringstream os;
            os << "step " << j << ": s_j^-1|||P_j||| = " << row.gate_lhs << " > E_j = " << row.E;
            throw GateFailed(os.str());
        }
        if (Pn < opt.stop_rel * row.s) {
            out.stopped_small = true;
            out.rows.push_back(row);
            break;
        }
        StepParams p;
        p.m = row.m;
        p.r = row.r;
        p.s = row.s;
        p.h = row.h;
        p.w = sched.w;
        p.mu = sched.seq.mu(j);
        p.rho = sched.seq.rho(j);
        p.K = sched.K_j(j);
        p.eta = sched.eta_j(j);
        p.h_next = sched.h_j(j + 1);
        p.eps_override = row.E * row.s;
        p.alpha_tilde = sched.alpha_tilde;
        p.delta = sched.delta;
        p.flow = opt.flow;
        KamStepResult st;
        try {
            st = kam_step(cur, p);
        } catch (const Error& e) {
            throw GateFailed("step " + std::to_string(j) + ": " + e.what());
        }
        row.step = st.report;
        row.measured_norm = st.report.new_norm;
        row.bound_rhs = st.report.new_error_bound_rhs;
        row.homolog_residual = st.report.homological_residual;
        row.sympl_residual = st.report.symplectic_residual;
        row.freq_shift = st.report.frequency_shift;
        out.rows.push_back(row);
        cur = std::move(st.H);
    }
    if (!out.stopped_small) {
        int J = static_cast<int>(out.rows.size());
        out.final_E = sched.E(J);
        out.final_gate_lhs = norm_total(cur.P, sched.m_j(J), sched.r_j(J), sched.s_j(J)) / sched.s_j(J);
        out.final_gate_ok = out.final_gate_lhs <= out.final_E;
    } else {
        out.final_gate_ok = true;
    }
    out.final_H = std::move(cur);
    return out;
}

} // namespace kamwb
