#include "kamwb/errors.hpp"
#include "kamwb/kam.hpp"

#include <cmath>
#include <numbers>

namespace kamwb {

ParameterFamily introduce_parameters(SpacePtr space, const ScalarFn& h, const VecFn& h_y,
                                     const MatFn& h_yy, const Eigen::VectorXd& y_guess,
                                     double fit_radius)
{
    const auto& sp = *space;
    const int n = sp.n(), G = sp.G(), M = sp.M(), D = sp.degree_cap();
    if (y_guess.size() != n)
        throw ConfigError("initial guess must have length n");
    if (!(fit_radius > 0))
        throw ConfigError("fit radius must be positive");
    ParameterFamily fam;
    fam.quadratic = TorusSeries(space);
    // Newton for h_y(y) = wt, continued from node to node
    Eigen::VectorXd y = y_guess;
    for (int g = 0; g < G; ++g) {
        Eigen::VectorXd target(n);
        for (int i = 0; i < n; ++i)
            target(i) = sp.grid().node(g)[i];
        bool ok = false;
        for (int it = 0; it < 100; ++it) {
            Eigen::VectorXd r = h_y(y.cast<cplx>()).real() - target;
            double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
            if (r.cwiseAbs().maxCoeff() <= 1e-15 * scale) {
                ok = true;
                fam.newton_iterations = std::max(fam.newton_iterations, it);
                break;
            }
            Eigen::MatrixXd J = h_yy(y.cast<cplx>()).real();
            double det = J.determinant();
            if (!std::isfinite(det) || std::abs(det) < 1e-14 * std::pow(std::max(1.0, J.cwiseAbs().maxCoeff()), n))
                throw DegenerateJacobian("det h_yy = " + std::to_string(det));
            y -= J.partialPivLu().solve(r);
        }
        if (!ok)
            throw DegenerateJacobian("frequency map inversion failed at grid node " + std::to_string(g));
        fam.y0.emplace_back(y.data(), y.data() + n);
        fam.e.push_back(h(y.cast<cplx>()).real());
    }
    // Taylor fit of int_0^1 (1-t) <h_yy(g+tz) z, z> dt on circles |z_i| = fit_radius
    const int Nc = std::max(4, 2 * D + 4);
    std::vector<double> gt, gw;
    {
        const int q = 12;
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(q, q);
        for (int k = 1; k < q; ++k)
            J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
        for (int i = 0; i < q; ++i) {
            gt.push_back(0.5 * (1 + es.eigenvalues()(i)));
            double v = es.eigenvectors()(0, i);
            gw.push_back(v * v);
        }
    }
    long npts = 1;
    for (int i = 0; i < n; ++i)
        npts *= Nc;
    auto mode0 = fam.quadratic.zero_mode();
    int comp0 = sp.rebin(mode0);
    for (int g = 0; g < G; ++g) {
        Eigen::VectorXcd y0(n);
        for (int i = 0; i < n; ++i)
            y0(i) = fam.y0[g][i];
        std::vector<cplx> coeff(M, 0.0);
        for (long p = 0; p < npts; ++p) {
            std::vector<int> idx(n);
            long rem = p;
            for (int i = n - 1; i >= 0; --i) {
                idx[i] = static_cast<int>(rem % Nc);
                rem /= Nc;
            }
            Eigen::VectorXcd z(n);
            for (int i = 0; i < n; ++i)
                z(i) = std::polar(fit_radius, 2 * std::numbers::pi * idx[i] / Nc);
            cplx Q = 0;
            for (std::size_t q = 0; q < gt.size(); ++q) {
                Eigen::MatrixXcd Hm = h_yy(y0 + gt[q] * z);
                Q += gw[q] * (1 - gt[q]) * (z.transpose() * Hm * z)(0, 0);
            }
            for (int m = 0; m < M; ++m) {
                cplx ph = 1;
                for (int i = 0; i < n; ++i)
                    ph *= std::polar(1.0, -2 * std::numbers::pi * idx[i] * sp.monomial(m)[i] / Nc);
                coeff[m] += Q * ph;
            }
        }
        for (int m = 0; m < M; ++m) {
            cplx c = coeff[m] / static_cast<double>(npts) / std::pow(fit_radius, sp.monomial_degree(m));
            if (sp.monomial_degree(m) < 2)
                continue;
            std::vector<cplx> vals(G, 0.0);
            vals[g] = cplx(c.real(), 0.0);
            fam.quadratic.add_term_grid(comp0, mode0, sp.monomial(m), vals);
        }
    }
    fam.quadratic.prune(0.0);
    return fam;
}

Hamiltonian scale_time(const Hamiltonian& H, double lam)
{
    const auto& sp = *H.P.space();
    std::vector<double> c = sp.grid().center();
    for (auto& x : c)
        x *= lam;
    auto space = sp.with_grid(ParamGrid(c, lam * sp.grid().h(), sp.grid().nodes_per_dim()));
    Hamiltonian out;
    out.normal = H.normal;
    for (auto& w : out.normal.omega.omega)
        w *= lam;
    for (auto& e : out.normal.e)
        e *= lam;
    out.P = TorusSeries(space);
    out.P.domain() = H.P.domain();
    out.P.domain().h *= lam;
    out.P.components() = scale(H.P, lam).components();
    return out;
}

} // namespace kamwb
