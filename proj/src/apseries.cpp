#include "kamwb/apseries.hpp"
#include "kamwb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace kamwb {

// ---------------------------------------------------------------- ParamGrid

ParamGrid::ParamGrid(std::vector<double> center, double h, int nodes_per_dim)
    : center_(std::move(center)), h_(h), npd_(h > 0 ? nodes_per_dim : 1)
{
    if (h_ < 0)
        throw ConfigError("grid half-width must be >= 0");
    if (npd_ < 1 || (h_ > 0 && npd_ < 2))
        throw ConfigError("grid needs at least 2 nodes per dimension");
    cheb_.resize(npd_);
    for (int j = 0; j < npd_; ++j)
        cheb_[j] = npd_ == 1 ? 0.0 : std::cos(std::numbers::pi * j / (npd_ - 1));
    int d = dim();
    long G = 1;
    for (int i = 0; i < d; ++i)
        G *= npd_;
    nodes_.resize(G, std::vector<double>(d));
    for (long g = 0; g < G; ++g) {
        long rem = g;
        for (int i = d - 1; i >= 0; --i) {
            int j = static_cast<int>(rem % npd_);
            rem /= npd_;
            nodes_[g][i] = center_[i] + h_ * cheb_[j];
        }
    }
    if (d == 0)
        nodes_.assign(1, {});
}

bool ParamGrid::contains(const std::vector<double>& wt, double slack) const
{
    if (static_cast<int>(wt.size()) != dim())
        return false;
    for (int i = 0; i < dim(); ++i)
        if (std::abs(wt[i] - center_[i]) > h_ * (1 + slack) + slack)
            return false;
    return true;
}

std::vector<double> ParamGrid::interpolation_weights(const std::vector<double>& wt) const
{
    int G = size();
    std::vector<double> out(G, 1.0);
    if (npd_ == 1)
        return out;
    int d = dim();
    std::vector<std::vector<double>> per_dim(d, std::vector<double>(npd_));
    for (int i = 0; i < d; ++i) {
        double y = (wt[i] - center_[i]) / h_;
        int hit = -1;
        for (int j = 0; j < npd_; ++j)
            if (std::abs(y - cheb_[j]) < 1e-15)
                hit = j;
        if (hit >= 0) {
            per_dim[i][hit] = 1.0;
            continue;
        }
        double sum = 0;
        for (int j = 0; j < npd_; ++j) {
            double w = (j % 2 ? -1.0 : 1.0) * ((j == 0 || j == npd_ - 1) ? 0.5 : 1.0);
            per_dim[i][j] = w / (y - cheb_[j]);
            sum += per_dim[i][j];
        }
        for (int j = 0; j < npd_; ++j)
            per_dim[i][j] /= sum;
    }
    for (int g = 0; g < G; ++g) {
        long rem = g;
        double w = 1;
        for (int i = d - 1; i >= 0; --i) {
            w *= per_dim[i][rem % npd_];
            rem /= npd_;
        }
        out[g] = w;
    }
    return out;
}

// ---------------------------------------------------------------- SeriesSpace

static void compositions(int n, int d, std::vector<int>& cur, int pos, std::vector<std::vector<int>>& out)
{
    if (pos == n - 1) {
        cur[pos] = d;
        out.push_back(cur);
        return;
    }
    for (int v = d; v >= 0; --v) {
        cur[pos] = v;
        compositions(n, d - v, cur, pos + 1, out);
    }
}

SeriesSpace::SeriesSpace(ProductStructure structure, int degree_cap, int order_cap, ParamGrid grid)
    : structure_(std::move(structure)), D_(degree_cap), K_(order_cap), grid_(std::move(grid))
{
    if (D_ < 0 || K_ < 0)
        throw ConfigError("caps must be >= 0");
    if (grid_.dim() != 0 && grid_.dim() != n())
        throw ConfigError("parameter grid dimension must equal n");
    std::vector<int> cur(n());
    for (int d = 0; d <= D_; ++d)
        compositions(n(), d, cur, 0, monomials_);
    for (std::size_t m = 0; m < monomials_.size(); ++m) {
        int deg = 0;
        for (int v : monomials_[m])
            deg += v;
        degrees_.push_back(deg);
        index_[monomials_[m]] = static_cast<int>(m);
    }
    int Mm = M();
    product_.assign(Mm * Mm, -1);
    for (int a = 0; a < Mm; ++a)
        for (int b = 0; b < Mm; ++b) {
            std::vector<int> s(n());
            for (int i = 0; i < n(); ++i)
                s[i] = monomials_[a][i] + monomials_[b][i];
            product_[a * Mm + b] = monomial_index(s);
        }
}

int SeriesSpace::monomial_index(const std::vector<int>& deg) const
{
    auto it = index_.find(deg);
    return it == index_.end() ? -1 : it->second;
}

int SeriesSpace::linear_monomial(int i) const
{
    std::vector<int> e(n(), 0);
    e[i] = 1;
    return monomial_index(e);
}

int SeriesSpace::order(const std::vector<int>& mode)
{
    int s = 0;
    for (int v : mode)
        s += std::abs(v);
    return s;
}

int SeriesSpace::rebin(const std::vector<int>& mode) const
{
    std::vector<int> supp;
    for (int i = 0; i < L(); ++i)
        if (mode[i] != 0)
            supp.push_back(lo() + i);
    return structure_.min_cover(supp);
}

std::shared_ptr<SeriesSpace> SeriesSpace::with_grid(ParamGrid grid) const
{
    return std::make_shared<SeriesSpace>(structure_, D_, K_, std::move(grid));
}

std::shared_ptr<SeriesSpace> SeriesSpace::with_caps(int degree_cap, int order_cap) const
{
    return std::make_shared<SeriesSpace>(structure_, degree_cap, order_cap, grid_);
}

// ---------------------------------------------------------------- TorusSeries

TorusSeries::TorusSeries(SpacePtr space) : space_(std::move(space)) {}

bool TorusSeries::empty() const
{
    for (auto& [a, comp] : comps_)
        if (!comp.empty())
            return false;
    return true;
}

std::size_t TorusSeries::mode_count() const
{
    std::size_t n = 0;
    for (auto& [a, comp] : comps_)
        n += comp.size();
    return n;
}

TorusSeries::Block& TorusSeries::block(int comp, const Mode& mode)
{
    auto& b = comps_[comp][mode];
    if (b.empty())
        b.assign(static_cast<std::size_t>(space_->G()) * space_->M(), cplx(0));
    return b;
}

const TorusSeries::Block* TorusSeries::find(int comp, const Mode& mode) const
{
    auto it = comps_.find(comp);
    if (it == comps_.end())
        return nullptr;
    auto jt = it->second.find(mode);
    return jt == it->second.end() ? nullptr : &jt->second;
}

void TorusSeries::add_term(int comp, const Mode& mode, const std::vector<int>& deg, cplx c)
{
    add_term_grid(comp, mode, deg, std::vector<cplx>(space_->G(), c));
}

void TorusSeries::add_term_grid(int comp, const Mode& mode, const std::vector<int>& deg,
                                const std::vector<cplx>& values)
{
    if (comp < 0 || comp >= static_cast<int>(space_->structure().size()))
        throw SupportOverflow("component index out of range");
    if (static_cast<int>(mode.size()) != space_->L() + space_->n())
        throw ConfigError("mode length must be L + n");
    // supp k must lie in the component's base subset
    const auto& A = space_->structure().base().subsets()[comp];
    for (int i = 0; i < space_->L(); ++i)
        if (mode[i] != 0 && !std::binary_search(A.begin(), A.end(), space_->lo() + i))
            throw SupportOverflow("mode support not contained in component");
    int m = space_->monomial_index(deg);
    if (m < 0)
        throw ConfigError("monomial degree exceeds cap");
    if (static_cast<int>(values.size()) != space_->G())
        throw ConfigError("grid value count mismatch");
    auto& b = block(comp, mode);
    for (int g = 0; g < space_->G(); ++g)
        b[g * space_->M() + m] += values[g];
}

void TorusSeries::add_cos(int comp, const Mode& mode, const std::vector<int>& deg, double c)
{
    Mode neg(mode);
    for (auto& v : neg)
        v = -v;
    if (neg == mode) {
        add_term(comp, mode, deg, c);
        return;
    }
    add_term(comp, mode, deg, 0.5 * c);
    add_term(comp, neg, deg, 0.5 * c);
}

void TorusSeries::add_sin(int comp, const Mode& mode, const std::vector<int>& deg, double c)
{
    Mode neg(mode);
    for (auto& v : neg)
        v = -v;
    if (neg == mode)
        return;
    add_term(comp, mode, deg, cplx(0, -0.5 * c));
    add_term(comp, neg, deg, cplx(0, 0.5 * c));
}

TorusSeries::Mode TorusSeries::make_mode(const std::map<int, int>& k, const std::vector<int>& kt) const
{
    Mode m = zero_mode();
    for (auto [i, v] : k) {
        if (!space_->structure().base().window().contains(i))
            throw ConfigError("theta index outside window");
        m[i - space_->lo()] = v;
    }
    if (static_cast<int>(kt.size()) > space_->n())
        throw ConfigError("kt longer than n");
    for (std::size_t i = 0; i < kt.size(); ++i)
        m[space_->L() + i] = kt[i];
    return m;
}

void TorusSeries::prune(double tol)
{
    for (auto& [a, comp] : comps_) {
        for (auto it = comp.begin(); it != comp.end();) {
            bool keep = false;
            for (auto& c : it->second) {
                if (std::abs(c) > tol)
                    keep = true;
                else
                    c = 0;
            }
            it = keep ? std::next(it) : comp.erase(it);
        }
    }
    for (auto it = comps_.begin(); it != comps_.end();)
        it = it->second.empty() ? comps_.erase(it) : std::next(it);
}

TorusSeries TorusSeries::canonical() const
{
    TorusSeries out(space_);
    out.domain_ = domain_;
    for (auto& [a, comp] : comps_)
        for (auto& [mode, b] : comp) {
            int c = space_->rebin(mode);
            auto& ob = out.block(c, mode);
            for (std::size_t i = 0; i < b.size(); ++i)
                ob[i] += b[i];
        }
    return out;
}

cplx TorusSeries::eval(const std::vector<double>& theta, const std::vector<double>& x,
                       const std::vector<double>& z, const std::vector<double>& wt) const
{
    const auto& sp = *space_;
    if (static_cast<int>(theta.size()) != sp.L() || static_cast<int>(x.size()) != sp.n() ||
        static_cast<int>(z.size()) != sp.n())
        throw ConfigError("eval: argument dimensions do not match the series space");
    if (domain_.s > 0)
        for (double zi : z)
            if (std::abs(zi) > domain_.s * (1 + 1e-12))
                throw DomainViolation("|z| exceeds s");
    std::vector<double> gw(sp.G(), 1.0);
    if (sp.G() > 1) {
        if (!sp.grid().contains(wt))
            throw DomainViolation("parameter outside the sampled box");
        gw = sp.grid().interpolation_weights(wt);
    }
    std::vector<double> zm(sp.M());
    for (int m = 0; m < sp.M(); ++m) {
        double p = 1;
        for (int i = 0; i < sp.n(); ++i)
            p *= std::pow(z[i], sp.monomial(m)[i]);
        zm[m] = p;
    }
    cplx total = 0;
    for (auto& [a, comp] : comps_)
        for (auto& [mode, b] : comp) {
            double ph = 0;
            for (int i = 0; i < sp.L(); ++i)
                ph += mode[i] * theta[i];
            for (int i = 0; i < sp.n(); ++i)
                ph += mode[sp.L() + i] * x[i];
            cplx c = 0;
            for (int g = 0; g < sp.G(); ++g) {
                if (gw[g] == 0)
                    continue;
                cplx cg = 0;
                for (int m = 0; m < sp.M(); ++m)
                    cg += b[g * sp.M() + m] * zm[m];
                c += gw[g] * cg;
            }
            total += c * std::polar(1.0, ph);
        }
    return total;
}

double TorusSeries::eval_real(const std::vector<double>& theta, const std::vector<double>& x,
                              const std::vector<double>& z, const std::vector<double>& wt) const
{
    cplx v = eval(theta, x, z, wt);
    double scale = 1.0;
    for (auto& [a, comp] : comps_)
        for (auto& [mode, b] : comp)
            for (auto& c : b)
                scale = std::max(scale, std::abs(c));
    if (std::abs(v.imag()) > 1e-12 * scale)
        throw DomainViolation("imaginary residue " + std::to_string(v.imag()) +
                              " at a real point: series is not real-valued");
    return v.real();
}

double TorusSeries::conjugate_defect() const
{
    TorusSeries c = canonical();
    double worst = 0;
    for (auto& [a, comp] : c.comps_)
        for (auto& [mode, b] : comp) {
            Mode neg(mode);
            for (auto& v : neg)
                v = -v;
            auto it = comp.find(neg);
            for (std::size_t i = 0; i < b.size(); ++i) {
                cplx other = it == comp.end() ? cplx(0) : it->second[i];
                worst = std::max(worst, std::abs(other - std::conj(b[i])));
            }
        }
    return worst;
}

nlohmann::json TorusSeries::to_json() const
{
    const auto& sp = *space_;
    nlohmann::json j;
    j["n"] = sp.n();
    j["degree_cap"] = sp.degree_cap();
    j["order_cap"] = sp.order_cap();
    j["window"] = {sp.structure().base().window().lo, sp.structure().base().window().hi};
    j["grid"] = {{"center", sp.grid().center()}, {"h", sp.grid().h()},
                 {"nodes", sp.grid().nodes_per_dim()}};
    j["domain"] = {{"m", domain_.m}, {"r", domain_.r}, {"s", domain_.s}, {"h", domain_.h},
                   {"w", domain_.w}};
    nlohmann::json comps = nlohmann::json::array();
    for (auto& [a, comp] : comps_) {
        nlohmann::json coeffs = nlohmann::json::array();
        for (auto& [mode, b] : comp)
            for (int g = 0; g < sp.G(); ++g)
                for (int m = 0; m < sp.M(); ++m) {
                    cplx c = b[g * sp.M() + m];
                    if (c == cplx(0))
                        continue;
                    coeffs.push_back({{"k", std::vector<int>(mode.begin(), mode.begin() + sp.L())},
                                      {"kt", std::vector<int>(mode.begin() + sp.L(), mode.end())},
                                      {"deg", sp.monomial(m)},
                                      {"g", g},
                                      {"re", c.real()},
                                      {"im", c.imag()}});
                }
        comps.push_back({{"component", a}, {"set", sp.structure().base().subsets()[a]},
                         {"coeffs", coeffs}});
    }
    j["components"] = comps;
    return j;
}

TorusSeries TorusSeries::from_json(const nlohmann::json& j, SpacePtr space)
{
    TorusSeries f(space);
    const auto& sp = *space;
    if (j.contains("domain")) {
        auto& d = j["domain"];
        f.domain_ = {d.value("m", 0.5), d.value("r", 0.5), d.value("s", 1.0), d.value("h", 0.0),
                     d.value("w", 0.0)};
    }
    for (auto& c : j.at("components")) {
        int a = c.at("component").get<int>();
        for (auto& e : c.at("coeffs")) {
            auto k = e.at("k").get<std::vector<int>>();
            auto kt = e.at("kt").get<std::vector<int>>();
            if (static_cast<int>(k.size()) != sp.L() || static_cast<int>(kt.size()) != sp.n())
                throw ConfigError("coefficient index length mismatch");
            Mode mode(k);
            mode.insert(mode.end(), kt.begin(), kt.end());
            int g = e.value("g", -1);
            cplx v(e.at("re").get<double>(), e.value("im", 0.0));
            auto deg = e.at("deg").get<std::vector<int>>();
            if (g < 0) {
                f.add_term(a, mode, deg, v);
            } else {
                std::vector<cplx> vals(sp.G(), 0.0);
                if (g >= sp.G())
                    throw ConfigError("grid node index out of range");
                vals[g] = v;
                f.add_term_grid(a, mode, deg, vals);
            }
        }
    }
    return f;
}

std::string TorusSeries::spectrum_csv() const
{
    std::ostringstream os;
    os << "component,order,abs_coeff\n";
    os << std::setprecision(17);
    for (auto& [a, comp] : comps_)
        for (auto& [mode, b] : comp)
            os << a << ',' << SeriesSpace::order(mode) << ',' << coeff_norm(*space_, b, 1.0) << '\n';
    return os.str();
}

// ---------------------------------------------------------------- norms

double coeff_norm(const SeriesSpace& sp, const TorusSeries::Block& b, double s)
{
    double best = 0;
    for (int g = 0; g < sp.G(); ++g) {
        double acc = 0;
        for (int m = 0; m < sp.M(); ++m) {
            double a = std::abs(b[g * sp.M() + m]);
            if (a != 0)
                acc += a * std::pow(s, sp.monomial_degree(m));
        }
        best = std::max(best, acc);
    }
    return best;
}

double norm_component(const TorusSeries& f, int comp, double r, double s)
{
    auto it = f.components().find(comp);
    if (it == f.components().end())
        return 0.0;
    double acc = 0;
    for (auto& [mode, b] : it->second)
        acc += coeff_norm(*f.space(), b, s) * std::exp(r * SeriesSpace::order(mode));
    return acc;
}

double norm_total(const TorusSeries& f, double m, double r, double s)
{
    double acc = 0;
    for (auto& [a, comp] : f.components())
        acc += norm_component(f, a, r, s) * std::exp(m * f.space()->structure().component_weight(a));
    return acc;
}

double norm_total(const TorusSeries& f)
{
    return norm_total(f, f.domain().m, f.domain().r, f.domain().s);
}

// ---------------------------------------------------------------- arithmetic

static void check_same_space(const TorusSeries& f, const TorusSeries& g)
{
    if (f.space() != g.space()) {
        const auto& a = *f.space();
        const auto& b = *g.space();
        if (a.L() != b.L() || a.n() != b.n() || a.M() != b.M() || a.G() != b.G() ||
            a.structure().size() != b.structure().size())
            throw ConfigError("series live in incompatible spaces");
    }
}

TorusSeries add(const TorusSeries& f, const TorusSeries& g)
{
    check_same_space(f, g);
    TorusSeries out = f;
    for (auto& [a, comp] : g.components())
        for (auto& [mode, b] : comp) {
            auto& ob = out.block(a, mode);
            for (std::size_t i = 0; i < b.size(); ++i)
                ob[i] += b[i];
        }
    return out;
}

TorusSeries scale(const TorusSeries& f, cplx c)
{
    TorusSeries out = f;
    for (auto& [a, comp] : out.components())
        for (auto& [mode, b] : comp)
            for (auto& v : b)
                v *= c;
    return out;
}

TorusSeries subtract(const TorusSeries& f, const TorusSeries& g)
{
    return add(f, scale(g, -1.0));
}

TorusSeries multiply(const TorusSeries& f, const TorusSeries& g)
{
    check_same_space(f, g);
    const auto& sp = *f.space();
    const int M = sp.M(), G = sp.G(), K = sp.order_cap();
    struct Term {
        const TorusSeries::Mode* mode;
        const TorusSeries::Block* block;
        std::vector<int> nz; ///< nonzero monomials
    };
    auto flatten = [&](const TorusSeries& s) {
        std::vector<Term> out;
        for (auto& [a, comp] : s.components())
            for (auto& [mode, b] : comp) {
                Term t{&mode, &b, {}};
                for (int m = 0; m < M; ++m)
                    for (int gg = 0; gg < G; ++gg)
                        if (b[gg * M + m] != cplx(0)) {
                            t.nz.push_back(m);
                            break;
                        }
                if (!t.nz.empty())
                    out.push_back(std::move(t));
            }
        return out;
    };
    auto tf = flatten(f), tg = flatten(g);
    TorusSeries out(f.space());
    out.domain() = f.domain();
    TorusSeries::Mode w(sp.L() + sp.n());
    for (auto& u : tf)
        for (auto& v : tg) {
            int ord = 0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = (*u.mode)[i] + (*v.mode)[i];
                ord += std::abs(w[i]);
            }
            if (ord > K)
                continue;
            int c = sp.rebin(w);
            if (c < 0)
                throw SupportOverflow("product support is covered by no product set");
            TorusSeries::Block* ob = nullptr;
            for (int m1 : u.nz)
                for (int m2 : v.nz) {
                    int p = sp.monomial_product(m1, m2);
                    if (p < 0)
                        continue;
                    if (!ob)
                        ob = &out.block(c, w);
                    for (int gg = 0; gg < G; ++gg)
                        (*ob)[gg * M + p] += (*u.block)[gg * M + m1] * (*v.block)[gg * M + m2];
                }
        }
    return out;
}

TorusSeries derivative(const TorusSeries& f, Var var)
{
    const auto& sp = *f.space();
    TorusSeries out(f.space());
    out.domain() = f.domain();
    const int M = sp.M(), G = sp.G();
    if (var.kind == Var::Theta) {
        if (!sp.structure().base().window().contains(var.index))
            throw ConfigError("theta index outside window");
        int pos = var.index - sp.lo();
        for (auto& [a, comp] : f.components())
            for (auto& [mode, b] : comp) {
                if (mode[pos] == 0)
                    continue;
                auto& ob = out.block(a, mode);
                for (std::size_t i = 0; i < b.size(); ++i)
                    ob[i] = cplx(0, mode[pos]) * b[i];
            }
        return out;
    }
    if (var.index < 0 || var.index >= sp.n())
        throw ConfigError("angle/action index out of range");
    if (var.kind == Var::X) {
        int pos = sp.L() + var.index;
        for (auto& [a, comp] : f.components())
            for (auto& [mode, b] : comp) {
                if (mode[pos] == 0)
                    continue;
                auto& ob = out.block(a, mode);
                for (std::size_t i = 0; i < b.size(); ++i)
                    ob[i] = cplx(0, mode[pos]) * b[i];
            }
        return out;
    }
    for (auto& [a, comp] : f.components())
        for (auto& [mode, b] : comp) {
            TorusSeries::Block ob(b.size(), 0.0);
            bool any = false;
            for (int m = 0; m < M; ++m) {
                int e = sp.monomial(m)[var.index];
                if (e == 0)
                    continue;
                auto deg = sp.monomial(m);
                deg[var.index] -= 1;
                int mm = sp.monomial_index(deg);
                for (int g = 0; g < G; ++g) {
                    ob[g * M + mm] += static_cast<double>(e) * b[g * M + m];
                    any = any || b[g * M + m] != cplx(0);
                }
            }
            if (any)
                out.components()[a][mode] = std::move(ob);
        }
    return out;
}

TorusSeries poisson_bracket(const TorusSeries& f, const TorusSeries& g)
{
    TorusSeries out(f.space());
    out.domain() = f.domain();
    for (int i = 0; i < f.space()->n(); ++i) {
        auto t1 = multiply(derivative(f, {Var::X, i}), derivative(g, {Var::Z, i}));
        auto t2 = multiply(derivative(f, {Var::Z, i}), derivative(g, {Var::X, i}));
        out = add(out, subtract(t1, t2));
    }
    return out;
}

TorusSeries map_modes(const TorusSeries& f,
                      const std::function<cplx(const TorusSeries::Mode&, int g)>& factor)
{
    const auto& sp = *f.space();
    TorusSeries out = f;
    for (auto& [a, comp] : out.components())
        for (auto& [mode, b] : comp)
            for (int g = 0; g < sp.G(); ++g) {
                cplx s = factor(mode, g);
                for (int m = 0; m < sp.M(); ++m)
                    b[g * sp.M() + m] *= s;
            }
    return out;
}

} // namespace kamwb
