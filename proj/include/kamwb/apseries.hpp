#pragma once

#include "kamwb/lattice.hpp"

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace kamwb {

using cplx = std::complex<double>;

/// Tensor Chebyshev-Lobatto grid over the box |wt - center|_inf <= h.
class ParamGrid {
public:
    ParamGrid() = default;
    /// h == 0 gives a single node at center.
    ParamGrid(std::vector<double> center, double h, int nodes_per_dim = 9);

    int dim() const { return static_cast<int>(center_.size()); }
    int size() const { return static_cast<int>(nodes_.size()); }
    double h() const { return h_; }
    int nodes_per_dim() const { return npd_; }
    const std::vector<double>& center() const { return center_; }
    const std::vector<double>& node(int g) const { return nodes_[g]; }
    /// Barycentric interpolation weights of all nodes at the point wt.
    std::vector<double> interpolation_weights(const std::vector<double>& wt) const;
    bool contains(const std::vector<double>& wt, double slack = 1e-12) const;

private:
    std::vector<double> center_;
    double h_ = 0;
    int npd_ = 1;
    std::vector<std::vector<double>> nodes_;
    std::vector<double> cheb_; ///< 1-D nodes on [-1,1]
};

/// Analyticity parameters carried by a series.
struct Domain {
    double m = 0.5;
    double r = 0.5;
    double s = 1.0;
    double h = 0.0;
    double w = 0.0;
};

/// Shared shape of a family of series: structure, caps, monomial table, parameter grid.
class SeriesSpace {
public:
    SeriesSpace(ProductStructure structure, int degree_cap, int order_cap, ParamGrid grid);

    const ProductStructure& structure() const { return structure_; }
    int L() const { return structure_.base().window().size(); }
    int n() const { return structure_.n(); }
    int lo() const { return structure_.base().window().lo; }
    int degree_cap() const { return D_; }
    int order_cap() const { return K_; }
    const ParamGrid& grid() const { return grid_; }
    int G() const { return grid_.size(); }
    int M() const { return static_cast<int>(monomials_.size()); }
    const std::vector<int>& monomial(int m) const { return monomials_[m]; }
    int monomial_degree(int m) const { return degrees_[m]; }
    /// -1 when the degree exceeds the cap.
    int monomial_index(const std::vector<int>& deg) const;
    /// index of the product monomial or -1
    int monomial_product(int a, int b) const { return product_[a * M() + b]; }
    /// index of the unit monomial e_i
    int linear_monomial(int i) const;

    /// Component of the minimum-weight product set covering the theta support of a mode.
    int rebin(const std::vector<int>& mode) const;
    static int order(const std::vector<int>& mode);

    /// Same structure and caps, different parameter grid.
    std::shared_ptr<SeriesSpace> with_grid(ParamGrid grid) const;
    std::shared_ptr<SeriesSpace> with_caps(int degree_cap, int order_cap) const;

private:
    ProductStructure structure_;
    int D_;
    int K_;
    ParamGrid grid_;
    std::vector<std::vector<int>> monomials_;
    std::vector<int> degrees_;
    std::map<std::vector<int>, int> index_;
    std::vector<int> product_;
};

using SpacePtr = std::shared_ptr<const SeriesSpace>;

/// Variable selector for derivatives.
struct Var {
    enum Kind { Theta, X, Z } kind;
    int index; ///< window index lambda for Theta, 0-based for X and Z
};

/// Finite Fourier-Taylor series
///   sum_A sum_(k,kt) P_{A,k,kt}(z; wt) exp(i(<k,theta> + <kt,x>))
/// with polynomial z-dependence and wt sampled on the space's grid.
/// Mode vectors have length L + n: k over the window, then kt.
class TorusSeries {
public:
    using Mode = std::vector<int>;
    using Block = std::vector<cplx>; ///< G x M, row-major in g
    using Component = std::map<Mode, Block>;

    TorusSeries() = default;
    explicit TorusSeries(SpacePtr space);

    const SpacePtr& space() const { return space_; }
    Domain& domain() { return domain_; }
    const Domain& domain() const { return domain_; }

    const std::map<int, Component>& components() const { return comps_; }
    std::map<int, Component>& components() { return comps_; }
    bool empty() const;
    std::size_t mode_count() const;

    Block& block(int comp, const Mode& mode);
    const Block* find(int comp, const Mode& mode) const;
    /// Adds c (constant over the grid) to one coefficient.
    void add_term(int comp, const Mode& mode, const std::vector<int>& deg, cplx c);
    /// Adds values per grid node.
    void add_term_grid(int comp, const Mode& mode, const std::vector<int>& deg,
                       const std::vector<cplx>& values);
    /// Adds a real cosine term c cos(<k,theta>+<kt,x>) z^deg.
    void add_cos(int comp, const Mode& mode, const std::vector<int>& deg, double c);
    void add_sin(int comp, const Mode& mode, const std::vector<int>& deg, double c);

    Mode make_mode(const std::map<int, int>& k, const std::vector<int>& kt) const;
    Mode zero_mode() const { return Mode(space_->L() + space_->n(), 0); }

    /// Drops coefficients with |c| <= tol (all grid nodes), and empty modes.
    void prune(double tol = 0.0);
    /// Moves every mode to its minimum-weight covering component.
    TorusSeries canonical() const;

    cplx eval(const std::vector<double>& theta, const std::vector<double>& x,
              const std::vector<double>& z, const std::vector<double>& wt = {}) const;
    /// eval with the realness check; returns the real part.
    double eval_real(const std::vector<double>& theta, const std::vector<double>& x,
                     const std::vector<double>& z, const std::vector<double>& wt = {}) const;
    /// Largest |c_{-mode} - conj(c_mode)| over all stored coefficients.
    double conjugate_defect() const;

    nlohmann::json to_json() const;
    static TorusSeries from_json(const nlohmann::json& j, SpacePtr space);
    /// CSV rows: component,order,abs_coeff (majorant at s=1, max over grid)
    std::string spectrum_csv() const;

private:
    SpacePtr space_;
    Domain domain_;
    std::map<int, Component> comps_;
};

/// |P_{A,k,kt}|_{s,h}: max over the grid of sum_deg |c| s^|deg|
double coeff_norm(const SeriesSpace& space, const TorusSeries::Block& b, double s);
/// ||P_A||_{r,s,h}
double norm_component(const TorusSeries& f, int comp, double r, double s);
/// |||P|||_{m,r,s,h}
double norm_total(const TorusSeries& f, double m, double r, double s);
double norm_total(const TorusSeries& f);

TorusSeries add(const TorusSeries& f, const TorusSeries& g);
TorusSeries subtract(const TorusSeries& f, const TorusSeries& g);
TorusSeries scale(const TorusSeries& f, cplx c);
/// Convolution with re-binning; truncated at the caps. Throws SupportOverflow.
TorusSeries multiply(const TorusSeries& f, const TorusSeries& g);
TorusSeries derivative(const TorusSeries& f, Var var);
/// {F,G} = <d_x F, d_z G> - <d_z F, d_x G>
TorusSeries poisson_bracket(const TorusSeries& f, const TorusSeries& g);

/// Multiplies each coefficient by a function of the mode and grid node.
TorusSeries map_modes(const TorusSeries& f,
                      const std::function<cplx(const TorusSeries::Mode&, int g)>& factor);

} // namespace kamwb
