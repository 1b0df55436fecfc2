#ifndef TLAB_FUNCTION_SPACE_HPP
#define TLAB_FUNCTION_SPACE_HPP

#include <Eigen/Dense>
#include <complex>
#include <memory>

#include "tlab/common.hpp"

namespace tlab {

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

// Chebyshev-Lobatto collocation grid on [0,1]:
//   x_j = (1 - cos(pi j / N)) / 2,  j = 0..N,
// with barycentric weights, a spectral differentiation matrix,
// Clenshaw-Curtis quadrature weights and a refined sampling set used for
// sup-norm estimation.  Immutable after construction.
class Grid {
  public:
    static GridPtr build(int n, int refine_factor = 10);

    int order() const { return n_; }          // N
    int size() const { return n_ + 1; }       // node count

    const Eigen::VectorXd& nodes() const { return nodes_; }
    const Eigen::VectorXd& bary_weights() const { return bary_; }
    const Eigen::MatrixXd& diff_matrix() const { return diff_; }
    const Eigen::VectorXd& quad_weights() const { return quad_; }

    // Interpolation stencil at x: row vector e with p(x) = e . p(nodes).
    Eigen::RowVectorXd stencil(double x) const;

    // Refined sampling set (includes all nodes when refine_factor is an
    // integer) and the matrix mapping nodal values to refined values.
    const Eigen::VectorXd& refined_points() const { return ref_pts_; }
    const Eigen::MatrixXd& refined_eval() const { return ref_eval_; }

    // max over refined points of sum_k |l_k(x)|; bounds interpolated sup
    // norms by nodal max norms.
    double lebesgue_bound() const { return lebesgue_; }

    // Row of q-th Taylor coefficients at x=0 of the Lagrange basis:
    // row[k] = l_k^(q)(0) / q!.  Exact for the polynomial basis since the
    // differentiation matrix is.
    const Eigen::RowVectorXd& taylor0_row(int q) const;
    int taylor0_order() const { return static_cast<int>(taylor0_.size()) - 1; }

  private:
    Grid() = default;
    int n_ = 0;
    Eigen::VectorXd nodes_, bary_, quad_;
    Eigen::MatrixXd diff_;
    Eigen::VectorXd ref_pts_;
    Eigen::MatrixXd ref_eval_;
    double lebesgue_ = 1.0;
    std::vector<Eigen::RowVectorXd> taylor0_;
};

// Complex-valued function represented by values on the collocation nodes.
class GridFunction {
  public:
    GridFunction(GridPtr grid, Eigen::VectorXcd values);

    static GridFunction constant(const GridPtr& grid, Complex c);
    static GridFunction sample(const GridPtr& grid,
                               const std::function<Complex(double)>& f);

    const GridPtr& grid() const { return grid_; }
    const Eigen::VectorXcd& values() const { return v_; }
    Eigen::VectorXcd& values() { return v_; }
    int size() const { return static_cast<int>(v_.size()); }

    // Barycentric interpolation; exact at nodes.  x must lie in [0,1].
    Complex eval(double x) const;

    GridFunction derivative() const;

    GridFunction abs() const;   // nodewise |f|
    GridFunction conj() const;
    GridFunction real() const;

    double sup_refined() const;        // sup |f| over the refined set
    double sup_nodal() const { return v_.cwiseAbs().maxCoeff(); }

    GridFunction& operator+=(const GridFunction& o);
    GridFunction& operator-=(const GridFunction& o);
    GridFunction& operator*=(Complex c);
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(Complex c, GridFunction f) { return f *= c; }
    GridFunction pointwise(const GridFunction& o) const;  // nodewise product

  private:
    GridPtr grid_;
    Eigen::VectorXcd v_;
};

// Nonnegative nodal weights representing a measure through
// m(f) = sum_j w_j f(x_j).
class MeasureWeights {
  public:
    MeasureWeights(GridPtr grid, Eigen::VectorXd weights);

    const GridPtr& grid() const { return grid_; }
    const Eigen::VectorXd& weights() const { return w_; }
    double mass() const { return mass_; }
    MeasureWeights normalized() const;

  private:
    GridPtr grid_;
    Eigen::VectorXd w_;
    double mass_;
};

GridPtr build_grid(int n, int refine_factor = 10);

// real matrix times complex vector
Eigen::VectorXcd apply_real(const Eigen::MatrixXd& m, const Eigen::VectorXcd& v);

// Default node-count rule: resolution scales with the twist frequency.
int default_grid_order(double t);

Complex integrate(const GridFunction& f, const MeasureWeights& m);
MeasureWeights lebesgue_weights(const GridPtr& grid);

// ||f||_{1,t} = sup|f| + sup|f'| / |t|, sup over the refined sampling set.
double c1t_norm(const GridFunction& f, double t);

struct ConeCheckResult {
    bool ok = false;
    double margin = 0.0;  // min over all pointwise checks of (bound - quantity)
};

// Cone condition: u > 0, 0 <= |v| <= u, max(|u'|,|v'|) <= 2 C |t| u,
// verified on the refined sampling set.
ConeCheckResult cone_check(const GridFunction& u, const GridFunction& v,
                           double C, double t);

// CSV serialization, columns: node,re,im
void write_csv(const GridFunction& f, std::ostream& os);

}  // namespace tlab

#endif
