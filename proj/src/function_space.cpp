#include "tlab/function_space.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace tlab {

namespace {

// Clenshaw-Curtis weights for nodes cos(pi j / N) on [-1,1], halved for [0,1].
// Order-reversal is harmless because the weights are symmetric.
Eigen::VectorXd clenshaw_curtis(int n) {
    Eigen::VectorXd w(n + 1);
    if (n == 0) {
        w[0] = 1.0;
        return w;
    }
    Eigen::VectorXd theta(n + 1);
    for (int j = 0; j <= n; ++j) theta[j] = kPi * j / n;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n - 1);
    if (n % 2 == 0) {
        w[0] = w[n] = 1.0 / (n * n - 1.0);
        for (int k = 1; k <= n / 2 - 1; ++k)
            for (int j = 1; j < n; ++j)
                v[j - 1] -= 2.0 * std::cos(2.0 * k * theta[j]) / (4.0 * k * k - 1.0);
        for (int j = 1; j < n; ++j)
            v[j - 1] -= std::cos(n * theta[j]) / (n * n - 1.0);
    } else {
        w[0] = w[n] = 1.0 / (n * n);
        for (int k = 1; k <= (n - 1) / 2; ++k)
            for (int j = 1; j < n; ++j)
                v[j - 1] -= 2.0 * std::cos(2.0 * k * theta[j]) / (4.0 * k * k - 1.0);
    }
    for (int j = 1; j < n; ++j) w[j] = 2.0 * v[j - 1] / n;
    return 0.5 * w;  // scale [-1,1] -> [0,1]
}

constexpr int kTaylorOrder = 14;

}  // namespace

GridPtr Grid::build(int n, int refine_factor) {
    if (n < 2) throw InvalidParameter("grid order must be >= 2");
    if (refine_factor < 1) throw InvalidParameter("refine factor must be >= 1");
    auto g = std::shared_ptr<Grid>(new Grid());
    g->n_ = n;

    g->nodes_.resize(n + 1);
    for (int j = 0; j <= n; ++j)
        g->nodes_[j] = 0.5 * (1.0 - std::cos(kPi * j / n));
    g->nodes_[0] = 0.0;
    g->nodes_[n] = 1.0;

    g->bary_.resize(n + 1);
    for (int j = 0; j <= n; ++j) {
        double w = (j % 2 == 0) ? 1.0 : -1.0;
        if (j == 0 || j == n) w *= 0.5;
        g->bary_[j] = w;
    }

    // Barycentric differentiation matrix with the negative-sum trick, so
    // rows annihilate constants exactly.
    g->diff_.resize(n + 1, n + 1);
    for (int i = 0; i <= n; ++i) {
        double diag = 0.0;
        for (int j = 0; j <= n; ++j) {
            if (i == j) continue;
            const double d = (g->bary_[j] / g->bary_[i]) / (g->nodes_[i] - g->nodes_[j]);
            g->diff_(i, j) = d;
            diag -= d;
        }
        g->diff_(i, i) = diag;
    }

    g->quad_ = clenshaw_curtis(n);

    const int rn = n * refine_factor;
    g->ref_pts_.resize(rn + 1);
    for (int j = 0; j <= rn; ++j)
        g->ref_pts_[j] = 0.5 * (1.0 - std::cos(kPi * j / rn));
    g->ref_pts_[0] = 0.0;
    g->ref_pts_[rn] = 1.0;

    g->ref_eval_.resize(rn + 1, n + 1);
    double leb = 1.0;
    for (int r = 0; r <= rn; ++r) {
        g->ref_eval_.row(r) = g->stencil(g->ref_pts_[r]);
        leb = std::max(leb, g->ref_eval_.row(r).cwiseAbs().sum());
    }
    g->lebesgue_ = leb;

    g->taylor0_.resize(kTaylorOrder + 1);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n + 1);
    row[0] = 1.0;  // delta at node 0
    double fact = 1.0;
    g->taylor0_[0] = row;
    for (int q = 1; q <= kTaylorOrder; ++q) {
        row = row * g->diff_;
        fact *= q;
        g->taylor0_[q] = row / fact;
    }
    return g;
}

Eigen::RowVectorXd Grid::stencil(double x) const {
    Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n_ + 1);
    double den = 0.0;
    for (int j = 0; j <= n_; ++j) {
        const double dx = x - nodes_[j];
        if (std::abs(dx) < 1e-15) {
            e.setZero();
            e[j] = 1.0;
            return e;
        }
        e[j] = bary_[j] / dx;
        den += e[j];
    }
    return e / den;
}

const Eigen::RowVectorXd& Grid::taylor0_row(int q) const {
    return taylor0_.at(static_cast<std::size_t>(q));
}

GridPtr build_grid(int n, int refine_factor) { return Grid::build(n, refine_factor); }

Eigen::VectorXcd apply_real(const Eigen::MatrixXd& m, const Eigen::VectorXcd& v) {
    const Eigen::VectorXd re = m * v.real();
    const Eigen::VectorXd im = m * v.imag();
    Eigen::VectorXcd out(re.size());
    for (long j = 0; j < re.size(); ++j) out[j] = Complex(re[j], im[j]);
    return out;
}

int default_grid_order(double t) {
    const int n = 4 + static_cast<int>(std::ceil(1.5 * std::abs(t)));
    return std::max(n, 64);
}

// --- GridFunction -----------------------------------------------------------

GridFunction::GridFunction(GridPtr grid, Eigen::VectorXcd values)
    : grid_(std::move(grid)), v_(std::move(values)) {
    if (v_.size() != grid_->size()) throw ShapeError("value count does not match grid");
}

GridFunction GridFunction::constant(const GridPtr& grid, Complex c) {
    return {grid, Eigen::VectorXcd::Constant(grid->size(), c)};
}

GridFunction GridFunction::sample(const GridPtr& grid,
                                  const std::function<Complex(double)>& f) {
    Eigen::VectorXcd v(grid->size());
    for (int j = 0; j < grid->size(); ++j) v[j] = f(grid->nodes()[j]);
    return {grid, std::move(v)};
}

Complex GridFunction::eval(double x) const {
    if (x < -1e-12 || x > 1.0 + 1e-12)
        throw DomainError("evaluation point outside [0,1]");
    x = std::min(1.0, std::max(0.0, x));
    const auto& xs = grid_->nodes();
    const auto& w = grid_->bary_weights();
    Complex num = 0.0;
    double den = 0.0;
    for (int j = 0; j < grid_->size(); ++j) {
        const double dx = x - xs[j];
        if (std::abs(dx) < 1e-15) return v_[j];
        const double c = w[j] / dx;
        num += c * v_[j];
        den += c;
    }
    return num / den;
}

GridFunction GridFunction::derivative() const {
    return {grid_, apply_real(grid_->diff_matrix(), v_)};
}

GridFunction GridFunction::abs() const {
    return {grid_, v_.cwiseAbs().cast<Complex>()};
}

GridFunction GridFunction::conj() const { return {grid_, v_.conjugate()}; }

GridFunction GridFunction::real() const {
    return {grid_, v_.real().cast<Complex>()};
}

double GridFunction::sup_refined() const {
    return apply_real(grid_->refined_eval(), v_).cwiseAbs().maxCoeff();
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
    if (grid_ != o.grid_) throw ShapeError("grid mismatch");
    v_ += o.v_;
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
    if (grid_ != o.grid_) throw ShapeError("grid mismatch");
    v_ -= o.v_;
    return *this;
}

GridFunction& GridFunction::operator*=(Complex c) {
    v_ *= c;
    return *this;
}

GridFunction GridFunction::pointwise(const GridFunction& o) const {
    if (grid_ != o.grid_) throw ShapeError("grid mismatch");
    return {grid_, v_.cwiseProduct(o.v_)};
}

// --- MeasureWeights ---------------------------------------------------------

MeasureWeights::MeasureWeights(GridPtr grid, Eigen::VectorXd weights)
    : grid_(std::move(grid)), w_(std::move(weights)) {
    if (w_.size() != grid_->size()) throw ShapeError("weight count does not match grid");
    const double floor = -1e-10 * std::max(1.0, w_.cwiseAbs().maxCoeff());
    for (int j = 0; j < w_.size(); ++j) {
        if (w_[j] < floor) throw PositivityError("negative measure weight");
        if (w_[j] < 0.0) w_[j] = 0.0;
    }
    mass_ = w_.sum();
}

MeasureWeights MeasureWeights::normalized() const {
    if (mass_ <= 0.0) throw InvalidParameter("cannot normalize a zero measure");
    return {grid_, w_ / mass_};
}

Complex integrate(const GridFunction& f, const MeasureWeights& m) {
    if (f.grid() != m.grid()) throw ShapeError("grid mismatch between function and measure");
    return f.values().dot(m.weights().cast<Complex>());
}

MeasureWeights lebesgue_weights(const GridPtr& grid) {
    return {grid, grid->quad_weights()};
}

double c1t_norm(const GridFunction& f, double t) {
    if (t == 0.0) throw InvalidParameter("the 1,t norm requires t != 0");
    return f.sup_refined() + f.derivative().sup_refined() / std::abs(t);
}

ConeCheckResult cone_check(const GridFunction& u, const GridFunction& v,
                           double C, double t) {
    if (C <= 0.0) throw InvalidParameter("cone constant must be positive");
    if (t == 0.0) throw InvalidParameter("cone condition requires t != 0");
    if (u.grid() != v.grid()) throw ShapeError("grid mismatch");
    const auto& R = u.grid()->refined_eval();
    const Eigen::VectorXd ur = apply_real(R, u.values()).real();
    const Eigen::VectorXd vr = apply_real(R, v.values()).cwiseAbs();
    const Eigen::VectorXd dur = apply_real(R, u.derivative().values()).cwiseAbs();
    const Eigen::VectorXd dvr = apply_real(R, v.derivative().values()).cwiseAbs();
    const double bound = 2.0 * C * std::abs(t);

    double margin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < ur.size(); ++j) {
        margin = std::min(margin, ur[j]);                              // u > 0
        margin = std::min(margin, ur[j] - vr[j]);                      // |v| <= u
        margin = std::min(margin, bound * ur[j] - std::max(dur[j], dvr[j]));
    }
    // slack for interpolation roundoff in the equality cases
    const double slack = 1e-10 * std::max(1.0, ur.maxCoeff());
    return {margin >= -slack, margin};
}

void write_csv(const GridFunction& f, std::ostream& os) {
    os << "node,re,im\n";
    for (int j = 0; j < f.size(); ++j) {
        os << fmt_double(f.grid()->nodes()[j]) << ',' << fmt_double(f.values()[j].real())
           << ',' << fmt_double(f.values()[j].imag()) << '\n';
    }
}

}  // namespace tlab
