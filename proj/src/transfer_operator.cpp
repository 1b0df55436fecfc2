#include "tlab/transfer_operator.hpp"

#include <cmath>
#include <ostream>

#include "tlab/numerics.hpp"
#include "tlab/spectral.hpp"

namespace tlab {

double tail_bound(const ExpandingSystem& sys, double sigma,
                  std::optional<std::uint64_t> M) {
    if (sigma <= sys.constants().sigma0)
        throw DivergentSum("sigma at or below the summability abscissa");
    return sys.tail_model(sigma, M);
}

TruncationPolicy TruncationPolicy::for_tolerance(const ExpandingSystem& sys,
                                                 double sigma, double tolerance) {
    if (tolerance <= 0.0) throw InvalidParameter("tolerance must be positive");
    const auto count = sys.branch_count();
    if (count) return {*count, tolerance};
    if (sys.has_gauss_tail()) {
        // invert M^-(1+2 sigma) / (1+2 sigma) = tolerance
        const double p = 1.0 + 2.0 * sigma;
        const double m = std::pow(tolerance * p, -1.0 / p);
        return {static_cast<std::uint64_t>(std::ceil(m)), tolerance};
    }
    // bisect on the tail model
    std::uint64_t lo = 1, hi = 2;
    while (sys.tail_model(sigma, hi) > tolerance) {
        hi *= 2;
        if (hi > (1ULL << 60)) throw TruncationError("tail model does not reach tolerance", hi);
    }
    while (lo + 1 < hi) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        (sys.tail_model(sigma, mid) > tolerance ? lo : hi) = mid;
    }
    return {hi, tolerance};
}

namespace {

// Branch count summed explicitly before switching to the closed-form zeta
// tail; beyond it the stencil's Taylor expansion at 0 converges fast.
std::uint64_t explicit_cutoff(int grid_order, double t) {
    const double by_grid = 0.5 * double(grid_order) * double(grid_order);
    const double by_twist = 4.0 * std::abs(t);
    const double m = std::max({std::min(by_grid, 40000.0), by_twist, 256.0});
    return static_cast<std::uint64_t>(std::llround(m));
}

bool oscillation_guard(const ExpandingSystem& sys, double t, const GridPtr& grid) {
    if (t == 0.0) return false;
    // the twist weights oscillate at up to K |t| radians across [0,1]
    // (|(r o h)'| <= K); warn when that exceeds the grid's resolvable
    // bandwidth, i.e. when aliasing would corrupt the assembled rows
    const double bandwidth = 2.0 * std::max(1, grid->order() - 8);
    return sys.constants().K * std::abs(t) > bandwidth;
}

}  // namespace

OperatorMatrix assemble(const ExpandingSystem& sys, Complex s, const GridPtr& grid,
                        const TruncationPolicy& trunc) {
    const double sigma = s.real();
    if (sigma <= sys.constants().sigma0)
        throw DivergentSum("sigma at or below the summability abscissa");

    const double tail = tail_bound(sys, sigma, trunc.cutoff);
    if (tail > trunc.tolerance) {
        const auto fixed = TruncationPolicy::for_tolerance(sys, sigma, trunc.tolerance);
        throw TruncationError(
            "tail bound " + fmt_double(tail) + " exceeds tolerance " +
                fmt_double(trunc.tolerance) + "; need cutoff >= " +
                std::to_string(fixed.cutoff.value_or(0)),
            fixed.cutoff.value_or(0));
    }

    const auto count = sys.branch_count();
    const int n = grid->size();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);

    OperatorMeta meta;
    meta.s = s;
    meta.system = sys.name();
    meta.trunc = trunc;
    meta.tail_value = tail;
    meta.oscillation_warning = oscillation_guard(sys, s.imag(), grid);

    if (sys.has_gauss_tail()) {
        // weight of branch m at x: e^{-s r(h_m(x))} |h_m'(x)| = (m+x)^-(2+2s)
        const std::uint64_t m_explicit =
            trunc.cutoff ? std::min(*trunc.cutoff, explicit_cutoff(grid->order(), s.imag()))
                         : explicit_cutoff(grid->order(), s.imag());
        meta.explicit_branches = m_explicit;
        meta.analytic_tail_used = !trunc.cutoff || *trunc.cutoff > m_explicit;
        const Complex expo = Complex(2.0, 0.0) + 2.0 * s;
        const int q_max = grid->taylor0_order();

        const Eigen::ArrayXd xs = grid->nodes().array();
        const Eigen::ArrayXd bary = grid->bary_weights().array();
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
            const double x = grid->nodes()[static_cast<long>(row)];
            Eigen::ArrayXd acc_re = Eigen::ArrayXd::Zero(n);
            Eigen::ArrayXd acc_im = Eigen::ArrayXd::Zero(n);
            for (std::uint64_t k = 1; k <= m_explicit; ++k) {
                const double base = static_cast<double>(k) + x;
                const double lg = std::log(base);
                const double mag = std::exp(-expo.real() * lg);
                const double ph = -expo.imag() * lg;
                const double wr = mag * std::cos(ph);
                const double wi = mag * std::sin(ph);
                const double y = 1.0 / base;
                const Eigen::ArrayXd diff = y - xs;
                Eigen::Index hit;
                if (diff.abs().minCoeff(&hit) < 1e-14) {
                    acc_re[hit] += wr;
                    acc_im[hit] += wi;
                    continue;
                }
                const Eigen::ArrayXd d = bary / diff;
                const double scale = 1.0 / d.sum();
                acc_re += (wr * scale) * d;
                acc_im += (wi * scale) * d;
            }
            Eigen::RowVectorXcd acc(n);
            for (int j = 0; j < n; ++j) acc[j] = Complex(acc_re[j], acc_im[j]);
            if (meta.analytic_tail_used) {
                // sum_{m>m_explicit} (m+x)^-(2+2s+q) via Hurwitz zeta, paired
                // with the stencil's Taylor coefficients at 0
                for (int q = 0; q <= q_max; ++q) {
                    const Complex wq = expo + Complex(static_cast<double>(q), 0.0);
                    Complex z = hurwitz_zeta(wq, static_cast<double>(m_explicit) + 1.0 + x);
                    if (trunc.cutoff)
                        z -= hurwitz_zeta(wq, static_cast<double>(*trunc.cutoff) + 1.0 + x);
                    acc += z * grid->taylor0_row(q);
                }
            }
            m.row(static_cast<long>(row)) = acc;
        });
        return {grid, std::move(m), std::move(meta)};
    }

    if (!count && !trunc.cutoff)
        throw TruncationError("countable family needs a finite cutoff", 0);
    const std::uint64_t m_count =
        count ? (trunc.cutoff ? std::min(*count, *trunc.cutoff) : *count)
              : *trunc.cutoff;
    meta.explicit_branches = m_count;

    std::vector<InverseBranch> branches;
    branches.reserve(static_cast<std::size_t>(m_count));
    for (std::uint64_t k = 1; k <= m_count; ++k) branches.push_back(sys.branch(k));

    parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
        const double x = grid->nodes()[static_cast<long>(row)];
        Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Zero(n);
        for (const auto& h : branches) {
            const double y = h.eval(x);
            const double r = sys.roof().eval_on(h.word().front(), y);
            const Complex w = std::exp(Complex(-s.real() * r, -s.imag() * r)) *
                              std::abs(h.deriv(x));
            acc += w * grid->stencil(y);
        }
        m.row(static_cast<long>(row)) = acc;
    });
    return {grid, std::move(m), std::move(meta)};
}

OperatorMatrix assemble_words(const ExpandingSystem& sys, Complex s, const GridPtr& grid,
                              const std::vector<std::vector<int>>& words) {
    const int n = grid->size();
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& w : words) {
        const auto h = compose_branches(sys, w);
        const auto br = birkhoff_roof(sys, h);
        for (int row = 0; row < n; ++row) {
            const double x = grid->nodes()[row];
            const double r = br.value(x);
            const Complex wt = std::exp(Complex(-s.real() * r, -s.imag() * r)) *
                               std::abs(h.deriv(x));
            m.row(row) += wt * grid->stencil(h.eval(x));
        }
    }
    OperatorMeta meta;
    meta.s = s;
    meta.system = sys.name();
    meta.explicit_branches = words.size();
    return {grid, std::move(m), std::move(meta)};
}

Eigen::MatrixXd OperatorMatrix::real_matrix() const {
    if (meta_.s.imag() != 0.0)
        throw InvalidParameter("real matrix view requires t = 0");
    return m_.real();
}

GridFunction apply(const OperatorMatrix& op, const GridFunction& f) {
    if (op.grid() != f.grid()) throw ShapeError("operator and function on different grids");
    return {op.grid(), op.matrix() * f.values()};
}

GridFunction iterate(const OperatorMatrix& op, GridFunction f, int n) {
    if (n < 0) throw InvalidParameter("iteration count must be >= 0");
    if (op.grid() != f.grid()) throw ShapeError("operator and function on different grids");
    for (int k = 0; k < n; ++k) f.values() = op.matrix() * f.values();
    return f;
}

OperatorMatrix normalize(const OperatorMatrix& op, const SpectralData& spec) {
    if (op.grid() != spec.eigenfunction.grid())
        throw ShapeError("spectral data computed on a different grid");
    if (spec.system != op.meta().system)
        throw InvalidSpectralData("spectral data from a different system");
    const auto& f = spec.eigenfunction.values();
    Eigen::VectorXd fr(f.size());
    for (long j = 0; j < f.size(); ++j) {
        fr[j] = f[j].real();
        if (!(fr[j] > 0.0))
            throw InvalidSpectralData("eigenfunction must be strictly positive");
    }
    Eigen::MatrixXcd m = op.matrix();
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j)
            m(i, j) *= fr[j] / (spec.lambda * fr[i]);
    OperatorMeta meta = op.meta();
    meta.normalized = true;
    return {op.grid(), std::move(m), std::move(meta)};
}

void export_csv(const OperatorMatrix& op, std::ostream& os) {
    const auto& m = op.matrix();
    os << "# rows=" << m.rows() << " cols=" << m.cols()
       << " s=" << fmt_double(op.meta().s.real()) << "+" << fmt_double(op.meta().s.imag())
       << "i system=" << op.meta().system << "\n";
    for (long i = 0; i < m.rows(); ++i) {
        for (long j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << fmt_double(m(i, j).real()) << ',' << fmt_double(m(i, j).imag());
        }
        os << '\n';
    }
}

}  // namespace tlab
