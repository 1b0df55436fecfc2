#include "tlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

namespace tlab {

using json = nlohmann::json;

namespace {

void check_sign_definite(const Eigen::VectorXd& v, const char* what) {
    const double hi = v.maxCoeff();
    const double lo = v.minCoeff();
    const double scale = std::max(std::abs(hi), std::abs(lo));
    if (scale == 0.0 || (hi > 1e-8 * scale && lo < -1e-8 * scale))
        throw PositivityError(std::string("sign-indefinite iterate in ") + what);
}

}  // namespace

SpectralData leading_eigendata(const ExpandingSystem& sys, double sigma,
                               const GridPtr& grid, const TruncationPolicy& trunc,
                               const EigenSolveOptions& opt) {
    const OperatorMatrix op = assemble(sys, Complex(sigma, 0.0), grid, trunc);
    const Eigen::MatrixXd m = op.real_matrix();
    const int n = grid->size();

    // right vector: power iteration from the constant function
    Eigen::VectorXd f = Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd q = grid->quad_weights();
    double lambda = 0.0;
    double residual = 0.0;
    int used = 0;
    bool converged = false;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Eigen::VectorXd g = m * f;
        const double est = q.dot(g) / q.dot(f);
        const double scale = g.cwiseAbs().maxCoeff();
        if (!(scale > 0.0)) throw ConvergenceError("iterate collapsed to zero");
        g /= scale;
        residual = (m * g - est * g).cwiseAbs().maxCoeff();
        // tighter than the requested tolerance: the final normalization
        // mu(f) = 1 rescales the residual by sup f
        const bool ok = std::abs(est - lambda) < 0.25 * opt.tol &&
                        residual < 0.25 * opt.tol * std::max(1.0, est);
        lambda = est;
        f = g;
        used = it;
        if (ok) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("leading eigenvalue did not converge: last lambda " +
                               fmt_double(lambda) + ", residual " + fmt_double(residual));
    if (f.minCoeff() < 0.0 && f.maxCoeff() <= 0.0) f = -f;
    check_sign_definite(f, "eigenfunction solve");
    if (f.minCoeff() <= 0.0) throw PositivityError("eigenfunction not strictly positive");

    // left vector by adjoint iteration, same eigenvalue; the functional is
    // moment exact and may be signed for singular duals
    Eigen::VectorXd mu = q;  // start from the quadrature functional
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Eigen::VectorXd g = m.transpose() * mu;
        const double scale = g.cwiseAbs().maxCoeff();
        if (!(scale > 0.0)) throw ConvergenceError("adjoint iterate collapsed to zero");
        g /= scale;
        const double change = (g - mu).cwiseAbs().maxCoeff();
        mu = g;
        if (change < 0.25 * opt.tol) break;
        if (it == opt.max_iterations)
            throw ConvergenceError("adjoint eigenvector did not converge");
    }
    if (mu.sum() < 0.0) mu = -mu;
    mu /= mu.sum();  // mu(1) = 1
    f /= mu.dot(f);  // mu(f) = 1

    const Eigen::VectorXd nu_fn = mu.cwiseProduct(f);
    const double neg_floor = -1e-9 * mu.cwiseAbs().maxCoeff();
    const bool positive = mu.minCoeff() >= neg_floor;
    Eigen::VectorXd mu_w = mu.cwiseMax(0.0);
    mu_w /= mu_w.sum();
    Eigen::VectorXd nu_w = nu_fn.cwiseMax(0.0);
    nu_w /= nu_w.sum();

    const double final_residual = (m * f - lambda * f).cwiseAbs().maxCoeff();
    if (final_residual > opt.tol * std::max(1.0, lambda) * std::max(1.0, f.maxCoeff()))
        throw ConvergenceError("residual above tolerance after normalization: " +
                               fmt_double(final_residual));

    SpectralData spec{sys.name(),
                      sigma,
                      lambda,
                      GridFunction(grid, f.cast<Complex>()),
                      MeasureWeights(grid, std::move(mu_w)),
                      MeasureWeights(grid, std::move(nu_w)),
                      mu,
                      nu_fn,
                      positive,
                      0.0,
                      false,
                      final_residual,
                      used,
                      trunc};
    if (opt.with_gap) {
        const auto gap = subdominant_gap(op, spec);
        spec.gap = gap.value;
        spec.gap_converged = gap.converged;
    }
    return spec;
}

GapResult subdominant_gap(const OperatorMatrix& op, const SpectralData& spec,
                          double tol, int max_iterations) {
    const Eigen::MatrixXd m = op.real_matrix();
    const int n = static_cast<int>(m.rows());
    const Eigen::VectorXd f = spec.eigenfunction.values().real();
    const Eigen::VectorXd& mu = spec.mu_functional;
    const double mu_f = mu.dot(f);

    // deflate the leading mode: P g = g - f mu(g)/mu(f)
    auto deflate = [&](Eigen::VectorXd& g) { g -= f * (mu.dot(g) / mu_f); };

    // generic deterministic start; must overlap every symmetry class
    Eigen::VectorXd g(n);
    Rng rng(0x5eedu);
    for (int j = 0; j < n; ++j) g[j] = rng.normal();
    deflate(g);
    double est = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
        Eigen::VectorXd h = m * g;
        deflate(h);
        const double num = g.dot(h);
        const double den = g.dot(g);
        if (!(den > 0.0)) return {0.0, false, it};
        const double next = num / den;  // signed Rayleigh quotient
        const double scale = h.cwiseAbs().maxCoeff();
        if (!(scale > 0.0)) return {0.0, true, it};
        g = h / scale;
        if (std::abs(next - est) < tol * std::max(1.0, std::abs(next)) && it > 3) {
            const double gap = std::abs(next) / spec.lambda;
            return {gap, true, it};
        }
        est = next;
    }
    return {std::abs(est) / spec.lambda, false, max_iterations};
}

LambdaScan lambda_scan(const ExpandingSystem& sys, const std::vector<double>& sigmas,
                       const GridPtr& grid, const TruncationPolicy& trunc,
                       const EigenSolveOptions& opt) {
    LambdaScan scan;
    EigenSolveOptions o = opt;
    o.with_gap = false;
    for (double s : sigmas) {
        const auto spec = leading_eigendata(sys, s, grid, trunc, o);
        scan.rows.push_back({s, spec.lambda});
    }
    // monotonicity in sigma (checked on the sorted view)
    auto sorted = scan.rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const LambdaScanRow& a, const LambdaScanRow& b) { return a.sigma < b.sigma; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].lambda > sorted[i - 1].lambda + 1e-10) scan.nonincreasing = false;
    return scan;
}

json to_json(const SpectralData& spec) {
    std::vector<double> fvals, muvals, nuvals;
    for (int j = 0; j < spec.eigenfunction.size(); ++j) {
        fvals.push_back(spec.eigenfunction.values()[j].real());
        muvals.push_back(spec.mu.weights()[j]);
        nuvals.push_back(spec.nu.weights()[j]);
    }
    return json{{"schema_version", 1},
                {"system", spec.system},
                {"sigma", spec.sigma},
                {"lambda", spec.lambda},
                {"gap", spec.gap},
                {"gap_converged", spec.gap_converged},
                {"residual", spec.residual},
                {"iterations", spec.iterations},
                {"dual_positive", spec.dual_positive},
                {"grid_n", spec.eigenfunction.grid()->order()},
                {"eigenfunction", fvals},
                {"mu", muvals},
                {"nu", nuvals}};
}

}  // namespace tlab
