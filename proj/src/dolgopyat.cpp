#include "tlab/dolgopyat.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "tlab/numerics.hpp"

namespace tlab {

using json = nlohmann::json;

// --- psi pairs and UNI certificates ------------------------------------------

PsiPair psi_pair(const ExpandingSystem& sys, const InverseBranch& h,
                 const InverseBranch& k, int grid_resolution) {
    if (h.length() != k.length())
        throw InvalidWord("psi pair needs words of equal length");
    if (grid_resolution < 3) throw InvalidParameter("grid resolution too small");

    auto bh = std::make_shared<BirkhoffRoof>(sys, h);
    auto bk = std::make_shared<BirkhoffRoof>(sys, k);
    PsiPair p;
    p.psi = [bh, bk](double x) { return bh->value(x) - bk->value(x); };
    p.psi_deriv = [bh, bk](double x) { return bh->deriv(x) - bk->deriv(x); };
    p.grid_resolution = grid_resolution;

    const double step = 1.0 / (grid_resolution - 1);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0, lip = 0.0;
    double prev = 0.0;
    for (int i = 0; i < grid_resolution; ++i) {
        const double x = i * step;
        const double d = std::abs(p.psi_deriv(x));
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        if (i > 0) lip = std::max(lip, std::abs(d - prev) / step);
        prev = d;
    }
    const double slack = 0.75 * lip * step;  // 1.5 safety on the sampled Lipschitz rate
    p.inf_abs_deriv = std::max(0.0, lo - slack);
    p.sup_abs_deriv = hi + slack;
    return p;
}

UniCertificate uni_certificate(
    const ExpandingSystem& sys, int n,
    std::vector<std::pair<std::vector<int>, std::vector<int>>> candidates) {
    if (n < 1) throw InvalidParameter("word length must be >= 1");
    if (candidates.empty()) {
        if (sys.has_gauss_tail()) {
            // all-ones vs all-twos: Fibonacci and Pell continuants
            candidates.push_back({std::vector<int>(n, 1), std::vector<int>(n, 2)});
        } else {
            const int lo = sys.digit_lo();
            const auto count = sys.branch_count();
            const int digits = count ? static_cast<int>(std::min<std::uint64_t>(*count, 4)) : 4;
            for (int a = 0; a < digits; ++a)
                for (int b = a + 1; b < digits; ++b)
                    candidates.push_back(
                        {std::vector<int>(n, lo + a), std::vector<int>(n, lo + b)});
        }
    }
    if (candidates.empty()) throw InvalidParameter("no candidate word pairs");

    UniCertificate best;
    best.n = n;
    best.D = -1.0;
    for (auto& [wh, wk] : candidates) {
        if (static_cast<int>(wh.size()) != n || static_cast<int>(wk.size()) != n)
            throw InvalidWord("candidate words must have length n");
        const auto h = compose_branches(sys, wh);
        const auto k = compose_branches(sys, wk);
        const auto p = psi_pair(sys, h, k);
        if (p.inf_abs_deriv > best.D) {
            best.D = p.inf_abs_deriv;
            best.sup_psi = p.sup_abs_deriv;
            best.word_h = wh;
            best.word_k = wk;
            best.grid_resolution = p.grid_resolution;
        }
    }
    best.D = std::max(0.0, best.D);
    best.certified = best.D > 1e-12;
    return best;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> spread_candidates(int n) {
    std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
    for (int m : {2, 5, 12, 50})
        out.push_back({std::vector<int>(static_cast<std::size_t>(n), 1),
                       std::vector<int>(static_cast<std::size_t>(n), m)});
    return out;
}

// --- calculus lemma ------------------------------------------------------------

double calculus_eta_min() { return 0.5 * (std::sqrt(7.0) - 1.0); }

double calculus_margin(Complex z1, Complex z2, double eta) {
    const double r1 = std::abs(z1), r2 = std::abs(z2);
    return std::max(eta * r1 + r2, r1 + eta * r2) - std::abs(z1 + z2);
}

CalculusCheck calculus_lemma_check(Complex z1, Complex z2, double eta) {
    if (eta < calculus_eta_min() - 1e-15 || eta >= 1.0)
        throw InvalidParameter("eta must lie in [(sqrt 7 - 1)/2, 1)");
    const double r1 = std::abs(z1), r2 = std::abs(z2);
    CalculusCheck out;
    if (r1 == 0.0 || r2 == 0.0) {
        out.applicable = true;
    } else {
        const double c = (z1.real() * z2.real() + z1.imag() * z2.imag()) / (r1 * r2);
        out.applicable = c <= 0.5;
    }
    if (out.applicable) out.margin = calculus_margin(z1, z2, eta);
    return out;
}

// --- Lasota-Yorke estimate -------------------------------------------------------

LasotaYorkeEstimate lasota_yorke_estimate(const ExpandingSystem& sys,
                                          const SpectralData& spec, double sigma,
                                          double t, int n,
                                          const std::vector<GridFunction>& family) {
    if (n < 1) throw InvalidParameter("block length must be >= 1");
    if (family.empty()) throw InvalidParameter("empty test family");
    const auto& grid = spec.eigenfunction.grid();
    const auto Ls = normalize(assemble(sys, Complex(sigma, t), grid, spec.trunc), spec);
    const auto Lsig = normalize(assemble(sys, Complex(sigma, 0.0), grid, spec.trunc), spec);
    const double mod_s = std::abs(Complex(sigma, t));

    // the inequality's constant is uniform in the block length, so the
    // estimate maximizes the per-length requirement over m = 1..n
    double C = 0.0;
    for (const auto& f : family) {
        GridFunction gs = f;
        GridFunction ga = f.abs();
        GridFunction gd = f.derivative().abs();
        double rho_m = 1.0;
        for (int m = 1; m <= n; ++m) {
            gs = apply(Ls, gs);
            ga = apply(Lsig, ga);
            gd = apply(Lsig, gd);
            rho_m *= sys.constants().rho;
            const GridFunction lhs = gs.derivative();
            for (int j = 0; j < lhs.size(); ++j) {
                const double t1 = std::max(0.0, ga.values()[j].real());
                const double t2 = std::max(0.0, gd.values()[j].real());
                const double need = std::abs(lhs.values()[j]) - rho_m * t2;
                if (t1 > 1e-300) C = std::max(C, need / (mod_s * t1));
            }
        }
    }
    return {C, std::pow(sys.constants().rho, n), n};
}

// --- cancellation engine ----------------------------------------------------------

namespace {

OperatorMatrix matrix_power(const OperatorMatrix& op, int n) {
    Eigen::MatrixXcd p =
        Eigen::MatrixXcd::Identity(op.matrix().rows(), op.matrix().cols());
    for (int i = 0; i < n; ++i) p = op.matrix() * p;
    OperatorMeta meta = op.meta();
    return {op.grid(), std::move(p), std::move(meta)};
}

double wrap_to_pi(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0) a += 2.0 * kPi;
    return a - kPi;
}

}  // namespace

CancellationEngine::CancellationEngine(const ExpandingSystem& sys,
                                       const SpectralData& spec,
                                       const UniCertificate& cert, Complex s,
                                       CancellationParams params)
    : sys_(sys),
      spec_(spec),
      cert_(cert),
      s_(s),
      params_(params),
      h_(compose_branches(sys, cert.word_h)),
      k_(compose_branches(sys, cert.word_k)),
      bh_(sys, h_),
      bk_(sys, k_),
      pow_s_(matrix_power(
          normalize(assemble(sys, s, spec.eigenfunction.grid(), spec.trunc), spec),
          cert.n)),
      pow_sigma_(matrix_power(
          normalize(assemble(sys, Complex(s.real(), 0.0), spec.eigenfunction.grid(),
                             spec.trunc),
                    spec),
          cert.n)) {
    if (!cert_.certified) throw OutOfScope("no UNI certificate: D = 0");
    if (std::abs(s.imag()) <= 2.0 * kPi / cert_.D)
        throw OutOfScope("cancellation probe requires |t| > 2 pi / D");
    if (std::abs(s.real() - spec_.sigma) > 1e-12)
        throw InvalidSpectralData("spectral data computed at a different sigma");
    if (params_.eta < calculus_eta_min() - 1e-15 || params_.eta >= 1.0)
        throw InvalidParameter("eta must lie in [(sqrt 7 - 1)/2, 1)");
    if (params_.Delta <= 0.0) params_.Delta = 2.0 * kPi / cert_.D;
    if (params_.delta <= 0.0) params_.delta = params_.Delta / 10.0;

    const auto& ref = spec_.eigenfunction.grid()->refined_points();
    double m = std::numeric_limits<double>::infinity();
    for (long i = 0; i < ref.size(); ++i)
        m = std::min({m, std::abs(h_.deriv(ref[i])), std::abs(k_.deriv(ref[i]))});
    rho_nc_ = m;
}

double CancellationEngine::weight_h(double x) const {
    const double f_at = spec_.eigenfunction.eval(h_.eval(x)).real();
    const double f_x = spec_.eigenfunction.eval(x).real();
    return std::exp(-s_.real() * bh_.value(x)) * std::abs(h_.deriv(x)) * f_at /
           (std::pow(spec_.lambda, cert_.n) * f_x);
}

double CancellationEngine::weight_k(double x) const {
    const double f_at = spec_.eigenfunction.eval(k_.eval(x)).real();
    const double f_x = spec_.eigenfunction.eval(x).real();
    return std::exp(-s_.real() * bk_.value(x)) * std::abs(k_.deriv(x)) * f_at /
           (std::pow(spec_.lambda, cert_.n) * f_x);
}

CancellationReport CancellationEngine::probe(const GridFunction& u,
                                             const GridFunction& v) const {
    const double t = s_.imag();
    const double at = std::abs(t);
    const double eta = params_.eta;
    const double delta_w = params_.delta / at;  // half width of the verified window
    const double Delta_w = params_.Delta / at;  // search radius

    CancellationReport rep;
    rep.sigma = s_.real();
    rep.t = t;
    rep.eta = eta;
    rep.delta = params_.delta;
    rep.Delta = params_.Delta;
    rep.n = cert_.n;

    // two-term bound margins at x, with eta attached to h (side=1), k (side=2)
    // or per-point max (side=0)
    auto margins = [&](double x, int side) {
        const double wh = weight_h(x);
        const double wk = weight_k(x);
        const Complex ph = std::exp(Complex(0.0, -t * bh_.value(x)));
        const Complex pk = std::exp(Complex(0.0, -t * bk_.value(x)));
        const Complex F = wh * ph * v.eval(h_.eval(x)) + wk * pk * v.eval(k_.eval(x));
        const double Ah = wh * std::abs(u.eval(h_.eval(x)));
        const double Ak = wk * std::abs(u.eval(k_.eval(x)));
        const double rhs = side == 1   ? eta * Ah + Ak
                           : side == 2 ? Ah + eta * Ak
                                       : std::max(eta * Ah + Ak, Ah + eta * Ak);
        return rhs - std::abs(F);
    };

    const int nbase = std::max(2, params_.base_points);
    const double fine_step = delta_w / params_.fine_per_delta;
    double total_min = std::numeric_limits<double>::infinity();
    std::size_t located = 0;

    for (int i = 0; i < nbase; ++i) {
        const double x0 = double(i) / double(nbase - 1);
        ProbeRecord rec;
        rec.x0 = x0;

        const double uh0 = std::abs(u.eval(h_.eval(x0)));
        const double uk0 = std::abs(u.eval(k_.eval(x0)));
        const double vh0 = std::abs(v.eval(h_.eval(x0)));
        const bool easy = vh0 <= std::max(uh0, uk0) / 2.0 || vh0 < 1e-12;
        rec.easy = easy;

        double x1 = x0;
        if (!easy) {
            // continuous phase along the fine grid; locate theta = pi mod 2pi
            const double lo = std::max(0.0, x0 - Delta_w - delta_w);
            const double hi = std::min(1.0, x0 + Delta_w + delta_w);
            const int npts = std::max(4, static_cast<int>((hi - lo) / fine_step) + 1);
            std::vector<double> xs(npts), theta(npts);
            double V_prev = 0.0;
            bool have_prev = false;
            for (int j = 0; j < npts; ++j) {
                const double x = lo + (hi - lo) * double(j) / double(npts - 1);
                xs[j] = x;
                const Complex vh = v.eval(h_.eval(x));
                const Complex vk = v.eval(k_.eval(x));
                double V;
                if (std::abs(vh) < 1e-12 || std::abs(vk) < 1e-12) {
                    V = have_prev ? V_prev : 0.0;  // freeze the phase at zeros
                } else {
                    V = std::arg(vh) - std::arg(vk);
                    if (have_prev) {
                        while (V - V_prev > kPi) V -= 2.0 * kPi;
                        while (V - V_prev < -kPi) V += 2.0 * kPi;
                    }
                }
                V_prev = V;
                have_prev = true;
                theta[j] = t * (bh_.value(x) - bk_.value(x)) + V;
            }
            int best = -1;
            double best_dev = std::numeric_limits<double>::infinity();
            for (int j = 0; j < npts; ++j) {
                if (std::abs(xs[j] - x0) > Delta_w + 1e-15) continue;
                const double dev = std::abs(wrap_to_pi(theta[j] - kPi));
                if (dev < best_dev) {
                    best_dev = dev;
                    best = j;
                }
            }
            if (best < 0) {
                rec.kase = -1;
                rep.records.push_back(rec);
                continue;
            }
            x1 = xs[best];
        }
        rec.x1 = x1;

        // verify the two-term bound across the delta window
        const double wlo = std::max(0.0, x1 - delta_w);
        const double whi = std::min(1.0, x1 + delta_w);
        const int wpts = std::max(3, 2 * params_.fine_per_delta + 1);
        double min_h = std::numeric_limits<double>::infinity();
        double min_k = min_h, min_max = min_h;
        for (int j = 0; j < wpts; ++j) {
            const double x = wlo + (whi - wlo) * double(j) / double(wpts - 1);
            min_h = std::min(min_h, margins(x, 1));
            min_k = std::min(min_k, margins(x, 2));
            min_max = std::min(min_max, margins(x, 0));
        }
        rec.min_margin = min_max;
        const double tol = -1e-12;
        if (std::max(min_h, min_k) >= tol) {
            rec.kase = min_h >= min_k ? 1 : 2;
            rec.located = true;
            ++located;
        } else {
            rec.kase = -1;
        }
        total_min = std::min(total_min, min_max);
        rep.records.push_back(rec);
    }

    rep.located_fraction = double(located) / double(nbase);
    rep.min_margin = located ? total_min : 0.0;

    // merge same-type verified windows into intervals, track the gaps
    struct Win {
        double lo, hi;
        int type;
    };
    std::vector<Win> wins;
    for (const auto& r : rep.records) {
        if (!r.located) continue;
        const double lo = std::max(0.0, r.x1 - delta_w);
        const double hi = std::min(1.0, r.x1 + delta_w);
        if (hi - lo < delta_w) continue;  // clipped below the minimum length
        wins.push_back({lo, hi, r.kase});
    }
    std::sort(wins.begin(), wins.end(), [](const Win& a, const Win& b) { return a.lo < b.lo; });
    for (const auto& w : wins) {
        if (!rep.intervals.empty() && rep.intervals.back().type == w.type &&
            w.lo <= rep.intervals.back().hi + 1e-15) {
            rep.intervals.back().hi = std::max(rep.intervals.back().hi, w.hi);
        } else {
            rep.intervals.push_back({w.lo, w.hi, w.type});
        }
    }
    for (std::size_t j = 1; j < rep.intervals.size(); ++j)
        rep.gaps.push_back(rep.intervals[j].lo - rep.intervals[j - 1].hi);
    rep.max_gap = 0.0;
    for (double g : rep.gaps) rep.max_gap = std::max(rep.max_gap, g);
    return rep;
}

// --- chi ---------------------------------------------------------------------------

double ChiFunction::operator()(double y) const {
    for (const auto& r : ramps_) {
        if (y < r.y_lo || y > r.y_hi) continue;
        const double x = r.branch.inv(y);
        if (x < r.lo - 1e-14 || x > r.hi + 1e-14) continue;
        const double L = r.hi - r.lo;
        const double third = L / 3.0;
        double sprof;
        if (x <= r.lo + third) {
            const double w = (x - r.lo) / third;
            sprof = w * w * (3.0 - 2.0 * w);
        } else if (x >= r.hi - third) {
            const double w = (r.hi - x) / third;
            sprof = w * w * (3.0 - 2.0 * w);
        } else {
            sprof = 1.0;
        }
        return 1.0 - (1.0 - eta_) * std::min(1.0, std::max(0.0, sprof));
    }
    return 1.0;
}

GridFunction ChiFunction::nodal(const GridPtr& grid) const {
    Eigen::VectorXcd v(grid->size());
    for (int j = 0; j < grid->size(); ++j) v[j] = (*this)(grid->nodes()[j]);
    return {grid, std::move(v)};
}

ChiFunction chi_build(const CancellationEngine& eng, const CancellationReport& report,
                      double eta, double delta, double t) {
    ChiFunction chi;
    chi.eta_ = eta;
    chi.intervals_ = report.intervals;
    chi.slope_bound_ = 3.0 * (1.0 - eta) / (eng.rho_nc() * delta) * std::abs(t);

    double achieved = 0.0;
    for (const auto& iv : report.intervals) {
        const auto& b = iv.type == 1 ? eng.branch_h() : eng.branch_k();
        const double ylo = std::min(b.eval(iv.lo), b.eval(iv.hi));
        const double yhi = std::max(b.eval(iv.lo), b.eval(iv.hi));
        chi.ramps_.push_back({iv.lo, iv.hi, b, ylo, yhi});
        // steepest point of the cubic ramp: 1.5 (1-eta) / (third width), in
        // y through the branch derivative
        const double third = (iv.hi - iv.lo) / 3.0;
        for (double x : {iv.lo + 0.5 * third, iv.hi - 0.5 * third}) {
            const double sl = 1.5 * (1.0 - eta) / third / std::abs(b.deriv(x));
            achieved = std::max(achieved, sl);
        }
    }
    chi.achieved_slope_ = achieved;
    if (achieved > chi.slope_bound_ + 1e-9)
        throw ConstructionError("chi slope bound unachievable with the given delta");
    return chi;
}

GridFunction apply_chi_weighted(const CancellationEngine& eng, const ChiFunction& chi,
                                const GridFunction& u) {
    const auto& grid = u.grid();
    Eigen::VectorXcd base = eng.real_power().matrix() * u.values();
    for (int j = 0; j < grid->size(); ++j) {
        const double x = grid->nodes()[j];
        const double yh = eng.branch_h().eval(x);
        const double yk = eng.branch_k().eval(x);
        const double ch = chi(yh);
        const double ck = chi(yk);
        Complex corr = 0.0;
        if (ch < 1.0) corr += eng.weight_h(x) * (1.0 - ch) * u.eval(yh);
        if (ck < 1.0) corr += eng.weight_k(x) * (1.0 - ck) * u.eval(yk);
        base[j] -= corr;
    }
    return {grid, std::move(base)};
}

double domination_margin(const CancellationEngine& eng, const ChiFunction& chi,
                         const GridFunction& u, const GridFunction& v) {
    const auto& grid = u.grid();
    const Eigen::VectorXcd lhs_nodal = eng.twisted_power().matrix() * v.values();
    const Eigen::VectorXcd rhs_nodal = eng.real_power().matrix() * u.values();
    const auto& R = grid->refined_eval();
    const Eigen::VectorXcd lhs_ref = apply_real(R, lhs_nodal);
    const Eigen::VectorXcd rhs_ref = apply_real(R, rhs_nodal);
    double margin = std::numeric_limits<double>::infinity();
    for (long r = 0; r < grid->refined_points().size(); ++r) {
        const double x = grid->refined_points()[r];
        const double yh = eng.branch_h().eval(x);
        const double yk = eng.branch_k().eval(x);
        double corr = 0.0;
        const double ch = chi(yh);
        const double ck = chi(yk);
        if (ch < 1.0) corr += eng.weight_h(x) * (1.0 - ch) * std::abs(u.eval(yh));
        if (ck < 1.0) corr += eng.weight_k(x) * (1.0 - ck) * std::abs(u.eval(yk));
        margin = std::min(margin, rhs_ref[r].real() - corr - std::abs(lhs_ref[r]));
    }
    return margin;
}

// --- cone iteration / L2 contraction ------------------------------------------------

ConeIterateResult cone_iterate(CancellationEngine& eng, const GridFunction& f,
                               int m_max, double cone_C,
                               const MeasureWeights* nu0_in) {
    if (m_max < 0) throw InvalidParameter("m_max must be >= 0");
    const double t = eng.s().imag();
    const double supf = f.sup_refined();
    if (!(supf > 0.0)) throw InvalidParameter("zero initial function");
    const double supdf = f.derivative().sup_refined();
    if (supdf > 2.0 * cone_C * std::abs(t) * supf * (1.0 + 1e-12))
        throw InvalidParameter("initial function violates the cone derivative bound");

    const auto& grid = f.grid();
    GridFunction u = GridFunction::constant(grid, 1.0);
    GridFunction v = f;
    v *= Complex(1.0 / supf, 0.0);

    const MeasureWeights nu0 = nu0_in ? nu0_in->normalized()
                                      : eng.spectral().nu.normalized();

    ConeIterateResult out{{}, u, v, true};
    for (int m = 1; m <= m_max; ++m) {
        const auto report = eng.probe(u, v);
        const auto chi = chi_build(eng, report, eng.params().eta, eng.params().delta, t);
        const double dom = domination_margin(eng, chi, u, v);
        GridFunction u_next = apply_chi_weighted(eng, chi, u).real();
        GridFunction v_next(grid, eng.twisted_power().matrix() * v.values());
        const auto cone = cone_check(u_next, v_next, cone_C, t);
        ConeStep step;
        step.m = m;
        step.cone_margin = cone.margin;
        step.domination_margin = dom;
        step.sup_u = u_next.sup_refined();
        step.sup_v = v_next.sup_refined();
        step.l2_v = integrate(v_next.pointwise(v_next.conj()), nu0).real();
        step.l2_u = integrate(u_next.pointwise(u_next.conj()), nu0).real();
        step.located_fraction = report.located_fraction;
        if (!cone.ok) out.cone_ok = false;
        out.steps.push_back(step);
        u = std::move(u_next);
        v = std::move(v_next);
    }
    out.u = std::move(u);
    out.v = std::move(v);
    return out;
}

ContractionReport l2_contraction(const ExpandingSystem& sys, double sigma, double t,
                                 int n, int m_max, const GridFunction& f,
                                 const SpectralData& spec, CancellationParams params) {
    auto cert = uni_certificate(sys, n);
    CancellationEngine eng(sys, spec, cert, Complex(sigma, t), params);

    // nu_0 is the sigma = 0 invariant measure
    MeasureWeights nu0 = spec.nu.normalized();
    if (std::abs(sigma) > 1e-14) {
        const auto spec0 = leading_eigendata(sys, 0.0, f.grid(), spec.trunc);
        nu0 = spec0.nu.normalized();
    }

    const double supf = f.sup_refined();
    const double supdf = f.derivative().sup_refined();
    auto ly = lasota_yorke_estimate(
        sys, spec, sigma, t, n,
        {GridFunction::constant(f.grid(), 1.0),
         GridFunction::sample(f.grid(), [t](double x) {
             return std::exp(Complex(0.0, t * x));
         })});
    const double cone_C = std::max({2.0, ly.C, supdf / (2.0 * std::abs(t) * supf)});

    auto run = cone_iterate(eng, f, m_max, cone_C, &nu0);

    ContractionReport rep;
    rep.sigma = sigma;
    rep.t = t;
    rep.n = n;
    rep.grid_n = f.grid()->order();
    rep.steps = run.steps;
    GridFunction v0 = f;
    v0 *= Complex(1.0 / supf, 0.0);
    rep.integrals.push_back(integrate(v0.pointwise(v0.conj()), nu0).real());
    for (const auto& s : run.steps) rep.integrals.push_back(s.l2_v);
    for (std::size_t i = 1; i < rep.integrals.size(); ++i)
        rep.ratios.push_back(rep.integrals[i] / rep.integrals[i - 1]);
    rep.beta = rep.ratios.empty() ? 0.0
                                  : *std::max_element(rep.ratios.begin(), rep.ratios.end());
    rep.contracting = rep.beta < 1.0 && !rep.ratios.empty();
    return rep;
}

// --- norm decay ------------------------------------------------------------------------

GridFunction random_test_function(const GridPtr& grid, double t, Rng& rng) {
    const int terms = 8;
    std::vector<double> freq(terms);
    std::vector<Complex> coef(terms);
    for (int j = 0; j < terms; ++j) {
        freq[j] = rng.uniform(-2.0 * std::abs(t), 2.0 * std::abs(t));
        coef[j] = rng.cnormal();
    }
    GridFunction f = GridFunction::sample(grid, [&](double x) {
        Complex acc = 0.0;
        for (int j = 0; j < terms; ++j)
            acc += coef[j] * std::exp(Complex(0.0, freq[j] * x));
        return acc;
    });
    const double norm = c1t_norm(f, t);
    f *= Complex(1.0 / norm, 0.0);
    return f;
}

DecayReport norm_decay(const ExpandingSystem& sys, double sigma, double t, int n_max,
                       int sample_count, std::uint64_t seed,
                       const UniCertificate& cert, const GridPtr& grid,
                       const TruncationPolicy& trunc, int a_min) {
    if (!cert.certified) throw OutOfScope("no UNI certificate: D = 0");
    const double threshold = std::max(2.0 * kPi / cert.D, 4.0);
    if (std::abs(t) < threshold)
        throw OutOfScope("theorem hypothesis |t| >= max(2 pi / D, 4) violated: |t| = " +
                         fmt_double(std::abs(t)) + " < " + fmt_double(threshold));
    if (n_max < 2) throw InvalidParameter("n_max must be >= 2");
    if (sample_count < 1) throw InvalidParameter("sample_count must be >= 1");
    if (a_min < 1) throw InvalidParameter("a_min must be >= 1");

    const auto spec = leading_eigendata(sys, sigma, grid, trunc);
    const auto Ls = normalize(assemble(sys, Complex(sigma, t), grid, trunc), spec);

    DecayReport rep;
    rep.sigma = sigma;
    rep.t = t;
    rep.threshold = threshold;
    rep.uni_D = cert.D;
    rep.seed = seed;
    rep.sample_count = sample_count;
    rep.grid_n = grid->order();
    rep.rows.resize(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) rep.rows[static_cast<std::size_t>(n)].n = n;

    // sampled lower estimates of ||Ltilde_s^n||
    Rng rng(seed);
    std::vector<double> lower(static_cast<std::size_t>(n_max) + 1, 0.0);
    for (int i = 0; i < sample_count; ++i) {
        GridFunction f = random_test_function(grid, t, rng);
        const double norm0 = c1t_norm(f, t);
        lower[0] = std::max(lower[0], norm0 / norm0);
        GridFunction g = f;
        for (int n = 1; n <= n_max; ++n) {
            g = apply(Ls, g);
            lower[static_cast<std::size_t>(n)] =
                std::max(lower[static_cast<std::size_t>(n)], c1t_norm(g, t) / norm0);
        }
    }

    // submultiplicative upper proxy: Lebesgue bound times the row-sum norms
    // of the power and of its derivative block
    const double leb = grid->lebesgue_bound();
    Eigen::MatrixXcd p = Eigen::MatrixXcd::Identity(grid->size(), grid->size());
    const Eigen::MatrixXd& D = grid->diff_matrix();
    for (int n = 0; n <= n_max; ++n) {
        if (n > 0) p = Ls.matrix() * p;
        const double a = p.cwiseAbs().rowwise().sum().maxCoeff();
        const Eigen::MatrixXd dpr = D * p.real();
        const Eigen::MatrixXd dpi = D * p.imag();
        const double b = (dpr.cwiseAbs2() + dpi.cwiseAbs2())
                             .cwiseSqrt()
                             .rowwise()
                             .sum()
                             .maxCoeff() /
                         std::abs(t);
        rep.rows[static_cast<std::size_t>(n)].lower = lower[static_cast<std::size_t>(n)];
        rep.rows[static_cast<std::size_t>(n)].upper = leb * (a + b);
    }

    // fit gamma on log(lower) for n >= A log|t|, smallest A giving a stable fit
    const double lt = std::log(std::abs(t));
    int best_A = 0;
    LineFit best_fit;
    double best_rms = std::numeric_limits<double>::infinity();
    for (int A = a_min; A <= 8; ++A) {
        std::vector<double> xs, ys;
        for (int n = std::max(1, static_cast<int>(std::ceil(A * lt))); n <= n_max; ++n) {
            xs.push_back(n);
            ys.push_back(std::log(lower[static_cast<std::size_t>(n)]));
        }
        if (xs.size() < 4) break;
        const auto fit = fit_line(xs, ys);
        if (best_A == 0 || fit.rms_residual < best_rms) {
            best_rms = fit.rms_residual;
            best_fit = fit;
            best_A = A;
        }
        if (fit.rms_residual < 0.05) {
            best_fit = fit;
            best_A = A;
            best_rms = fit.rms_residual;
            break;
        }
    }
    if (best_A == 0) throw ConvergenceError("not enough decay points to fit");
    rep.A = best_A;
    rep.n_min_fit = best_A * lt;
    rep.gamma = std::exp(best_fit.slope);
    rep.fit_residual = best_fit.rms_residual;
    return rep;
}

// --- resolvent --------------------------------------------------------------------------

ResolventReport resolvent_bound(const ExpandingSystem& sys, double sigma,
                                const std::vector<double>& t_grid, double alpha,
                                int sample_count, std::uint64_t seed,
                                std::optional<int> grid_n) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("alpha must lie in (0,1)");
    if (t_grid.size() < 2) throw InvalidParameter("need at least two t values");

    ResolventReport rep;
    rep.sigma = sigma;
    rep.alpha = alpha;
    rep.seed = seed;
    rep.sample_count = sample_count;
    rep.t0 = *std::min_element(t_grid.begin(), t_grid.end());

    for (double t : t_grid) {
        const int order = grid_n ? *grid_n : default_grid_order(t);
        const auto grid = build_grid(order);
        const auto op = assemble(sys, Complex(sigma, t), grid, TruncationPolicy::all());
        Eigen::MatrixXcd A =
            Eigen::MatrixXcd::Identity(grid->size(), grid->size()) - op.matrix();
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);

        Rng rng(seed ^ static_cast<std::uint64_t>(std::llround(t * 1e6)));
        ResolventRow row;
        row.t = t;
        for (int i = 0; i < sample_count; ++i) {
            const GridFunction b = random_test_function(grid, t, rng);
            Eigen::VectorXcd x = lu.solve(b.values());
            const double relres = (A * x - b.values()).norm() / b.values().norm();
            if (!x.allFinite() || relres > 1e-8) {
                row.excluded = true;
                break;
            }
            row.estimate = std::max(row.estimate, c1t_norm(GridFunction(grid, x), t));
        }
        rep.rows.push_back(row);
    }

    std::vector<double> xs, ys;
    for (const auto& r : rep.rows) {
        if (r.excluded || !(r.estimate > 0.0)) continue;
        xs.push_back(std::log(std::abs(r.t)));
        ys.push_back(std::log(r.estimate));
    }
    if (xs.size() >= 2) {
        rep.exponent = fit_line(xs, ys).slope;
        rep.pass = rep.exponent <= alpha;
    }
    return rep;
}

// --- Federer table --------------------------------------------------------------------

FedererTable federer_table(double sigma, int n_max) {
    if (n_max < 3) throw InvalidParameter("n_max must be >= 3");
    FedererTable table;
    table.sigma = sigma;
    const double w0 = std::pow(3.0, -sigma) / 2.0;
    const double w1 = std::pow(1.5, -sigma) / 2.0;
    const double p0 = w0 / (w0 + w1);
    const double p1 = w1 / (w0 + w1);
    for (int n = 1; n <= n_max; ++n) {
        FedererRow row;
        row.n = n;
        row.left = p0 * std::pow(p1, n - 1);
        row.right = p1 * std::pow(p0, n - 1);
        row.ratio = row.left / row.right;
        row.log2_ratio = sigma * (n - 2);  // (p1/p0)^(n-2) = 2^(sigma (n-2))
        table.rows.push_back(row);
    }
    return table;
}

double cylinder_mass(const ExpandingSystem& sys, const SpectralData& spec,
                     const std::vector<int>& word) {
    const auto h = compose_branches(sys, word);
    const auto br = birkhoff_roof(sys, h);
    const auto& grid = spec.eigenfunction.grid();
    const double lam_n = std::pow(spec.lambda, static_cast<double>(word.size()));
    // nu(cylinder) = nu(Ltilde^n 1_cyl) and the normalized pullback of the
    // cylinder indicator is the smooth branch weight below; the signed
    // functional keeps the identity moment exact for singular duals
    double mass = 0.0;
    for (int j = 0; j < grid->size(); ++j) {
        const double x = grid->nodes()[j];
        const double f_at = spec.eigenfunction.eval(h.eval(x)).real();
        const double f_x = spec.eigenfunction.values()[j].real();
        const double a = std::exp(-spec.sigma * br.value(x)) * std::abs(h.deriv(x)) *
                         f_at / (lam_n * f_x);
        mass += spec.nu_functional[j] * a;
    }
    return mass;
}

// --- suspension flow correlations ------------------------------------------------------

namespace {

// inverse-CDF sampler for the probability density proportional to f0
class DensitySampler {
  public:
    explicit DensitySampler(const GridFunction& f0, int resolution = 4096) {
        xs_.resize(resolution + 1);
        cdf_.resize(resolution + 1);
        double acc = 0.0;
        double prev = std::max(0.0, f0.eval(0.0).real());
        cdf_[0] = 0.0;
        xs_[0] = 0.0;
        for (int i = 1; i <= resolution; ++i) {
            const double x = double(i) / resolution;
            const double cur = std::max(0.0, f0.eval(x).real());
            acc += 0.5 * (prev + cur) / resolution;
            xs_[i] = x;
            cdf_[i] = acc;
            prev = cur;
        }
        for (auto& c : cdf_) c /= acc;
    }

    double draw(double u01) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u01);
        if (it == cdf_.begin()) return 0.0;
        if (it == cdf_.end()) return 1.0;
        const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
        const double c0 = cdf_[i - 1], c1 = cdf_[i];
        const double w = c1 > c0 ? (u01 - c0) / (c1 - c0) : 0.5;
        return xs_[i - 1] + w * (xs_[i] - xs_[i - 1]);
    }

  private:
    std::vector<double> xs_, cdf_;
};

}  // namespace

CorrelationReport semiflow_correlation(const ExpandingSystem& sys,
                                       const SpectralData& spec0,
                                       const FlowObservable& F, const FlowObservable& G,
                                       const std::vector<double>& time_grid,
                                       std::size_t sample_count, std::uint64_t seed) {
    if (sys.roof().inf() < 0.0) throw OutOfScope("roof must be nonnegative");
    if (time_grid.empty()) throw InvalidParameter("empty time grid");
    if (sample_count < 100) throw InvalidParameter("sample_count too small");
    std::vector<double> times = time_grid;
    std::sort(times.begin(), times.end());

    DensitySampler sampler(spec0.eigenfunction);
    Rng rng(seed);

    const std::size_t batches = 20;
    const std::size_t per_batch = sample_count / batches;
    // covariance per batch per time, importance weighted by the roof
    std::vector<std::vector<double>> cov(batches, std::vector<double>(times.size(), 0.0));

    struct Acc {
        double w = 0.0, f = 0.0;
        std::vector<double> g, fg;
    };
    std::vector<Acc> acc(batches);
    for (auto& a : acc) {
        a.g.assign(times.size(), 0.0);
        a.fg.assign(times.size(), 0.0);
    }

    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < per_batch; ++i) {
            double x = sampler.draw(rng.uniform01());
            x = std::min(1.0 - 1e-12, std::max(1e-12, x));
            double r = sys.roof().eval(x);
            double u = rng.uniform01() * r;
            const double w = r;  // SRB importance weight
            const double f_here = F(x, u);
            acc[b].w += w;
            acc[b].f += w * f_here;
            double flowed = 0.0;
            for (std::size_t ti = 0; ti < times.size(); ++ti) {
                double advance = times[ti] - flowed;
                flowed = times[ti];
                u += advance;
                int guard = 0;
                while (u >= r && guard++ < 1000000) {
                    u -= r;
                    x = sys.forward(x);
                    x = std::min(1.0 - 1e-12, std::max(1e-12, x));
                    r = sys.roof().eval(x);
                }
                const double g_here = G(x, u);
                acc[b].g[ti] += w * g_here;
                acc[b].fg[ti] += w * f_here * g_here;
            }
        }
        for (std::size_t ti = 0; ti < times.size(); ++ti) {
            const double mw = acc[b].w;
            cov[b][ti] = acc[b].fg[ti] / mw - (acc[b].f / mw) * (acc[b].g[ti] / mw);
        }
    }

    CorrelationReport rep;
    rep.seed = seed;
    rep.sample_count = per_batch * batches;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        double mean = 0.0;
        for (std::size_t b = 0; b < batches; ++b) mean += cov[b][ti];
        mean /= batches;
        double var = 0.0;
        for (std::size_t b = 0; b < batches; ++b)
            var += (cov[b][ti] - mean) * (cov[b][ti] - mean);
        var /= (batches - 1);
        rep.rows.push_back({times[ti], mean, std::sqrt(var / batches)});
    }

    // fit the decay rate on times where the signal clears the noise
    std::vector<std::size_t> usable;
    for (std::size_t ti = 0; ti < times.size(); ++ti)
        if (std::abs(rep.rows[ti].covariance) > 2.0 * rep.rows[ti].std_error &&
            rep.rows[ti].covariance != 0.0)
            usable.push_back(ti);
    if (usable.size() >= 3) {
        std::vector<double> rates;
        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<double> xs, ys;
            for (std::size_t ti : usable) {
                if (cov[b][ti] == 0.0) continue;
                xs.push_back(times[ti]);
                ys.push_back(std::log(std::abs(cov[b][ti])));
            }
            if (xs.size() >= 3) rates.push_back(-fit_line(xs, ys).slope);
        }
        if (rates.size() >= 3) {
            double mean = 0.0;
            for (double r : rates) mean += r;
            mean /= rates.size();
            double var = 0.0;
            for (double r : rates) var += (r - mean) * (r - mean);
            var /= (rates.size() - 1);
            const double half = 1.96 * std::sqrt(var / rates.size());
            rep.rate = mean;
            rep.rate_lo = mean - half;
            rep.rate_hi = mean + half;
        }
    }
    return rep;
}

// --- serialization ----------------------------------------------------------------------

json to_json(const UniCertificate& c) {
    return json{{"schema_version", 1}, {"n", c.n},
                {"word_h", c.word_h},  {"word_k", c.word_k},
                {"D", c.D},            {"sup_psi", c.sup_psi},
                {"grid_resolution", c.grid_resolution},
                {"certified", c.certified}};
}

json to_json(const CancellationReport& r) {
    json recs = json::array();
    for (const auto& p : r.records)
        recs.push_back({{"x0", p.x0},
                        {"x1", p.x1},
                        {"case", p.kase},
                        {"easy", p.easy},
                        {"min_margin", p.min_margin},
                        {"located", p.located}});
    json ivs = json::array();
    for (const auto& iv : r.intervals)
        ivs.push_back({{"lo", iv.lo}, {"hi", iv.hi}, {"type", iv.type}});
    return json{{"schema_version", 1},
                {"sigma", r.sigma},
                {"t", r.t},
                {"n", r.n},
                {"eta", r.eta},
                {"delta", r.delta},
                {"Delta", r.Delta},
                {"located_fraction", r.located_fraction},
                {"min_margin", r.min_margin},
                {"max_gap", r.max_gap},
                {"records", recs},
                {"intervals", ivs},
                {"gaps", r.gaps}};
}

json to_json(const ContractionReport& r) {
    json steps = json::array();
    for (const auto& s : r.steps)
        steps.push_back({{"m", s.m},
                         {"cone_margin", s.cone_margin},
                         {"domination_margin", s.domination_margin},
                         {"sup_u", s.sup_u},
                         {"sup_v", s.sup_v},
                         {"l2_v", s.l2_v},
                         {"l2_u", s.l2_u},
                         {"located_fraction", s.located_fraction}});
    return json{{"schema_version", 1},
                {"sigma", r.sigma},
                {"t", r.t},
                {"n", r.n},
                {"grid_n", r.grid_n},
                {"integrals", r.integrals},
                {"ratios", r.ratios},
                {"beta", r.beta},
                {"contracting", r.contracting},
                {"steps", steps}};
}

json to_json(const DecayReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n}, {"lower", row.lower}, {"upper", row.upper}});
    return json{{"schema_version", 1},
                {"sigma", r.sigma},
                {"t", r.t},
                {"threshold", r.threshold},
                {"uni_D", r.uni_D},
                {"gamma", r.gamma},
                {"fit_residual", r.fit_residual},
                {"A", r.A},
                {"n_min_fit", r.n_min_fit},
                {"seed", r.seed},
                {"sample_count", r.sample_count},
                {"grid_n", r.grid_n},
                {"rows", rows}};
}

json to_json(const ResolventReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"t", row.t}, {"estimate", row.estimate}, {"excluded", row.excluded}});
    return json{{"schema_version", 1},
                {"sigma", r.sigma},
                {"alpha", r.alpha},
                {"exponent", r.exponent},
                {"t0", r.t0},
                {"pass", r.pass},
                {"seed", r.seed},
                {"sample_count", r.sample_count},
                {"rows", rows}};
}

json to_json(const FedererTable& t) {
    json rows = json::array();
    for (const auto& row : t.rows)
        rows.push_back({{"n", row.n},
                        {"left", row.left},
                        {"right", row.right},
                        {"ratio", row.ratio},
                        {"log2_ratio", row.log2_ratio}});
    return json{{"schema_version", 1}, {"sigma", t.sigma}, {"rows", rows}};
}

json to_json(const CorrelationReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"time", row.time},
                        {"covariance", row.covariance},
                        {"std_error", row.std_error}});
    return json{{"schema_version", 1},
                {"rate", r.rate},
                {"rate_lo", r.rate_lo},
                {"rate_hi", r.rate_hi},
                {"seed", r.seed},
                {"sample_count", r.sample_count},
                {"rows", rows}};
}

}  // namespace tlab
