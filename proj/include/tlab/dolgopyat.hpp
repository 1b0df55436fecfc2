#ifndef TLAB_DOLGOPYAT_HPP
#define TLAB_DOLGOPYAT_HPP

#include <nlohmann/json_fwd.hpp>

#include "tlab/spectral.hpp"

namespace tlab {

// --- UNI ---------------------------------------------------------------------

struct PsiPair {
    std::function<double(double)> psi;        // r^(n) o h - r^(n) o k
    std::function<double(double)> psi_deriv;
    double inf_abs_deriv = 0.0;  // certified: grid minimum minus Lipschitz slack
    double sup_abs_deriv = 0.0;
    int grid_resolution = 0;
};

PsiPair psi_pair(const ExpandingSystem& sys, const InverseBranch& h,
                 const InverseBranch& k, int grid_resolution = 20001);

struct UniCertificate {
    int n = 0;
    std::vector<int> word_h, word_k;
    double D = 0.0;         // inf |psi'| over [0,1]
    double sup_psi = 0.0;   // sup |psi'|
    int grid_resolution = 0;
    bool certified = false;  // D > 0
};

// Best pair (maximal inf |psi'|) among the candidates; for the Gauss system
// the default candidates are the all-ones / all-twos words whose Mobius
// entries follow the Fibonacci and Pell recurrences.
UniCertificate uni_certificate(const ExpandingSystem& sys, int n,
                               std::vector<std::pair<std::vector<int>, std::vector<int>>>
                                   candidates = {});

// Wider Gauss candidate family for threshold-sensitive experiments: all-ones
// against all-M words; inf |psi'| grows with the digit spread, lowering the
// 2 pi / D frequency threshold to about 8.7.
std::vector<std::pair<std::vector<int>, std::vector<int>>> spread_candidates(int n);

// --- calculus lemma ------------------------------------------------------------

double calculus_eta_min();  // (sqrt 7 - 1) / 2

struct CalculusCheck {
    bool applicable = false;  // cos(theta1 - theta2) <= 1/2
    double margin = 0.0;      // max(eta r1 + r2, r1 + eta r2) - |z1 + z2|
};

// Unchecked inequality margin, any eta.
double calculus_margin(Complex z1, Complex z2, double eta);

// Checked variant: eta must lie in [(sqrt 7 - 1)/2, 1).
CalculusCheck calculus_lemma_check(Complex z1, Complex z2, double eta);

// --- Lasota-Yorke ---------------------------------------------------------------

struct LasotaYorkeEstimate {
    double C = 0.0;        // smallest constant making the inequality hold
    double rho_n = 0.0;    // contraction coefficient actually used
    int n = 0;
};

LasotaYorkeEstimate lasota_yorke_estimate(const ExpandingSystem& sys,
                                          const SpectralData& spec, double sigma,
                                          double t, int n,
                                          const std::vector<GridFunction>& family);

// --- cancellation machinery ----------------------------------------------------

struct CancellationParams {
    double eta = 0.9;
    double delta = 0.0;       // 0 = default Delta / 10
    double Delta = 0.0;       // 0 = default 2 pi / D
    int base_points = 100;
    int fine_per_delta = 16;  // fine-grid steps per delta/|t| window
};

struct ProbeRecord {
    double x0 = 0.0;
    double x1 = 0.0;
    int kase = -1;  // 1 = case h, 2 = case k, -1 = failed
    bool easy = false;
    double min_margin = 0.0;  // worst two-term bound margin over the window
    bool located = false;
};

struct CancellationInterval {
    double lo = 0.0, hi = 0.0;
    int type = 1;  // 1 = h, 2 = k
};

struct CancellationReport {
    double sigma = 0.0, t = 0.0, eta = 0.0, delta = 0.0, Delta = 0.0;
    int n = 0;
    std::vector<ProbeRecord> records;
    std::vector<CancellationInterval> intervals;  // verified windows, merged by type
    std::vector<double> gaps;                     // lengths of the J_j between intervals
    double located_fraction = 0.0;
    double min_margin = 0.0;
    double max_gap = 0.0;
};

// Engine bundling the branch pair, spectral data and operator powers shared
// by the probe, the chi construction and the cone iteration.
class CancellationEngine {
  public:
    CancellationEngine(const ExpandingSystem& sys, const SpectralData& spec,
                       const UniCertificate& cert, Complex s,
                       CancellationParams params = {});

    const UniCertificate& certificate() const { return cert_; }
    const CancellationParams& params() const { return params_; }
    double rho_nc() const { return rho_nc_; }  // min(min|h'|, min|k'|)
    const OperatorMatrix& twisted_power() const { return pow_s_; }   // Ltilde_s^n
    const OperatorMatrix& real_power() const { return pow_sigma_; }  // Ltilde_sigma^n

    CancellationReport probe(const GridFunction& u, const GridFunction& v) const;

    // n-step normalized weight of the UNI branch b at x:
    // e^{-sigma r^(n)(b(x))} |b'(x)| f_sigma(b(x)) / (lambda^n f_sigma(x))
    double weight_h(double x) const;
    double weight_k(double x) const;
    double birkhoff_h(double x) const { return bh_.value(x); }
    double birkhoff_k(double x) const { return bk_.value(x); }
    const InverseBranch& branch_h() const { return h_; }
    const InverseBranch& branch_k() const { return k_; }
    const SpectralData& spectral() const { return spec_; }
    Complex s() const { return s_; }

  private:
    ExpandingSystem sys_;
    SpectralData spec_;
    UniCertificate cert_;
    Complex s_;
    CancellationParams params_;
    InverseBranch h_, k_;
    BirkhoffRoof bh_, bk_;
    double rho_nc_ = 0.0;
    OperatorMatrix pow_s_, pow_sigma_;
};

// Cutoff function from a verified cancellation report: equals eta on the
// type-matched branch images of the middle thirds, 1 outside the images of
// the intervals, with C^1 ramps between.
class ChiFunction {
  public:
    double operator()(double y) const;
    GridFunction nodal(const GridPtr& grid) const;
    double slope_bound() const { return slope_bound_; }
    double achieved_slope() const { return achieved_slope_; }
    const std::vector<CancellationInterval>& intervals() const { return intervals_; }

    struct Ramp {
        double lo, hi;          // interval in x-space
        InverseBranch branch;   // maps x-space to y-space
        double y_lo, y_hi;      // branch image of [lo,hi], sorted
    };

  private:
    friend ChiFunction chi_build(const CancellationEngine&, const CancellationReport&,
                                 double, double, double);
    std::vector<Ramp> ramps_;
    std::vector<CancellationInterval> intervals_;
    double eta_ = 1.0;
    double slope_bound_ = 0.0;
    double achieved_slope_ = 0.0;
};

ChiFunction chi_build(const CancellationEngine& eng, const CancellationReport& report,
                      double eta, double delta, double t);

// Ltilde_sigma^n (chi u) at the nodes: the full power minus the exact
// two-branch correction supported on the UNI branch images.
GridFunction apply_chi_weighted(const CancellationEngine& eng, const ChiFunction& chi,
                                const GridFunction& u);

// Domination margin min_x [ Ltilde_sigma^n (chi u)(x) - |Ltilde_s^n v(x)| ],
// evaluated at the refined sampling points.
double domination_margin(const CancellationEngine& eng, const ChiFunction& chi,
                         const GridFunction& u, const GridFunction& v);

// --- cone iteration and L2 contraction ------------------------------------------

struct ConeStep {
    int m = 0;
    double cone_margin = 0.0;
    double domination_margin = 0.0;
    double sup_u = 0.0;
    double sup_v = 0.0;
    double l2_v = 0.0;  // integral of |v_m|^2 against nu_0
    double l2_u = 0.0;  // integral of u_m^2 against nu_0
    double located_fraction = 0.0;
};

struct ConeIterateResult {
    std::vector<ConeStep> steps;
    GridFunction u, v;  // final pair
    bool cone_ok = true;
};

// nu0 is the measure used for the recorded L2 integrals (the sigma = 0
// invariant measure in the contraction experiments); defaults to the
// engine's nu_sigma when null.
ConeIterateResult cone_iterate(CancellationEngine& eng, const GridFunction& f,
                               int m_max, double cone_C,
                               const MeasureWeights* nu0 = nullptr);

struct ContractionReport {
    double sigma = 0.0, t = 0.0;
    int n = 0;
    std::vector<double> integrals;  // integral |v_m|^2 d nu_0, m = 0..m_max
    std::vector<double> ratios;     // successive ratios
    double beta = 0.0;              // max successive ratio
    bool contracting = false;       // beta < 1
    std::vector<ConeStep> steps;
    int grid_n = 0;
};

ContractionReport l2_contraction(const ExpandingSystem& sys, double sigma, double t,
                                 int n, int m_max, const GridFunction& f,
                                 const SpectralData& spec,
                                 CancellationParams params = {});

// --- Theorem-style decay and resolvent experiments -------------------------------

struct DecayRow {
    int n = 0;
    double lower = 0.0;  // max over sampled unit-norm f of ||Ltilde_s^n f|| / ||f||
    double upper = 0.0;  // submultiplicative induced-norm proxy
};

struct DecayReport {
    double sigma = 0.0, t = 0.0;
    double threshold = 0.0;  // max(2 pi / D, 4)
    double uni_D = 0.0;
    std::vector<DecayRow> rows;
    double gamma = 0.0;         // fitted decay rate of the lower estimates
    double fit_residual = 0.0;  // rms residual of the log fit
    int A = 0;                  // smallest threshold multiplier with a stable fit
    double n_min_fit = 0.0;     // A log |t|
    std::uint64_t seed = 0;
    int sample_count = 0;
    int grid_n = 0;
};

// a_min floors the fitted threshold multiplier so a family of runs over a
// t grid can share a common nondecreasing A, as the decay statement does.
DecayReport norm_decay(const ExpandingSystem& sys, double sigma, double t, int n_max,
                       int sample_count, std::uint64_t seed,
                       const UniCertificate& cert, const GridPtr& grid,
                       const TruncationPolicy& trunc, int a_min = 1);

// Random trigonometric polynomial with frequencies up to 2|t|, unit 1,t norm.
GridFunction random_test_function(const GridPtr& grid, double t, Rng& rng);

struct ResolventRow {
    double t = 0.0;
    double estimate = 0.0;
    bool excluded = false;  // singular solve
};

struct ResolventReport {
    double sigma = 0.0;
    double alpha = 0.0;
    std::vector<ResolventRow> rows;
    double exponent = 0.0;  // fitted growth exponent in log|t|
    double t0 = 0.0;
    bool pass = false;
    std::uint64_t seed = 0;
    int sample_count = 0;
};

ResolventReport resolvent_bound(const ExpandingSystem& sys, double sigma,
                                const std::vector<double>& t_grid, double alpha,
                                int sample_count, std::uint64_t seed,
                                std::optional<int> grid_n = std::nullopt);

// --- Federer counterexample -------------------------------------------------------

struct FedererRow {
    int n = 0;
    double left = 0.0;   // nu_sigma of the 2^-n interval left of 1/2
    double right = 0.0;
    double ratio = 0.0;
    double log2_ratio = 0.0;  // sigma (n - 2), computed symbolically
};

struct FedererTable {
    double sigma = 0.0;
    std::vector<FedererRow> rows;
};

FedererTable federer_table(double sigma, int n_max);

// Grid-based cross-check: nu_sigma mass of the dyadic cylinder of the word,
// via invariance of nu under the normalized dual operator.
double cylinder_mass(const ExpandingSystem& sys, const SpectralData& spec,
                     const std::vector<int>& word);

// --- suspension flow correlations ---------------------------------------------------

using FlowObservable = std::function<double(double x, double height)>;

struct CorrelationRow {
    double time = 0.0;
    double covariance = 0.0;
    double std_error = 0.0;
};

struct CorrelationReport {
    std::vector<CorrelationRow> rows;
    double rate = 0.0;       // fitted exponential decay rate
    double rate_lo = 0.0;    // 95% interval from batch replicates
    double rate_hi = 0.0;
    std::uint64_t seed = 0;
    std::size_t sample_count = 0;
};

CorrelationReport semiflow_correlation(const ExpandingSystem& sys,
                                       const SpectralData& spec0,
                                       const FlowObservable& F, const FlowObservable& G,
                                       const std::vector<double>& time_grid,
                                       std::size_t sample_count, std::uint64_t seed);

// --- serialization -------------------------------------------------------------------

nlohmann::json to_json(const UniCertificate& c);
nlohmann::json to_json(const CancellationReport& r);
nlohmann::json to_json(const ContractionReport& r);
nlohmann::json to_json(const DecayReport& r);
nlohmann::json to_json(const ResolventReport& r);
nlohmann::json to_json(const FedererTable& t);
nlohmann::json to_json(const CorrelationReport& r);

}  // namespace tlab

#endif
