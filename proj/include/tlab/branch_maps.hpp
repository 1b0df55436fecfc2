#ifndef TLAB_BRANCH_MAPS_HPP
#define TLAB_BRANCH_MAPS_HPP

#include <boost/multiprecision/cpp_int.hpp>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlab/common.hpp"

#include <nlohmann/json_fwd.hpp>

namespace tlab {

using BigInt = boost::multiprecision::cpp_int;

// h(x) = (a x + b) / (c x + d) with exact integer coefficients.
struct MobiusInt {
    BigInt a, b, c, d;
    MobiusInt compose(const MobiusInt& rhs) const;  // matrix product, (*this) o rhs
    BigInt det() const { return a * d - b * c; }
};

// Double view of a MobiusInt under a common power-of-two rescale; all the
// quantities we evaluate (h, h', h''/h') are invariant under that rescale,
// so huge continuants stay usable.
struct MobiusView {
    double a, b, c, d;
    double det;  // rescaled consistently with (c x + d)^2
};

MobiusView view_of(const MobiusInt& m);

// Inverse branch of T^n for an n-letter digit word: a monotone contraction
// of [0,1].  Exact integer Mobius coefficients are kept whenever every
// letter has them.
class InverseBranch {
  public:
    InverseBranch(std::vector<int> word, MobiusInt kernel);
    InverseBranch(std::vector<int> word, MobiusView kernel);

    const std::vector<int>& word() const { return word_; }
    int length() const { return static_cast<int>(word_.size()); }

    double eval(double x) const;
    double deriv(double x) const;
    double deriv2(double x) const;
    double inv(double y) const;  // inverse Mobius map

    const std::optional<MobiusInt>& mobius() const { return exact_; }
    const MobiusView& view() const { return view_; }

  private:
    std::vector<int> word_;
    std::optional<MobiusInt> exact_;
    MobiusView view_;
};

// Roof function r, C^1 on each monotonicity interval.  Global evaluation at
// a partition point takes the left-limit value; per-branch evaluation uses
// the branch interval's own C^1 extension.
class RoofFunction {
  public:
    struct Impl;
    explicit RoofFunction(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

    double eval(double x) const;                  // global, left-limit at partition points
    double eval_on(int digit, double y) const;    // branch-interval extension
    double deriv_on(int digit, double y) const;
    double inf() const;                           // declared lower bound
    bool is_log_abs_deriv() const;                // r = log|T'|

    static RoofFunction gauss();                                   // -2 log x
    static RoofFunction piecewise_constant(std::vector<double> values_by_digit,
                                           std::vector<double> partition,
                                           int digit_lo);

  private:
    std::shared_ptr<const Impl> impl_;
};

struct SystemConstants {
    double rho_hat;  // per-letter contraction rate bound
    double rho;      // fixed rho in (rho_hat, 1) used in the distortion constant
    double C;        // contraction prefactor: |h'| <= C rho_hat^n
    double K;        // Renyi constant: |h''| <= K |h'|, |r' o h| |h'| <= K
    double sigma0;   // abscissa of summability (-inf for finite systems)
    double kbar() const { return K / (1.0 - rho); }
};

// Countable-branch piecewise expanding system: lazy branch enumeration,
// roof function, forward map and regularity constants.  Immutable.
class ExpandingSystem {
  public:
    struct Impl;
    explicit ExpandingSystem(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

    std::string name() const;
    // nullopt = countably infinite
    std::optional<std::uint64_t> branch_count() const;
    int digit_lo() const;

    // Enumeration index m >= 1; digit label is digit_lo() + m - 1.
    InverseBranch branch(std::uint64_t m) const;
    InverseBranch branch_for_digit(int digit) const;
    bool digit_valid(int digit) const;

    const RoofFunction& roof() const;
    SystemConstants constants() const;
    double forward(double x) const;  // T
    std::vector<double> partition(std::size_t max_points = 16) const;

    // sum_{m > M} sup_x e^{-sigma r(h_m(x))} |h_m'(x)| bound from the
    // system's tail model; M = nullopt means no cutoff (bound 0).
    double tail_model(double sigma, std::optional<std::uint64_t> M) const;

    // True when the branch family admits the closed-form zeta tail used by
    // the fast operator assembly (the Gauss builtin).
    bool has_gauss_tail() const;

  private:
    std::shared_ptr<const Impl> impl_;
};

ExpandingSystem make_gauss_system();
ExpandingSystem make_doubling_counterexample();

// Custom systems from a structured config document; see README for the
// schema (affine slopes/intercepts or integer Mobius rows, plus a roof
// table and constants block).
ExpandingSystem load_system(const nlohmann::json& doc);
ExpandingSystem system_by_name(const std::string& name);  // builtin lookup

InverseBranch compose_branches(const ExpandingSystem& sys, std::span<const int> word);

// Evaluators for x -> r^(n)(h(x)) and its derivative, built by summing roof
// pullbacks along the partial compositions of the branch word.
class BirkhoffRoof {
  public:
    BirkhoffRoof(const ExpandingSystem& sys, const InverseBranch& branch);
    double value(double x) const;
    double deriv(double x) const;
    int length() const { return static_cast<int>(digits_.size()); }

  private:
    std::vector<int> digits_;
    std::vector<InverseBranch> suffixes_;  // suffixes_[k] = h_{d_k} o ... o h_{d_n}
    RoofFunction roof_;
};

BirkhoffRoof birkhoff_roof(const ExpandingSystem& sys, const InverseBranch& branch);

struct ValidationCheck {
    std::string name;
    bool passed = false;
    double worst = 0.0;   // worst sampled value (recomputable extremum)
    double bound = 0.0;   // declared bound it was compared against
};

struct ValidationReport {
    std::string system;
    double rho_hat_estimate = 0.0;      // max successive per-letter contraction ratio
    double k_hat = 0.0;                 // max sampled |h''| / |h'|
    double roof_distortion = 0.0;       // max sampled |r' o h| |h'|
    std::optional<double> sigma0_estimate;
    std::vector<ValidationCheck> checks;
    int sample_count = 0;
    int word_depth = 0;
    int max_digits = 0;
    bool all_passed() const;
};

ValidationReport validate_system(const ExpandingSystem& sys, int sample_count,
                                 int word_depth = 3, int max_digits = 40);

nlohmann::json to_json(const ValidationReport& r);

}  // namespace tlab

#endif
