#include "tlab/branch_maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

namespace tlab {

using json = nlohmann::json;

// --- Mobius kernels ---------------------------------------------------------

MobiusInt MobiusInt::compose(const MobiusInt& r) const {
    // 2x2 integer matrix product [[a,b],[c,d]] * [[r.a,r.b],[r.c,r.d]]
    return {a * r.a + b * r.c, a * r.b + b * r.d,
            c * r.a + d * r.c, c * r.b + d * r.d};
}

namespace {

// Convert a cpp_int to double times 2^-shift without overflowing.
double scaled_to_double(const BigInt& z, long shift) {
    if (z == 0) return 0.0;
    const bool neg = z < 0;
    const BigInt mag = neg ? BigInt(-z) : z;
    const long bits = static_cast<long>(boost::multiprecision::msb(mag)) + 1;
    double out;
    if (bits <= 62) {
        out = std::ldexp(static_cast<double>(mag.convert_to<std::int64_t>()),
                         static_cast<int>(-shift));
    } else {
        const long drop = bits - 62;
        const BigInt top = mag >> drop;
        out = std::ldexp(static_cast<double>(top.convert_to<std::int64_t>()),
                         static_cast<int>(drop - shift));
    }
    return neg ? -out : out;
}

long bit_length(const BigInt& z) {
    if (z == 0) return 0;
    return static_cast<long>(boost::multiprecision::msb(z < 0 ? BigInt(-z) : z)) + 1;
}

}  // namespace

MobiusView view_of(const MobiusInt& m) {
    const long bits = std::max(std::max(bit_length(m.a), bit_length(m.b)),
                               std::max(bit_length(m.c), bit_length(m.d)));
    const long shift = std::max(0L, bits - 500);
    MobiusView v;
    v.a = scaled_to_double(m.a, shift);
    v.b = scaled_to_double(m.b, shift);
    v.c = scaled_to_double(m.c, shift);
    v.d = scaled_to_double(m.d, shift);
    // det scales as 2^-2shift, consistent with (c x + d)^2
    v.det = scaled_to_double(m.det(), 2 * shift);
    return v;
}

// --- InverseBranch ----------------------------------------------------------

InverseBranch::InverseBranch(std::vector<int> word, MobiusInt kernel)
    : word_(std::move(word)), exact_(std::move(kernel)), view_(view_of(*exact_)) {}

InverseBranch::InverseBranch(std::vector<int> word, MobiusView kernel)
    : word_(std::move(word)), view_(kernel) {}

double InverseBranch::eval(double x) const {
    return (view_.a * x + view_.b) / (view_.c * x + view_.d);
}

double InverseBranch::deriv(double x) const {
    const double den = view_.c * x + view_.d;
    return view_.det / (den * den);
}

double InverseBranch::deriv2(double x) const {
    const double den = view_.c * x + view_.d;
    return -2.0 * view_.c * view_.det / (den * den * den);
}

double InverseBranch::inv(double y) const {
    return (view_.b - view_.d * y) / (view_.c * y - view_.a);
}

// --- RoofFunction -----------------------------------------------------------

struct RoofFunction::Impl {
    virtual ~Impl() = default;
    virtual double eval(double x) const = 0;
    virtual double eval_on(int digit, double y) const = 0;
    virtual double deriv_on(int digit, double y) const = 0;
    virtual double inf() const = 0;
    virtual bool is_log_abs_deriv() const = 0;
};

namespace {

// r = log|T'| for the Gauss map: |T'(y)| = 1/y^2 on every branch interval.
struct GaussRoof final : RoofFunction::Impl {
    double eval(double x) const override { return -2.0 * std::log(x); }
    double eval_on(int, double y) const override { return -2.0 * std::log(y); }
    double deriv_on(int, double y) const override { return -2.0 / y; }
    double inf() const override { return 0.0; }
    bool is_log_abs_deriv() const override { return true; }
};

struct PiecewiseConstRoof final : RoofFunction::Impl {
    std::vector<double> values;     // by digit - digit_lo
    std::vector<double> partition;  // interior cut points, increasing
    int digit_lo;

    double eval(double x) const override {
        // left-limit convention: the interval index is the number of cut
        // points strictly below x
        std::size_t k = 0;
        while (k < partition.size() && x > partition[k]) ++k;
        return values.at(k);
    }
    double eval_on(int digit, double) const override {
        return values.at(static_cast<std::size_t>(digit - digit_lo));
    }
    double deriv_on(int, double) const override { return 0.0; }
    double inf() const override {
        return *std::min_element(values.begin(), values.end());
    }
    bool is_log_abs_deriv() const override { return false; }
};

}  // namespace

double RoofFunction::eval(double x) const { return impl_->eval(x); }
double RoofFunction::eval_on(int digit, double y) const { return impl_->eval_on(digit, y); }
double RoofFunction::deriv_on(int digit, double y) const { return impl_->deriv_on(digit, y); }
double RoofFunction::inf() const { return impl_->inf(); }
bool RoofFunction::is_log_abs_deriv() const { return impl_->is_log_abs_deriv(); }

RoofFunction RoofFunction::gauss() {
    return RoofFunction(std::make_shared<GaussRoof>());
}

RoofFunction RoofFunction::piecewise_constant(std::vector<double> values,
                                              std::vector<double> partition,
                                              int digit_lo) {
    for (double v : values)
        if (!(v > 0.0)) throw InvalidSystem("roof values must be positive");
    auto impl = std::make_shared<PiecewiseConstRoof>();
    impl->values = std::move(values);
    impl->partition = std::move(partition);
    impl->digit_lo = digit_lo;
    return RoofFunction(impl);
}

// --- ExpandingSystem --------------------------------------------------------

struct ExpandingSystem::Impl {
    virtual ~Impl() = default;
    virtual std::string name() const = 0;
    virtual std::optional<std::uint64_t> branch_count() const = 0;
    virtual int digit_lo() const = 0;
    virtual InverseBranch branch_for_digit(int digit) const = 0;
    virtual const RoofFunction& roof() const = 0;
    virtual SystemConstants constants() const = 0;
    virtual double forward(double x) const = 0;
    virtual std::vector<double> partition(std::size_t max_points) const = 0;
    virtual double tail_model(double sigma, std::optional<std::uint64_t> M) const = 0;
    virtual bool has_gauss_tail() const { return false; }
};

namespace {

constexpr double kGoldenSq = 2.618033988749894848;  // golden ratio squared

struct GaussSystem final : ExpandingSystem::Impl {
    RoofFunction roof_ = RoofFunction::gauss();

    std::string name() const override { return "gauss"; }
    std::optional<std::uint64_t> branch_count() const override { return std::nullopt; }
    int digit_lo() const override { return 1; }

    InverseBranch branch_for_digit(int digit) const override {
        if (digit < 1) throw InvalidWord("gauss digits start at 1");
        // h_m(x) = 1/(m+x)
        return InverseBranch({digit}, MobiusInt{0, 1, 1, digit});
    }

    const RoofFunction& roof() const override { return roof_; }

    SystemConstants constants() const override {
        return {1.0 / kGoldenSq, 0.5, kGoldenSq, 2.0, -0.5};
    }

    double forward(double x) const override {
        if (x <= 0.0) return 0.0;
        const double y = 1.0 / x;
        return y - std::floor(y);
    }

    std::vector<double> partition(std::size_t max_points) const override {
        std::vector<double> c;
        for (std::size_t m = max_points; m >= 2; --m) c.push_back(1.0 / double(m));
        return c;
    }

    double tail_model(double sigma, std::optional<std::uint64_t> M) const override {
        // term_m = sup_x (m+x)^(-2(1+sigma)) = m^(-2(1+sigma));
        // integral comparison: sum_{m>M} <= M^-(1+2sigma) / (1+2sigma)
        if (sigma <= -0.5) return std::numeric_limits<double>::infinity();
        if (!M) return 0.0;
        const double p = 1.0 + 2.0 * sigma;
        return std::pow(static_cast<double>(*M), -p) / p;
    }

    bool has_gauss_tail() const override { return true; }
};

struct FiniteSystem final : ExpandingSystem::Impl {
    std::string name_;
    std::vector<InverseBranch> branches_;  // by digit - digit_lo
    RoofFunction roof_;
    SystemConstants constants_;
    int digit_lo_;
    std::vector<double> cuts_;  // interior partition points, increasing

    FiniteSystem(std::string name, std::vector<InverseBranch> branches,
                 RoofFunction roof, SystemConstants constants, int digit_lo,
                 std::vector<double> cuts)
        : name_(std::move(name)), branches_(std::move(branches)),
          roof_(std::move(roof)), constants_(constants), digit_lo_(digit_lo),
          cuts_(std::move(cuts)) {}

    std::string name() const override { return name_; }
    std::optional<std::uint64_t> branch_count() const override { return branches_.size(); }
    int digit_lo() const override { return digit_lo_; }

    InverseBranch branch_for_digit(int digit) const override {
        const long idx = digit - digit_lo_;
        if (idx < 0 || idx >= static_cast<long>(branches_.size()))
            throw InvalidWord("branch digit out of range");
        return branches_[static_cast<std::size_t>(idx)];
    }

    const RoofFunction& roof() const override { return roof_; }
    SystemConstants constants() const override { return constants_; }

    double forward(double x) const override {
        // left-limit convention at interior cut points
        std::size_t k = 0;
        while (k < cuts_.size() && x > cuts_[k]) ++k;
        return branches_[k].inv(x);
    }

    std::vector<double> partition(std::size_t) const override { return cuts_; }

    double tail_model(double sigma, std::optional<std::uint64_t> M) const override {
        if (M && *M < branches_.size()) {
            double tail = 0.0;
            for (std::size_t i = *M; i < branches_.size(); ++i) {
                const int digit = digit_lo_ + static_cast<int>(i);
                double sup = 0.0;
                for (double x : {0.0, 0.5, 1.0})
                    sup = std::max(sup,
                                   std::exp(-sigma * roof_.eval_on(digit, branches_[i].eval(x))) *
                                       std::abs(branches_[i].deriv(x)));
                tail += sup;
            }
            return tail;
        }
        return 0.0;
    }
};

}  // namespace

std::string ExpandingSystem::name() const { return impl_->name(); }
std::optional<std::uint64_t> ExpandingSystem::branch_count() const { return impl_->branch_count(); }
int ExpandingSystem::digit_lo() const { return impl_->digit_lo(); }

InverseBranch ExpandingSystem::branch(std::uint64_t m) const {
    if (m < 1) throw InvalidWord("branch index starts at 1");
    const auto count = impl_->branch_count();
    if (count && m > *count) throw InvalidWord("branch index beyond branch count");
    return impl_->branch_for_digit(impl_->digit_lo() + static_cast<int>(m) - 1);
}

InverseBranch ExpandingSystem::branch_for_digit(int digit) const {
    return impl_->branch_for_digit(digit);
}

bool ExpandingSystem::digit_valid(int digit) const {
    if (digit < impl_->digit_lo()) return false;
    const auto count = impl_->branch_count();
    return !count || digit < impl_->digit_lo() + static_cast<int>(*count);
}

const RoofFunction& ExpandingSystem::roof() const { return impl_->roof(); }
SystemConstants ExpandingSystem::constants() const { return impl_->constants(); }
double ExpandingSystem::forward(double x) const { return impl_->forward(x); }
std::vector<double> ExpandingSystem::partition(std::size_t max_points) const {
    return impl_->partition(max_points);
}
double ExpandingSystem::tail_model(double sigma, std::optional<std::uint64_t> M) const {
    return impl_->tail_model(sigma, M);
}
bool ExpandingSystem::has_gauss_tail() const { return impl_->has_gauss_tail(); }

ExpandingSystem make_gauss_system() {
    return ExpandingSystem(std::make_shared<GaussSystem>());
}

ExpandingSystem make_doubling_counterexample() {
    // T(x) = 2x mod 1, exp(r) = 3 on [0,1/2] and 3/2 on (1/2,1]
    std::vector<InverseBranch> branches;
    branches.emplace_back(std::vector<int>{0}, MobiusInt{1, 0, 0, 2});  // x/2
    branches.emplace_back(std::vector<int>{1}, MobiusInt{1, 1, 0, 2});  // (x+1)/2
    auto roof = RoofFunction::piecewise_constant(
        {std::log(3.0), std::log(1.5)}, {0.5}, 0);
    SystemConstants c{0.5, 0.6, 1.0, 1.0, -std::numeric_limits<double>::infinity()};
    return ExpandingSystem(std::make_shared<FiniteSystem>(
        "doubling", std::move(branches), std::move(roof), c, 0,
        std::vector<double>{0.5}));
}

ExpandingSystem system_by_name(const std::string& name) {
    if (name == "gauss") return make_gauss_system();
    if (name == "doubling") return make_doubling_counterexample();
    throw InvalidParameter("unknown builtin system: " + name);
}

ExpandingSystem load_system(const json& doc) {
    if (doc.is_string()) return system_by_name(doc.get<std::string>());
    if (!doc.is_object()) throw InvalidSystem("system spec must be a name or an object");

    const std::string name = doc.value("name", "custom");
    if (!doc.contains("branches") || !doc["branches"].is_array() || doc["branches"].empty())
        throw InvalidSystem("custom system needs a nonempty branches array");

    std::vector<InverseBranch> branches;
    int digit = 0;
    for (const auto& b : doc["branches"]) {
        if (b.contains("affine")) {
            const double slope = b["affine"].at("slope").get<double>();
            const double icpt = b["affine"].at("intercept").get<double>();
            branches.emplace_back(std::vector<int>{digit},
                                  MobiusView{slope, icpt, 0.0, 1.0, slope});
        } else if (b.contains("mobius")) {
            const auto& m = b["mobius"];
            if (!m.is_array() || m.size() != 4)
                throw InvalidSystem("mobius branch needs four integer coefficients");
            branches.emplace_back(std::vector<int>{digit},
                                  MobiusInt{BigInt(m[0].get<std::int64_t>()),
                                            BigInt(m[1].get<std::int64_t>()),
                                            BigInt(m[2].get<std::int64_t>()),
                                            BigInt(m[3].get<std::int64_t>())});
        } else {
            throw InvalidSystem("branch must be affine or mobius");
        }
        ++digit;
    }

    // partition from sorted branch images (left endpoints of images 2..)
    std::vector<std::pair<double, std::size_t>> left_ends;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const double lo = std::min(branches[i].eval(0.0), branches[i].eval(1.0));
        left_ends.emplace_back(lo, i);
    }
    std::sort(left_ends.begin(), left_ends.end());
    std::vector<double> cuts;
    for (std::size_t i = 1; i < left_ends.size(); ++i)
        cuts.push_back(left_ends[i].first);

    RoofFunction roof = RoofFunction::gauss();
    const auto& rspec = doc.at("roof");
    const std::string kind = rspec.at("kind").get<std::string>();
    if (kind == "piecewise_constant") {
        auto values = rspec.at("values").get<std::vector<double>>();
        if (values.size() != branches.size())
            throw InvalidSystem("roof table size must match branch count");
        roof = RoofFunction::piecewise_constant(std::move(values), cuts, 0);
    } else if (kind == "log_abs_deriv") {
        throw InvalidSystem("log_abs_deriv roofs are only built in for the gauss system");
    } else {
        throw InvalidSystem("unknown roof kind: " + kind);
    }

    const auto& cj = doc.at("constants");
    SystemConstants c{cj.at("rho_hat").get<double>(), cj.at("rho").get<double>(),
                      cj.at("C").get<double>(), cj.at("K").get<double>(),
                      cj.value("sigma0", -std::numeric_limits<double>::infinity())};
    if (!(c.rho_hat < c.rho && c.rho < 1.0))
        throw InvalidSystem("constants must satisfy rho_hat < rho < 1");

    return ExpandingSystem(std::make_shared<FiniteSystem>(
        name, std::move(branches), std::move(roof), c, 0, std::move(cuts)));
}

// --- composition and Birkhoff sums ------------------------------------------

InverseBranch compose_branches(const ExpandingSystem& sys, std::span<const int> word) {
    if (word.empty()) throw InvalidWord("composition word must be nonempty");
    std::vector<int> digits(word.begin(), word.end());
    for (int d : digits)
        if (!sys.digit_valid(d)) throw InvalidWord("digit out of range in word");

    bool all_exact = true;
    for (int d : digits)
        if (!sys.branch_for_digit(d).mobius()) all_exact = false;

    if (all_exact) {
        MobiusInt acc = *sys.branch_for_digit(digits.front()).mobius();
        for (std::size_t i = 1; i < digits.size(); ++i)
            acc = acc.compose(*sys.branch_for_digit(digits[i]).mobius());
        return InverseBranch(std::move(digits), std::move(acc));
    }
    const auto& v0 = sys.branch_for_digit(digits.front()).view();
    MobiusView acc = v0;
    for (std::size_t i = 1; i < digits.size(); ++i) {
        const auto& r = sys.branch_for_digit(digits[i]).view();
        acc = MobiusView{acc.a * r.a + acc.b * r.c, acc.a * r.b + acc.b * r.d,
                         acc.c * r.a + acc.d * r.c, acc.c * r.b + acc.d * r.d,
                         acc.det * r.det};
    }
    return InverseBranch(std::move(digits), acc);
}

BirkhoffRoof::BirkhoffRoof(const ExpandingSystem& sys, const InverseBranch& branch)
    : digits_(branch.word()), roof_(sys.roof()) {
    if (digits_.empty()) throw InvalidWord("branch carries no word");
    for (int d : digits_)
        if (!sys.digit_valid(d)) throw InvalidWord("branch word not from this system");
    // suffixes_[k] = h_{d_k} o ... o h_{d_n}, built right to left
    suffixes_.assign(digits_.size(), sys.branch_for_digit(digits_.back()));
    for (std::size_t k = digits_.size() - 1; k-- > 0;) {
        std::vector<int> w(digits_.begin() + static_cast<long>(k), digits_.end());
        suffixes_[k] = compose_branches(sys, w);
    }
}

double BirkhoffRoof::value(double x) const {
    // r^(n)(h(x)) = sum_k r(T^{k-1} h(x)) with T^{k-1} h = suffix from k
    double s = 0.0;
    for (std::size_t k = 0; k < digits_.size(); ++k)
        s += roof_.eval_on(digits_[k], suffixes_[k].eval(x));
    return s;
}

double BirkhoffRoof::deriv(double x) const {
    double s = 0.0;
    for (std::size_t k = 0; k < digits_.size(); ++k)
        s += roof_.deriv_on(digits_[k], suffixes_[k].eval(x)) * suffixes_[k].deriv(x);
    return s;
}

BirkhoffRoof birkhoff_roof(const ExpandingSystem& sys, const InverseBranch& branch) {
    return BirkhoffRoof(sys, branch);
}

// --- validation --------------------------------------------------------------

bool ValidationReport::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

namespace {

std::vector<double> sample_points(int count) {
    std::vector<double> xs(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        xs[static_cast<std::size_t>(i)] = double(i) / double(count - 1);
    return xs;
}

}  // namespace

ValidationReport validate_system(const ExpandingSystem& sys, int sample_count,
                                 int word_depth, int max_digits) {
    if (sample_count < 2) throw InvalidParameter("sample_count must be >= 2");
    ValidationReport rep;
    rep.system = sys.name();
    rep.sample_count = sample_count;
    rep.word_depth = word_depth;

    const auto count = sys.branch_count();
    const int digits = count ? static_cast<int>(std::min<std::uint64_t>(*count, max_digits))
                             : max_digits;
    rep.max_digits = digits;
    const auto xs = sample_points(sample_count);
    const auto cst = sys.constants();
    const double kbar = cst.kbar();

    double worst_range = 0.0, worst_inverse = 0.0, worst_distortion = 0.0;
    double worst_contraction = 0.0, worst_roof_dist = 0.0, worst_roof_inf =
        std::numeric_limits<double>::infinity();
    double k_hat = 0.0;

    // single branches
    for (int m = 1; m <= digits; ++m) {
        const auto h = sys.branch(static_cast<std::uint64_t>(m));
        const int digit = h.word().front();
        double prev_y = 0.0, seq_sign = 0.0;
        bool first = true;
        for (double x : xs) {
            const double y = h.eval(x);
            const double dy = h.deriv(x);
            const double d2y = h.deriv2(x);
            if (!std::isfinite(y) || !std::isfinite(dy) || dy == 0.0)
                throw InvalidSystem("non-monotone branch detected: digit " +
                                    std::to_string(digit));
            if (!first) {
                const double step = y - prev_y;
                if (step == 0.0 || (seq_sign != 0.0 && seq_sign * step < 0.0))
                    throw InvalidSystem("non-monotone branch detected: digit " +
                                        std::to_string(digit));
                seq_sign = step > 0.0 ? 1.0 : -1.0;
            }
            first = false;
            prev_y = y;
            worst_range = std::max({worst_range, -y, y - 1.0});
            if (std::abs(dy) > 0.0)
                k_hat = std::max(k_hat, std::abs(d2y) / std::abs(dy));
            worst_distortion = std::max(worst_distortion,
                                        std::abs(d2y) - kbar * std::abs(dy));
            worst_contraction = std::max(worst_contraction,
                                         std::abs(dy) - cst.C * cst.rho_hat);
            worst_roof_dist = std::max(worst_roof_dist,
                                       std::abs(sys.roof().deriv_on(digit, y)) * std::abs(dy));
            worst_roof_inf = std::min(worst_roof_inf, sys.roof().eval_on(digit, y));
        }
        // inverse identity at interior midpoints; branch endpoints land on
        // partition points where the forward map takes the neighbouring value
        for (int i = 0; i < sample_count; ++i) {
            const double x = (i + 0.5) / sample_count;
            worst_inverse = std::max(worst_inverse, std::abs(sys.forward(h.eval(x)) - x));
        }
    }

    // word contraction rates: S_n = max over sampled n-words of sup |h_w'|
    std::vector<double> level_sup;
    std::vector<std::vector<int>> words;
    for (int m = 1; m <= std::min(digits, 8); ++m)
        words.push_back({sys.digit_lo() + m - 1});
    for (int depth = 1; depth <= word_depth; ++depth) {
        double sup = 0.0;
        for (const auto& w : words) {
            const auto h = compose_branches(sys, w);
            for (double x : xs) {
                const double dy = std::abs(h.deriv(x));
                sup = std::max(sup, dy);
                worst_contraction = std::max(
                    worst_contraction, dy - cst.C * std::pow(cst.rho_hat, depth));
                if (dy > 0.0)
                    worst_distortion = std::max(worst_distortion,
                                                std::abs(h.deriv2(x)) - kbar * dy);
            }
        }
        level_sup.push_back(sup);
        if (depth < word_depth) {
            std::vector<std::vector<int>> next;
            for (const auto& w : words)
                for (int m = 1; m <= std::min(digits, 8); ++m) {
                    auto e = w;
                    e.push_back(sys.digit_lo() + m - 1);
                    next.push_back(std::move(e));
                }
            words = std::move(next);
        }
    }
    double rho_est = 0.0;
    for (std::size_t i = 1; i < level_sup.size(); ++i)
        rho_est = std::max(rho_est, level_sup[i] / level_sup[i - 1]);
    if (level_sup.size() == 1) rho_est = level_sup[0];
    rep.rho_hat_estimate = rho_est;
    rep.k_hat = k_hat;
    rep.roof_distortion = worst_roof_dist;

    // summability of sum_m sup|h_m'| and tail decay
    bool summable = true;
    {
        double prev = 0.0, acc = 0.0;
        for (int m = 1; m <= digits; ++m) {
            const auto h = sys.branch(static_cast<std::uint64_t>(m));
            acc += std::max(std::abs(h.deriv(0.0)), std::abs(h.deriv(1.0)));
            if (acc < prev) summable = false;
            prev = acc;
        }
        const double t1 = sys.tail_model(0.0, 64);
        const double t2 = sys.tail_model(0.0, 128);
        const double t3 = sys.tail_model(0.0, 256);
        if (!(t2 <= t1 && t3 <= t2)) summable = false;
    }

    // sigma0 estimate from the decay exponent of sup e^{-sigma r o h_m}|h_m'|:
    // fit p(sigma) linearly at sigma = 0 and 0.25, solve p(sigma0) = 1
    if (!sys.branch_count() && digits >= 8) {
        auto exponent_at = [&](double sigma) {
            const int m1 = digits / 2, m2 = digits;
            auto term = [&](int m) {
                const auto h = sys.branch(static_cast<std::uint64_t>(m));
                double sup = 0.0;
                for (double x : {0.0, 0.5, 1.0})
                    sup = std::max(sup, std::exp(-sigma * sys.roof().eval_on(
                                             h.word().front(), h.eval(x))) *
                                            std::abs(h.deriv(x)));
                return sup;
            };
            return -std::log(term(m2) / term(m1)) / std::log(double(m2) / double(m1));
        };
        const double p0 = exponent_at(0.0);
        const double p1 = exponent_at(0.25);
        const double slope = (p1 - p0) / 0.25;
        if (std::abs(slope) > 1e-12)
            rep.sigma0_estimate = (1.0 - p0) / slope;
    }

    auto push = [&](const std::string& name, bool ok, double worst, double bound) {
        rep.checks.push_back({name, ok, worst, bound});
    };
    push("range", worst_range <= 1e-12, worst_range, 0.0);
    push("inverse_identity", worst_inverse <= 1e-10, worst_inverse, 1e-10);
    push("distortion", worst_distortion <= 1e-12, k_hat, kbar);
    push("contraction", worst_contraction <= 1e-12, rho_est, cst.rho_hat);
    push("roof_distortion", worst_roof_dist <= cst.K + 1e-12, worst_roof_dist, cst.K);
    push("roof_lower_bound", worst_roof_inf >= sys.roof().inf() - 1e-12,
         worst_roof_inf, sys.roof().inf());
    push("summability", summable, 0.0, 0.0);
    return rep;
}

json to_json(const ValidationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"worst", c.worst},
                          {"bound", c.bound}});
    json j{{"schema_version", 1},
           {"system", r.system},
           {"rho_hat_estimate", r.rho_hat_estimate},
           {"k_hat", r.k_hat},
           {"roof_distortion", r.roof_distortion},
           {"sample_count", r.sample_count},
           {"word_depth", r.word_depth},
           {"max_digits", r.max_digits},
           {"all_passed", r.all_passed()},
           {"checks", checks}};
    if (r.sigma0_estimate) j["sigma0_estimate"] = *r.sigma0_estimate;
    return j;
}

}  // namespace tlab
