#include "tlab/numerics.hpp"

#include <cmath>

namespace tlab {

namespace {
// B_{2j} / (2j)! for j = 1..12
constexpr double kEulerMaclaurin[] = {
    8.3333333333333333e-02,  -1.3888888888888889e-03, 3.3068783068783069e-05,
    -8.2671957671957672e-07, 2.0876756987868099e-08,  -5.2841901386874932e-10,
    1.3382536530684679e-11,  -3.3896802963225829e-13, 8.5860620562778446e-15,
    -2.1748686985580619e-16, 5.5090028283602295e-18,  -1.3954464685812522e-19,
};

Complex cpow_neg(double base, Complex w) {
    // base^-w for base > 0
    const double lg = std::log(base);
    const double mag = std::exp(-w.real() * lg);
    const double ph = -w.imag() * lg;
    return {mag * std::cos(ph), mag * std::sin(ph)};
}
}  // namespace

Complex hurwitz_zeta(Complex w, double a) {
    if (!(w.real() > 1.0)) throw InvalidParameter("hurwitz_zeta needs Re(w) > 1");
    if (!(a > 0.0)) throw InvalidParameter("hurwitz_zeta needs a > 0");
    const double aw = std::abs(w);
    Complex acc = 0.0;
    double A = a;
    const double target = std::max(32.0, 1.6 * aw);
    while (A < target) {
        acc += cpow_neg(A, w);
        A += 1.0;
    }
    // zeta(w, A) = A^{1-w}/(w-1) + A^-w/2 + sum_j c_j poch(w, 2j-1) A^{-w-2j+1}
    const Complex Aw = cpow_neg(A, w);
    acc += Aw * A / (w - 1.0) + 0.5 * Aw;
    Complex poch = w;           // w (w+1) ... (w + 2j - 2)
    double Apow = 1.0 / A;      // A^{-(2j-1)}
    for (int j = 1; j <= 12; ++j) {
        acc += kEulerMaclaurin[j - 1] * poch * Aw * Apow;
        poch *= (w + Complex(2.0 * j - 1.0)) * (w + Complex(2.0 * j));
        Apow /= A * A;
    }
    return acc;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw InvalidParameter("fit_line needs at least two points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-300) throw InvalidParameter("degenerate fit");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy * sxx - sx * sxy) / det;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        ss += r * r;
    }
    f.rms_residual = std::sqrt(ss / n);
    f.points = static_cast<int>(x.size());
    return f;
}

}  // namespace tlab
