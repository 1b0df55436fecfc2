#ifndef TLAB_NUMERICS_HPP
#define TLAB_NUMERICS_HPP

#include <complex>
#include <vector>

#include "tlab/common.hpp"

namespace tlab {

// Hurwitz zeta zeta(w, a) = sum_{m>=0} (a+m)^-w for Re(w) > 1, a > 0,
// by explicit terms plus the Euler-Maclaurin expansion.  Accurate to near
// machine precision once the expansion point exceeds ~1.6 |w|.
Complex hurwitz_zeta(Complex w, double a);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
    int points = 0;
};

// Least squares fit y ~ intercept + slope * x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tlab

#endif
