#ifndef TLAB_SPECTRAL_HPP
#define TLAB_SPECTRAL_HPP

#include <nlohmann/json_fwd.hpp>

#include "tlab/transfer_operator.hpp"

namespace tlab {

// Leading eigendata of the real-parameter operator: lambda_sigma with a
// strictly positive eigenfunction f_sigma, the dual measure mu_sigma
// (normalized by mu(1) = 1 and mu(f) = 1) and nu_sigma = f_sigma mu_sigma.
//
// The nodal representation of the dual functional is moment exact but can
// carry small negative coefficients when mu_sigma is singular (the doubling
// system away from sigma = 0).  The signed functionals are kept alongside
// the clamped MeasureWeights views; dual_positive records whether clamping
// was a no-op.
struct SpectralData {
    std::string system;
    double sigma = 0.0;
    double lambda = 0.0;
    GridFunction eigenfunction;
    MeasureWeights mu;
    MeasureWeights nu;
    Eigen::VectorXd mu_functional;  // signed, mu(1) = 1
    Eigen::VectorXd nu_functional;  // f * mu, total mass 1
    bool dual_positive = true;
    double gap = 0.0;       // |lambda_2| / lambda_sigma
    bool gap_converged = false;
    double residual = 0.0;  // sup |L f - lambda f| with mu(f) = 1
    int iterations = 0;
    TruncationPolicy trunc;
};

struct EigenSolveOptions {
    double tol = 1e-10;
    int max_iterations = 100000;
    bool with_gap = true;
};

SpectralData leading_eigendata(const ExpandingSystem& sys, double sigma,
                               const GridPtr& grid, const TruncationPolicy& trunc,
                               const EigenSolveOptions& opt = {});

struct GapResult {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Deflated power iteration for |lambda_2| / lambda_sigma; non-convergence
// returns the last iterate ratio flagged as an upper-bound estimate.
GapResult subdominant_gap(const OperatorMatrix& op, const SpectralData& spec,
                          double tol = 1e-9, int max_iterations = 20000);

struct LambdaScanRow {
    double sigma;
    double lambda;
};

struct LambdaScan {
    std::vector<LambdaScanRow> rows;
    bool nonincreasing = true;
};

LambdaScan lambda_scan(const ExpandingSystem& sys, const std::vector<double>& sigmas,
                       const GridPtr& grid, const TruncationPolicy& trunc,
                       const EigenSolveOptions& opt = {});

nlohmann::json to_json(const SpectralData& spec);

}  // namespace tlab

#endif
