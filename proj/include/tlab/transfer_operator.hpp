#ifndef TLAB_TRANSFER_OPERATOR_HPP
#define TLAB_TRANSFER_OPERATOR_HPP

#include <optional>

#include "tlab/branch_maps.hpp"
#include "tlab/function_space.hpp"

namespace tlab {

// Branch truncation: branches 1..cutoff are retained (nullopt keeps the
// whole family, which the Gauss assembly sums in closed form).  Assembly
// refuses configurations whose certified tail bound exceeds the tolerance.
struct TruncationPolicy {
    std::optional<std::uint64_t> cutoff;
    double tolerance = 1e-8;

    static TruncationPolicy all(double tolerance = 1e-8) { return {std::nullopt, tolerance}; }
    static TruncationPolicy fixed(std::uint64_t m, double tolerance = 1e-8) {
        return {m, tolerance};
    }
    // smallest cutoff meeting the tolerance for this system at sigma
    static TruncationPolicy for_tolerance(const ExpandingSystem& sys, double sigma,
                                          double tolerance);
};

double tail_bound(const ExpandingSystem& sys, double sigma,
                  std::optional<std::uint64_t> M);

struct OperatorMeta {
    Complex s;
    std::string system;
    TruncationPolicy trunc;
    double tail_value = 0.0;
    bool normalized = false;
    bool oscillation_warning = false;  // |t| * roof variation per cell > pi/4
    std::uint64_t explicit_branches = 0;
    bool analytic_tail_used = false;
};

// Dense collocation matrix of the twisted transfer operator on the grid.
class OperatorMatrix {
  public:
    OperatorMatrix(GridPtr grid, Eigen::MatrixXcd m, OperatorMeta meta)
        : grid_(std::move(grid)), m_(std::move(m)), meta_(std::move(meta)) {}

    const GridPtr& grid() const { return grid_; }
    const Eigen::MatrixXcd& matrix() const { return m_; }
    const OperatorMeta& meta() const { return meta_; }

    Eigen::MatrixXd real_matrix() const;  // t = 0 only

  private:
    GridPtr grid_;
    Eigen::MatrixXcd m_;
    OperatorMeta meta_;
};

OperatorMatrix assemble(const ExpandingSystem& sys, Complex s, const GridPtr& grid,
                        const TruncationPolicy& trunc);

// Direct assembly over an explicit list of words of T^n (test oracle for the
// semigroup property).
OperatorMatrix assemble_words(const ExpandingSystem& sys, Complex s, const GridPtr& grid,
                              const std::vector<std::vector<int>>& words);

GridFunction apply(const OperatorMatrix& op, const GridFunction& f);
GridFunction iterate(const OperatorMatrix& op, GridFunction f, int n);

struct SpectralData;  // spectral.hpp

// Normalized operator f -> L_s(f_sigma f) / (lambda_sigma f_sigma).
OperatorMatrix normalize(const OperatorMatrix& op, const SpectralData& spec);

// Dense CSV dump, row-major, re/im interleaved per row.
void export_csv(const OperatorMatrix& op, std::ostream& os);

}  // namespace tlab

#endif
