#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace boneage {

/// Penalized least squares: minimize ||y - X b||^2 + lambda ||b||^2 over b.
struct RidgeProblem {
  Tensor x;                  // (n, p), rows = samples
  std::vector<double> y;     // n responses, months
  double lambda = 0.0;

  int n() const { return x.shape.empty() ? 0 : x.shape[0]; }
  int p() const { return x.shape.size() < 2 ? 0 : x.shape[1]; }
};

/// ConfigError unless n >= 1, p >= 1, y matches, lambda >= 0, all finite.
void validate(const RidgeProblem& problem);

struct RidgeSolution {
  std::vector<double> beta;
  double lambda = 0.0;
  double objective = 0.0;  // penalized objective evaluated at beta
};

/// ||y - X beta||^2 + lambda ||beta||^2. ShapeError on a wrong beta length.
double objective(const RidgeProblem& problem, const std::vector<double>& beta);

/// Solves (X^T X + lambda I) beta = X^T y through a Cholesky factorization
/// of the symmetric positive-definite normal matrix, then verifies the
/// normal-equations residual ||A beta - b||_inf < 1e-8 (1 + ||b||_inf).
/// A singular system (lambda 0 with rank-deficient X, or a residual check
/// failure) raises SingularError. With standardize, columns are scaled to
/// unit root-mean-square before fitting and beta is mapped back, which
/// changes what the penalty measures but not the returned coordinate system.
RidgeSolution fit_closed_form(const RidgeProblem& problem,
                              bool standardize = false);

/// d(lambda ||beta||^2)/d(beta) = 2 lambda beta; the term the end-to-end
/// trainer adds to the head-weight gradient.
std::vector<double> penalty_gradient(const std::vector<double>& beta,
                                     double lambda);

struct CvResult {
  double best_lambda = 0.0;
  std::vector<double> mean_mse;  // aligned with the grid argument
};

/// k-fold cross-validation over the lambda grid: indices are shuffled by
/// the seed's fold stream and cut into k contiguous folds (the first n%k
/// folds take the extra sample). mean_mse[i] is the mean over folds of the
/// held-out MSE at grid[i]; ties prefer the larger lambda. ConfigError when
/// k < 2, n < k, or the grid is empty.
CvResult cross_validate_lambda(const Tensor& x, const std::vector<double>& y,
                               const std::vector<double>& grid, int folds,
                               std::uint64_t seed);

/// Feature-matrix CSV with header f0,...,f{p-1},target; full round-trip
/// precision.
std::string features_to_csv(const Tensor& x, const std::vector<double>& y);
void features_from_csv(const std::string& text, Tensor& x,
                       std::vector<double>& y);

}  // namespace boneage
