#include "ridge.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "error.hpp"
#include "io_util.hpp"
#include "rng.hpp"

namespace boneage {

void validate(const RidgeProblem& problem) {
  if (problem.x.shape.size() != 2) {
    fail(ErrorKind::Shape, "design matrix must be rank-2 (n, p)");
  }
  if (problem.n() < 1 || problem.p() < 1) {
    fail(ErrorKind::Config, "ridge problem needs n >= 1 and p >= 1");
  }
  if (problem.y.size() != static_cast<std::size_t>(problem.n())) {
    fail(ErrorKind::Shape, "response length does not match design rows");
  }
  if (problem.lambda < 0.0) {
    fail(ErrorKind::Config, "lambda must be >= 0");
  }
  for (double v : problem.x.data) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::Domain, "design matrix contains a non-finite value");
    }
  }
  for (double v : problem.y) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::Domain, "response contains a non-finite value");
    }
  }
}

double objective(const RidgeProblem& problem, const std::vector<double>& beta) {
  validate(problem);
  const int n = problem.n(), p = problem.p();
  if (beta.size() != static_cast<std::size_t>(p)) {
    fail(ErrorKind::Shape, "beta length does not match feature count");
  }
  double fit = 0.0;
  for (int i = 0; i < n; ++i) {
    double pred = 0.0;
    const double* row = problem.x.data.data() + static_cast<std::size_t>(i) * p;
    for (int j = 0; j < p; ++j) {
      pred += row[j] * beta[j];
    }
    const double r = problem.y[i] - pred;
    fit += r * r;
  }
  double penalty = 0.0;
  for (double b : beta) {
    penalty += b * b;
  }
  return fit + problem.lambda * penalty;
}

namespace {

// In-place Cholesky solve of A beta = b for symmetric positive-definite A
// (lower triangle used). A pivot at or below the tolerance means the normal
// matrix is numerically singular.
std::vector<double> spd_solve(std::vector<double>& a, std::vector<double> b,
                              int p) {
  double max_diag = 0.0;
  for (int j = 0; j < p; ++j) {
    max_diag = std::max(max_diag, std::abs(a[static_cast<std::size_t>(j) * p + j]));
  }
  const double tol = 1e-12 * std::max(max_diag, 1e-300);
  for (int j = 0; j < p; ++j) {
    double d = a[static_cast<std::size_t>(j) * p + j];
    for (int k = 0; k < j; ++k) {
      const double l = a[static_cast<std::size_t>(j) * p + k];
      d -= l * l;
    }
    if (!(d > tol)) {
      fail(ErrorKind::Singular,
           "normal matrix is numerically singular (needs lambda > 0 or "
           "independent columns)");
    }
    const double root = std::sqrt(d);
    a[static_cast<std::size_t>(j) * p + j] = root;
    for (int i = j + 1; i < p; ++i) {
      double v = a[static_cast<std::size_t>(i) * p + j];
      for (int k = 0; k < j; ++k) {
        v -= a[static_cast<std::size_t>(i) * p + k] *
             a[static_cast<std::size_t>(j) * p + k];
      }
      a[static_cast<std::size_t>(i) * p + j] = v / root;
    }
  }
  // Forward then back substitution with L and L^T.
  for (int i = 0; i < p; ++i) {
    double v = b[i];
    for (int k = 0; k < i; ++k) {
      v -= a[static_cast<std::size_t>(i) * p + k] * b[k];
    }
    b[i] = v / a[static_cast<std::size_t>(i) * p + i];
  }
  for (int i = p - 1; i >= 0; --i) {
    double v = b[i];
    for (int k = i + 1; k < p; ++k) {
      v -= a[static_cast<std::size_t>(k) * p + i] * b[k];
    }
    b[i] = v / a[static_cast<std::size_t>(i) * p + i];
  }
  return b;
}

}  // namespace

RidgeSolution fit_closed_form(const RidgeProblem& problem, bool standardize) {
  validate(problem);
  const int n = problem.n(), p = problem.p();

  std::vector<double> scale(p, 1.0);
  if (standardize) {
    for (int j = 0; j < p; ++j) {
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        const double v = problem.x.data[static_cast<std::size_t>(i) * p + j];
        ss += v * v;
      }
      const double rms = std::sqrt(ss / n);
      scale[j] = rms > 0.0 ? rms : 1.0;
    }
  }

  // Normal matrix A = X^T X + lambda I and right side b = X^T y, with the
  // optional column scaling folded in.
  std::vector<double> a(static_cast<std::size_t>(p) * p, 0.0);
  std::vector<double> b(p, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = problem.x.data.data() + static_cast<std::size_t>(i) * p;
    for (int j = 0; j < p; ++j) {
      const double xj = row[j] / scale[j];
      b[j] += xj * problem.y[i];
      for (int k = 0; k <= j; ++k) {
        a[static_cast<std::size_t>(j) * p + k] += xj * (row[k] / scale[k]);
      }
    }
  }
  for (int j = 0; j < p; ++j) {
    a[static_cast<std::size_t>(j) * p + j] += problem.lambda;
    for (int k = j + 1; k < p; ++k) {
      a[static_cast<std::size_t>(j) * p + k] =
          a[static_cast<std::size_t>(k) * p + j];
    }
  }
  const std::vector<double> a_copy = a;

  std::vector<double> beta = spd_solve(a, b, p);

  // Normal-equations residual bound; a violation means the factorization
  // lost the system to conditioning.
  double b_inf = 0.0;
  for (double v : b) {
    b_inf = std::max(b_inf, std::abs(v));
  }
  double r_inf = 0.0;
  for (int i = 0; i < p; ++i) {
    double r = -b[i];
    for (int j = 0; j < p; ++j) {
      r += a_copy[static_cast<std::size_t>(i) * p + j] * beta[j];
    }
    r_inf = std::max(r_inf, std::abs(r));
  }
  if (!(r_inf < 1e-8 * (1.0 + b_inf))) {
    fail(ErrorKind::Singular,
         "normal-equations residual check failed; system too ill-conditioned");
  }

  for (int j = 0; j < p; ++j) {
    beta[j] /= scale[j];
  }
  RidgeSolution solution;
  solution.beta = std::move(beta);
  solution.lambda = problem.lambda;
  solution.objective = objective(problem, solution.beta);
  return solution;
}

std::vector<double> penalty_gradient(const std::vector<double>& beta,
                                     double lambda) {
  std::vector<double> grad(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) {
    grad[i] = 2.0 * lambda * beta[i];
  }
  return grad;
}

CvResult cross_validate_lambda(const Tensor& x, const std::vector<double>& y,
                               const std::vector<double>& grid, int folds,
                               std::uint64_t seed) {
  if (x.shape.size() != 2) {
    fail(ErrorKind::Shape, "design matrix must be rank-2 (n, p)");
  }
  const int n = x.shape[0], p = x.shape[1];
  if (folds < 2) {
    fail(ErrorKind::Config, "cross-validation needs at least 2 folds");
  }
  if (n < folds) {
    fail(ErrorKind::Config, "fewer samples than folds");
  }
  if (grid.empty()) {
    fail(ErrorKind::Config, "lambda grid is empty");
  }
  if (y.size() != static_cast<std::size_t>(n)) {
    fail(ErrorKind::Shape, "response length does not match design rows");
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) {
    order[i] = i;
  }
  Rng rng(derive_seed(seed, {kStreamFolds}));
  shuffle(order, rng);

  // Contiguous cut of the shuffled order; the first n%k folds are one longer.
  std::vector<std::pair<int, int>> fold_bounds;
  const int base = n / folds, extra = n % folds;
  int start = 0;
  for (int f = 0; f < folds; ++f) {
    const int len = base + (f < extra ? 1 : 0);
    fold_bounds.emplace_back(start, start + len);
    start += len;
  }

  CvResult result;
  result.mean_mse.assign(grid.size(), 0.0);
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    double mse_sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      const auto [lo, hi] = fold_bounds[f];
      const int train_n = n - (hi - lo);
      RidgeProblem sub;
      sub.x = Tensor({train_n, p});
      sub.y.resize(train_n);
      sub.lambda = grid[gi];
      int r = 0;
      for (int i = 0; i < n; ++i) {
        if (i >= lo && i < hi) continue;
        const int src = order[i];
        std::copy_n(x.data.data() + static_cast<std::size_t>(src) * p, p,
                    sub.x.data.data() + static_cast<std::size_t>(r) * p);
        sub.y[r] = y[src];
        ++r;
      }
      RidgeSolution fit = fit_closed_form(sub);
      double fold_se = 0.0;
      for (int i = lo; i < hi; ++i) {
        const int src = order[i];
        double pred = 0.0;
        for (int j = 0; j < p; ++j) {
          pred += x.data[static_cast<std::size_t>(src) * p + j] * fit.beta[j];
        }
        const double d = y[src] - pred;
        fold_se += d * d;
      }
      mse_sum += fold_se / (hi - lo);
    }
    result.mean_mse[gi] = mse_sum / folds;
  }

  std::size_t best = 0;
  for (std::size_t gi = 1; gi < grid.size(); ++gi) {
    const bool better = result.mean_mse[gi] < result.mean_mse[best];
    const bool tie_larger = result.mean_mse[gi] == result.mean_mse[best] &&
                            grid[gi] > grid[best];
    if (better || tie_larger) {
      best = gi;
    }
  }
  result.best_lambda = grid[best];
  return result;
}

std::string features_to_csv(const Tensor& x, const std::vector<double>& y) {
  if (x.shape.size() != 2 ||
      y.size() != static_cast<std::size_t>(x.shape[0])) {
    fail(ErrorKind::Shape, "feature matrix and target length do not match");
  }
  const int n = x.shape[0], p = x.shape[1];
  std::string out;
  for (int j = 0; j < p; ++j) {
    out += "f" + std::to_string(j) + ",";
  }
  out += "target\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      out += format_double(x.data[static_cast<std::size_t>(i) * p + j]);
      out += ',';
    }
    out += format_double(y[i]);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_cell(const std::string& cell, std::size_t line_no) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorKind::Parse, "line " + std::to_string(line_no) +
                               ": '" + cell + "' is not a number");
  }
  return value;
}

}  // namespace

void features_from_csv(const std::string& text, Tensor& x,
                       std::vector<double>& y) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) {
      nl = text.size();
    }
    std::string line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      lines.push_back(std::move(line));
    }
    start = nl + 1;
  }
  if (lines.empty()) {
    fail(ErrorKind::Parse, "feature CSV is empty");
  }
  const std::vector<std::string> header = split_line(lines[0]);
  if (header.size() < 2 || header.back() != "target") {
    fail(ErrorKind::Parse,
         "feature CSV header must be f0,...,f{p-1},target");
  }
  const int p = static_cast<int>(header.size()) - 1;
  for (int j = 0; j < p; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      fail(ErrorKind::Parse, "feature CSV header column " +
                                 std::to_string(j) + " must be f" +
                                 std::to_string(j));
    }
  }
  const int n = static_cast<int>(lines.size()) - 1;
  if (n < 1) {
    fail(ErrorKind::Parse, "feature CSV has no data rows");
  }
  x = Tensor({n, p});
  y.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const std::vector<std::string> cells = split_line(lines[i + 1]);
    if (cells.size() != header.size()) {
      fail(ErrorKind::Parse, "line " + std::to_string(i + 2) +
                                 ": expected " +
                                 std::to_string(header.size()) + " cells");
    }
    for (int j = 0; j < p; ++j) {
      x.data[static_cast<std::size_t>(i) * p + j] = parse_cell(cells[j], i + 2);
    }
    y[i] = parse_cell(cells[p], i + 2);
  }
}

}  // namespace boneage
