#include "allwas/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "allwas/error.hpp"

namespace allwas {
namespace {

constexpr double kWeightTolerance = 1e-9;
// Kernel-domain scaling is used while exp(-C/eps) stays far from underflow.
constexpr double kKernelDomainLimit = 200.0;

double pow_p(double dist, double p) {
  if (p == 2.0) return dist * dist;
  if (p == 1.0) return dist;
  return std::pow(dist, p);
}

double kl_term(double x, double ref) {
  if (x <= 0.0) return 0.0;
  return x * std::log(x / ref);
}

void finish_plan(TransportPlan& plan, const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& b) {
  plan.cost = (plan.coupling.array() * cost.array()).sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      kl += kl_term(plan.coupling(i, j), a(i) * b(j));
    }
  }
  plan.regularized_cost = plan.cost + plan.epsilon * kl;
  plan.marginal_violation = (plan.coupling.rowwise().sum() - a).cwiseAbs().sum() +
                            (plan.coupling.colwise().sum().transpose() - b).cwiseAbs().sum();
}

TransportPlan outer_product_plan(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, double epsilon) {
  TransportPlan plan;
  plan.epsilon = epsilon;
  plan.coupling = a * b.transpose();
  plan.converged = true;
  finish_plan(plan, cost, a, b);
  return plan;
}

// 2x2 entropic OT has one free coupling entry t = P11 fixed by
// P11 P22 / (P12 P21) = exp(-(C11 + C22 - C12 - C21) / eps).
TransportPlan two_by_two_plan(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                              const Eigen::VectorXd& b, double epsilon) {
  const double a1 = a(0), a2 = a(1), b1 = b(0);
  const double log_kappa = -(cost(0, 0) + cost(1, 1) - cost(0, 1) - cost(1, 0)) / epsilon;
  double t;
  if (log_kappa <= 0.0) {
    const double kappa = std::exp(log_kappa);
    const double qa = 1.0 - kappa;
    const double qb = a2 - b1 + kappa * (a1 + b1);
    const double disc = std::sqrt(std::max(0.0, qb * qb + 4.0 * qa * kappa * a1 * b1));
    if (qb >= 0.0) {
      const double denom = qb + disc;
      t = denom > 0.0 ? 2.0 * kappa * a1 * b1 / denom : 0.0;
    } else {
      t = (-qb + disc) / (2.0 * qa);
    }
  } else {
    const double r = std::exp(-log_kappa);
    const double qb = r * (a2 - b1) + a1 + b1;
    const double disc = std::sqrt(std::max(0.0, qb * qb - 4.0 * (1.0 - r) * a1 * b1));
    const double denom = qb + disc;
    t = denom > 0.0 ? 2.0 * a1 * b1 / denom : 0.0;
  }
  t = std::clamp(t, std::max(0.0, b1 - a2), std::min(a1, b1));

  TransportPlan plan;
  plan.epsilon = epsilon;
  plan.coupling.resize(2, 2);
  plan.coupling << t, a1 - t, b1 - t, a2 - b1 + t;
  plan.coupling = plan.coupling.cwiseMax(0.0);
  plan.converged = true;
  finish_plan(plan, cost, a, b);
  return plan;
}

double log_sum_exp(const double* values, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, values[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(values[i] - m);
  return m + std::log(s);
}

// Iterations continue until the violation is this fraction of tol so that
// costs (not just marginals) are settled to about tol.
constexpr double kStopFraction = 0.01;

// Returns false if the scaling vectors degenerate; the caller then retries
// in the log domain.
bool sinkhorn_kernel(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                     const Eigen::VectorXd& b, double epsilon, std::size_t max_iter, double tol,
                     TransportPlan& plan, Eigen::VectorXd& alpha, Eigen::VectorXd& beta) {
  const Eigen::MatrixXd kernel = (-cost.array() / epsilon).exp().matrix();
  Eigen::VectorXd u = Eigen::VectorXd::Ones(a.size());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(b.size());
  Eigen::VectorXd kv(a.size()), ktu(b.size());
  plan.converged = false;
  std::size_t it = 0;
  while (it < max_iter) {
    ++it;
    kv.noalias() = kernel * v;
    u = a.cwiseQuotient(kv);
    ktu.noalias() = kernel.transpose() * u;
    v = b.cwiseQuotient(ktu);
    if (!u.allFinite() || !v.allFinite()) return false;
    // Columns are exact after the v update; rows carry the residual.
    kv.noalias() = kernel * v;
    const double violation = (u.cwiseProduct(kv) - a).cwiseAbs().sum();
    if (violation <= tol * kStopFraction) {
      plan.converged = true;
      break;
    }
  }
  plan.iterations = it;
  plan.coupling = u.asDiagonal() * kernel * v.asDiagonal();
  alpha = u.array().log();
  beta = v.array().log();
  return plan.coupling.allFinite();
}

// Problems up to this many rows plus columns get a Newton finish when plain
// scaling stalls.
constexpr Eigen::Index kNewtonLimit = 256;

// Damped Newton on the dual, in log scalings with
// P_ij = exp(alpha_i + beta_j - C_ij / eps). beta's last entry is held fixed
// to remove the shift invariance. Returns the number of steps taken.
std::size_t newton_polish(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                          const Eigen::VectorXd& b, double epsilon, Eigen::VectorXd& alpha,
                          Eigen::VectorXd& beta, double target, Eigen::MatrixXd& coupling) {
  const Eigen::Index n = cost.rows(), m = cost.cols();
  if (!alpha.allFinite() || !beta.allFinite()) return 0;
  const Eigen::MatrixXd scaled = cost / epsilon;
  auto plan_of = [&](const Eigen::VectorXd& al, const Eigen::VectorXd& be) {
    return ((-scaled).colwise() + al).rowwise() + be.transpose();
  };
  auto dual = [&](const Eigen::MatrixXd& log_p, const Eigen::VectorXd& al, const Eigen::VectorXd& be) {
    return log_p.array().exp().sum() - a.dot(al) - b.dot(be);
  };
  Eigen::MatrixXd log_p = plan_of(alpha, beta);
  double phi = dual(log_p, alpha, beta);
  const Eigen::Index dim = n + m - 1;
  std::size_t steps = 0;
  for (; steps < 100; ++steps) {
    const Eigen::MatrixXd p = log_p.array().exp().matrix();
    const Eigen::VectorXd rows = p.rowwise().sum();
    const Eigen::VectorXd cols = p.colwise().sum().transpose();
    const double violation = (rows - a).cwiseAbs().sum() + (cols - b).cwiseAbs().sum();
    if (violation <= target) break;
    Eigen::VectorXd grad(dim);
    grad.head(n) = rows - a;
    grad.tail(m - 1) = (cols - b).head(m - 1);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
    hess.topLeftCorner(n, n) = rows.asDiagonal();
    hess.bottomRightCorner(m - 1, m - 1) = cols.head(m - 1).asDiagonal();
    hess.topRightCorner(n, m - 1) = p.leftCols(m - 1);
    hess.bottomLeftCorner(m - 1, n) = p.leftCols(m - 1).transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success) {
      // Underflowed plan entries leave the Hessian numerically singular.
      hess.diagonal().array() += 1e-12 * hess.diagonal().maxCoeff();
      ldlt.compute(hess);
      if (ldlt.info() != Eigen::Success) break;
    }
    const Eigen::VectorXd step = -ldlt.solve(grad);
    if (!step.allFinite()) break;
    const double slope = grad.dot(step);
    if (!(slope < 0.0)) break;
    double t = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 40; ++halvings, t *= 0.5) {
      Eigen::VectorXd al = alpha + t * step.head(n);
      Eigen::VectorXd be = beta;
      be.head(m - 1) += t * step.tail(m - 1);
      Eigen::MatrixXd trial = plan_of(al, be);
      const double trial_phi = dual(trial, al, be);
      if (!std::isfinite(trial_phi)) continue;
      // Near the optimum the decrease in the dual drops below rounding, so a
      // smaller marginal violation also counts as progress.
      const Eigen::MatrixXd tp = trial.array().exp().matrix();
      const double trial_violation = (tp.rowwise().sum() - a).cwiseAbs().sum() +
                                     (tp.colwise().sum().transpose() - b).cwiseAbs().sum();
      if (trial_phi <= phi + 1e-4 * t * slope || trial_violation < violation) {
        alpha = std::move(al);
        beta = std::move(be);
        log_p = std::move(trial);
        phi = trial_phi;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  coupling = log_p.array().exp().matrix();
  return steps;
}

void polish_if_stalled(TransportPlan& plan, const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                       const Eigen::VectorXd& b, Eigen::VectorXd& alpha, Eigen::VectorXd& beta,
                       double tol) {
  if (plan.marginal_violation <= tol * kStopFraction) return;
  if (cost.rows() + cost.cols() > kNewtonLimit) return;
  Eigen::MatrixXd coupling;
  const std::size_t steps =
      newton_polish(cost, a, b, plan.epsilon, alpha, beta, tol * kStopFraction, coupling);
  if (steps == 0 || !coupling.allFinite()) return;
  TransportPlan polished = plan;
  polished.coupling = std::move(coupling);
  finish_plan(polished, cost, a, b);
  if (polished.marginal_violation < plan.marginal_violation) {
    polished.iterations += steps;
    plan = std::move(polished);
  }
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(Eigen::MatrixXd support_points, Eigen::VectorXd point_weights)
    : support(std::move(support_points)), weights(std::move(point_weights)) {}

DiscreteMeasure DiscreteMeasure::uniform(Eigen::MatrixXd support_points) {
  const auto n = support_points.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  return DiscreteMeasure(std::move(support_points), std::move(w));
}

DiscreteMeasure DiscreteMeasure::dirac(const Eigen::VectorXd& point) {
  return DiscreteMeasure(point.transpose(), Eigen::VectorXd::Ones(1));
}

void DiscreteMeasure::validate() const {
  if (support.rows() < 1) throw DataError("measure has an empty support");
  if (weights.size() != support.rows()) {
    std::ostringstream msg;
    msg << "measure has " << support.rows() << " support points but " << weights.size()
        << " weights";
    throw DataError(msg.str());
  }
  if (!support.allFinite()) throw DataError("measure support has non-finite coordinates");
  if (!weights.allFinite() || (weights.array() < 0.0).any()) {
    throw DataError("measure weights must be finite and nonnegative");
  }
  const double total = weights.sum();
  if (std::abs(total - 1.0) > kWeightTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "measure weights sum to " << total << ", expected 1";
    throw DataError(msg.str());
  }
}

bool DiscreteMeasure::operator==(const DiscreteMeasure& other) const {
  return support.rows() == other.support.rows() && support.cols() == other.support.cols() &&
         support == other.support && weights == other.weights;
}

CostMatrix ground_cost(const DiscreteMeasure& a, const DiscreteMeasure& b, double p) {
  if (a.dim() != b.dim()) {
    std::ostringstream msg;
    msg << "ground_cost dimension mismatch: first measure has d=" << a.dim()
        << ", second has d=" << b.dim();
    throw DataError(msg.str());
  }
  if (!(p >= 1.0)) throw ConfigError("ground cost order p must be >= 1");
  CostMatrix out;
  out.order = p;
  out.entries.resize(a.support.rows(), b.support.rows());
  for (Eigen::Index k = 0; k < b.support.rows(); ++k) {
    for (Eigen::Index j = 0; j < a.support.rows(); ++j) {
      const double sq = (a.support.row(j) - b.support.row(k)).squaredNorm();
      out.entries(j, k) = p == 2.0 ? sq : pow_p(std::sqrt(sq), p);
    }
  }
  return out;
}

double default_epsilon(const Eigen::MatrixXd& cost, double scale) {
  std::vector<double> values(cost.data(), cost.data() + cost.size());
  if (values.empty()) return 1e-6;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double median = *mid;
  if (values.size() % 2 == 0) {
    const double lower = *std::max_element(values.begin(), mid);
    median = 0.5 * (median + lower);
  }
  return std::max(scale * median, 1e-6);
}

TransportPlan sinkhorn_solve_log(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, double epsilon, std::size_t max_iter,
                                 double tol) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  Eigen::VectorXd log_a = a.array().log();
  Eigen::VectorXd log_b = b.array().log();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  const Eigen::MatrixXd scaled = -cost / epsilon;
  std::vector<double> scratch(std::max(n, m));

  auto log_plan = [&](std::size_t i, std::size_t j) {
    return (f(i) + g(j)) / epsilon + scaled(i, j) + log_a(i) + log_b(j);
  };

  TransportPlan plan;
  plan.epsilon = epsilon;
  std::size_t it = 0;
  while (it < max_iter) {
    ++it;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) scratch[j] = g(j) / epsilon + scaled(i, j) + log_b(j);
      f(i) = -epsilon * log_sum_exp(scratch.data(), m);
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = f(i) / epsilon + scaled(i, j) + log_a(i);
      g(j) = -epsilon * log_sum_exp(scratch.data(), n);
    }
    double violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < m; ++j) row += std::exp(log_plan(i, j));
      violation += std::abs(row - a(i));
    }
    if (violation <= tol * kStopFraction) {
      plan.converged = true;
      break;
    }
  }
  plan.iterations = it;
  plan.coupling.resize(cost.rows(), cost.cols());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) plan.coupling(i, j) = std::exp(log_plan(i, j));
  }
  finish_plan(plan, cost, a, b);
  Eigen::VectorXd alpha = (f / epsilon + log_a).eval();
  Eigen::VectorXd beta = (g / epsilon + log_b).eval();
  polish_if_stalled(plan, cost, a, b, alpha, beta, tol);
  plan.converged = plan.marginal_violation <= tol;
  return plan;
}

TransportPlan sinkhorn_solve(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b, double epsilon, std::size_t max_iter,
                             double tol) {
  if (!(epsilon > 0.0)) throw ConfigError("sinkhorn epsilon must be positive");
  if (!cost.allFinite()) throw DataError("sinkhorn cost matrix has non-finite entries");
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw DataError("sinkhorn cost matrix shape does not match the marginals");
  }
  if (cost.rows() == 1 || cost.cols() == 1) return outer_product_plan(cost, a, b, epsilon);
  if (cost.rows() == 2 && cost.cols() == 2) return two_by_two_plan(cost, a, b, epsilon);

  if (cost.maxCoeff() / epsilon < kKernelDomainLimit) {
    TransportPlan plan;
    plan.epsilon = epsilon;
    Eigen::VectorXd alpha, beta;
    if (sinkhorn_kernel(cost, a, b, epsilon, max_iter, tol, plan, alpha, beta)) {
      finish_plan(plan, cost, a, b);
      polish_if_stalled(plan, cost, a, b, alpha, beta, tol);
      plan.converged = plan.marginal_violation <= tol;
      return plan;
    }
  }
  return sinkhorn_solve_log(cost, a, b, epsilon, max_iter, tol);
}

TransportPlan sinkhorn_distance(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                const SinkhornOptions& options) {
  if (options.epsilon && !(*options.epsilon > 0.0)) {
    throw ConfigError("sinkhorn epsilon must be positive");
  }
  a.validate();
  b.validate();
  const CostMatrix cost = ground_cost(a, b, options.p);
  if (!cost.entries.allFinite()) throw DataError("sinkhorn cost matrix has non-finite entries");
  const double eps = options.epsilon.value_or(default_epsilon(cost.entries, options.eps_scale));
  if (a == b) {
    // Identical inputs: the diagonal plan is exact and feasible.
    TransportPlan plan;
    plan.epsilon = eps;
    plan.coupling = a.weights.asDiagonal();
    plan.converged = true;
    finish_plan(plan, cost.entries, a.weights, b.weights);
    return plan;
  }
  return sinkhorn_solve(cost.entries, a.weights, b.weights, eps, options.max_iter, options.tol);
}

std::vector<std::size_t> min_cost_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw DataError("assignment requires a square cost matrix");
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // Potentials over 1-based rows/columns; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (row_of[j] != 0) assignment[row_of[j] - 1] = j - 1;
  }
  return assignment;
}

double exact_distance_oracle(const DiscreteMeasure& a, const DiscreteMeasure& b, double p) {
  a.validate();
  b.validate();
  if (a.dim() != b.dim()) {
    std::ostringstream msg;
    msg << "exact_distance_oracle dimension mismatch: d=" << a.dim() << " vs d=" << b.dim();
    throw DataError(msg.str());
  }
  if (!(p >= 1.0)) throw ConfigError("ground cost order p must be >= 1");

  if (a.dim() == 1) {
    std::vector<std::size_t> ia(a.size()), ib(b.size());
    std::iota(ia.begin(), ia.end(), std::size_t{0});
    std::iota(ib.begin(), ib.end(), std::size_t{0});
    std::sort(ia.begin(), ia.end(), [&](auto x, auto y) { return a.support(x, 0) < a.support(y, 0); });
    std::sort(ib.begin(), ib.end(), [&](auto x, auto y) { return b.support(x, 0) < b.support(y, 0); });
    double total = 0.0;
    std::size_t i = 0, j = 0;
    double rem_a = a.weights(ia[0]), rem_b = b.weights(ib[0]);
    while (i < ia.size() && j < ib.size()) {
      const double mass = std::min(rem_a, rem_b);
      total += mass * pow_p(std::abs(a.support(ia[i], 0) - b.support(ib[j], 0)), p);
      rem_a -= mass;
      rem_b -= mass;
      // Advance whichever side is exhausted; both on an exact tie.
      const bool next_a = rem_a <= rem_b;
      const bool next_b = rem_b <= rem_a;
      if (next_a && ++i < ia.size()) rem_a = a.weights(ia[i]);
      if (next_b && ++j < ib.size()) rem_b = b.weights(ib[j]);
    }
    return total;
  }

  const bool uniform_a = (a.weights.array() == a.weights(0)).all();
  const bool uniform_b = (b.weights.array() == b.weights(0)).all();
  if (uniform_a && uniform_b && a.size() == b.size() && a.size() <= 64) {
    const CostMatrix cost = ground_cost(a, b, p);
    const auto match = min_cost_assignment(cost.entries);
    double total = 0.0;
    for (std::size_t r = 0; r < match.size(); ++r) {
      total += cost.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(match[r]));
    }
    return total / static_cast<double>(a.size());
  }
  throw DataError(
      "exact_distance_oracle supports 1-D measures or uniform measures of equal size <= 64; "
      "use sinkhorn_distance for this shape");
}

std::size_t default_support_size(std::span<const DiscreteMeasure> measures,
                                 std::span<const double> lambdas) {
  double total = 0.0;
  for (std::size_t i = 0; i < measures.size() && i < lambdas.size(); ++i) {
    total += lambdas[i] * static_cast<double>(measures[i].size());
  }
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(total)));
}

BarycenterResult wasserstein_barycenter(std::span<const DiscreteMeasure> measures,
                                        std::span<const double> lambdas, std::size_t support_size,
                                        const BarycenterOptions& options) {
  if (measures.size() < 2) throw DataError("barycenter needs at least two measures");
  if (lambdas.size() != measures.size()) {
    throw DataError("barycenter needs one lambda per measure");
  }
  double lambda_sum = 0.0;
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw DataError("barycenter lambdas must be nonnegative");
    lambda_sum += l;
  }
  if (std::abs(lambda_sum - 1.0) > kWeightTolerance) {
    throw DataError("barycenter lambdas must sum to 1");
  }
  for (const auto& m : measures) {
    m.validate();
    if (m.dim() != measures[0].dim()) {
      std::ostringstream msg;
      msg << "barycenter dimension mismatch: d=" << measures[0].dim() << " vs d=" << m.dim();
      throw DataError(msg.str());
    }
  }
  if (!(options.p >= 1.0)) throw ConfigError("ground cost order p must be >= 1");
  if (support_size == 0) support_size = default_support_size(measures, lambdas);

  const std::size_t dominant = static_cast<std::size_t>(
      std::max_element(lambdas.begin(), lambdas.end()) - lambdas.begin());
  const DiscreteMeasure& seed = measures[dominant];
  Eigen::MatrixXd support(static_cast<Eigen::Index>(support_size), seed.support.cols());
  for (std::size_t k = 0; k < support_size; ++k) {
    const std::size_t src = k * seed.size() / support_size;
    support.row(static_cast<Eigen::Index>(k)) = seed.support.row(static_cast<Eigen::Index>(src));
  }
  const Eigen::VectorXd weights =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(support_size), 1.0 / static_cast<double>(support_size));

  auto costs_for = [&](const Eigen::MatrixXd& pts) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(measures.size());
    const DiscreteMeasure current(pts, weights);
    for (const auto& m : measures) out.push_back(ground_cost(current, m, options.p).entries);
    return out;
  };

  std::vector<Eigen::MatrixXd> costs = costs_for(support);
  double eps = 0.0;
  if (options.epsilon) {
    if (!(*options.epsilon > 0.0)) throw ConfigError("barycenter epsilon must be positive");
    eps = *options.epsilon;
  } else {
    std::vector<double> all;
    for (const auto& c : costs) all.insert(all.end(), c.data(), c.data() + c.size());
    eps = default_epsilon(Eigen::Map<Eigen::MatrixXd>(all.data(), static_cast<Eigen::Index>(all.size()), 1),
                          options.eps_scale);
  }

  auto solve_all = [&](const std::vector<Eigen::MatrixXd>& cs, std::vector<TransportPlan>& plans,
                       double& transport) {
    plans.clear();
    double objective = 0.0;
    transport = 0.0;
    for (std::size_t i = 0; i < measures.size(); ++i) {
      plans.push_back(sinkhorn_solve(cs[i], weights, measures[i].weights, eps, options.max_iter,
                                     options.tol));
      objective += lambdas[i] * plans.back().regularized_cost;
      transport += lambdas[i] * plans.back().cost;
    }
    return objective;
  };

  BarycenterResult result;
  result.epsilon = eps;

  // Copies of a single measure are their own barycenter; zero-weight
  // measures do not take part.
  bool all_identical = true;
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (lambdas[i] > 0.0 && !(measures[i].size() == seed.size() && measures[i] == seed)) all_identical = false;
  }
  if (all_identical && support_size == seed.size() &&
      (seed.weights.array() == weights(0)).all()) {
    result.barycenter = seed;
    result.objective_trace.push_back(0.0);
    result.regularized_trace.push_back(0.0);
    return result;
  }

  std::vector<TransportPlan> plans;
  double transport = 0.0;
  double objective = solve_all(costs, plans, transport);
  result.objective_trace.push_back(transport);
  result.regularized_trace.push_back(objective);

  for (std::size_t outer = 0; outer < options.outer_iter; ++outer) {
    // Barycentric projection: each support point moves to the lambda-weighted
    // mean of where its mass is sent.
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(support.rows(), support.cols());
    for (std::size_t i = 0; i < measures.size(); ++i) {
      if (lambdas[i] == 0.0) continue;
      next.noalias() += lambdas[i] * (plans[i].coupling * measures[i].support);
    }
    next = weights.cwiseInverse().asDiagonal() * next;
    const double displacement = (next - support).rowwise().norm().maxCoeff();

    std::vector<TransportPlan> next_plans;
    std::vector<Eigen::MatrixXd> next_costs = costs_for(next);
    double next_transport = 0.0;
    const double next_objective = solve_all(next_costs, next_plans, next_transport);
    // The projection is the exact minimizer only for p = 2; other orders keep
    // the last non-worsening support.
    if (options.p != 2.0 && next_objective > objective) break;

    support = std::move(next);
    costs = std::move(next_costs);
    plans = std::move(next_plans);
    objective = next_objective;
    result.objective_trace.push_back(next_transport);
    result.regularized_trace.push_back(objective);
    ++result.updates;
    if (displacement < options.displacement_tol) break;
  }

  result.barycenter = DiscreteMeasure(std::move(support), weights);
  return result;
}

}  // namespace allwas
