#pragma once

// Discrete optimal transport: ground costs, entropic Sinkhorn, exact oracles
// for small shapes, and free-support Wasserstein barycenters.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace allwas {

/// Weighted point cloud: `support` holds one point per row.
struct DiscreteMeasure {
  Eigen::MatrixXd support;
  Eigen::VectorXd weights;

  DiscreteMeasure() = default;
  DiscreteMeasure(Eigen::MatrixXd support_points, Eigen::VectorXd point_weights);

  static DiscreteMeasure uniform(Eigen::MatrixXd support_points);
  static DiscreteMeasure dirac(const Eigen::VectorXd& point);

  std::size_t size() const { return static_cast<std::size_t>(support.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(support.cols()); }

  /// Throws DataError unless n >= 1, coordinates are finite, weights are
  /// nonnegative and sum to 1 within 1e-9.
  void validate() const;

  bool operator==(const DiscreteMeasure& other) const;
};

struct CostMatrix {
  Eigen::MatrixXd entries;
  double order = 2.0;
};

struct TransportPlan {
  Eigen::MatrixXd coupling;
  /// Transport cost sum(coupling .* C), i.e. W_p^p without the 1/p root.
  double cost = 0.0;
  /// cost + eps * KL(coupling | a b^T); the quantity Sinkhorn minimizes.
  double regularized_cost = 0.0;
  double epsilon = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  /// L1 violation of row plus column marginals at exit.
  double marginal_violation = 0.0;
};

struct SinkhornOptions {
  double p = 2.0;
  /// Absolute regularization; when unset eps = eps_scale * median(C), floored at 1e-6.
  std::optional<double> epsilon;
  double eps_scale = 0.05;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
};

/// entries[j][k] = ||a_j - b_k||_2^p.
CostMatrix ground_cost(const DiscreteMeasure& a, const DiscreteMeasure& b, double p = 2.0);

/// scale * median of the entries, floored at 1e-6.
double default_epsilon(const Eigen::MatrixXd& cost, double scale = 0.05);

/// Entropic OT between two validated measures.
TransportPlan sinkhorn_distance(const DiscreteMeasure& a, const DiscreteMeasure& b,
                                const SinkhornOptions& options = {});

/// Sinkhorn on a precomputed cost matrix and marginals. Single-point
/// marginals and 2x2 problems are solved in closed form; otherwise scaling
/// iterations run in the kernel domain while the Gibbs kernel is well
/// conditioned and in the log domain otherwise.
TransportPlan sinkhorn_solve(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b, double epsilon, std::size_t max_iter,
                             double tol);

/// Log-domain iterations only; exposed so tests can cross-check the fast paths.
TransportPlan sinkhorn_solve_log(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& b, double epsilon, std::size_t max_iter,
                                 double tol);

/// Minimum-cost perfect matching on a square matrix (Hungarian, O(n^3)).
/// Returns the column assigned to each row.
std::vector<std::size_t> min_cost_assignment(const Eigen::MatrixXd& cost);

/// Exact W_p^p for two 1-D measures (monotone quantile coupling) or two
/// uniform measures of equal size n <= 64 (assignment). Other shapes throw
/// DataError pointing at sinkhorn_distance.
double exact_distance_oracle(const DiscreteMeasure& a, const DiscreteMeasure& b, double p = 2.0);

struct BarycenterOptions {
  double p = 2.0;
  std::optional<double> epsilon;
  double eps_scale = 0.05;
  std::size_t outer_iter = 10;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
  double displacement_tol = 1e-7;
};

struct BarycenterResult {
  DiscreteMeasure barycenter;
  /// sum_i lambda_i * W_p^p(current, nu_i) from the Sinkhorn plans, one entry
  /// per support state visited (initial state first).
  std::vector<double> objective_trace;
  /// Same with the entropic term included; non-increasing for p = 2.
  std::vector<double> regularized_trace;
  double epsilon = 0.0;
  std::size_t updates = 0;
};

/// round(sum_i lambda_i n_i), at least 1.
std::size_t default_support_size(std::span<const DiscreteMeasure> measures,
                                 std::span<const double> lambdas);

/// Free-support fixed-point barycenter with uniform weights over
/// `support_size` points (0 selects default_support_size).
BarycenterResult wasserstein_barycenter(std::span<const DiscreteMeasure> measures,
                                        std::span<const double> lambdas,
                                        std::size_t support_size = 0,
                                        const BarycenterOptions& options = {});

}  // namespace allwas
