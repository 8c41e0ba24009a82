#pragma once

#include <optional>

#include <Eigen/Dense>

#include "conquer/features.hpp"

namespace conquer {

enum class CostKind { CosineDistance, Bilinear };

/// The contextual dissimilarity f(v, w) between an image token and a text token.
/// Bilinear carries a d x d parameter matrix A and yields 1 - v^T A w; with
/// A = I it coincides with cosine distance on unit-norm tokens.
struct CostFunction {
  CostKind kind = CostKind::CosineDistance;
  std::optional<Eigen::MatrixXd> weight;
};

/// M x N cost matrix between the columns of V (d x M) and W (d x N).
Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& image_tokens,
                            const Eigen::MatrixXd& text_tokens, const CostFunction& f);

struct SinkhornOptions {
  double epsilon = 0.05;
  int max_iters = 1000;
  double tolerance = 1e-6;
};

struct TransportProblem {
  Eigen::MatrixXd cost;
  Eigen::VectorXd row_marginal;
  Eigen::VectorXd col_marginal;
  SinkhornOptions options;

  /// Problem with uniform marginals 1/M and 1/N.
  static TransportProblem uniform(Eigen::MatrixXd cost, SinkhornOptions options = {});
};

struct TransportPlan {
  Eigen::MatrixXd plan;
  int iterations_used = 0;
  double marginal_error = 0.0;
  bool converged = false;
};

/// Entropic OT: minimizes <T, C> + epsilon * sum T (log T - 1) over couplings
/// of the two marginals, by alternating log-domain updates of the dual
/// potentials. Marginal error is max(||T 1 - a||_1, ||T^T 1 - b||_1) and is
/// checked after every full sweep. Zero-mass marginal entries pin the matching
/// row or column of the plan to zero.
TransportPlan sinkhorn(const TransportProblem& problem);

/// <T, C>.
double transport_cost(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& cost);

/// <T, C> + epsilon * sum T (log T - 1), with 0 log 0 = 0.
double entropic_objective(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& cost,
                          double epsilon);

/// Mean over rows of KL(rowsoftmax(T) || rowsoftmax(S_loc)). Softmax is taken
/// over the raw plan entries.
double ot_kl_loss(const TransportPlan& t, const SimilarityMatrix& s_loc);
double ot_kl_loss(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& s_loc);

/// Gradient of ot_kl_loss with respect to S_loc, holding T fixed:
/// row m is (rowsoftmax(S_loc)_m - rowsoftmax(T)_m) / M.
Eigen::MatrixXd ot_kl_grad(const TransportPlan& t, const SimilarityMatrix& s_loc);
Eigen::MatrixXd ot_kl_grad(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& s_loc);

/// Numerically stable softmax applied to each row independently.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& x);

}  // namespace conquer
