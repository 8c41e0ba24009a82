#include "conquer/ot.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "conquer/error.hpp"

namespace conquer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMarginalSumTolerance = 1e-9;
constexpr double kEpsilonDecay = 0.5;
constexpr double kStageToleranceRatio = 1e-3;
constexpr double kNewtonRidge = 1e-12;

std::string shape(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void check_marginal(const Eigen::VectorXd& m, Eigen::Index expected, const char* which) {
  if (m.size() != expected) {
    fail(Errc::InvalidMarginal, std::string(which) + " marginal has length " +
                                    std::to_string(m.size()) + ", expected " +
                                    std::to_string(expected));
  }
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m(i)) || m(i) < 0.0) {
      fail(Errc::InvalidMarginal, std::string(which) + " marginal has a negative or "
                                                       "non-finite entry");
    }
  }
  const double total = m.sum();
  if (total == 0.0) {
    fail(Errc::DegenerateMarginal, std::string(which) + " marginal has no mass");
  }
  if (std::abs(total - 1.0) > kMarginalSumTolerance) {
    fail(Errc::InvalidMarginal, std::string(which) + " marginal sums to " +
                                    std::to_string(total));
  }
}

// log sum_j exp(x_j), with all -inf entries yielding -inf.
template <typename Vec>
double log_sum_exp(const Vec& x) {
  const double top = x.maxCoeff();
  if (top == kNegInf) return kNegInf;
  return top + std::log((x.array() - top).exp().sum());
}

Eigen::VectorXd log_of(const Eigen::VectorXd& m) {
  Eigen::VectorXd out(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    out(i) = m(i) > 0.0 ? std::log(m(i)) : kNegInf;
  }
  return out;
}

Eigen::MatrixXd assemble_plan(const Eigen::MatrixXd& cost, const Eigen::VectorXd& f,
                              const Eigen::VectorXd& g, double eps) {
  Eigen::MatrixXd plan(cost.rows(), cost.cols());
  for (Eigen::Index n = 0; n < cost.cols(); ++n) {
    for (Eigen::Index m = 0; m < cost.rows(); ++m) {
      const double z = f(m) + g(n);
      plan(m, n) = z == kNegInf ? 0.0 : std::exp((z - cost(m, n)) / eps);
    }
  }
  return plan;
}

double marginal_error(const Eigen::MatrixXd& plan, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b) {
  const double rows = (plan.rowwise().sum() - a).cwiseAbs().sum();
  const double cols = (plan.colwise().sum().transpose() - b).cwiseAbs().sum();
  return std::max(rows, cols);
}

// One alternating update of the dual potentials:
//   f_m = eps log a_m - eps LSE_n((g_n - C_mn) / eps), then the same for g.
void sweep(const Eigen::MatrixXd& cost, const Eigen::VectorXd& log_a,
           const Eigen::VectorXd& log_b, double eps, Eigen::VectorXd& f,
           Eigen::VectorXd& g) {
  Eigen::VectorXd row(cost.cols());
  for (Eigen::Index m = 0; m < cost.rows(); ++m) {
    if (log_a(m) == kNegInf) {
      f(m) = kNegInf;
      continue;
    }
    for (Eigen::Index n = 0; n < cost.cols(); ++n) {
      row(n) = g(n) == kNegInf ? kNegInf : (g(n) - cost(m, n)) / eps;
    }
    f(m) = eps * (log_a(m) - log_sum_exp(row));
  }
  Eigen::VectorXd col(cost.rows());
  for (Eigen::Index n = 0; n < cost.cols(); ++n) {
    if (log_b(n) == kNegInf) {
      g(n) = kNegInf;
      continue;
    }
    for (Eigen::Index m = 0; m < cost.rows(); ++m) {
      col(m) = f(m) == kNegInf ? kNegInf : (f(m) - cost(m, n)) / eps;
    }
    g(n) = eps * (log_b(n) - log_sum_exp(col));
  }
}

// Dual objective of the entropic problem (concave in the potentials):
//   D(f, g) = <f, a> + <g, b> - eps * sum_mn exp((f_m + g_n - C_mn) / eps).
// Zero-mass entries are excluded through their -inf potentials.
double dual_objective(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b, double eps, const Eigen::VectorXd& f,
                      const Eigen::VectorXd& g) {
  double value = 0.0;
  for (Eigen::Index m = 0; m < f.size(); ++m) {
    if (f(m) != kNegInf) value += f(m) * a(m);
  }
  for (Eigen::Index n = 0; n < g.size(); ++n) {
    if (g(n) != kNegInf) value += g(n) * b(n);
  }
  return value - eps * assemble_plan(cost, f, g, eps).sum();
}

// Damped Newton ascent step on D over the active (finite) potentials. The
// Hessian is singular along (1, -1); the gauge is fixed by holding the last
// active column potential in place. Returns false when no ascent was found.
bool newton_step(const Eigen::MatrixXd& cost, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& b, double eps, Eigen::VectorXd& f,
                 Eigen::VectorXd& g) {
  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index m = 0; m < f.size(); ++m) {
    if (f(m) != kNegInf) rows.push_back(m);
  }
  for (Eigen::Index n = 0; n < g.size(); ++n) {
    if (g(n) != kNegInf) cols.push_back(n);
  }
  if (rows.empty() || cols.size() < 2) return false;

  const Eigen::MatrixXd plan = assemble_plan(cost, f, g, eps);
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(cols.size()) - 1;
  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(nr + nc, nr + nc);
  Eigen::VectorXd gradient(nr + nc);
  for (Eigen::Index i = 0; i < nr; ++i) {
    const double mass = plan.row(rows[i]).sum();
    hessian(i, i) = mass / eps;
    gradient(i) = a(rows[i]) - mass;
  }
  for (Eigen::Index j = 0; j < nc; ++j) {
    const double mass = plan.col(cols[j]).sum();
    hessian(nr + j, nr + j) = mass / eps;
    gradient(nr + j) = b(cols[j]) - mass;
    for (Eigen::Index i = 0; i < nr; ++i) {
      const double t = plan(rows[i], cols[j]) / eps;
      hessian(i, nr + j) = t;
      hessian(nr + j, i) = t;
    }
  }
  // Symmetric Jacobi scaling keeps the factorization stable when the plan
  // spans many orders of magnitude.
  const Eigen::VectorXd scale = hessian.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd scaled = scale.asDiagonal() * hessian * scale.asDiagonal();
  scaled.diagonal().array() += kNewtonRidge;
  const Eigen::LLT<Eigen::MatrixXd> factor(scaled);
  if (factor.info() != Eigen::Success) return false;
  const Eigen::VectorXd step =
      scale.asDiagonal() * factor.solve(scale.asDiagonal() * gradient);
  if (!step.allFinite()) return false;

  const double base = dual_objective(cost, a, b, eps, f, g);
  const double slope = gradient.dot(step);
  for (double t = 1.0; t > 1e-6; t *= 0.5) {
    Eigen::VectorXd f_try = f;
    Eigen::VectorXd g_try = g;
    for (Eigen::Index i = 0; i < nr; ++i) f_try(rows[i]) += t * step(i);
    for (Eigen::Index j = 0; j < nc; ++j) g_try(cols[j]) += t * step(nr + j);
    const double value = dual_objective(cost, a, b, eps, f_try, g_try);
    if (std::isfinite(value) && value >= base + 1e-4 * t * slope) {
      f = std::move(f_try);
      g = std::move(g_try);
      return true;
    }
  }
  return false;
}

void check_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(Errc::ShapeMismatch, "plan is " + shape(a) + " but S_loc is " + shape(b));
  }
  if (a.size() == 0) fail(Errc::ShapeMismatch, "empty matrices");
}

}  // namespace

Eigen::MatrixXd cost_matrix(const Eigen::MatrixXd& image_tokens,
                            const Eigen::MatrixXd& text_tokens, const CostFunction& f) {
  if (image_tokens.rows() != text_tokens.rows()) {
    fail(Errc::DimensionMismatch, "token dims differ: " + std::to_string(image_tokens.rows()) +
                                      " vs " + std::to_string(text_tokens.rows()));
  }
  switch (f.kind) {
    case CostKind::CosineDistance:
      return (1.0 - (image_tokens.transpose() * text_tokens).array()).matrix();
    case CostKind::Bilinear: {
      if (!f.weight) fail(Errc::MissingWeight, "bilinear cost needs a weight matrix");
      const Eigen::MatrixXd& a = *f.weight;
      if (a.rows() != image_tokens.rows() || a.cols() != text_tokens.rows()) {
        fail(Errc::DimensionMismatch, "bilinear weight is " + shape(a) + ", tokens have d=" +
                                          std::to_string(image_tokens.rows()));
      }
      return (1.0 - (image_tokens.transpose() * a * text_tokens).array()).matrix();
    }
  }
  fail(Errc::InvalidArgument, "unknown cost kind");
}

TransportProblem TransportProblem::uniform(Eigen::MatrixXd cost, SinkhornOptions options) {
  TransportProblem p;
  const auto m = cost.rows();
  const auto n = cost.cols();
  p.cost = std::move(cost);
  p.row_marginal = Eigen::VectorXd::Constant(m, m > 0 ? 1.0 / static_cast<double>(m) : 0.0);
  p.col_marginal = Eigen::VectorXd::Constant(n, n > 0 ? 1.0 / static_cast<double>(n) : 0.0);
  p.options = options;
  return p;
}

TransportPlan sinkhorn(const TransportProblem& problem) {
  const Eigen::MatrixXd& cost = problem.cost;
  const SinkhornOptions& opt = problem.options;
  if (cost.rows() == 0 || cost.cols() == 0) {
    fail(Errc::ShapeMismatch, "cost matrix is empty");
  }
  if (!cost.allFinite()) fail(Errc::NonFiniteCost, "cost matrix has non-finite entries");
  if (!(opt.epsilon > 0.0) || !std::isfinite(opt.epsilon)) {
    fail(Errc::InvalidArgument, "epsilon must be positive");
  }
  if (opt.max_iters <= 0) fail(Errc::InvalidArgument, "max_iters must be positive");
  if (!(opt.tolerance > 0.0)) fail(Errc::InvalidArgument, "tolerance must be positive");
  check_marginal(problem.row_marginal, cost.rows(), "row");
  check_marginal(problem.col_marginal, cost.cols(), "column");

  const double eps = opt.epsilon;
  const Eigen::VectorXd log_a = log_of(problem.row_marginal);
  const Eigen::VectorXd log_b = log_of(problem.col_marginal);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(cost.rows());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(cost.cols());

  TransportPlan out;
  // Epsilon scaling: start from a regularization comparable to the cost spread
  // and shrink it geometrically, warm-starting the potentials. Only the final
  // stage at the requested epsilon decides convergence.
  const double spread = cost.maxCoeff() - cost.minCoeff();
  double stage_eps = std::max(eps, spread);
  int it = 0;
  while (it < opt.max_iters) {
    const bool final_stage = stage_eps <= eps;
    const double stage_tol =
        final_stage ? opt.tolerance : std::max(opt.tolerance, kStageToleranceRatio * stage_eps);
    while (it < opt.max_iters) {
      ++it;
      sweep(cost, log_a, log_b, stage_eps, f, g);
      newton_step(cost, problem.row_marginal, problem.col_marginal, stage_eps, f, g);
      out.plan = assemble_plan(cost, f, g, stage_eps);
      out.marginal_error = marginal_error(out.plan, problem.row_marginal, problem.col_marginal);
      if (out.marginal_error <= stage_tol) break;
    }
    if (final_stage) break;
    stage_eps = std::max(eps, stage_eps * kEpsilonDecay);
  }
  out.iterations_used = it;
  out.converged = stage_eps <= eps && out.marginal_error <= opt.tolerance;
  return out;
}

double transport_cost(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& cost) {
  check_same_shape(plan, cost);
  return plan.cwiseProduct(cost).sum();
}

double entropic_objective(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& cost,
                          double epsilon) {
  double neg_entropy = 0.0;
  for (Eigen::Index i = 0; i < plan.size(); ++i) {
    const double t = plan.data()[i];
    if (t > 0.0) neg_entropy += t * (std::log(t) - 1.0);
  }
  return transport_cost(plan, cost) + epsilon * neg_entropy;
}

Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double top = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - top).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

double ot_kl_loss(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& s_loc) {
  check_same_shape(plan, s_loc);
  double total = 0.0;
  for (Eigen::Index m = 0; m < plan.rows(); ++m) {
    // KL(p||q) = sum p (log p - log q) with log-softmax in closed form.
    const Eigen::RowVectorXd t = plan.row(m);
    const Eigen::RowVectorXd s = s_loc.row(m);
    const double lse_t = log_sum_exp(t.transpose().eval());
    const double lse_s = log_sum_exp(s.transpose().eval());
    double kl = 0.0;
    for (Eigen::Index n = 0; n < plan.cols(); ++n) {
      const double log_p = t(n) - lse_t;
      const double log_q = s(n) - lse_s;
      kl += std::exp(log_p) * (log_p - log_q);
    }
    total += kl;
  }
  // Rounding can leave a tiny negative residue where p == q.
  return std::max(0.0, total / static_cast<double>(plan.rows()));
}

double ot_kl_loss(const TransportPlan& t, const SimilarityMatrix& s_loc) {
  return ot_kl_loss(t.plan, s_loc.values);
}

Eigen::MatrixXd ot_kl_grad(const Eigen::MatrixXd& plan, const Eigen::MatrixXd& s_loc) {
  check_same_shape(plan, s_loc);
  return (row_softmax(s_loc) - row_softmax(plan)) / static_cast<double>(plan.rows());
}

Eigen::MatrixXd ot_kl_grad(const TransportPlan& t, const SimilarityMatrix& s_loc) {
  return ot_kl_grad(t.plan, s_loc.values);
}

}  // namespace conquer
