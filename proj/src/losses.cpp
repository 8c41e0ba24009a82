#include "conquer/losses.hpp"

#include <cmath>

#include "conquer/error.hpp"

namespace conquer {

namespace {

void require_square(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols() || s.rows() == 0) {
    fail(Errc::NonSquareMatrix, "expected a nonempty square matrix, got " +
                                    std::to_string(s.rows()) + "x" + std::to_string(s.cols()));
  }
}

void require_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(Errc::InvalidArgument, "temperature must be positive");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(margin >= 0.0)) {
    fail(Errc::InvalidArgument, "alpha, beta and margin must be nonnegative");
  }
  require_temperature(temperature);
}

double align_loss(const Eigen::MatrixXd& s, double temperature) {
  require_square(s);
  require_temperature(temperature);
  const Eigen::MatrixXd logits = s / temperature;
  const auto b = logits.rows();
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double row_max = logits.row(i).maxCoeff();
    const double row_lse = row_max + std::log((logits.row(i).array() - row_max).exp().sum());
    const double col_max = logits.col(i).maxCoeff();
    const double col_lse = col_max + std::log((logits.col(i).array() - col_max).exp().sum());
    total += (row_lse - logits(i, i)) + (col_lse - logits(i, i));
  }
  return total / (2.0 * static_cast<double>(b));
}

double align_loss(const SimilarityMatrix& s, double temperature) {
  return align_loss(s.values, temperature);
}

Eigen::MatrixXd align_loss_grad(const Eigen::MatrixXd& s, double temperature) {
  require_square(s);
  require_temperature(temperature);
  const Eigen::MatrixXd logits = s / temperature;
  const auto b = logits.rows();
  Eigen::MatrixXd row_p(b, b);
  Eigen::MatrixXd col_p(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    row_p.row(i) = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
    row_p.row(i) /= row_p.row(i).sum();
    col_p.col(i) = (logits.col(i).array() - logits.col(i).maxCoeff()).exp().matrix();
    col_p.col(i) /= col_p.col(i).sum();
  }
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(b, b);
  return (row_p + col_p - 2.0 * identity) / (2.0 * static_cast<double>(b) * temperature);
}

double neg_loss(const Eigen::MatrixXd& s, const NegativeSet& negatives, double margin) {
  if (negatives.entries.empty()) return 0.0;
  double total = 0.0;
  for (const Negative& n : negatives.entries) {
    const auto i = static_cast<Eigen::Index>(n.row);
    const auto j = static_cast<Eigen::Index>(n.col);
    if (i >= s.rows() || j >= s.cols() || i >= s.cols()) {
      fail(Errc::IndexOutOfRange, "negative (" + std::to_string(n.row) + ", " +
                                      std::to_string(n.col) + ") outside the matrix");
    }
    total += std::max(0.0, margin - (s(i, i) - s(i, j)));
  }
  return total / static_cast<double>(negatives.entries.size());
}

double neg_loss(const SimilarityMatrix& s, const NegativeSet& negatives, double margin) {
  return neg_loss(s.values, negatives, margin);
}

LossReport care_loss(double align, double neg, double ot, const LossWeights& w) {
  if (!std::isfinite(align) || !std::isfinite(neg) || !std::isfinite(ot)) {
    fail(Errc::NonFiniteInput, "loss components must be finite");
  }
  LossReport r;
  r.align = align;
  r.neg = neg;
  r.ot = ot;
  r.total = align + w.alpha * neg + w.beta * ot;
  return r;
}

Eigen::VectorXd finite_diff_grad(const ScalarFunction& f, const Eigen::VectorXd& x,
                                 double h) {
  if (!(h > 0.0)) fail(Errc::InvalidArgument, "step h must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    probe(k) = x(k) + h;
    const double up = f(probe);
    probe(k) = x(k) - h;
    const double down = f(probe);
    probe(k) = x(k);
    if (!std::isfinite(up) || !std::isfinite(down)) {
      fail(Errc::NonFiniteEvaluation,
           "function is not finite near coordinate " + std::to_string(k));
    }
    g(k) = (up - down) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd finite_diff_grad_matrix(const std::function<double(const Eigen::MatrixXd&)>& f,
                                        const Eigen::MatrixXd& x, double h) {
  const auto rows = x.rows();
  const auto cols = x.cols();
  const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
  const Eigen::VectorXd g = finite_diff_grad(
      [&](const Eigen::VectorXd& v) {
        return f(Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols));
      },
      flat, h);
  return Eigen::Map<const Eigen::MatrixXd>(g.data(), rows, cols);
}

}  // namespace conquer
