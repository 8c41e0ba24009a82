#pragma once

#include <functional>

#include <Eigen/Dense>

#include "conquer/features.hpp"
#include "conquer/mining.hpp"

namespace conquer {

/// Trade-off weights of the composite objective
///   L = L_align + alpha * L_neg + beta * L_OT
/// together with the shape parameters of the two component losses.
struct LossWeights {
  double alpha = 0.5;
  double beta = 0.1;
  double temperature = 0.07;
  double margin = 0.2;

  void validate() const;
};

struct LossReport {
  double align = 0.0;
  double neg = 0.0;
  double ot = 0.0;
  double total = 0.0;
};

/// Symmetric InfoNCE over a square similarity matrix: the mean of the
/// image-to-text (row) and text-to-image (column) cross entropies with the
/// matched pair on the diagonal.
double align_loss(const SimilarityMatrix& s, double temperature);
double align_loss(const Eigen::MatrixXd& s, double temperature);

/// d align_loss / d S.
Eigen::MatrixXd align_loss_grad(const Eigen::MatrixXd& s, double temperature);

/// Mean hinge max(0, margin - (S_ii - S_ij)) over the mined negatives; 0 when
/// there are none.
double neg_loss(const SimilarityMatrix& s, const NegativeSet& negatives, double margin);
double neg_loss(const Eigen::MatrixXd& s, const NegativeSet& negatives, double margin);

LossReport care_loss(double align, double neg, double ot, const LossWeights& w);

using ScalarFunction = std::function<double(const Eigen::VectorXd&)>;

/// Central differences (f(x + h e_k) - f(x - h e_k)) / 2h for every coordinate.
Eigen::VectorXd finite_diff_grad(const ScalarFunction& f, const Eigen::VectorXd& x,
                                 double h);

/// Matrix-shaped convenience wrapper; the matrix is flattened column-major.
Eigen::MatrixXd finite_diff_grad_matrix(const std::function<double(const Eigen::MatrixXd&)>& f,
                                        const Eigen::MatrixXd& x, double h);

}  // namespace conquer
