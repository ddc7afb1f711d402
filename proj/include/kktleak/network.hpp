#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace kktleak {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One hidden unit of the network: v * max(0, w.x + b).
struct Neuron {
  VectorXd w;
  double b = 0.0;
  double v = 0.0;
};

/**
 * Parameters of a homogeneous two-layer ReLU network
 *
 *   Phi(x) = sum_j v_j * max(0, w_j . x + b_j)
 *
 * There is no output bias, so scaling every parameter by t > 0 scales the
 * output by t^2. Row j of weights() is w_j. Instances are immutable.
 */
class NetworkParams {
 public:
  /// Throws InvalidInput on shape disagreement or non-finite entries.
  NetworkParams(MatrixXd weights, VectorXd biases, VectorXd output_weights);
  explicit NetworkParams(const std::vector<Neuron>& neurons);

  static NetworkParams zeros(Index input_dim, Index width);

  Index input_dim() const { return weights_.cols(); }
  Index width() const { return weights_.rows(); }

  const MatrixXd& weights() const { return weights_; }
  const VectorXd& biases() const { return biases_; }
  const VectorXd& output_weights() const { return output_weights_; }

  Neuron neuron(Index j) const;
  std::vector<Neuron> neurons() const;

  /// ||theta||^2 over all parameters.
  double squared_norm() const;
  double norm() const;

  /// Every parameter multiplied by `factor`.
  NetworkParams scaled(double factor) const;

  /// theta + step * direction; `direction` must have the same shape.
  NetworkParams axpy(double step, const NetworkParams& direction) const;

  /// Flat layout: weights row-major (k*d), then biases (k), then output
  /// weights (k).
  VectorXd flatten() const;
  static NetworkParams unflatten(const VectorXd& flat, Index input_dim,
                                 Index width);

  /// A copy with the given extra neurons appended.
  NetworkParams with_neurons(const std::vector<Neuron>& extra) const;

 private:
  MatrixXd weights_;
  VectorXd biases_;
  VectorXd output_weights_;
};

/// Binary-labelled training set; rows of points() are the x_i and labels are
/// exactly -1 or +1.
class LabeledDataset {
 public:
  LabeledDataset(MatrixXd points, VectorXd labels);

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  const MatrixXd& points() const { return points_; }
  const VectorXd& labels() const { return labels_; }

  LabeledDataset subset(const std::vector<Index>& rows) const;

 private:
  MatrixXd points_;
  VectorXd labels_;
};

/// Phi(theta; x) for a single input. Throws DimensionMismatch.
double forward(const NetworkParams& net, const Eigen::Ref<const VectorXd>& x);

/// Phi(theta; x_i) for every row of `points`.
VectorXd forward_batch(const NetworkParams& net, const MatrixXd& points);

/// Pre-activations Z(i, j) = w_j . x_i + b_j.
MatrixXd pre_activations(const NetworkParams& net, const MatrixXd& points);

}  // namespace kktleak
