#include "kktleak/network.hpp"

#include "kktleak/error.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace kktleak {
namespace {

bool all_finite(const Eigen::Ref<const MatrixXd>& m) {
  return m.array().isFinite().all();
}

std::string shape(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace

NetworkParams::NetworkParams(MatrixXd weights, VectorXd biases,
                             VectorXd output_weights)
    : weights_(std::move(weights)),
      biases_(std::move(biases)),
      output_weights_(std::move(output_weights)) {
  if (weights_.rows() < 1 || weights_.cols() < 1) {
    throw InvalidInput("network needs width >= 1 and input_dim >= 1, got " +
                       shape(weights_.rows(), weights_.cols()));
  }
  if (biases_.size() != weights_.rows() ||
      output_weights_.size() != weights_.rows()) {
    throw InvalidInput("network width mismatch: weights " +
                       shape(weights_.rows(), weights_.cols()) + ", biases " +
                       std::to_string(biases_.size()) + ", output weights " +
                       std::to_string(output_weights_.size()));
  }
  if (!all_finite(weights_) || !all_finite(biases_) ||
      !all_finite(output_weights_)) {
    throw InvalidInput("network parameters must be finite");
  }
}

NetworkParams::NetworkParams(const std::vector<Neuron>& neurons)
    : NetworkParams([&] {
        if (neurons.empty()) throw InvalidInput("network needs at least one neuron");
        const Index d = neurons.front().w.size();
        MatrixXd w(static_cast<Index>(neurons.size()), d);
        for (std::size_t j = 0; j < neurons.size(); ++j) {
          if (neurons[j].w.size() != d) {
            throw InvalidInput("neuron " + std::to_string(j) +
                               " has a weight vector of the wrong length");
          }
          w.row(static_cast<Index>(j)) = neurons[j].w.transpose();
        }
        return w;
      }(),
                    [&] {
                      VectorXd b(static_cast<Index>(neurons.size()));
                      for (std::size_t j = 0; j < neurons.size(); ++j) b(j) = neurons[j].b;
                      return b;
                    }(),
                    [&] {
                      VectorXd v(static_cast<Index>(neurons.size()));
                      for (std::size_t j = 0; j < neurons.size(); ++j) v(j) = neurons[j].v;
                      return v;
                    }()) {}

NetworkParams NetworkParams::zeros(Index input_dim, Index width) {
  return NetworkParams(MatrixXd::Zero(width, input_dim), VectorXd::Zero(width),
                       VectorXd::Zero(width));
}

Neuron NetworkParams::neuron(Index j) const {
  return Neuron{weights_.row(j).transpose(), biases_(j), output_weights_(j)};
}

std::vector<Neuron> NetworkParams::neurons() const {
  std::vector<Neuron> out;
  out.reserve(static_cast<std::size_t>(width()));
  for (Index j = 0; j < width(); ++j) out.push_back(neuron(j));
  return out;
}

double NetworkParams::squared_norm() const {
  return weights_.squaredNorm() + biases_.squaredNorm() +
         output_weights_.squaredNorm();
}

double NetworkParams::norm() const { return std::sqrt(squared_norm()); }

NetworkParams NetworkParams::scaled(double factor) const {
  return NetworkParams(weights_ * factor, biases_ * factor,
                       output_weights_ * factor);
}

NetworkParams NetworkParams::axpy(double step,
                                  const NetworkParams& direction) const {
  if (direction.width() != width() || direction.input_dim() != input_dim()) {
    throw DimensionMismatch("axpy: parameter shapes differ");
  }
  return NetworkParams(weights_ + step * direction.weights_,
                       biases_ + step * direction.biases_,
                       output_weights_ + step * direction.output_weights_);
}

VectorXd NetworkParams::flatten() const {
  const Index k = width();
  const Index d = input_dim();
  VectorXd flat(k * d + 2 * k);
  for (Index j = 0; j < k; ++j) flat.segment(j * d, d) = weights_.row(j).transpose();
  flat.segment(k * d, k) = biases_;
  flat.segment(k * d + k, k) = output_weights_;
  return flat;
}

NetworkParams NetworkParams::unflatten(const VectorXd& flat, Index input_dim,
                                       Index width) {
  if (flat.size() != width * input_dim + 2 * width) {
    throw DimensionMismatch("unflatten: vector of length " +
                            std::to_string(flat.size()) +
                            " does not match d=" + std::to_string(input_dim) +
                            ", k=" + std::to_string(width));
  }
  MatrixXd w(width, input_dim);
  for (Index j = 0; j < width; ++j) {
    w.row(j) = flat.segment(j * input_dim, input_dim).transpose();
  }
  return NetworkParams(std::move(w), flat.segment(width * input_dim, width),
                       flat.segment(width * input_dim + width, width));
}

NetworkParams NetworkParams::with_neurons(const std::vector<Neuron>& extra) const {
  std::vector<Neuron> all = neurons();
  all.insert(all.end(), extra.begin(), extra.end());
  return NetworkParams(all);
}

LabeledDataset::LabeledDataset(MatrixXd points, VectorXd labels)
    : points_(std::move(points)), labels_(std::move(labels)) {
  if (points_.rows() < 1 || points_.cols() < 1) {
    throw InvalidInput("dataset needs at least one point of dimension >= 1");
  }
  if (labels_.size() != points_.rows()) {
    throw DimensionMismatch("dataset has " + std::to_string(points_.rows()) +
                            " points but " + std::to_string(labels_.size()) +
                            " labels");
  }
  if (!all_finite(points_)) throw InvalidInput("dataset points must be finite");
  for (Index i = 0; i < labels_.size(); ++i) {
    if (labels_(i) != 1.0 && labels_(i) != -1.0) {
      throw InvalidInput("label of point " + std::to_string(i) +
                         " is not -1 or +1");
    }
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<Index>& rows) const {
  MatrixXd p(static_cast<Index>(rows.size()), dim());
  VectorXd y(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= size()) throw InvalidInput("subset: row out of range");
    p.row(static_cast<Index>(r)) = points_.row(rows[r]);
    y(static_cast<Index>(r)) = labels_(rows[r]);
  }
  return LabeledDataset(std::move(p), std::move(y));
}

double forward(const NetworkParams& net, const Eigen::Ref<const VectorXd>& x) {
  if (x.size() != net.input_dim()) {
    throw DimensionMismatch("input has dimension " + std::to_string(x.size()) +
                            ", network expects " +
                            std::to_string(net.input_dim()));
  }
  const VectorXd z = net.weights() * x + net.biases();
  return net.output_weights().dot(z.cwiseMax(0.0));
}

MatrixXd pre_activations(const NetworkParams& net, const MatrixXd& points) {
  if (points.cols() != net.input_dim()) {
    throw DimensionMismatch("points have dimension " +
                            std::to_string(points.cols()) +
                            ", network expects " +
                            std::to_string(net.input_dim()));
  }
  MatrixXd z = points * net.weights().transpose();
  z.rowwise() += net.biases().transpose();
  return z;
}

VectorXd forward_batch(const NetworkParams& net, const MatrixXd& points) {
  return pre_activations(net, points).cwiseMax(0.0) * net.output_weights();
}

}  // namespace kktleak
