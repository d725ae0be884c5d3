#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dualmc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fully connected network: tanh on hidden layers, linear output. Parameters
// live in one flat vector (per layer: W row-major out x in, then b) so an
// optimizer and finite-difference checks can treat them uniformly.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {input, hidden..., output}. Orthogonal initialization with gain
  // sqrt(2) on hidden layers and `output_gain` on the last layer; biases zero.
  Mlp(std::vector<std::size_t> sizes, double output_gain, std::mt19937_64& rng);

  // Activations kept from a batched forward pass, needed by backward().
  struct Tape {
    std::vector<RowMatrix> activations;  // [0] = input, [L] = output
  };

  // Batched forward pass: x is batch x input. Returns batch x output.
  RowMatrix forward(const RowMatrix& x, Tape* tape = nullptr) const;
  // Accumulates dLoss/dparams into grad given dLoss/doutput (batch x output).
  void backward(const Tape& tape, const RowMatrix& grad_output, std::span<double> grad) const;

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t input_size() const noexcept { return sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.back(); }
  std::vector<double>& params() noexcept { return params_; }
  const std::vector<double>& params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  bool operator==(const Mlp&) const = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer + 1] * sizes_[layer];
  }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Adam with bias correction; the moment buffers are sized on first use.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<double> params, std::span<const double> grad);
  void set_learning_rate(double lr) noexcept { lr_ = lr; }
  double learning_rate() const noexcept { return lr_; }
  std::uint64_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

// Scales grad in place so its L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_grad_norm(std::span<double> grad, double max_norm);

}  // namespace dualmc
