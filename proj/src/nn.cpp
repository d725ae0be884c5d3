#include "dualmc/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "dualmc/error.hpp"

namespace dualmc {
namespace {

// Rows x cols block with orthonormal rows or columns (whichever is shorter),
// from the QR decomposition of a Gaussian matrix.
Eigen::MatrixXd orthogonal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool tall = rows >= cols;
  const auto r = static_cast<Eigen::Index>(tall ? rows : cols);
  const auto c = static_cast<Eigen::Index>(tall ? cols : rows);
  Eigen::MatrixXd g(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  // Sign fix so the distribution is uniform over orthogonal matrices.
  const Eigen::MatrixXd rr = qr.matrixQR();
  for (Eigen::Index j = 0; j < c; ++j)
    if (rr(j, j) < 0) q.col(j) *= -1.0;
  if (tall) return q;
  return q.transpose();
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> sizes, double output_gain, std::mt19937_64& rng)
    : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw InvalidConfig("an MLP needs at least input and output sizes");
  for (auto s : sizes_)
    if (s == 0) throw InvalidConfig("MLP layer sizes must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const double gain = (l + 1 == layers) ? output_gain : std::sqrt(2.0);
    const Eigen::MatrixXd w = gain * orthogonal(sizes_[l + 1], sizes_[l], rng);
    Eigen::Map<RowMatrix> dst(params_.data() + weight_offset(l), static_cast<Eigen::Index>(sizes_[l + 1]),
                              static_cast<Eigen::Index>(sizes_[l]));
    dst = w;
  }
}

RowMatrix Mlp::forward(const RowMatrix& x, Tape* tape) const {
  if (static_cast<std::size_t>(x.cols()) != input_size())
    throw LengthMismatch("MLP input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(input_size()));
  const std::size_t layers = sizes_.size() - 1;
  if (tape) {
    tape->activations.clear();
    tape->activations.reserve(layers + 1);
    tape->activations.push_back(x);
  }
  RowMatrix h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    Eigen::Map<const RowMatrix> w(params_.data() + weight_offset(l), out, in);
    Eigen::Map<const Eigen::RowVectorXd> b(params_.data() + bias_offset(l), out);
    RowMatrix z = h * w.transpose();
    z.rowwise() += b;
    if (l + 1 < layers) z = z.array().tanh();
    h = std::move(z);
    if (tape) tape->activations.push_back(h);
  }
  return h;
}

void Mlp::backward(const Tape& tape, const RowMatrix& grad_output, std::span<double> grad) const {
  const std::size_t layers = sizes_.size() - 1;
  if (tape.activations.size() != layers + 1) throw std::logic_error("tape does not match network");
  if (grad.size() != params_.size()) throw LengthMismatch("gradient buffer size mismatch");
  RowMatrix delta = grad_output;  // dL/dz for the current layer
  for (std::size_t li = layers; li-- > 0;) {
    const auto out = static_cast<Eigen::Index>(sizes_[li + 1]);
    const auto in = static_cast<Eigen::Index>(sizes_[li]);
    const RowMatrix& input = tape.activations[li];
    Eigen::Map<RowMatrix> gw(grad.data() + weight_offset(li), out, in);
    Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + bias_offset(li), out);
    gw.noalias() += delta.transpose() * input;
    gb += delta.colwise().sum();
    if (li == 0) break;
    Eigen::Map<const RowMatrix> w(params_.data() + weight_offset(li), out, in);
    RowMatrix upstream = delta * w;
    // input is tanh output of the previous layer: d tanh = 1 - a^2.
    delta = upstream.array() * (1.0 - input.array().square());
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) throw LengthMismatch("Adam: params and grad differ in size");
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (double& g : grad) g *= scale;
  }
  return norm;
}

}  // namespace dualmc
