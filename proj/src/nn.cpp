#include "hip/nn.hpp"

#include <cmath>

namespace hip::nn {

namespace {
using ConstMatMap = Eigen::Map<const Matrix>;
using MatMap = Eigen::Map<Matrix>;
using ConstRowMap = Eigen::Map<const Eigen::RowVectorXd>;
using RowMap = Eigen::Map<Eigen::RowVectorXd>;
}  // namespace

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw Error("an MLP needs at least input and output widths");
  offsets_.clear();
  param_count_ = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(param_count_);
    param_count_ += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
  }
}

void Mlp::init(std::span<double> params, Rng& rng) const {
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    double* w = params.data() + offsets_[l];
    for (int k = 0; k < in * out; ++k) w[k] = rng.uniform(-limit, limit);
    for (int k = 0; k < out; ++k) w[in * out + k] = 0.0;
  }
}

Matrix Mlp::forward(std::span<const double> params, const Matrix& input, Cache* cache) const {
  if (input.cols() != widths_.front()) throw Error("MLP input width mismatch");
  Matrix x = input;
  if (cache) {
    cache->activations.clear();
    cache->activations.push_back(input);
  }
  const std::size_t layers = widths_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = widths_[l], out = widths_[l + 1];
    const double* p = params.data() + offsets_[l];
    ConstMatMap w(p, in, out);
    ConstRowMap b(p + static_cast<std::size_t>(in) * out, out);
    Matrix y = x * w;
    y.rowwise() += b;
    if (l + 1 < layers) y = y.array().tanh().matrix();
    x = std::move(y);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

void Mlp::backward(std::span<const double> params, const Cache& cache, const Matrix& grad_output,
                   std::span<double> grad, Matrix* grad_input) const {
  const std::size_t layers = widths_.size() - 1;
  Matrix g = grad_output;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = widths_[l], out = widths_[l + 1];
    if (l + 1 < layers) {
      const Matrix& y = cache.activations[l + 1];
      g.array() *= (1.0 - y.array().square());
    }
    const Matrix& x = cache.activations[l];
    double* gp = grad.data() + offsets_[l];
    MatMap gw(gp, in, out);
    RowMap gb(gp + static_cast<std::size_t>(in) * out, out);
    gw.noalias() += x.transpose() * g;
    gb += g.colwise().sum();
    if (l > 0 || grad_input) {
      ConstMatMap w(params.data() + offsets_[l], in, out);
      Matrix next = g * w.transpose();
      g = std::move(next);
    }
  }
  if (grad_input) *grad_input = std::move(g);
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

}  // namespace hip::nn
