#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <new>
#include <span>
#include <vector>

#include "hip/common.hpp"

namespace hip::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Parameter and gradient buffers are 64-byte aligned. Eigen's vectorized
// kernels over mapped memory pick their summation order from the address, so
// a fixed alignment keeps results independent of heap layout.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using ParamVector = std::vector<double, AlignedAllocator<double>>;

/// Fully connected network with tanh hidden layers and a linear output.
/// Parameters live in a caller-owned flat buffer: for each layer, the weight
/// matrix (in x out, row-major) followed by the bias. Batches are rows.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> widths);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  std::size_t param_count() const { return param_count_; }
  const std::vector<int>& widths() const { return widths_; }

  /// Xavier-uniform weights, zero biases.
  void init(std::span<double> params, Rng& rng) const;

  struct Cache {
    std::vector<Matrix> activations;  // [0] = input, [l + 1] = output of layer l
  };

  Matrix forward(std::span<const double> params, const Matrix& input, Cache* cache = nullptr) const;

  /// Accumulates dL/dparams into grad. Writes dL/dinput when grad_input is set.
  void backward(std::span<const double> params, const Cache& cache, const Matrix& grad_output,
                std::span<double> grad, Matrix* grad_input = nullptr) const;

 private:
  std::vector<int> widths_{1, 1};
  std::vector<std::size_t> offsets_;
  std::size_t param_count_ = 0;
};

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace hip::nn
