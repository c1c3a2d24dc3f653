#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mmt/error.hpp"

namespace mmt {

// Dense row-major tensor of 64-bit reals, rank 1 or 2. Gradients live next
// to the values and are allocated lazily on first accumulation.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches this tensor
  bool requires_grad = false;

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  // Rank-1 tensors act as row vectors wherever a matrix is expected.
  std::size_t rows() const { return rank() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return rank() == 2 ? shape[1] : (shape.empty() ? 0 : shape[0]); }
  bool is_scalar() const { return size() == 1; }

  double scalar() const;
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { grad.assign(data.size(), 0.0); }

  std::string shape_str() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<std::size_t> shape, double fill = 0.0);
TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values);
TensorPtr make_scalar(double value);
// Parameter initialization: uniform in [-range, range] from the given seeded
// generator, requires_grad set.
TensorPtr make_param(std::vector<std::size_t> shape, std::mt19937_64& rng, double range = 0.1);

// Portable uniform double in [0, 1) from the top 53 bits of the generator.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Record of executed operations. Ops compute eagerly and append a backward
// closure; backward() replays the closures in reverse append order, so every
// node is visited exactly once and sibling contributions accumulate by +=.
// A graph is confined to one worker; one backward pass per graph.
class Graph {
 public:
  // Elementwise. Shapes must match exactly, or one operand must be a scalar
  // (size 1); no other broadcasting.
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr add_scalar(const TensorPtr& x, double c);
  TensorPtr mul_scalar(const TensorPtr& x, double c);
  TensorPtr neg(const TensorPtr& x);
  TensorPtr tanh(const TensorPtr& x);
  TensorPtr sigmoid(const TensorPtr& x);
  TensorPtr log(const TensorPtr& x);  // rejects non-positive entries
  TensorPtr exp(const TensorPtr& x);

  // Matrix / structural ops.
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr transpose(const TensorPtr& x);
  TensorPtr concat_cols(std::span<const TensorPtr> parts);
  TensorPtr concat_rows(std::span<const TensorPtr> parts);
  TensorPtr slice_cols(const TensorPtr& x, std::size_t first, std::size_t count);
  TensorPtr gather_rows(const TensorPtr& table, std::span<const int> ids);
  TensorPtr pick_per_row(const TensorPtr& x, std::span<const int> cols);  // -> [rows]
  TensorPtr sum_all(const TensorPtr& x);                                  // -> scalar
  // x[r,c] + v[c] for every row r; v is a row vector (rank 1 or 1xN).
  TensorPtr add_rowvec(const TensorPtr& x, const TensorPtr& v);

  // Row-wise softmax / log-softmax with max-subtraction.
  TensorPtr softmax_row(const TensorPtr& x);
  TensorPtr log_softmax_row(const TensorPtr& x);

  // Populates grads of every tensor the scalar loss depends on.
  void backward(const TensorPtr& loss);

  std::size_t node_count() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    TensorPtr out;
    std::function<void()> backprop;
  };

  TensorPtr record(TensorPtr out, std::function<void()> backprop);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Convenience for two-part concatenation.
TensorPtr concat_cols2(Graph& g, const TensorPtr& a, const TensorPtr& b);

}  // namespace mmt
