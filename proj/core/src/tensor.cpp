#include "mmt/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mmt {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap grad_matrix(Tensor& t) {
  t.ensure_grad();
  return MatMap(t.grad.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

ConstMatMap out_grad_matrix(const Tensor& t) {
  return ConstMatMap(t.grad.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) fail("domain", std::string(op) + ": produced a non-finite entry");
  }
}

void require_same_or_scalar(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape == b.shape || a.is_scalar() || b.is_scalar()) return;
  fail("shape", std::string(op) + ": shapes " + a.shape_str() + " and " + b.shape_str() +
                    " are neither equal nor scalar-vs-tensor");
}

}  // namespace

double Tensor::scalar() const {
  if (!is_scalar()) fail("shape", "scalar(): tensor has shape " + shape_str());
  return data[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

TensorPtr make_tensor(std::vector<std::size_t> shape, double fill) {
  auto t = std::make_shared<Tensor>();
  for (std::size_t e : shape) {
    if (e == 0) fail("shape", "make_tensor: zero extent in shape");
  }
  if (shape.empty() || shape.size() > 2) fail("shape", "make_tensor: rank must be 1 or 2");
  t->data.assign(shape_product(shape), fill);
  t->shape = std::move(shape);
  return t;
}

TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values) {
  auto t = make_tensor(shape);
  if (values.size() != t->data.size()) {
    fail("shape", "make_tensor: " + std::to_string(values.size()) + " values for shape " +
                      t->shape_str());
  }
  t->data = std::move(values);
  return t;
}

TensorPtr make_scalar(double value) { return make_tensor({1}, std::vector<double>{value}); }

TensorPtr make_param(std::vector<std::size_t> shape, std::mt19937_64& rng, double range) {
  auto t = make_tensor(std::move(shape));
  for (double& v : t->data) v = (uniform01(rng) * 2.0 - 1.0) * range;
  t->requires_grad = true;
  return t;
}

TensorPtr Graph::record(TensorPtr out, std::function<void()> backprop) {
  nodes_.push_back(Node{out, std::move(backprop)});
  return out;
}

// ---- elementwise -----------------------------------------------------------

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
  require_same_or_scalar(*a, *b, "add");
  const bool a_scalar = a->is_scalar() && !b->is_scalar();
  const bool b_scalar = b->is_scalar() && !a->is_scalar();
  auto out = make_tensor(a_scalar ? b->shape : a->shape);
  const std::size_t n = out->size();
  for (std::size_t i = 0; i < n; ++i) {
    out->data[i] = a->data[a_scalar ? 0 : i] + b->data[b_scalar ? 0 : i];
  }
  check_finite(*out, "add");
  return record(out, [a, b, out, a_scalar, b_scalar] {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      a->grad[a_scalar ? 0 : i] += out->grad[i];
      b->grad[b_scalar ? 0 : i] += out->grad[i];
    }
  });
}

TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) {
  require_same_or_scalar(*a, *b, "sub");
  const bool a_scalar = a->is_scalar() && !b->is_scalar();
  const bool b_scalar = b->is_scalar() && !a->is_scalar();
  auto out = make_tensor(a_scalar ? b->shape : a->shape);
  for (std::size_t i = 0; i < out->size(); ++i) {
    out->data[i] = a->data[a_scalar ? 0 : i] - b->data[b_scalar ? 0 : i];
  }
  check_finite(*out, "sub");
  return record(out, [a, b, out, a_scalar, b_scalar] {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      a->grad[a_scalar ? 0 : i] += out->grad[i];
      b->grad[b_scalar ? 0 : i] -= out->grad[i];
    }
  });
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
  require_same_or_scalar(*a, *b, "mul");
  const bool a_scalar = a->is_scalar() && !b->is_scalar();
  const bool b_scalar = b->is_scalar() && !a->is_scalar();
  auto out = make_tensor(a_scalar ? b->shape : a->shape);
  for (std::size_t i = 0; i < out->size(); ++i) {
    out->data[i] = a->data[a_scalar ? 0 : i] * b->data[b_scalar ? 0 : i];
  }
  check_finite(*out, "mul");
  return record(out, [a, b, out, a_scalar, b_scalar] {
    a->ensure_grad();
    b->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      a->grad[a_scalar ? 0 : i] += out->grad[i] * b->data[b_scalar ? 0 : i];
      b->grad[b_scalar ? 0 : i] += out->grad[i] * a->data[a_scalar ? 0 : i];
    }
  });
}

TensorPtr Graph::add_scalar(const TensorPtr& x, double c) {
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = x->data[i] + c;
  check_finite(*out, "add_scalar");
  return record(out, [x, out] {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
  });
}

TensorPtr Graph::mul_scalar(const TensorPtr& x, double c) {
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = x->data[i] * c;
  check_finite(*out, "mul_scalar");
  return record(out, [x, out, c] {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i] * c;
  });
}

TensorPtr Graph::neg(const TensorPtr& x) { return mul_scalar(x, -1.0); }

TensorPtr Graph::tanh(const TensorPtr& x) {
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::tanh(x->data[i]);
  check_finite(*out, "tanh");
  return record(out, [x, out] {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      const double y = out->data[i];
      x->grad[i] += out->grad[i] * (1.0 - y * y);
    }
  });
}

TensorPtr Graph::sigmoid(const TensorPtr& x) {
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i) {
    const double v = x->data[i];
    // Split on sign so exp never overflows.
    out->data[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  check_finite(*out, "sigmoid");
  return record(out, [x, out] {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) {
      const double y = out->data[i];
      x->grad[i] += out->grad[i] * y * (1.0 - y);
    }
  });
}

TensorPtr Graph::log(const TensorPtr& x) {
  for (double v : x->data) {
    if (!(v > 0.0)) fail("domain", "log: non-positive input " + std::to_string(v));
  }
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::log(x->data[i]);
  check_finite(*out, "log");
  return record(out, [x, out] {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i] / x->data[i];
  });
}

TensorPtr Graph::exp(const TensorPtr& x) {
  for (double v : x->data) {
    if (v > 700.0) fail("domain", "exp: input " + std::to_string(v) + " would overflow");
  }
  auto out = make_tensor(x->shape);
  for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::exp(x->data[i]);
  check_finite(*out, "exp");
  return record(out, [x, out] {
    x->ensure_grad();
    for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i] * out->data[i];
  });
}

// ---- matrix / structural ---------------------------------------------------

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2) {
    fail("shape", "matmul: needs rank-2 operands, got " + a->shape_str() + " and " + b->shape_str());
  }
  if (a->cols() != b->rows()) {
    fail("shape", "matmul: inner extents disagree, " + a->shape_str() + " vs " + b->shape_str());
  }
  auto out = make_tensor({a->rows(), b->cols()});
  MatMap(out->data.data(), a->rows(), b->cols()).noalias() = as_matrix(*a) * as_matrix(*b);
  check_finite(*out, "matmul");
  return record(out, [a, b, out] {
    auto go = out_grad_matrix(*out);
    grad_matrix(*a).noalias() += go * as_matrix(*b).transpose();
    grad_matrix(*b).noalias() += as_matrix(*a).transpose() * go;
  });
}

TensorPtr Graph::transpose(const TensorPtr& x) {
  if (x->rank() != 2) fail("shape", "transpose: needs a rank-2 tensor, got " + x->shape_str());
  auto out = make_tensor({x->cols(), x->rows()});
  MatMap(out->data.data(), out->rows(), out->cols()).noalias() = as_matrix(*x).transpose();
  return record(out, [x, out] {
    grad_matrix(*x).noalias() += out_grad_matrix(*out).transpose();
  });
}

TensorPtr Graph::concat_cols(std::span<const TensorPtr> parts) {
  if (parts.empty()) fail("shape", "concat_cols: no parts");
  const std::size_t r = parts[0]->rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->rows() != r) fail("shape", "concat_cols: row counts differ");
    total += p->cols();
  }
  auto out = make_tensor({r, total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(p->data.begin() + i * p->cols(), p->cols(), out->data.begin() + i * total + off);
    }
    off += p->cols();
  }
  std::vector<TensorPtr> held(parts.begin(), parts.end());
  return record(out, [held = std::move(held), out, r, total] {
    std::size_t off = 0;
    for (const auto& p : held) {
      p->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < p->cols(); ++j) {
          p->grad[i * p->cols() + j] += out->grad[i * total + off + j];
        }
      }
      off += p->cols();
    }
  });
}

TensorPtr Graph::concat_rows(std::span<const TensorPtr> parts) {
  if (parts.empty()) fail("shape", "concat_rows: no parts");
  const std::size_t c = parts[0]->cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->cols() != c) fail("shape", "concat_rows: column counts differ");
    total += p->rows();
  }
  auto out = make_tensor({total, c});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->data.begin(), p->data.end(), out->data.begin() + off * c);
    off += p->rows();
  }
  std::vector<TensorPtr> held(parts.begin(), parts.end());
  return record(out, [held = std::move(held), out, c] {
    std::size_t off = 0;
    for (const auto& p : held) {
      p->ensure_grad();
      for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[off * c + i];
      off += p->rows();
    }
  });
}

TensorPtr Graph::slice_cols(const TensorPtr& x, std::size_t first, std::size_t count) {
  if (x->rank() != 2) fail("shape", "slice_cols: needs a rank-2 tensor");
  if (first + count > x->cols()) {
    fail("shape", "slice_cols: [" + std::to_string(first) + ", " + std::to_string(first + count) +
                      ") out of range for " + x->shape_str());
  }
  auto out = make_tensor({x->rows(), count});
  for (std::size_t i = 0; i < x->rows(); ++i) {
    std::copy_n(x->data.begin() + i * x->cols() + first, count, out->data.begin() + i * count);
  }
  return record(out, [x, out, first, count] {
    x->ensure_grad();
    for (std::size_t i = 0; i < x->rows(); ++i) {
      for (std::size_t j = 0; j < count; ++j) {
        x->grad[i * x->cols() + first + j] += out->grad[i * count + j];
      }
    }
  });
}

TensorPtr Graph::gather_rows(const TensorPtr& table, std::span<const int> ids) {
  if (table->rank() != 2) fail("shape", "gather_rows: table must be rank 2");
  const std::size_t v = table->rows();
  const std::size_t d = table->cols();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v) {
      fail("shape", "gather_rows: id " + std::to_string(ids[i]) + " at position " +
                        std::to_string(i) + " outside [0, " + std::to_string(v) + ")");
    }
  }
  auto out = make_tensor({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table->data.begin() + static_cast<std::size_t>(ids[i]) * d, d,
                out->data.begin() + i * d);
  }
  std::vector<int> held(ids.begin(), ids.end());
  return record(out, [table, out, held = std::move(held), d] {
    table->ensure_grad();
    for (std::size_t i = 0; i < held.size(); ++i) {
      const std::size_t row = static_cast<std::size_t>(held[i]);
      for (std::size_t j = 0; j < d; ++j) table->grad[row * d + j] += out->grad[i * d + j];
    }
  });
}

TensorPtr Graph::pick_per_row(const TensorPtr& x, std::span<const int> cols) {
  if (x->rank() != 2) fail("shape", "pick_per_row: needs a rank-2 tensor");
  if (cols.size() != x->rows()) {
    fail("shape", "pick_per_row: " + std::to_string(cols.size()) + " indices for " +
                      std::to_string(x->rows()) + " rows");
  }
  const std::size_t c = x->cols();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0 || static_cast<std::size_t>(cols[i]) >= c) {
      fail("shape", "pick_per_row: column " + std::to_string(cols[i]) + " out of range at row " +
                        std::to_string(i));
    }
  }
  auto out = make_tensor({cols.size()});
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out->data[i] = x->data[i * c + static_cast<std::size_t>(cols[i])];
  }
  std::vector<int> held(cols.begin(), cols.end());
  return record(out, [x, out, held = std::move(held), c] {
    x->ensure_grad();
    for (std::size_t i = 0; i < held.size(); ++i) {
      x->grad[i * c + static_cast<std::size_t>(held[i])] += out->grad[i];
    }
  });
}

TensorPtr Graph::sum_all(const TensorPtr& x) {
  auto out = make_scalar(std::accumulate(x->data.begin(), x->data.end(), 0.0));
  check_finite(*out, "sum_all");
  return record(out, [x, out] {
    x->ensure_grad();
    for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += out->grad[0];
  });
}

TensorPtr Graph::add_rowvec(const TensorPtr& x, const TensorPtr& v) {
  if (v->rows() != 1 || v->cols() != x->cols()) {
    fail("shape", "add_rowvec: row vector " + v->shape_str() + " does not match " + x->shape_str());
  }
  auto out = make_tensor(x->shape);
  const std::size_t c = x->cols();
  for (std::size_t i = 0; i < x->rows(); ++i) {
    for (std::size_t j = 0; j < c; ++j) out->data[i * c + j] = x->data[i * c + j] + v->data[j];
  }
  check_finite(*out, "add_rowvec");
  return record(out, [x, v, out, c] {
    x->ensure_grad();
    v->ensure_grad();
    for (std::size_t i = 0; i < x->rows(); ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        x->grad[i * c + j] += out->grad[i * c + j];
        v->grad[j] += out->grad[i * c + j];
      }
    }
  });
}

TensorPtr Graph::softmax_row(const TensorPtr& x) {
  if (x->cols() < 1) fail("shape", "softmax_row: empty row");
  for (double v : x->data) {
    if (!std::isfinite(v)) fail("domain", "softmax_row: non-finite input");
  }
  auto out = make_tensor(x->shape);
  const std::size_t c = x->cols();
  for (std::size_t i = 0; i < x->rows(); ++i) {
    const double* row = x->data.data() + i * c;
    double* orow = out->data.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < c; ++j) orow[j] /= sum;
  }
  return record(out, [x, out, c] {
    // dx = y * (dy - <dy, y>) per row.
    x->ensure_grad();
    for (std::size_t i = 0; i < x->rows(); ++i) {
      const double* y = out->data.data() + i * c;
      const double* dy = out->grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += dy[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) x->grad[i * c + j] += y[j] * (dy[j] - dot);
    }
  });
}

TensorPtr Graph::log_softmax_row(const TensorPtr& x) {
  if (x->cols() < 1) fail("shape", "log_softmax_row: empty row");
  for (double v : x->data) {
    if (!std::isfinite(v)) fail("domain", "log_softmax_row: non-finite input");
  }
  auto out = make_tensor(x->shape);
  const std::size_t c = x->cols();
  for (std::size_t i = 0; i < x->rows(); ++i) {
    const double* row = x->data.data() + i * c;
    double* orow = out->data.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j) orow[j] = row[j] - lse;
  }
  return record(out, [x, out, c] {
    // dx = dy - softmax(x) * sum(dy) per row.
    x->ensure_grad();
    for (std::size_t i = 0; i < x->rows(); ++i) {
      const double* y = out->data.data() + i * c;
      const double* dy = out->grad.data() + i * c;
      double total = 0.0;
      for (std::size_t j = 0; j < c; ++j) total += dy[j];
      for (std::size_t j = 0; j < c; ++j) {
        x->grad[i * c + j] += dy[j] - std::exp(y[j]) * total;
      }
    }
  });
}

void Graph::backward(const TensorPtr& loss) {
  if (nodes_.empty()) fail("shape", "backward: empty graph");
  if (!loss->is_scalar()) fail("shape", "backward: loss must be scalar, got " + loss->shape_str());
  if (backward_done_) fail("shape", "backward: graph already replayed");
  backward_done_ = true;
  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    // Nodes whose output never received a gradient contribute nothing.
    if (it->out->grad.empty()) continue;
    it->backprop();
  }
}

TensorPtr concat_cols2(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  const TensorPtr parts[2] = {a, b};
  return g.concat_cols(parts);
}

}  // namespace mmt
