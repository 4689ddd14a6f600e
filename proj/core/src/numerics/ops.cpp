#include "relfb/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "relfb/numerics/errors.hpp"

namespace relfb {
namespace {

using BackwardFn = std::function<void(Node&)>;

Var make_result(const char* op, Tensor value, std::initializer_list<Var> inputs,
                BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite value in output");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (grad_recording_enabled()) {
    bool track = false;
    for (const Var& in : inputs) track = track || in.track_grad();
    if (track) {
      node->track_grad = true;
      for (const Var& in : inputs) node->inputs.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Var(std::move(node));
}

Var make_result_n(const char* op, Tensor value, const std::vector<Var>& inputs,
                  BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite value in output");
  }
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (grad_recording_enabled()) {
    bool track = false;
    for (const Var& in : inputs) track = track || in.track_grad();
    if (track) {
      node->track_grad = true;
      for (const Var& in : inputs) node->inputs.push_back(in.node());
      node->backward = std::move(fn);
    }
  }
  return Var(std::move(node));
}

// Gradient buffer of input i, or nullptr if that input is not tracked.
Tensor* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.track_grad ? &in.grad_buffer() : nullptr;
}

const Tensor& value_of(const Node& self, std::size_t i) {
  return self.inputs[i]->value;
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         shape_string(a.shape()));
  }
}

// Size of the trailing block that each prefix element of `w` broadcasts over.
std::size_t prefix_inner(const char* op, const Var& x, const Var& w) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws.size() > xs.size() || !std::equal(ws.begin(), ws.end(), xs.begin())) {
    throw DimensionError(std::string(op) + ": " + shape_string(ws) +
                         " is not a prefix of " + shape_string(xs));
  }
  return w.size() == 0 ? 0 : x.size() / w.size();
}

template <typename F>
Var unary(const char* op, const Var& a, F&& f, BackwardFn fn) {
  Tensor out(a.shape());
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make_result(op, std::move(out), {a}, std::move(fn));
}

// Backward of row-wise l2 normalization k = r / |r|.
void unit_norm_backward(const Tensor& k, const std::vector<double>& norms,
                        std::size_t rows, std::size_t length, const double* gk,
                        double* gr) {
  for (std::size_t f = 0; f < rows; ++f) {
    const double* kr = k.data() + f * length;
    const double* g = gk + f * length;
    double dot = 0.0;
    for (std::size_t n = 0; n < length; ++n) dot += kr[n] * g[n];
    for (std::size_t n = 0; n < length; ++n) {
      gr[f * length + n] = (g[n] - kr[n] * dot) / norms[f];
    }
  }
}

void normalize_rows(Tensor& raw, std::vector<double>& norms, std::size_t rows,
                    std::size_t length) {
  norms.assign(rows, 0.0);
  for (std::size_t f = 0; f < rows; ++f) {
    double* r = raw.data() + f * length;
    double ss = 0.0;
    for (std::size_t n = 0; n < length; ++n) ss += r[n] * r[n];
    norms[f] = std::sqrt(ss);
    if (norms[f] == 0.0) throw NumericError("kernel row has zero norm");
    for (std::size_t n = 0; n < length; ++n) r[n] /= norms[f];
  }
}

void require_odd_length(const char* op, std::size_t length) {
  if (length == 0 || length % 2 == 0) {
    throw DimensionError(std::string(op) + ": kernel length must be odd, got " +
                         std::to_string(length));
  }
}

}  // namespace

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result("add", std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result("sub", std::move(out), {a, b}, [](Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result("mul", std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = value_of(self, 0);
    const Tensor& bv = value_of(self, 1);
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return x * factor; },
      [factor](Node& self) {
        Tensor* g = grad_of(self, 0);
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
      });
}

Var add_scalar(const Var& a, double offset) {
  return unary(
      "add_scalar", a, [offset](double x) { return x + offset; },
      [](Node& self) {
        Tensor* g = grad_of(self, 0);
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      });
}

Var square(const Var& a) {
  return unary(
      "square", a, [](double x) { return x * x; },
      [](Node& self) {
        const Tensor& x = value_of(self, 0);
        Tensor* g = grad_of(self, 0);
        for (std::size_t i = 0; i < g->size(); ++i) {
          (*g)[i] += 2.0 * x[i] * self.grad[i];
        }
      });
}

Var sigmoid(const Var& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](Node& self) {
        Tensor* g = grad_of(self, 0);
        for (std::size_t i = 0; i < g->size(); ++i) {
          const double y = self.value[i];
          (*g)[i] += self.grad[i] * y * (1.0 - y);
        }
      });
}

Var tanh(const Var& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](Node& self) {
        Tensor* g = grad_of(self, 0);
        for (std::size_t i = 0; i < g->size(); ++i) {
          const double y = self.value[i];
          (*g)[i] += self.grad[i] * (1.0 - y * y);
        }
      });
}

Var log_floor(const Var& a, double floor) {
  if (!(floor > 0.0)) throw std::invalid_argument("log_floor: floor must be > 0");
  return unary(
      "log_floor", a, [floor](double x) { return std::log(std::max(x, floor)); },
      [floor](Node& self) {
        const Tensor& x = value_of(self, 0);
        Tensor* g = grad_of(self, 0);
        for (std::size_t i = 0; i < g->size(); ++i) {
          if (x[i] > floor) (*g)[i] += self.grad[i] / x[i];
        }
      });
}

Var softmax(const Var& a) {
  const std::size_t rank = a.value().rank();
  if (rank != 1 && rank != 2) {
    throw DimensionError("softmax: expected rank 1 or 2, got " +
                         shape_string(a.shape()));
  }
  const std::size_t cols = a.shape().back();
  const std::size_t rows = cols == 0 ? 0 : a.size() / cols;
  Tensor out(a.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.value().data() + r * cols;
    double* y = out.data() + r * cols;
    const double peak = *std::max_element(x, x + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - peak);
      total += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= total;
  }
  return make_result("softmax", std::move(out), {a}, [rows, cols](Node& self) {
    Tensor* g = grad_of(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* gy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gy[j] * y[j];
      double* gx = g->data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  });
}

// ----------------------------------------------------------------- reductions

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return make_result("sum", Tensor::scalar(total), {a}, [](Node& self) {
    Tensor* g = grad_of(self, 0);
    const double gs = self.grad[0];
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += gs;
  });
}

Var mean(const Var& a) {
  if (a.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var mean_last(const Var& a) {
  if (a.value().rank() == 0) throw DimensionError("mean_last on a scalar");
  const std::size_t m = a.shape().back();
  if (m == 0) throw DimensionError("mean_last over an empty axis");
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* x = a.value().data() + r * m;
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) total += x[j];
    out[r] = total * inv;
  }
  return make_result("mean_last", std::move(out), {a}, [m, inv](Node& self) {
    Tensor* g = grad_of(self, 0);
    for (std::size_t r = 0; r < self.value.size(); ++r) {
      const double gr = self.grad[r] * inv;
      double* gx = g->data() + r * m;
      for (std::size_t j = 0; j < m; ++j) gx[j] += gr;
    }
  });
}

// ---------------------------------------------------------------------- shape

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_result("reshape", std::move(out), {a}, [](Node& self) {
    Tensor* g = grad_of(self, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  const std::size_t n = a.shape()[0];
  const std::size_t m = a.shape()[1];
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a.value()[i * m + j];
  }
  return make_result("transpose", std::move(out), {a}, [n, m](Node& self) {
    Tensor* g = grad_of(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) (*g)[i * m + j] += self.grad[j * n + i];
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  require_rank("concat_cols", a, 2);
  require_rank("concat_cols", b, 2);
  const std::size_t n = a.shape()[0];
  if (b.shape()[0] != n) {
    throw DimensionError("concat_cols: row mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  const std::size_t p = a.shape()[1];
  const std::size_t q = b.shape()[1];
  Tensor out(Shape{n, p + q});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + i * p, p, out.data() + i * (p + q));
    std::copy_n(b.value().data() + i * q, q, out.data() + i * (p + q) + p);
  }
  return make_result("concat_cols", std::move(out), {a, b}, [n, p, q](Node& self) {
    const double* g = self.grad.data();
    if (Tensor* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) (*ga)[i * p + j] += g[i * (p + q) + j];
      }
    }
    if (Tensor* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
          (*gb)[i * q + j] += g[i * (p + q) + p + j];
        }
      }
    }
  });
}

Var repeat_rows(const Var& v, std::size_t n) {
  const Shape& s = v.shape();
  if (!(s.size() == 1 || (s.size() == 2 && s[0] == 1))) {
    throw DimensionError("repeat_rows: expected [p] or [1,p], got " +
                         shape_string(s));
  }
  const std::size_t p = v.size();
  Tensor out(Shape{n, p});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(v.value().data(), p, out.data() + i * p);
  }
  return make_result("repeat_rows", std::move(out), {v}, [n, p](Node& self) {
    Tensor* g = grad_of(self, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) (*g)[j] += self.grad[i * p + j];
    }
  });
}

Var stack(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("stack of zero tensors");
  const Shape& inner = parts.front().shape();
  for (const Var& part : parts) {
    if (part.shape() != inner) {
      throw DimensionError("stack: shape mismatch " + shape_string(inner) +
                           " vs " + shape_string(part.shape()));
    }
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  const std::size_t stride = shape_size(inner);
  for (std::size_t b = 0; b < parts.size(); ++b) {
    std::copy_n(parts[b].value().data(), stride, out.data() + b * stride);
  }
  return make_result_n("stack", std::move(out), parts, [stride](Node& self) {
    for (std::size_t b = 0; b < self.inputs.size(); ++b) {
      if (Tensor* g = grad_of(self, b)) {
        for (std::size_t i = 0; i < stride; ++i) {
          (*g)[i] += self.grad[b * stride + i];
        }
      }
    }
  });
}

Var select(const Var& a, std::size_t index) {
  if (a.value().rank() == 0 || index >= a.shape()[0]) {
    throw DimensionError("select: index " + std::to_string(index) +
                         " out of range for " + shape_string(a.shape()));
  }
  Shape inner(a.shape().begin() + 1, a.shape().end());
  const std::size_t stride = shape_size(inner);
  Tensor out(inner);
  std::copy_n(a.value().data() + index * stride, stride, out.data());
  return make_result("select", std::move(out), {a}, [index, stride](Node& self) {
    Tensor* g = grad_of(self, 0);
    for (std::size_t i = 0; i < stride; ++i) {
      (*g)[index * stride + i] += self.grad[i];
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> rows) {
  require_rank("gather_rows", table, 2);
  const std::size_t v = table.shape()[0];
  const std::size_t d = table.shape()[1];
  Tensor out(Shape{rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= v) {
      throw DimensionError("gather_rows: row " + std::to_string(rows[r]) +
                           " out of range for " + shape_string(table.shape()));
    }
    std::copy_n(table.value().data() + rows[r] * d, d, out.data() + r * d);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result("gather_rows", std::move(out), {table},
                     [idx = std::move(idx), d](Node& self) {
                       Tensor* g = grad_of(self, 0);
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         for (std::size_t j = 0; j < d; ++j) {
                           (*g)[idx[r] * d + j] += self.grad[r * d + j];
                         }
                       }
                     });
}

// ------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
  require_rank("matmul", b, 2);
  const bool vec = a.value().rank() == 1;
  if (!vec) require_rank("matmul", a, 2);
  const std::size_t n = vec ? 1 : a.shape()[0];
  const std::size_t k = vec ? a.shape()[0] : a.shape()[1];
  const std::size_t m = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimension mismatch " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out(vec ? Shape{m} : Shape{n, m});
  const double* av = a.value().data();
  const double* bv = b.value().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = av[i * k + p];
      const double* brow = bv + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  return make_result("matmul", std::move(out), {a, b}, [n, k, m](Node& self) {
    const double* av = value_of(self, 0).data();
    const double* bv = value_of(self, 1).data();
    const double* g = self.grad.data();
    if (Tensor* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * bv[p * m + j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (Tensor* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double s = av[i * k + p];
          double* grow = gb->data() + p * m;
          for (std::size_t j = 0; j < m; ++j) grow[j] += s * g[i * m + j];
        }
      }
    }
  });
}

Var add_bias(const Var& a, const Var& b) {
  require_rank("add_bias", b, 1);
  const std::size_t m = b.shape()[0];
  if (a.value().rank() == 0 || a.shape().back() != m) {
    throw DimensionError("add_bias: bias " + shape_string(b.shape()) +
                         " does not match " + shape_string(a.shape()));
  }
  const std::size_t n = a.size() / m;
  Tensor out = a.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += b.value()[j];
  }
  return make_result("add_bias", std::move(out), {a, b}, [n, m](Node& self) {
    if (Tensor* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += self.grad[i];
    }
    if (Tensor* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) (*gb)[j] += self.grad[i * m + j];
      }
    }
  });
}

Var scale_rows(const Var& x, const Var& w) {
  const std::size_t inner = prefix_inner("scale_rows", x, w);
  Tensor out = x.value();
  for (std::size_t r = 0; r < w.size(); ++r) {
    const double s = w.value()[r];
    for (std::size_t c = 0; c < inner; ++c) out[r * inner + c] *= s;
  }
  return make_result("scale_rows", std::move(out), {x, w}, [inner](Node& self) {
    const Tensor& xv = value_of(self, 0);
    const Tensor& wv = value_of(self, 1);
    if (Tensor* gx = grad_of(self, 0)) {
      for (std::size_t r = 0; r < wv.size(); ++r) {
        for (std::size_t c = 0; c < inner; ++c) {
          (*gx)[r * inner + c] += self.grad[r * inner + c] * wv[r];
        }
      }
    }
    if (Tensor* gw = grad_of(self, 1)) {
      for (std::size_t r = 0; r < wv.size(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < inner; ++c) {
          acc += self.grad[r * inner + c] * xv[r * inner + c];
        }
        (*gw)[r] += acc;
      }
    }
  });
}

Var add_rows(const Var& x, const Var& b) {
  const std::size_t inner = prefix_inner("add_rows", x, b);
  Tensor out = x.value();
  for (std::size_t r = 0; r < b.size(); ++r) {
    for (std::size_t c = 0; c < inner; ++c) out[r * inner + c] += b.value()[r];
  }
  return make_result("add_rows", std::move(out), {x, b}, [inner](Node& self) {
    if (Tensor* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += self.grad[i];
    }
    if (Tensor* gb = grad_of(self, 1)) {
      for (std::size_t r = 0; r < gb->size(); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < inner; ++c) acc += self.grad[r * inner + c];
        (*gb)[r] += acc;
      }
    }
  });
}

// -------------------------------------------------------- convolution, pooling

Var correlate1d_valid(const Var& signal, const Var& kernels) {
  require_rank("correlate1d_valid", kernels, 2);
  const std::size_t rank = signal.value().rank();
  if (rank != 1 && rank != 2) {
    throw DimensionError("correlate1d_valid: signal must be [S] or [N,S], got " +
                         shape_string(signal.shape()));
  }
  const std::size_t rows = rank == 1 ? 1 : signal.shape()[0];
  const std::size_t len = signal.shape().back();
  const std::size_t nf = kernels.shape()[0];
  const std::size_t nl = kernels.shape()[1];
  if (nl > len || nl == 0) {
    throw DimensionError("correlate1d_valid: kernel length " +
                         std::to_string(nl) + " exceeds signal length " +
                         std::to_string(len));
  }
  const std::size_t no = len - nl + 1;
  Tensor out(rank == 1 ? Shape{nf, no} : Shape{rows, nf, no});
  const double* sv = signal.value().data();
  const double* kv = kernels.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* s = sv + r * len;
    for (std::size_t f = 0; f < nf; ++f) {
      double* o = out.data() + (r * nf + f) * no;
      const double* k = kv + f * nl;
      for (std::size_t n = 0; n < nl; ++n) {
        const double kn = k[n];
        const double* sn = s + n;
        for (std::size_t j = 0; j < no; ++j) o[j] += kn * sn[j];
      }
    }
  }
  return make_result(
      "correlate1d_valid", std::move(out), {signal, kernels},
      [rows, len, nf, nl, no](Node& self) {
        const double* sv = value_of(self, 0).data();
        const double* kv = value_of(self, 1).data();
        const double* g = self.grad.data();
        Tensor* gs = grad_of(self, 0);
        Tensor* gk = grad_of(self, 1);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* s = sv + r * len;
          for (std::size_t f = 0; f < nf; ++f) {
            const double* go = g + (r * nf + f) * no;
            if (gk) {
              double* gkf = gk->data() + f * nl;
              for (std::size_t j = 0; j < no; ++j) {
                const double gj = go[j];
                const double* sj = s + j;
                for (std::size_t n = 0; n < nl; ++n) gkf[n] += gj * sj[n];
              }
            }
            if (gs) {
              double* gsr = gs->data() + r * len;
              const double* k = kv + f * nl;
              for (std::size_t j = 0; j < no; ++j) {
                const double gj = go[j];
                for (std::size_t n = 0; n < nl; ++n) gsr[j + n] += gj * k[n];
              }
            }
          }
        }
      });
}

Var correlate2d_valid(const Var& input, const Var& kernels) {
  require_rank("correlate2d_valid", input, 3);
  require_rank("correlate2d_valid", kernels, 4);
  const std::size_t nc = input.shape()[0];
  const std::size_t h = input.shape()[1];
  const std::size_t w = input.shape()[2];
  const std::size_t nk = kernels.shape()[0];
  const std::size_t kh = kernels.shape()[2];
  const std::size_t kw = kernels.shape()[3];
  if (kernels.shape()[1] != nc) {
    throw DimensionError("correlate2d_valid: kernel channels " +
                         shape_string(kernels.shape()) + " vs input " +
                         shape_string(input.shape()));
  }
  if (kh > h || kw > w || kh == 0 || kw == 0) {
    throw DimensionError("correlate2d_valid: kernel " +
                         shape_string(kernels.shape()) + " larger than input " +
                         shape_string(input.shape()));
  }
  const std::size_t oh = h - kh + 1;
  const std::size_t ow = w - kw + 1;
  Tensor out(Shape{nk, oh, ow});
  const double* iv = input.value().data();
  const double* kv = kernels.value().data();
  for (std::size_t k = 0; k < nk; ++k) {
    double* o = out.data() + k * oh * ow;
    for (std::size_t c = 0; c < nc; ++c) {
      const double* in = iv + c * h * w;
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const double kab = kv[((k * nc + c) * kh + a) * kw + b];
          for (std::size_t i = 0; i < oh; ++i) {
            const double* src = in + (i + a) * w + b;
            double* dst = o + i * ow;
            for (std::size_t j = 0; j < ow; ++j) dst[j] += kab * src[j];
          }
        }
      }
    }
  }
  return make_result(
      "correlate2d_valid", std::move(out), {input, kernels},
      [nc, h, w, nk, kh, kw, oh, ow](Node& self) {
        const double* iv = value_of(self, 0).data();
        const double* kv = value_of(self, 1).data();
        const double* g = self.grad.data();
        Tensor* gi = grad_of(self, 0);
        Tensor* gk = grad_of(self, 1);
        for (std::size_t k = 0; k < nk; ++k) {
          const double* go = g + k * oh * ow;
          for (std::size_t c = 0; c < nc; ++c) {
            const double* in = iv + c * h * w;
            for (std::size_t a = 0; a < kh; ++a) {
              for (std::size_t b = 0; b < kw; ++b) {
                const std::size_t kidx = ((k * nc + c) * kh + a) * kw + b;
                if (gk) {
                  double acc = 0.0;
                  for (std::size_t i = 0; i < oh; ++i) {
                    const double* src = in + (i + a) * w + b;
                    const double* gr = go + i * ow;
                    for (std::size_t j = 0; j < ow; ++j) acc += gr[j] * src[j];
                  }
                  (*gk)[kidx] += acc;
                }
                if (gi) {
                  const double kab = kv[kidx];
                  double* gin = gi->data() + c * h * w;
                  for (std::size_t i = 0; i < oh; ++i) {
                    double* dst = gin + (i + a) * w + b;
                    const double* gr = go + i * ow;
                    for (std::size_t j = 0; j < ow; ++j) dst[j] += kab * gr[j];
                  }
                }
              }
            }
          }
        }
      });
}

Var maxpool2d(const Var& input, std::size_t ph, std::size_t pw) {
  require_rank("maxpool2d", input, 3);
  const std::size_t nk = input.shape()[0];
  const std::size_t h = input.shape()[1];
  const std::size_t w = input.shape()[2];
  if (ph == 0 || pw == 0 || ph > h || pw > w) {
    throw DimensionError("maxpool2d: window (" + std::to_string(ph) + "," +
                         std::to_string(pw) + ") larger than input " +
                         shape_string(input.shape()));
  }
  const std::size_t oh = h / ph;
  const std::size_t ow = w / pw;
  Tensor out(Shape{nk, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  const double* iv = input.value().data();
  for (std::size_t k = 0; k < nk; ++k) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (k * h + i * ph) * w + j * pw;
        for (std::size_t a = 0; a < ph; ++a) {
          for (std::size_t b = 0; b < pw; ++b) {
            const std::size_t idx = (k * h + i * ph + a) * w + j * pw + b;
            if (iv[idx] > iv[best]) best = idx;
          }
        }
        const std::size_t o = (k * oh + i) * ow + j;
        out[o] = iv[best];
        argmax[o] = best;
      }
    }
  }
  return make_result("maxpool2d", std::move(out), {input},
                     [argmax = std::move(argmax)](Node& self) {
                       Tensor* g = grad_of(self, 0);
                       for (std::size_t o = 0; o < argmax.size(); ++o) {
                         (*g)[argmax[o]] += self.grad[o];
                       }
                     });
}

// -------------------------------------------------------------- normalization

namespace {

// Backward of x_hat = (x - mean) / sqrt(var + eps) over a group of n values
// addressed through `at(i)`.
template <typename Index>
void norm_group_backward(const double* g, const double* xhat, double inv_std,
                         std::size_t n, Index at, double* gx) {
  double sum_g = 0.0;
  double sum_gx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_g += g[at(i)];
    sum_gx += g[at(i)] * xhat[at(i)];
  }
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = at(i);
    gx[p] += inv_std / nd * (nd * g[p] - sum_g - xhat[p] * sum_gx);
  }
}

}  // namespace

Var instance_norm(const Var& x, double eps) {
  require_rank("instance_norm", x, 2);
  const std::size_t rows = x.shape()[0];
  const std::size_t cols = x.shape()[1];
  if (cols < 2) {
    throw DimensionError("instance_norm: need at least 2 frames, got " +
                         std::to_string(cols));
  }
  Tensor out(x.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = x.value().data() + r * cols;
    double m = 0.0;
    for (std::size_t j = 0; j < cols; ++j) m += v[j];
    m /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) var += (v[j] - m) * (v[j] - m);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) {
      out[r * cols + j] = (v[j] - m) * inv_std[r];
    }
  }
  return make_result("instance_norm", std::move(out), {x},
                     [rows, cols, inv_std = std::move(inv_std)](Node& self) {
                       Tensor* gx = grad_of(self, 0);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const std::size_t base = r * cols;
                         norm_group_backward(
                             self.grad.data(), self.value.data(), inv_std[r],
                             cols, [base](std::size_t i) { return base + i; },
                             gx->data());
                       }
                     });
}

Var batch_norm(const Var& x, BatchNormState& state, BatchNormMode mode,
               double eps, double momentum) {
  require_rank("batch_norm", x, 4);
  const std::size_t nb = x.shape()[0];
  const std::size_t nk = x.shape()[1];
  const std::size_t plane = x.shape()[2] * x.shape()[3];
  if (state.running_mean.size() != nk || state.running_var.size() != nk) {
    throw DimensionError("batch_norm: state has " +
                         std::to_string(state.running_mean.size()) +
                         " channels, input " + shape_string(x.shape()));
  }
  auto at = [nk, plane](std::size_t k) {
    return [k, nk, plane](std::size_t i) {
      const std::size_t b = i / plane;
      return (b * nk + k) * plane + i % plane;
    };
  };
  const std::size_t n = nb * plane;
  Tensor out(x.shape());
  std::vector<double> inv_std(nk);
  const double* xv = x.value().data();

  if (mode == BatchNormMode::kEval) {
    for (std::size_t k = 0; k < nk; ++k) {
      inv_std[k] = 1.0 / std::sqrt(state.running_var[k] + eps);
      const auto idx = at(k);
      for (std::size_t i = 0; i < n; ++i) {
        out[idx(i)] = (xv[idx(i)] - state.running_mean[k]) * inv_std[k];
      }
    }
    return make_result("batch_norm_eval", std::move(out), {x},
                       [at, n, nk, inv_std = std::move(inv_std)](Node& self) {
                         Tensor* gx = grad_of(self, 0);
                         for (std::size_t k = 0; k < nk; ++k) {
                           const auto idx = at(k);
                           for (std::size_t i = 0; i < n; ++i) {
                             (*gx)[idx(i)] += self.grad[idx(i)] * inv_std[k];
                           }
                         }
                       });
  }

  if (nb < 2) {
    throw DimensionError("batch_norm: train mode needs batch >= 2, got " +
                         std::to_string(nb));
  }
  for (std::size_t k = 0; k < nk; ++k) {
    const auto idx = at(k);
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += xv[idx(i)];
    m /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      var += (xv[idx(i)] - m) * (xv[idx(i)] - m);
    }
    var /= static_cast<double>(n);
    inv_std[k] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) {
      out[idx(i)] = (xv[idx(i)] - m) * inv_std[k];
    }
    if (state.update_running) {
      const double unbiased = var * static_cast<double>(n) /
                              static_cast<double>(n - 1);
      state.running_mean[k] =
          momentum * state.running_mean[k] + (1.0 - momentum) * m;
      state.running_var[k] =
          momentum * state.running_var[k] + (1.0 - momentum) * unbiased;
    }
  }
  return make_result("batch_norm_train", std::move(out), {x},
                     [at, n, nk, inv_std = std::move(inv_std)](Node& self) {
                       Tensor* gx = grad_of(self, 0);
                       for (std::size_t k = 0; k < nk; ++k) {
                         norm_group_backward(self.grad.data(), self.value.data(),
                                             inv_std[k], n, at(k), gx->data());
                       }
                     });
}

// ----------------------------------------------------------------------- loss

namespace {

void check_distribution(const char* op, const double* p, std::size_t c) {
  double total = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    if (p[j] < 0.0) {
      throw std::invalid_argument(std::string(op) + ": negative probability");
    }
    total += p[j];
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw std::invalid_argument(std::string(op) +
                                ": probabilities sum to " +
                                std::to_string(total));
  }
}

}  // namespace

Var cross_entropy(const Var& posterior, std::size_t target) {
  require_rank("cross_entropy", posterior, 1);
  const std::size_t c = posterior.shape()[0];
  if (target >= c) {
    throw DimensionError("cross_entropy: target " + std::to_string(target) +
                         " >= class count " + std::to_string(c));
  }
  const double* p = posterior.value().data();
  check_distribution("cross_entropy", p, c);
  const double loss = -std::log(std::max(p[target], kLogFloor));
  return make_result("cross_entropy", Tensor::scalar(loss), {posterior},
                     [target](Node& self) {
                       const double pt = value_of(self, 0)[target];
                       if (pt > kLogFloor) {
                         (*grad_of(self, 0))[target] -= self.grad[0] / pt;
                       }
                     });
}

Var cross_entropy(const Var& posterior, std::span<const std::size_t> targets) {
  require_rank("cross_entropy", posterior, 2);
  const std::size_t nb = posterior.shape()[0];
  const std::size_t c = posterior.shape()[1];
  if (targets.size() != nb || nb == 0) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + shape_string(posterior.shape()));
  }
  double total = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    if (targets[b] >= c) {
      throw DimensionError("cross_entropy: target " +
                           std::to_string(targets[b]) + " >= class count " +
                           std::to_string(c));
    }
    const double* p = posterior.value().data() + b * c;
    check_distribution("cross_entropy", p, c);
    total += -std::log(std::max(p[targets[b]], kLogFloor));
  }
  const double inv = 1.0 / static_cast<double>(nb);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return make_result("cross_entropy_mean", Tensor::scalar(total * inv),
                     {posterior}, [tg = std::move(tg), c, inv](Node& self) {
                       const Tensor& p = value_of(self, 0);
                       Tensor* g = grad_of(self, 0);
                       for (std::size_t b = 0; b < tg.size(); ++b) {
                         const double pt = p[b * c + tg[b]];
                         if (pt > kLogFloor) {
                           (*g)[b * c + tg[b]] -= self.grad[0] * inv / pt;
                         }
                       }
                     });
}

// -------------------------------------------------------------------- kernels

Var cosine_gaussian_kernels(const Var& mu, std::size_t length) {
  require_rank("cosine_gaussian_kernels", mu, 1);
  require_odd_length("cosine_gaussian_kernels", length);
  const std::size_t nf = mu.shape()[0];
  const double half = static_cast<double>((length - 1) / 2);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (std::size_t f = 0; f < nf; ++f) {
    const double m = mu.value()[f];
    if (!(m > 0.0 && m < 0.5)) {
      throw std::domain_error("cosine_gaussian_kernels: mu[" +
                              std::to_string(f) + "] = " + std::to_string(m) +
                              " outside (0, 0.5)");
    }
  }
  Tensor out(Shape{nf, length});
  for (std::size_t f = 0; f < nf; ++f) {
    const double m = mu.value()[f];
    for (std::size_t i = 0; i < length; ++i) {
      const double n = static_cast<double>(i) - half;
      out[f * length + i] =
          std::cos(kTwoPi * m * n) * std::exp(-n * n * m * m / 2.0);
    }
  }
  std::vector<double> norms;
  normalize_rows(out, norms, nf, length);
  return make_result(
      "cosine_gaussian_kernels", std::move(out), {mu},
      [nf, length, half, norms = std::move(norms)](Node& self) {
        std::vector<double> gr(nf * length);
        unit_norm_backward(self.value, norms, nf, length, self.grad.data(),
                           gr.data());
        const Tensor& muv = value_of(self, 0);
        Tensor* gmu = grad_of(self, 0);
        for (std::size_t f = 0; f < nf; ++f) {
          const double m = muv[f];
          double acc = 0.0;
          for (std::size_t i = 0; i < length; ++i) {
            const double n = static_cast<double>(i) - half;
            const double env = std::exp(-n * n * m * m / 2.0);
            const double phase = kTwoPi * m * n;
            const double d = -kTwoPi * n * std::sin(phase) * env -
                             n * n * m * std::cos(phase) * env;
            acc += gr[f * length + i] * d;
          }
          (*gmu)[f] += acc;
        }
      });
}

Var sinc_kernels(const Var& edges, std::size_t length) {
  require_rank("sinc_kernels", edges, 2);
  require_odd_length("sinc_kernels", length);
  if (edges.shape()[1] != 2) {
    throw DimensionError("sinc_kernels: edges must be [F,2], got " +
                         shape_string(edges.shape()));
  }
  const std::size_t nf = edges.shape()[0];
  const double half = static_cast<double>((length - 1) / 2);
  constexpr double kPi = std::numbers::pi;
  for (std::size_t f = 0; f < nf; ++f) {
    const double lo = edges.value()[2 * f];
    const double hi = edges.value()[2 * f + 1];
    if (!(lo > 0.0 && lo < hi && hi < 0.5)) {
      throw std::domain_error("sinc_kernels: band " + std::to_string(f) +
                              " edges must satisfy 0 < low < high < 0.5");
    }
  }
  std::vector<double> window(length, 1.0);
  if (length > 1) {
    for (std::size_t i = 0; i < length; ++i) {
      const double n = static_cast<double>(i) - half;
      window[i] = 0.54 + 0.46 * std::cos(kPi * n / half);
    }
  }
  // Ideal low-pass of cutoff fc: sin(2 pi fc n) / (pi n), 2 fc at n = 0.
  auto lowpass = [](double fc, double n) {
    return n == 0.0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * n) / (kPi * n);
  };
  Tensor out(Shape{nf, length});
  for (std::size_t f = 0; f < nf; ++f) {
    const double lo = edges.value()[2 * f];
    const double hi = edges.value()[2 * f + 1];
    for (std::size_t i = 0; i < length; ++i) {
      const double n = static_cast<double>(i) - half;
      out[f * length + i] = (lowpass(hi, n) - lowpass(lo, n)) * window[i];
    }
  }
  std::vector<double> norms;
  normalize_rows(out, norms, nf, length);
  return make_result(
      "sinc_kernels", std::move(out), {edges},
      [nf, length, half, window = std::move(window),
       norms = std::move(norms)](Node& self) {
        std::vector<double> gr(nf * length);
        unit_norm_backward(self.value, norms, nf, length, self.grad.data(),
                           gr.data());
        const Tensor& ev = value_of(self, 0);
        Tensor* ge = grad_of(self, 0);
        for (std::size_t f = 0; f < nf; ++f) {
          const double lo = ev[2 * f];
          const double hi = ev[2 * f + 1];
          double glo = 0.0;
          double ghi = 0.0;
          for (std::size_t i = 0; i < length; ++i) {
            const double n = static_cast<double>(i) - half;
            const double g = gr[f * length + i] * window[i];
            ghi += g * 2.0 * std::cos(2.0 * kPi * hi * n);
            glo -= g * 2.0 * std::cos(2.0 * kPi * lo * n);
          }
          (*ge)[2 * f] += glo;
          (*ge)[2 * f + 1] += ghi;
        }
      });
}

}  // namespace relfb
