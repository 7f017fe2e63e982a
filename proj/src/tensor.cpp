#include "rrgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace rrgen {

namespace {

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "," + std::to_string(t.cols()) + "]";
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_str(a) +
                              " and " + shape_str(b));
}

std::shared_ptr<TensorData> make_node(size_t rows, size_t cols) {
  auto d = std::make_shared<TensorData>();
  d->rows = rows;
  d->cols = cols;
  d->value.assign(rows * cols, 0.0);
  return d;
}

// Wires parents and the backward closure onto a freshly computed node.
Tensor finish(std::shared_ptr<TensorData> d,
              std::vector<std::shared_ptr<TensorData>> parents,
              std::function<void(TensorData&)> fn) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  if (needs) {
    d->requires_grad = true;
    d->parents = std::move(parents);
    d->backward_fn = std::move(fn);
  }
  return Tensor(std::move(d));
}

void accumulate(TensorData& p, size_t i, double g) {
  p.ensure_grad();
  p.grad[i] += g;
}

}  // namespace

Tensor Tensor::zeros(size_t rows, size_t cols, bool requires_grad) {
  auto d = make_node(rows, cols);
  d->requires_grad = requires_grad;
  if (requires_grad) d->ensure_grad();
  return Tensor(std::move(d));
}

Tensor Tensor::full(size_t rows, size_t cols, double v) {
  auto d = make_node(rows, cols);
  std::fill(d->value.begin(), d->value.end(), v);
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v) { return full(1, 1, v); }

Tensor Tensor::from_values(size_t rows, size_t cols, std::vector<double> v,
                           bool requires_grad) {
  if (v.size() != rows * cols)
    throw std::invalid_argument("from_values: " + std::to_string(v.size()) +
                                " values for shape [" + std::to_string(rows) +
                                "," + std::to_string(cols) + "]");
  auto d = make_node(rows, cols);
  d->value = std::move(v);
  d->requires_grad = requires_grad;
  if (requires_grad) d->ensure_grad();
  return Tensor(std::move(d));
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor is not scalar, shape " + shape_str(*this));
  return data_->value[0];
}

std::vector<double> Tensor::grad_or_zero() const {
  if (data_->grad.size() == data_->size()) return data_->grad;
  return std::vector<double>(data_->size(), 0.0);
}

Tensor Tensor::detach() const {
  auto d = make_node(rows(), cols());
  d->value = data_->value;
  return Tensor(std::move(d));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto d = make_node(m, n);
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* cv = d->value.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv + p * n;
      double* crow = cv + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  auto an = a.node(), bn = b.node();
  return finish(std::move(d), {an, bn}, [an, bn, m, k, n](TensorData& self) {
    const double* g = self.grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      // dA = dC * B^T
      for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
          double s = 0.0;
          const double* grow = g + i * n;
          const double* brow = bn->value.data() + p * n;
          for (size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          an->grad[i * k + p] += s;
        }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      // dB = A^T * dC
      for (size_t p = 0; p < k; ++p)
        for (size_t i = 0; i < m; ++i) {
          const double aip = an->value[i * k + p];
          const double* grow = g + i * n;
          double* brow = bn->grad.data() + p * n;
          for (size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  const size_t m = a.rows(), n = a.cols();
  auto d = make_node(n, m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) d->value[j * m + i] = a.at(i, j);
  auto an = a.node();
  return finish(std::move(d), {an}, [an, m, n](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool row_bcast = b.rows() == 1 && b.cols() == a.cols() && a.rows() > 1;
  if (!row_bcast && (a.rows() != b.rows() || a.cols() != b.cols()))
    shape_error("add", a, b);
  auto d = make_node(a.rows(), a.cols());
  const size_t n = a.cols();
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < n; ++j)
      d->value[i * n + j] = a.at(i, j) + (row_bcast ? b.at(0, j) : b.at(i, j));
  auto an = a.node(), bn = b.node();
  return finish(std::move(d), {an, bn}, [an, bn, row_bcast, n](TensorData& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      if (row_bcast) {
        for (size_t i = 0; i < self.rows; ++i)
          for (size_t j = 0; j < n; ++j) bn->grad[j] += self.grad[i * n + j];
      } else {
        for (size_t i = 0; i < self.size(); ++i) bn->grad[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("mul", a, b);
  auto d = make_node(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) d->value[i] = a.value()[i] * b.value()[i];
  auto an = a.node(), bn = b.node();
  return finish(std::move(d), {an, bn}, [an, bn](TensorData& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < self.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  auto d = make_node(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) d->value[i] = a.value()[i] * c;
  auto an = a.node();
  return finish(std::move(d), {an}, [an, c](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] * c;
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  auto d = make_node(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) d->value[i] = a.value()[i] + c;
  auto an = a.node();
  return finish(std::move(d), {an}, [an](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
  });
}

Tensor t_log(const Tensor& a) {
  auto d = make_node(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) d->value[i] = std::log(a.value()[i]);
  auto an = a.node();
  return finish(std::move(d), {an}, [an](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] / an->value[i];
  });
}

Tensor t_exp(const Tensor& a) {
  auto d = make_node(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) d->value[i] = std::exp(a.value()[i]);
  auto an = a.node();
  return finish(std::move(d), {an}, [an](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] * self.value[i];
  });
}

Tensor relu(const Tensor& a) {
  auto d = make_node(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) d->value[i] = std::max(0.0, a.value()[i]);
  auto an = a.node();
  return finish(std::move(d), {an}, [an](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i)
      if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
  });
}

Tensor gelu(const Tensor& a) {
  constexpr double inv_sqrt2 = 0.7071067811865475;
  constexpr double inv_sqrt2pi = 0.3989422804014327;
  auto d = make_node(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) {
    const double x = a.value()[i];
    d->value[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
  }
  auto an = a.node();
  return finish(std::move(d), {an}, [an](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.size(); ++i) {
      const double x = an->value[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
      an->grad[i] += self.grad[i] * (cdf + x * pdf);
    }
  });
}

namespace {

// Row-wise stable softmax into out.
void softmax_rows(const std::vector<double>& v, size_t rows, size_t cols,
                  std::vector<double>& out) {
  out.resize(rows * cols);
  for (size_t i = 0; i < rows; ++i) {
    const double* r = v.data() + i * cols;
    double mx = r[0];
    for (size_t j = 1; j < cols; ++j) mx = std::max(mx, r[j]);
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = std::exp(r[j] - mx);
      s += out[i * cols + j];
    }
    for (size_t j = 0; j < cols; ++j) out[i * cols + j] /= s;
  }
}

}  // namespace

Tensor softmax(const Tensor& a) {
  auto d = make_node(a.rows(), a.cols());
  softmax_rows(a.value(), a.rows(), a.cols(), d->value);
  auto an = a.node();
  const size_t cols = a.cols();
  return finish(std::move(d), {an}, [an, cols](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.rows; ++i) {
      const double* y = self.value.data() + i * cols;
      const double* g = self.grad.data() + i * cols;
      double dotv = 0.0;
      for (size_t j = 0; j < cols; ++j) dotv += y[j] * g[j];
      for (size_t j = 0; j < cols; ++j)
        an->grad[i * cols + j] += y[j] * (g[j] - dotv);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  auto d = make_node(a.rows(), a.cols());
  const size_t cols = a.cols();
  for (size_t i = 0; i < a.rows(); ++i) {
    const double* r = a.value().data() + i * cols;
    double mx = r[0];
    for (size_t j = 1; j < cols; ++j) mx = std::max(mx, r[j]);
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += std::exp(r[j] - mx);
    const double lse = mx + std::log(s);
    for (size_t j = 0; j < cols; ++j) d->value[i * cols + j] = r[j] - lse;
  }
  auto an = a.node();
  return finish(std::move(d), {an}, [an, cols](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < self.rows; ++i) {
      const double* y = self.value.data() + i * cols;
      const double* g = self.grad.data() + i * cols;
      double gs = 0.0;
      for (size_t j = 0; j < cols; ++j) gs += g[j];
      for (size_t j = 0; j < cols; ++j)
        an->grad[i * cols + j] += g[j] - std::exp(y[j]) * gs;
    }
  });
}

Tensor sum(const Tensor& a) {
  auto d = make_node(1, 1);
  for (double v : a.value()) d->value[0] += v;
  auto an = a.node();
  return finish(std::move(d), {an}, [an](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor mean_rows(const Tensor& a) {
  const size_t m = a.rows(), n = a.cols();
  auto d = make_node(1, n);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) d->value[j] += a.at(i, j) / static_cast<double>(m);
  auto an = a.node();
  return finish(std::move(d), {an}, [an, m, n](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j)
        an->grad[i * n + j] += self.grad[j] / static_cast<double>(m);
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
  const size_t n = parts[0].cols();
  size_t m = 0;
  for (const auto& p : parts) {
    if (p.cols() != n) shape_error("concat_rows", parts[0], p);
    m += p.rows();
  }
  auto d = make_node(m, n);
  std::vector<std::shared_ptr<TensorData>> nodes;
  size_t r = 0;
  for (const auto& p : parts) {
    std::copy(p.value().begin(), p.value().end(), d->value.begin() + r * n);
    r += p.rows();
    nodes.push_back(p.node());
  }
  return finish(std::move(d), nodes, [nodes, n](TensorData& self) {
    size_t r = 0;
    for (const auto& p : nodes) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (size_t i = 0; i < p->size(); ++i) p->grad[i] += self.grad[r * n + i];
      }
      r += p->rows;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
  const size_t m = parts[0].rows();
  size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) shape_error("concat_cols", parts[0], p);
    n += p.cols();
  }
  auto d = make_node(m, n);
  std::vector<std::shared_ptr<TensorData>> nodes;
  size_t c = 0;
  for (const auto& p : parts) {
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < p.cols(); ++j) d->value[i * n + c + j] = p.at(i, j);
    c += p.cols();
    nodes.push_back(p.node());
  }
  return finish(std::move(d), nodes, [nodes, m, n](TensorData& self) {
    size_t c = 0;
    for (const auto& p : nodes) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (size_t i = 0; i < m; ++i)
          for (size_t j = 0; j < p->cols; ++j)
            p->grad[i * p->cols + j] += self.grad[i * n + c + j];
      }
      c += p->cols;
    }
  });
}

Tensor slice_cols(const Tensor& a, size_t c0, size_t c1) {
  if (c1 > a.cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) +
                                "," + std::to_string(c1) + ") for cols " +
                                std::to_string(a.cols()));
  const size_t m = a.rows(), n = a.cols(), w = c1 - c0;
  auto d = make_node(m, w);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < w; ++j) d->value[i * w + j] = a.at(i, c0 + j);
  auto an = a.node();
  return finish(std::move(d), {an}, [an, m, n, w, c0](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < w; ++j)
        an->grad[i * n + c0 + j] += self.grad[i * w + j];
  });
}

Tensor slice_rows(const Tensor& a, size_t r0, size_t r1) {
  if (r1 > a.rows() || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) +
                                "," + std::to_string(r1) + ") for rows " +
                                std::to_string(a.rows()));
  const size_t n = a.cols(), h = r1 - r0;
  auto d = make_node(h, n);
  std::copy(a.value().begin() + r0 * n, a.value().begin() + r1 * n, d->value.begin());
  auto an = a.node();
  return finish(std::move(d), {an}, [an, n, h, r0](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < h * n; ++i) an->grad[r0 * n + i] += self.grad[i];
  });
}

Tensor stack_scalars(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("stack_scalars: empty input");
  auto d = make_node(1, xs.size());
  std::vector<std::shared_ptr<TensorData>> nodes;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != 1)
      throw std::invalid_argument("stack_scalars: element " + std::to_string(i) +
                                  " is not scalar");
    d->value[i] = xs[i].item();
    nodes.push_back(xs[i].node());
  }
  return finish(std::move(d), nodes, [nodes](TensorData& self) {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i]->requires_grad) {
        nodes[i]->ensure_grad();
        nodes[i]->grad[0] += self.grad[i];
      }
  });
}

Tensor embedding(const Tensor& weight, const std::vector<int>& ids) {
  const size_t V = weight.rows(), dcols = weight.cols();
  auto d = make_node(ids.size(), dcols);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= V)
      throw std::invalid_argument("embedding: id " + std::to_string(ids[i]) +
                                  " out of range for vocab " + std::to_string(V));
    std::copy(weight.value().begin() + ids[i] * dcols,
              weight.value().begin() + (ids[i] + 1) * dcols,
              d->value.begin() + i * dcols);
  }
  auto wn = weight.node();
  return finish(std::move(d), {wn}, [wn, ids, dcols](TensorData& self) {
    if (!wn->requires_grad) return;
    wn->ensure_grad();
    for (size_t i = 0; i < ids.size(); ++i)
      for (size_t j = 0; j < dcols; ++j)
        wn->grad[ids[i] * dcols + j] += self.grad[i * dcols + j];
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const size_t m = x.rows(), n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n) shape_error("layer_norm gain", x, gain);
  if (bias.rows() != 1 || bias.cols() != n) shape_error("layer_norm bias", x, bias);
  auto d = make_node(m, n);
  std::vector<double> xhat(m * n), inv_sigma(m);
  for (size_t i = 0; i < m; ++i) {
    const double* r = x.value().data() + i * n;
    double mu = 0.0;
    for (size_t j = 0; j < n; ++j) mu += r[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (size_t j = 0; j < n; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(n);
    inv_sigma[i] = 1.0 / std::sqrt(var + eps);
    for (size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (r[j] - mu) * inv_sigma[i];
      d->value[i * n + j] = xhat[i * n + j] * gain.at(0, j) + bias.at(0, j);
    }
  }
  auto xn = x.node(), gn = gain.node(), bn = bias.node();
  return finish(std::move(d), {xn, gn, bn},
                [xn, gn, bn, xhat, inv_sigma, m, n](TensorData& self) {
    for (size_t i = 0; i < m; ++i) {
      const double* g = self.grad.data() + i * n;
      const double* xh = xhat.data() + i * n;
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (size_t j = 0; j < n; ++j) gn->grad[j] += g[j] * xh[j];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t j = 0; j < n; ++j) bn->grad[j] += g[j];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (size_t j = 0; j < n; ++j) {
          const double dxh = g[j] * gn->value[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xh[j];
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        for (size_t j = 0; j < n; ++j) {
          const double dxh = g[j] * gn->value[j];
          xn->grad[i * n + j] +=
              (dxh - mean_dxhat - xh[j] * mean_dxhat_xhat) * inv_sigma[i];
        }
      }
    }
  });
}

Tensor gather_per_row(const Tensor& a, const std::vector<int>& ids) {
  const size_t m = a.rows(), n = a.cols();
  if (ids.size() != m)
    throw std::invalid_argument("gather_per_row: " + std::to_string(ids.size()) +
                                " ids for " + std::to_string(m) + " rows");
  auto d = make_node(m, 1);
  for (size_t i = 0; i < m; ++i) {
    if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= n)
      throw std::invalid_argument("gather_per_row: id out of range");
    d->value[i] = a.at(i, ids[i]);
  }
  auto an = a.node();
  return finish(std::move(d), {an}, [an, ids, n](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < ids.size(); ++i) an->grad[i * n + ids[i]] += self.grad[i];
  });
}

Tensor causal_mask(const Tensor& scores) {
  const size_t m = scores.rows(), n = scores.cols();
  if (m != n) throw std::invalid_argument("causal_mask: square input required");
  auto d = make_node(m, n);
  d->value = scores.value();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = i + 1; j < n; ++j) d->value[i * n + j] = -1e30;
  auto an = scores.node();
  return finish(std::move(d), {an}, [an, m, n](TensorData& self) {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j <= i; ++j) an->grad[i * n + j] += self.grad[i * n + j];
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  Tensor lp = log_softmax(logits);
  Tensor picked = gather_per_row(lp, targets);
  return scale(mean(picked), -1.0);
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols())
    shape_error("dot", a, b);
  return matmul(a, transpose(b));
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got [" +
                                std::to_string(loss.rows()) + "," +
                                std::to_string(loss.cols()) + "]");
  // Topological order by iterative DFS over parents.
  std::vector<TensorData*> order;
  std::unordered_set<TensorData*> visited;
  std::vector<std::pair<TensorData*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorData* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorData* n = *it;
    if (n->backward_fn && n->grad.size() == n->size()) n->backward_fn(*n);
  }
}

}  // namespace rrgen
