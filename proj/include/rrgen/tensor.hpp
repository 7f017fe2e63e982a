#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rrgen {

// All tensors are 2-D row-major float64. Scalars are [1,1], row vectors [1,n].
struct TensorData {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily; zeros when untouched
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorData>> parents;
  std::function<void(TensorData&)> backward_fn;

  size_t size() const { return rows * cols; }
  void ensure_grad() {
    if (grad.size() != size()) grad.assign(size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorData> d) : data_(std::move(d)) {}

  static Tensor zeros(size_t rows, size_t cols, bool requires_grad = false);
  static Tensor full(size_t rows, size_t cols, double v);
  static Tensor scalar(double v);
  static Tensor from_values(size_t rows, size_t cols, std::vector<double> v,
                            bool requires_grad = false);

  bool defined() const { return static_cast<bool>(data_); }
  size_t rows() const { return data_->rows; }
  size_t cols() const { return data_->cols; }
  size_t size() const { return data_->size(); }
  bool requires_grad() const { return data_->requires_grad; }

  std::vector<double>& value() { return data_->value; }
  const std::vector<double>& value() const { return data_->value; }
  double item() const;
  double at(size_t r, size_t c) const { return data_->value[r * data_->cols + c]; }

  // Gradient view; zeros if backward never reached this tensor.
  std::vector<double> grad_or_zero() const;
  std::vector<double>& grad_ref() { data_->ensure_grad(); return data_->grad; }
  void zero_grad() { data_->grad.assign(data_->size(), 0.0); }

  // Leaf copy cut off from the graph.
  Tensor detach() const;

  std::shared_ptr<TensorData> node() const { return data_; }

 private:
  std::shared_ptr<TensorData> data_;
};

// Shape-checked primitive ops. Every op raises std::invalid_argument naming
// both shapes on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);        // same shape, or b is [1,n]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor t_log(const Tensor& a);
Tensor t_exp(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softmax(const Tensor& a);                     // per row
Tensor log_softmax(const Tensor& a);                 // per row
Tensor sum(const Tensor& a);                         // -> scalar
Tensor mean(const Tensor& a);                        // -> scalar
Tensor mean_rows(const Tensor& a);                   // [m,n] -> [1,n]
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, size_t c0, size_t c1);
Tensor slice_rows(const Tensor& a, size_t r0, size_t r1);
Tensor stack_scalars(const std::vector<Tensor>& xs); // -> [1,n]
Tensor embedding(const Tensor& weight, const std::vector<int>& ids);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor gather_per_row(const Tensor& a, const std::vector<int>& ids); // [m,1]
Tensor causal_mask(const Tensor& scores);            // -inf above diagonal
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);
Tensor dot(const Tensor& a, const Tensor& b);        // [1,d]x[1,d] -> [1,1]

// Reverse-mode pass from a scalar loss. Gradients accumulate across calls.
void backward(const Tensor& loss);

struct Parameter {
  std::string name;
  Tensor tensor;
};

}  // namespace rrgen
