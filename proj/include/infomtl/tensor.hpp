#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "infomtl/common.hpp"
#include "infomtl/rng.hpp"

namespace infomtl {

using Shape = std::vector<int>;

int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorData {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass touches this node
  bool requires_grad = false;
  int64_t node_id = -1;      // id on the recording tape, -1 when untracked
};

// Dense row-major tensor handle. Copies are shallow (shared storage); the
// optimizer mutates parameter values in place through mutable_values().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> v,
                            bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  int64_t size() const { return static_cast<int64_t>(data_->values.size()); }
  int rows() const;
  int cols() const;

  const std::vector<double>& values() const { return data_->values; }
  std::vector<double>& mutable_values() { return data_->values; }
  const std::vector<double>& grad() const;
  bool has_grad() const { return !data_->grad.empty(); }
  double item() const;

  bool requires_grad() const { return data_->requires_grad; }
  Tensor& set_requires_grad(bool rg);
  void zero_grad();
  int64_t node_id() const { return data_->node_id; }

  Tensor deep_copy() const;

  std::shared_ptr<TensorData> data_;
};

enum class Precision { f64, f32 };
// Per-thread value precision for forward ops. In f32 mode every op result is
// rounded through IEEE float; storage stays double. Default f64.
void set_run_precision(Precision p);
Precision run_precision();

// Reverse-mode tape. Constructing a Tape makes it the active recorder for the
// current thread (restored on destruction, stack discipline). Ops append a
// record whenever any input requires grad; record order is the topological
// order. backward() may be called several times on one tape, each call from a
// different scalar (used for per-task gradients); grads are re-zeroed first.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  size_t size() const { return records_.size(); }
  void backward(const Tensor& loss);
  void clear();

  static Tape* active();

  struct Record {
    std::shared_ptr<TensorData> out;
    std::vector<std::shared_ptr<TensorData>> ins;
    std::function<void()> backprop;
  };
  void push_record(Record r);

 private:
  std::vector<Record> records_;
  Tape* prev_ = nullptr;
};

// ---- forward op set (each records a tape node when grads are required) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor log_softmax_rows(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor rowsum(const Tensor& a);   // {B,C} -> {B,1}
Tensor colsum(const Tensor& a);   // {B,C} -> {1,C}
Tensor rowmean(const Tensor& a);
Tensor colmean(const Tensor& a);
Tensor row_gather(const Tensor& a, const std::vector<int>& idx);
Tensor gather_rows(const Tensor& a, const std::vector<int>& rows);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor dropout(const Tensor& a, double p, RngStream& rng);
Tensor detach(const Tensor& a);

// composites built from the primitives above
Tensor row_l2_norm(const Tensor& a);  // {B,C} -> {B,1}
Tensor l2_norm(const Tensor& a);      // scalar
Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// forward-only helpers (never touch the tape)
std::vector<int> argmax_rows(const Tensor& a);

}  // namespace infomtl
