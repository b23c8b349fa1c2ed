#include "infomtl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace infomtl {

namespace {

thread_local Tape* tl_active_tape = nullptr;
thread_local Precision tl_precision = Precision::f64;
thread_local int64_t tl_next_node_id = 0;

double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int d : s) {
    IMTL_CHECK(d > 0, "tensor shape dims must be positive");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

void set_run_precision(Precision p) { tl_precision = p; }
Precision run_precision() { return tl_precision; }

// ---------------------------------------------------------------- Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Tensor t;
  t.data_ = std::make_shared<TensorData>();
  int64_t n = shape_size(shape);
  t.data_->shape = std::move(shape);
  t.data_->values.assign(static_cast<size_t>(n), v);
  t.data_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> v,
                           bool requires_grad) {
  IMTL_CHECK(shape_size(shape) == static_cast<int64_t>(v.size()),
             "from_values: shape " + shape_str(shape) +
                 " does not match value count " + std::to_string(v.size()));
  Tensor t;
  t.data_ = std::make_shared<TensorData>();
  t.data_->shape = std::move(shape);
  t.data_->values = std::move(v);
  t.data_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v) { return from_values({1}, {v}); }

int Tensor::rows() const {
  IMTL_CHECK(data_->shape.size() == 2, "rows(): tensor is not 2-D");
  return data_->shape[0];
}

int Tensor::cols() const {
  IMTL_CHECK(data_->shape.size() == 2, "cols(): tensor is not 2-D");
  return data_->shape[1];
}

const std::vector<double>& Tensor::grad() const {
  static const std::vector<double> kEmpty;
  return data_->grad.empty() ? kEmpty : data_->grad;
}

double Tensor::item() const {
  IMTL_CHECK(size() == 1, "item(): tensor is not scalar");
  return data_->values[0];
}

Tensor& Tensor::set_requires_grad(bool rg) {
  data_->requires_grad = rg;
  return *this;
}

void Tensor::zero_grad() { data_->grad.clear(); }

Tensor Tensor::deep_copy() const {
  Tensor t;
  t.data_ = std::make_shared<TensorData>();
  t.data_->shape = data_->shape;
  t.data_->values = data_->values;
  t.data_->requires_grad = data_->requires_grad;
  return t;
}

// ------------------------------------------------------------------ Tape

Tape::Tape() {
  prev_ = tl_active_tape;
  tl_active_tape = this;
}

Tape::~Tape() {
  clear();
  tl_active_tape = prev_;
}

Tape* Tape::active() { return tl_active_tape; }

void Tape::push_record(Record r) { records_.push_back(std::move(r)); }

void Tape::clear() { records_.clear(); }

void Tape::backward(const Tensor& loss) {
  IMTL_CHECK(loss.defined() && loss.size() == 1,
             "backward: loss must be a scalar tensor");
  IMTL_CHECK(!records_.empty(), "backward: tape is empty");
  for (auto& r : records_) {
    r.out->grad.clear();
    for (auto& in : r.ins) in->grad.clear();
  }
  loss.data_->grad.assign(1, 1.0);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // not on the path from the loss
    it->backprop();
  }
}

// ------------------------------------------------------------- op plumbing

namespace {

std::vector<double>& grad_buf(const std::shared_ptr<TensorData>& d) {
  if (d->grad.empty()) d->grad.assign(d->values.size(), 0.0);
  return d->grad;
}

// Finiteness gate plus optional f32 rounding; every forward op funnels
// through here before its result escapes into the graph.
void finish_op(const char* name, Tensor& out) {
  auto& v = out.data_->values;
  if (tl_precision == Precision::f32) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  }
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("op '") + name +
                         "' produced a non-finite value");
    }
  }
}

void record_unary(const Tensor& a, Tensor& out, std::function<void()> back) {
  Tape* t = Tape::active();
  if (!t || !a.requires_grad()) return;
  out.data_->requires_grad = true;
  out.data_->node_id = tl_next_node_id++;
  t->push_record({out.data_, {a.data_}, std::move(back)});
}

void record_binary(const Tensor& a, const Tensor& b, Tensor& out,
                   std::function<void()> back) {
  Tape* t = Tape::active();
  if (!t || (!a.requires_grad() && !b.requires_grad())) return;
  out.data_->requires_grad = true;
  out.data_->node_id = tl_next_node_id++;
  t->push_record({out.data_, {a.data_, b.data_}, std::move(back)});
}

void record_nary(const std::vector<Tensor>& ins, Tensor& out,
                 std::function<void()> back) {
  Tape* t = Tape::active();
  if (!t) return;
  bool need = false;
  for (const auto& in : ins) need = need || in.requires_grad();
  if (!need) return;
  out.data_->requires_grad = true;
  out.data_->node_id = tl_next_node_id++;
  std::vector<std::shared_ptr<TensorData>> datas;
  datas.reserve(ins.size());
  for (const auto& in : ins) datas.push_back(in.data_);
  t->push_record({out.data_, std::move(datas), std::move(back)});
}

// Broadcasting support for elementwise binary ops: shapes must match after
// normalizing to 2-D, with any mismatching dim equal to 1 on one side.
struct Bcast {
  int out_r, out_c;
  int ar, ac, br, bc;
  Shape out_shape;
  size_t a_idx(int r, int c) const {
    return static_cast<size_t>((ar == 1 ? 0 : r) * ac + (ac == 1 ? 0 : c));
  }
  size_t b_idx(int r, int c) const {
    return static_cast<size_t>((br == 1 ? 0 : r) * bc + (bc == 1 ? 0 : c));
  }
};

void norm2d(const Shape& s, int* r, int* c) {
  if (s.size() == 2) {
    *r = s[0];
    *c = s[1];
  } else if (s.size() == 1) {
    *r = 1;
    *c = s[0];
  } else {
    throw ConfigError("elementwise ops support 1-D/2-D tensors, got " +
                      shape_str(s));
  }
}

Bcast make_bcast(const char* name, const Tensor& a, const Tensor& b) {
  Bcast bc{};
  norm2d(a.shape(), &bc.ar, &bc.ac);
  norm2d(b.shape(), &bc.br, &bc.bc);
  bool ok_r = bc.ar == bc.br || bc.ar == 1 || bc.br == 1;
  bool ok_c = bc.ac == bc.bc || bc.ac == 1 || bc.bc == 1;
  if (!ok_r || !ok_c) {
    throw ConfigError(std::string(name) + ": shapes " + shape_str(a.shape()) +
                      " and " + shape_str(b.shape()) + " do not broadcast");
  }
  bc.out_r = std::max(bc.ar, bc.br);
  bc.out_c = std::max(bc.ac, bc.bc);
  if (a.shape().size() <= 1 && b.shape().size() <= 1) {
    bc.out_shape = {bc.out_c};
  } else {
    bc.out_shape = {bc.out_r, bc.out_c};
  }
  return bc;
}

template <typename FwdFn, typename BackFn>
Tensor ewise_binary(const char* name, const Tensor& a, const Tensor& b,
                    FwdFn fwd, BackFn bk) {
  Bcast bc = make_bcast(name, a, b);
  Tensor out = Tensor::zeros(bc.out_shape);
  auto& ov = out.mutable_values();
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int r = 0; r < bc.out_r; ++r) {
    for (int c = 0; c < bc.out_c; ++c) {
      ov[static_cast<size_t>(r * bc.out_c + c)] =
          fwd(av[bc.a_idx(r, c)], bv[bc.b_idx(r, c)]);
    }
  }
  finish_op(name, out);
  auto ad = a.data_, bd = b.data_, od = out.data_;
  bool need_a = a.requires_grad(), need_b = b.requires_grad();
  record_binary(a, b, out, [ad, bd, od, bc, bk, need_a, need_b]() {
    const auto& g = od->grad;
    std::vector<double>* ga = need_a ? &grad_buf(ad) : nullptr;
    std::vector<double>* gb = need_b ? &grad_buf(bd) : nullptr;
    for (int r = 0; r < bc.out_r; ++r) {
      for (int c = 0; c < bc.out_c; ++c) {
        size_t oi = static_cast<size_t>(r * bc.out_c + c);
        size_t ai = bc.a_idx(r, c), bi = bc.b_idx(r, c);
        double da = 0.0, db = 0.0;
        bk(g[oi], ad->values[ai], bd->values[bi], &da, &db);
        if (ga) (*ga)[ai] += da;
        if (gb) (*gb)[bi] += db;
      }
    }
  });
  return out;
}

template <typename FwdFn, typename DerivFn>
Tensor ewise_unary(const char* name, const Tensor& a, FwdFn fwd, DerivFn dv) {
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.mutable_values();
  const auto& av = a.values();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = fwd(av[i]);
  finish_op(name, out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, dv]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (size_t i = 0; i < ga.size(); ++i) {
      ga[i] += g[i] * dv(ad->values[i], od->values[i]);
    }
  });
  return out;
}

}  // namespace

// ----------------------------------------------------------------- ops

Tensor add(const Tensor& a, const Tensor& b) {
  return ewise_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return ewise_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double* da, double* db) {
        *da = g;
        *db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return ewise_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double x, double y, double* da, double* db) {
        *da = g * y;
        *db = g * x;
      });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  for (double y : b.values()) {
    IMTL_CHECK_NUM(y != 0.0, "divide: division by zero");
  }
  return ewise_binary(
      "divide", a, b, [](double x, double y) { return x / y; },
      [](double g, double x, double y, double* da, double* db) {
        *da = g / y;
        *db = -g * x / (y * y);
      });
}

Tensor neg(const Tensor& a) {
  return ewise_unary(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double c) {
  return ewise_unary(
      "scale", a, [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return ewise_unary(
      "add_scalar", a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return ewise_unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh_op(const Tensor& a) {
  return ewise_unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp_op(const Tensor& a) {
  return ewise_unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log_op(const Tensor& a) {
  for (double x : a.values()) {
    IMTL_CHECK_NUM(x > 0.0, "log: input outside positive domain");
  }
  return ewise_unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return ewise_unary(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return sigmoid_stable(x); });
}

Tensor sqrt_op(const Tensor& a) {
  for (double x : a.values()) {
    IMTL_CHECK_NUM(x >= 0.0, "sqrt: input outside non-negative domain");
  }
  return ewise_unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  IMTL_CHECK(lo <= hi, "clamp: lo must not exceed hi");
  return ewise_unary(
      "clamp", a,
      [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  IMTL_CHECK(a.shape().size() == 2 && b.shape().size() == 2,
             "matmul: both operands must be 2-D");
  int R = a.rows(), K = a.cols(), K2 = b.rows(), C = b.cols();
  IMTL_CHECK(K == K2, "matmul: inner dims differ, " + shape_str(a.shape()) +
                          " x " + shape_str(b.shape()));
  Tensor out = Tensor::zeros({R, C});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.mutable_values();
  for (int r = 0; r < R; ++r) {
    for (int k = 0; k < K; ++k) {
      double arg = av[static_cast<size_t>(r * K + k)];
      if (arg == 0.0) continue;
      const double* brow = &bv[static_cast<size_t>(k * C)];
      double* orow = &ov[static_cast<size_t>(r * C)];
      for (int c = 0; c < C; ++c) orow[c] += arg * brow[c];
    }
  }
  finish_op("matmul", out);
  auto ad = a.data_, bd = b.data_, od = out.data_;
  bool need_a = a.requires_grad(), need_b = b.requires_grad();
  record_binary(a, b, out, [ad, bd, od, R, K, C, need_a, need_b]() {
    const auto& g = od->grad;
    if (need_a) {
      auto& ga = grad_buf(ad);
      for (int r = 0; r < R; ++r) {
        for (int k = 0; k < K; ++k) {
          double acc = 0.0;
          const double* grow = &g[static_cast<size_t>(r * C)];
          const double* brow = &bd->values[static_cast<size_t>(k * C)];
          for (int c = 0; c < C; ++c) acc += grow[c] * brow[c];
          ga[static_cast<size_t>(r * K + k)] += acc;
        }
      }
    }
    if (need_b) {
      auto& gb = grad_buf(bd);
      for (int k = 0; k < K; ++k) {
        for (int r = 0; r < R; ++r) {
          double arg = ad->values[static_cast<size_t>(r * K + k)];
          if (arg == 0.0) continue;
          const double* grow = &g[static_cast<size_t>(r * C)];
          double* gbrow = &gb[static_cast<size_t>(k * C)];
          for (int c = 0; c < C; ++c) gbrow[c] += arg * grow[c];
        }
      }
    }
  });
  return out;
}

Tensor transpose(const Tensor& a) {
  IMTL_CHECK(a.shape().size() == 2, "transpose: tensor must be 2-D");
  int R = a.rows(), C = a.cols();
  Tensor out = Tensor::zeros({C, R});
  const auto& av = a.values();
  auto& ov = out.mutable_values();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      ov[static_cast<size_t>(c * R + r)] = av[static_cast<size_t>(r * C + c)];
  finish_op("transpose", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, R, C]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c)
        ga[static_cast<size_t>(r * C + c)] += g[static_cast<size_t>(c * R + r)];
  });
  return out;
}

Tensor log_softmax_rows(const Tensor& a) {
  IMTL_CHECK(a.shape().size() == 2, "log_softmax: tensor must be 2-D");
  int R = a.rows(), C = a.cols();
  Tensor out = Tensor::zeros({R, C});
  const auto& av = a.values();
  auto& ov = out.mutable_values();
  for (int r = 0; r < R; ++r) {
    const double* row = &av[static_cast<size_t>(r * C)];
    double m = row[0];
    for (int c = 1; c < C; ++c) m = std::max(m, row[c]);
    double sum = 0.0;
    for (int c = 0; c < C; ++c) sum += std::exp(row[c] - m);
    double lse = m + std::log(sum);
    for (int c = 0; c < C; ++c)
      ov[static_cast<size_t>(r * C + c)] = row[c] - lse;
  }
  finish_op("log_softmax", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, R, C]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (int r = 0; r < R; ++r) {
      double gsum = 0.0;
      for (int c = 0; c < C; ++c) gsum += g[static_cast<size_t>(r * C + c)];
      for (int c = 0; c < C; ++c) {
        size_t i = static_cast<size_t>(r * C + c);
        ga[i] += g[i] - std::exp(od->values[i]) * gsum;
      }
    }
  });
  return out;
}

Tensor softmax_rows(const Tensor& a) { return exp_op(log_softmax_rows(a)); }

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  Tensor out = Tensor::scalar(s);
  finish_op("sum_all", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od]() {
    auto& ga = grad_buf(ad);
    double g = od->grad[0];
    for (double& x : ga) x += g;
  });
  return out;
}

Tensor mean_all(const Tensor& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor rowsum(const Tensor& a) {
  IMTL_CHECK(a.shape().size() == 2, "rowsum: tensor must be 2-D");
  int R = a.rows(), C = a.cols();
  Tensor out = Tensor::zeros({R, 1});
  const auto& av = a.values();
  auto& ov = out.mutable_values();
  for (int r = 0; r < R; ++r) {
    double s = 0.0;
    for (int c = 0; c < C; ++c) s += av[static_cast<size_t>(r * C + c)];
    ov[static_cast<size_t>(r)] = s;
  }
  finish_op("rowsum", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, R, C]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c)
        ga[static_cast<size_t>(r * C + c)] += g[static_cast<size_t>(r)];
  });
  return out;
}

Tensor colsum(const Tensor& a) {
  IMTL_CHECK(a.shape().size() == 2, "colsum: tensor must be 2-D");
  int R = a.rows(), C = a.cols();
  Tensor out = Tensor::zeros({1, C});
  const auto& av = a.values();
  auto& ov = out.mutable_values();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      ov[static_cast<size_t>(c)] += av[static_cast<size_t>(r * C + c)];
  finish_op("colsum", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, R, C]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c)
        ga[static_cast<size_t>(r * C + c)] += g[static_cast<size_t>(c)];
  });
  return out;
}

Tensor rowmean(const Tensor& a) {
  return scale(rowsum(a), 1.0 / static_cast<double>(a.cols()));
}

Tensor colmean(const Tensor& a) {
  return scale(colsum(a), 1.0 / static_cast<double>(a.rows()));
}

Tensor row_gather(const Tensor& a, const std::vector<int>& idx) {
  IMTL_CHECK(a.shape().size() == 2, "row_gather: tensor must be 2-D");
  int R = a.rows(), C = a.cols();
  IMTL_CHECK(static_cast<int>(idx.size()) == R,
             "row_gather: index count must equal row count");
  for (int i : idx) {
    IMTL_CHECK(i >= 0 && i < C, "row_gather: index " + std::to_string(i) +
                                    " out of range [0," + std::to_string(C) + ")");
  }
  Tensor out = Tensor::zeros({R, 1});
  const auto& av = a.values();
  auto& ov = out.mutable_values();
  for (int r = 0; r < R; ++r)
    ov[static_cast<size_t>(r)] = av[static_cast<size_t>(r * C + idx[static_cast<size_t>(r)])];
  finish_op("row_gather", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, idx, C]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (size_t r = 0; r < idx.size(); ++r)
      ga[r * static_cast<size_t>(C) + static_cast<size_t>(idx[r])] += g[r];
  });
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& rows) {
  IMTL_CHECK(a.shape().size() == 2, "gather_rows: tensor must be 2-D");
  int R = a.rows(), C = a.cols();
  for (int r : rows) {
    IMTL_CHECK(r >= 0 && r < R, "gather_rows: row index out of range");
  }
  int n = static_cast<int>(rows.size());
  IMTL_CHECK(n > 0, "gather_rows: empty row selection");
  Tensor out = Tensor::zeros({n, C});
  const auto& av = a.values();
  auto& ov = out.mutable_values();
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < C; ++c)
      ov[static_cast<size_t>(k * C + c)] =
          av[static_cast<size_t>(rows[static_cast<size_t>(k)] * C + c)];
  finish_op("gather_rows", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, rows, C]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (size_t k = 0; k < rows.size(); ++k)
      for (int c = 0; c < C; ++c)
        ga[static_cast<size_t>(rows[k] * C + c)] +=
            g[k * static_cast<size_t>(C) + static_cast<size_t>(c)];
  });
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  IMTL_CHECK(!parts.empty(), "concat_rows: no inputs");
  int C = parts[0].cols();
  int R = 0;
  for (const auto& p : parts) {
    IMTL_CHECK(p.shape().size() == 2 && p.cols() == C,
               "concat_rows: column counts differ");
    R += p.rows();
  }
  Tensor out = Tensor::zeros({R, C});
  auto& ov = out.mutable_values();
  size_t off = 0;
  for (const auto& p : parts) {
    const auto& pv = p.values();
    std::copy(pv.begin(), pv.end(), ov.begin() + static_cast<long>(off));
    off += pv.size();
  }
  finish_op("concat_rows", out);
  auto od = out.data_;
  std::vector<std::shared_ptr<TensorData>> datas;
  for (const auto& p : parts) datas.push_back(p.data_);
  record_nary(parts, out, [datas, od]() {
    const auto& g = od->grad;
    size_t off = 0;
    for (const auto& d : datas) {
      if (d->requires_grad) {
        auto& gd = grad_buf(d);
        for (size_t i = 0; i < gd.size(); ++i) gd[i] += g[off + i];
      }
      off += d->values.size();
    }
  });
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  IMTL_CHECK(!parts.empty(), "concat_cols: no inputs");
  int R = parts[0].rows();
  int C = 0;
  for (const auto& p : parts) {
    IMTL_CHECK(p.shape().size() == 2 && p.rows() == R,
               "concat_cols: row counts differ");
    C += p.cols();
  }
  Tensor out = Tensor::zeros({R, C});
  auto& ov = out.mutable_values();
  int coff = 0;
  for (const auto& p : parts) {
    const auto& pv = p.values();
    int pc = p.cols();
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < pc; ++c)
        ov[static_cast<size_t>(r * C + coff + c)] = pv[static_cast<size_t>(r * pc + c)];
    coff += pc;
  }
  finish_op("concat_cols", out);
  auto od = out.data_;
  std::vector<std::shared_ptr<TensorData>> datas;
  for (const auto& p : parts) datas.push_back(p.data_);
  record_nary(parts, out, [datas, od, R, C]() {
    const auto& g = od->grad;
    int coff = 0;
    for (const auto& d : datas) {
      int pc = d->shape[1];
      if (d->requires_grad) {
        auto& gd = grad_buf(d);
        for (int r = 0; r < R; ++r)
          for (int c = 0; c < pc; ++c)
            gd[static_cast<size_t>(r * pc + c)] +=
                g[static_cast<size_t>(r * C + coff + c)];
      }
      coff += pc;
    }
  });
  return out;
}

Tensor dropout(const Tensor& a, double p, RngStream& rng) {
  IMTL_CHECK(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  if (p == 0.0) {
    // degenerate mask: identity, still returns a fresh node so callers can
    // treat both passes uniformly
    return scale(a, 1.0);
  }
  double keep = 1.0 - p;
  std::vector<double> mask(a.values().size());
  for (double& m : mask) m = rng.bernoulli(p) ? 0.0 : 1.0 / keep;
  Tensor out = Tensor::zeros(a.shape());
  auto& ov = out.mutable_values();
  const auto& av = a.values();
  for (size_t i = 0; i < av.size(); ++i) ov[i] = av[i] * mask[i];
  finish_op("dropout", out);
  auto ad = a.data_, od = out.data_;
  record_unary(a, out, [ad, od, mask]() {
    auto& ga = grad_buf(ad);
    const auto& g = od->grad;
    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * mask[i];
  });
  return out;
}

Tensor detach(const Tensor& a) {
  Tensor t;
  t.data_ = std::make_shared<TensorData>();
  t.data_->shape = a.shape();
  t.data_->values = a.values();
  t.data_->requires_grad = false;
  return t;
}

// ------------------------------------------------------------- composites

Tensor row_l2_norm(const Tensor& a) { return sqrt_op(rowsum(mul(a, a))); }

Tensor l2_norm(const Tensor& a) { return sqrt_op(sum_all(mul(a, a))); }

Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b) {
  IMTL_CHECK(a.shape().size() == 2 && b.shape().size() == 2 &&
                 a.cols() == b.cols(),
             "cosine_similarity_matrix: operands must be 2-D with equal width");
  Tensor na = row_l2_norm(a);
  Tensor nb = row_l2_norm(b);
  for (double v : na.values()) {
    IMTL_CHECK_NUM(v > 0.0, "cosine_similarity_matrix: zero-norm row");
  }
  for (double v : nb.values()) {
    IMTL_CHECK_NUM(v > 0.0, "cosine_similarity_matrix: zero-norm row");
  }
  Tensor ah = divide(a, na);
  Tensor bh = divide(b, nb);
  return matmul(ah, transpose(bh));
}

std::vector<int> argmax_rows(const Tensor& a) {
  IMTL_CHECK(a.shape().size() == 2, "argmax_rows: tensor must be 2-D");
  int R = a.rows(), C = a.cols();
  std::vector<int> out(static_cast<size_t>(R));
  const auto& av = a.values();
  for (int r = 0; r < R; ++r) {
    int best = 0;
    double bv = av[static_cast<size_t>(r * C)];
    for (int c = 1; c < C; ++c) {
      double v = av[static_cast<size_t>(r * C + c)];
      if (v > bv) {
        bv = v;
        best = c;
      }
    }
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

}  // namespace infomtl
