#include "trajevent/tape.hpp"

#include <cmath>

#include "trajevent/common.hpp"

namespace trajevent::autodiff {

size_t param_count(const ParameterSet& params) {
  size_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

namespace {

[[noreturn]] void shape_error(const std::string& op, const Tensor& a,
                              const Tensor& b) {
  throw ContractError(op + ": incompatible shapes " + a.shape_str() + " and " +
                      b.shape_str());
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

// C (+)= op_a(A) * op_b(B) with op = optional transpose of the stored matrix.
template <bool TA, bool TB>
void matmul_acc(const Tensor& A, const Tensor& B, Tensor& C, bool accumulate) {
  const size_t m = TA ? A.dim(1) : A.dim(0);
  const size_t k = TA ? A.dim(0) : A.dim(1);
  const size_t n = TB ? B.dim(0) : B.dim(1);
  if (!accumulate) C.fill(0.0);
  const double* a = A.data();
  const double* b = B.data();
  double* c = C.data();
  if constexpr (!TA && !TB) {
    for (size_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      const double* arow = a + i * k;
      for (size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* brow = b + p * n;
        for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if constexpr (!TA && TB) {
    for (size_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      double* crow = c + i * n;
      for (size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double acc = 0.0;
        for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] += acc;
      }
    }
  } else if constexpr (TA && !TB) {
    for (size_t p = 0; p < k; ++p) {
      const double* arow = a + p * m;
      const double* brow = b + p * n;
      for (size_t i = 0; i < m; ++i) {
        const double av = arow[i];
        double* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double acc = 0.0;
        for (size_t p = 0; p < k; ++p) acc += a[p * m + i] * brow[p];
        c[i * n + j] += acc;
      }
    }
  }
}

struct InputNode : Node {
  const char* op_name() const override { return "input"; }
};

struct ParamNode : Node {
  const char* op_name() const override { return "param"; }
};

struct AddNode : Node {
  const char* op_name() const override { return "add"; }
  void backward() override {
    for (Node* in : inputs_) {
      if (!in->requires_grad) continue;
      Tensor& g = grad_of(in);
      for (size_t i = 0; i < g.numel(); ++i) g[i] += grad[i];
    }
  }
};

struct MulNode : Node {
  const char* op_name() const override { return "mul"; }
  void backward() override {
    Node* a = inputs_[0];
    Node* b = inputs_[1];
    if (a->requires_grad) {
      Tensor& g = grad_of(a);
      for (size_t i = 0; i < g.numel(); ++i) g[i] += grad[i] * b->value[i];
    }
    if (b->requires_grad) {
      Tensor& g = grad_of(b);
      for (size_t i = 0; i < g.numel(); ++i) g[i] += grad[i] * a->value[i];
    }
  }
};

struct MulScalarNode : Node {
  const char* op_name() const override { return "mul_scalar"; }
  double c = 1.0;
  void backward() override {
    Node* a = inputs_[0];
    if (!a->requires_grad) return;
    Tensor& g = grad_of(a);
    for (size_t i = 0; i < g.numel(); ++i) g[i] += grad[i] * c;
  }
};

struct MatmulNode : Node {
  const char* op_name() const override { return "matmul"; }
  bool ta = false, tb = false;
  void backward() override {
    Node* a = inputs_[0];
    Node* b = inputs_[1];
    if (a->requires_grad) {
      Tensor& ga = grad_of(a);
      if (!ta) {
        if (!tb)
          matmul_acc<false, true>(grad, b->value, ga, true);
        else
          matmul_acc<false, false>(grad, b->value, ga, true);
      } else {
        if (!tb)
          matmul_acc<false, true>(b->value, grad, ga, true);
        else
          matmul_acc<true, true>(b->value, grad, ga, true);
      }
    }
    if (b->requires_grad) {
      Tensor& gb = grad_of(b);
      if (!tb) {
        if (!ta)
          matmul_acc<true, false>(a->value, grad, gb, true);
        else
          matmul_acc<false, false>(a->value, grad, gb, true);
      } else {
        if (!ta)
          matmul_acc<true, false>(grad, a->value, gb, true);
        else
          matmul_acc<true, true>(grad, a->value, gb, true);
      }
    }
  }
};

struct LinearNode : Node {
  const char* op_name() const override { return "linear"; }
  size_t rows = 1;
  void backward() override {
    Node* x = inputs_[0];
    Node* w = inputs_[1];
    Node* b = inputs_[2];
    const size_t in = w->value.dim(0);
    const size_t out = w->value.dim(1);
    // Treat rank-1 x as a single row.
    if (x->requires_grad) {
      Tensor& gx = grad_of(x);
      const double* gy = grad.data();
      const double* wd = w->value.data();
      double* gxd = gx.data();
      for (size_t i = 0; i < rows; ++i) {
        for (size_t p = 0; p < in; ++p) {
          const double* wrow = wd + p * out;
          const double* gyrow = gy + i * out;
          double acc = 0.0;
          for (size_t j = 0; j < out; ++j) acc += gyrow[j] * wrow[j];
          gxd[i * in + p] += acc;
        }
      }
    }
    if (w->requires_grad) {
      Tensor& gw = grad_of(w);
      const double* xd = x->value.data();
      const double* gy = grad.data();
      double* gwd = gw.data();
      for (size_t i = 0; i < rows; ++i) {
        const double* xrow = xd + i * in;
        const double* gyrow = gy + i * out;
        for (size_t p = 0; p < in; ++p) {
          const double xv = xrow[p];
          double* gwrow = gwd + p * out;
          for (size_t j = 0; j < out; ++j) gwrow[j] += xv * gyrow[j];
        }
      }
    }
    if (b->requires_grad) {
      Tensor& gb = grad_of(b);
      const double* gy = grad.data();
      for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < out; ++j) gb[j] += gy[i * out + j];
    }
  }
};

struct Conv1dNode : Node {
  const char* op_name() const override { return "conv1d_causal_dilated"; }
  size_t dilation = 1;
  void backward() override {
    Node* x = inputs_[0];
    Node* k = inputs_[1];
    Node* b = inputs_[2];
    const size_t cin = x->value.dim(0);
    const size_t t_len = x->value.dim(1);
    const size_t cout = k->value.dim(0);
    const size_t taps = k->value.dim(2);
    const double* gy = grad.data();
    if (b->requires_grad) {
      Tensor& gb = grad_of(b);
      for (size_t o = 0; o < cout; ++o) {
        const double* grow = gy + o * t_len;
        double acc = 0.0;
        for (size_t t = 0; t < t_len; ++t) acc += grow[t];
        gb[o] += acc;
      }
    }
    const bool need_x = x->requires_grad;
    const bool need_k = k->requires_grad;
    if (!need_x && !need_k) return;
    Tensor* gx = need_x ? &grad_of(x) : nullptr;
    Tensor* gk = need_k ? &grad_of(k) : nullptr;
    const double* xd = x->value.data();
    for (size_t o = 0; o < cout; ++o) {
      const double* grow = gy + o * t_len;
      for (size_t c = 0; c < cin; ++c) {
        const double* xrow = xd + c * t_len;
        for (size_t j = 0; j < taps; ++j) {
          const size_t off = (taps - 1 - j) * dilation;
          if (off >= t_len) continue;
          const double w = k->value.at(o, c, j);
          if (need_x) {
            double* gxrow = gx->data() + c * t_len;
            for (size_t t = off; t < t_len; ++t)
              gxrow[t - off] += w * grow[t];
          }
          if (need_k) {
            double acc = 0.0;
            for (size_t t = off; t < t_len; ++t)
              acc += grow[t] * xrow[t - off];
            gk->at(o, c, j) += acc;
          }
        }
      }
    }
  }
};

struct GatedNode : Node {
  const char* op_name() const override { return "gated_activation"; }
  std::vector<double> tanh_a, sig_b;
  void backward() override {
    Node* a = inputs_[0];
    Node* b = inputs_[1];
    const size_t n = value.numel();
    if (a->requires_grad) {
      Tensor& g = grad_of(a);
      for (size_t i = 0; i < n; ++i)
        g[i] += grad[i] * sig_b[i] * (1.0 - tanh_a[i] * tanh_a[i]);
    }
    if (b->requires_grad) {
      Tensor& g = grad_of(b);
      for (size_t i = 0; i < n; ++i)
        g[i] += grad[i] * tanh_a[i] * sig_b[i] * (1.0 - sig_b[i]);
    }
  }
};

struct ReluNode : Node {
  const char* op_name() const override { return "relu"; }
  void backward() override {
    Node* a = inputs_[0];
    if (!a->requires_grad) return;
    Tensor& g = grad_of(a);
    for (size_t i = 0; i < g.numel(); ++i)
      if (a->value[i] > 0.0) g[i] += grad[i];
  }
};

struct LayerNormNode : Node {
  const char* op_name() const override { return "layer_norm"; }
  Tensor xhat;
  std::vector<double> inv_std;
  void backward() override {
    Node* x = inputs_[0];
    Node* gamma = inputs_[1];
    Node* beta = inputs_[2];
    const size_t d = gamma->value.numel();
    const size_t rows = value.numel() / d;
    const double* gy = grad.data();
    const double* xh = xhat.data();
    const double* gv = gamma->value.data();
    if (gamma->requires_grad) {
      Tensor& gg = grad_of(gamma);
      for (size_t r = 0; r < rows; ++r)
        for (size_t i = 0; i < d; ++i)
          gg[i] += gy[r * d + i] * xh[r * d + i];
    }
    if (beta->requires_grad) {
      Tensor& gb = grad_of(beta);
      for (size_t r = 0; r < rows; ++r)
        for (size_t i = 0; i < d; ++i) gb[i] += gy[r * d + i];
    }
    if (!x->requires_grad) return;
    Tensor& gx = grad_of(x);
    for (size_t r = 0; r < rows; ++r) {
      const double* dyr = gy + r * d;
      const double* xhr = xh + r * d;
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (size_t i = 0; i < d; ++i) {
        const double dxh = dyr[i] * gv[i];
        mean_dxhat += dxh;
        mean_dxhat_xhat += dxh * xhr[i];
      }
      mean_dxhat /= static_cast<double>(d);
      mean_dxhat_xhat /= static_cast<double>(d);
      double* gxr = gx.data() + r * d;
      for (size_t i = 0; i < d; ++i) {
        const double dxh = dyr[i] * gv[i];
        gxr[i] += inv_std[r] * (dxh - mean_dxhat - xhr[i] * mean_dxhat_xhat);
      }
    }
  }
};

struct SoftmaxNode : Node {
  const char* op_name() const override { return "softmax"; }
  size_t rows = 1, cols = 1, row_stride = 1, col_stride = 1;
  void backward() override {
    Node* x = inputs_[0];
    if (!x->requires_grad) return;
    Tensor& gx = grad_of(x);
    for (size_t r = 0; r < rows; ++r) {
      const size_t base = r * row_stride;
      double s = 0.0;
      for (size_t j = 0; j < cols; ++j) {
        const size_t idx = base + j * col_stride;
        s += grad[idx] * value[idx];
      }
      for (size_t j = 0; j < cols; ++j) {
        const size_t idx = base + j * col_stride;
        gx[idx] += value[idx] * (grad[idx] - s);
      }
    }
  }
};

struct MeanAxisNode : Node {
  const char* op_name() const override { return "mean"; }
  size_t axis = 0;
  void backward() override {
    Node* x = inputs_[0];
    if (!x->requires_grad) return;
    Tensor& gx = grad_of(x);
    const size_t r = x->value.dim(0);
    const size_t c = x->value.dim(1);
    if (axis == 0) {
      const double inv = 1.0 / static_cast<double>(r);
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) gx.at(i, j) += grad[j] * inv;
    } else {
      const double inv = 1.0 / static_cast<double>(c);
      for (size_t i = 0; i < r; ++i)
        for (size_t j = 0; j < c; ++j) gx.at(i, j) += grad[i] * inv;
    }
  }
};

struct MeanAllNode : Node {
  const char* op_name() const override { return "mean_all"; }
  void backward() override {
    Node* x = inputs_[0];
    if (!x->requires_grad) return;
    Tensor& gx = grad_of(x);
    const double g = grad[0] / static_cast<double>(x->value.numel());
    for (size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  }
};

struct ConcatNode : Node {
  const char* op_name() const override { return "concat"; }
  size_t axis = 1;
  void backward() override {
    const size_t out_cols = value.dim(1);
    size_t row_off = 0, col_off = 0;
    for (Node* in : inputs_) {
      const size_t r = in->value.dim(0);
      const size_t c = in->value.dim(1);
      if (in->requires_grad) {
        Tensor& g = grad_of(in);
        for (size_t i = 0; i < r; ++i)
          for (size_t j = 0; j < c; ++j)
            g.at(i, j) += grad[(i + row_off) * out_cols + (j + col_off)];
      }
      if (axis == 0)
        row_off += r;
      else
        col_off += c;
    }
  }
};

struct TransposeNode : Node {
  const char* op_name() const override { return "transpose"; }
  void backward() override {
    Node* x = inputs_[0];
    if (!x->requires_grad) return;
    Tensor& gx = grad_of(x);
    const size_t r = x->value.dim(0);
    const size_t c = x->value.dim(1);
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) gx.at(i, j) += grad[j * r + i];
  }
};

struct CrossEntropyNode : Node {
  const char* op_name() const override { return "cross_entropy"; }
  size_t target = 0;
  static constexpr double kClamp = 1e-12;
  void backward() override {
    Node* p = inputs_[0];
    if (!p->requires_grad) return;
    const double pt = p->value[target];
    if (pt <= kClamp) return;  // loss is flat inside the clamp
    Tensor& g = grad_of(p);
    g[target] += grad[0] * (-1.0 / pt);
  }
};

}  // namespace

Node* Tape::adopt(std::unique_ptr<Node> n) {
  for (Node* in : n->inputs_)
    if (in->requires_grad) n->requires_grad = true;
  nodes_.push_back(std::move(n));
  return nodes_.back().get();
}

Node* Tape::input(Tensor v) {
  auto n = std::make_unique<InputNode>();
  n->value = std::move(v);
  return adopt(std::move(n));
}

Node* Tape::param(const Tensor& v) {
  auto n = std::make_unique<ParamNode>();
  n->value = v;
  n->requires_grad = true;
  return adopt(std::move(n));
}

std::vector<Node*> Tape::bind(const ParameterSet& params) {
  std::vector<Node*> nodes;
  nodes.reserve(params.size());
  for (const auto& p : params) nodes.push_back(param(p.value));
  return nodes;
}

Node* Tape::add(Node* a, Node* b) {
  if (!a->value.same_shape(b->value)) shape_error("add", a->value, b->value);
  auto n = std::make_unique<AddNode>();
  n->inputs_ = {a, b};
  n->value = Tensor(a->value.shape());
  for (size_t i = 0; i < n->value.numel(); ++i)
    n->value[i] = a->value[i] + b->value[i];
  return adopt(std::move(n));
}

Node* Tape::mul(Node* a, Node* b) {
  if (!a->value.same_shape(b->value)) shape_error("mul", a->value, b->value);
  auto n = std::make_unique<MulNode>();
  n->inputs_ = {a, b};
  n->value = Tensor(a->value.shape());
  for (size_t i = 0; i < n->value.numel(); ++i)
    n->value[i] = a->value[i] * b->value[i];
  return adopt(std::move(n));
}

Node* Tape::mul_scalar(Node* a, double c) {
  auto n = std::make_unique<MulScalarNode>();
  n->inputs_ = {a};
  n->c = c;
  n->value = Tensor(a->value.shape());
  for (size_t i = 0; i < n->value.numel(); ++i) n->value[i] = a->value[i] * c;
  return adopt(std::move(n));
}

Node* Tape::matmul(Node* a, Node* b, bool transpose_a, bool transpose_b) {
  require(a->value.rank() == 2 && b->value.rank() == 2,
          "matmul requires rank-2 tensors, got " + a->value.shape_str() +
              " and " + b->value.shape_str());
  const size_t m = transpose_a ? a->value.dim(1) : a->value.dim(0);
  const size_t ka = transpose_a ? a->value.dim(0) : a->value.dim(1);
  const size_t kb = transpose_b ? b->value.dim(1) : b->value.dim(0);
  const size_t nn = transpose_b ? b->value.dim(0) : b->value.dim(1);
  if (ka != kb) shape_error("matmul", a->value, b->value);
  auto n = std::make_unique<MatmulNode>();
  n->inputs_ = {a, b};
  n->ta = transpose_a;
  n->tb = transpose_b;
  n->value = Tensor({m, nn});
  if (!transpose_a && !transpose_b)
    matmul_acc<false, false>(a->value, b->value, n->value, false);
  else if (!transpose_a && transpose_b)
    matmul_acc<false, true>(a->value, b->value, n->value, false);
  else if (transpose_a && !transpose_b)
    matmul_acc<true, false>(a->value, b->value, n->value, false);
  else
    matmul_acc<true, true>(a->value, b->value, n->value, false);
  return adopt(std::move(n));
}

Node* Tape::linear(Node* x, Node* w, Node* b) {
  require(w->value.rank() == 2 && b->value.rank() == 1,
          "linear: weight must be rank-2 and bias rank-1");
  const size_t in = w->value.dim(0);
  const size_t out = w->value.dim(1);
  require(b->value.dim(0) == out, "linear: bias length " +
                                      b->value.shape_str() +
                                      " does not match weight " +
                                      w->value.shape_str());
  size_t rows;
  if (x->value.rank() == 1) {
    if (x->value.dim(0) != in) shape_error("linear", x->value, w->value);
    rows = 1;
  } else {
    require(x->value.rank() == 2, "linear: input must be rank-1 or rank-2");
    if (x->value.dim(1) != in) shape_error("linear", x->value, w->value);
    rows = x->value.dim(0);
  }
  auto n = std::make_unique<LinearNode>();
  n->inputs_ = {x, w, b};
  n->rows = rows;
  n->value = x->value.rank() == 1 ? Tensor({out}) : Tensor({rows, out});
  const double* xd = x->value.data();
  const double* wd = w->value.data();
  const double* bd = b->value.data();
  double* yd = n->value.data();
  for (size_t i = 0; i < rows; ++i) {
    double* yrow = yd + i * out;
    for (size_t j = 0; j < out; ++j) yrow[j] = bd[j];
    const double* xrow = xd + i * in;
    for (size_t p = 0; p < in; ++p) {
      const double xv = xrow[p];
      const double* wrow = wd + p * out;
      for (size_t j = 0; j < out; ++j) yrow[j] += xv * wrow[j];
    }
  }
  return adopt(std::move(n));
}

Node* Tape::conv1d_causal_dilated(Node* x, Node* kernel, Node* bias,
                                  size_t dilation) {
  require(x->value.rank() == 2, "conv1d: input must be rank-2 [channels x T]");
  require(kernel->value.rank() == 3,
          "conv1d: kernel must be rank-3 [out x in x taps]");
  require(dilation >= 1, "conv1d: dilation must be >= 1");
  const size_t cin = x->value.dim(0);
  const size_t t_len = x->value.dim(1);
  const size_t cout = kernel->value.dim(0);
  const size_t taps = kernel->value.dim(2);
  if (kernel->value.dim(1) != cin)
    shape_error("conv1d_causal_dilated", x->value, kernel->value);
  require(bias->value.rank() == 1 && bias->value.dim(0) == cout,
          "conv1d: bias length must equal output channels");
  auto n = std::make_unique<Conv1dNode>();
  n->inputs_ = {x, kernel, bias};
  n->dilation = dilation;
  n->value = Tensor({cout, t_len});
  const double* xd = x->value.data();
  double* yd = n->value.data();
  for (size_t o = 0; o < cout; ++o) {
    double* yrow = yd + o * t_len;
    const double bv = bias->value[o];
    for (size_t t = 0; t < t_len; ++t) yrow[t] = bv;
    for (size_t c = 0; c < cin; ++c) {
      const double* xrow = xd + c * t_len;
      for (size_t j = 0; j < taps; ++j) {
        const size_t off = (taps - 1 - j) * dilation;
        if (off >= t_len) continue;  // tap reaches only left padding
        const double w = kernel->value.at(o, c, j);
        for (size_t t = off; t < t_len; ++t) yrow[t] += w * xrow[t - off];
      }
    }
  }
  return adopt(std::move(n));
}

Node* Tape::gated_activation(Node* filt, Node* gate) {
  if (!filt->value.same_shape(gate->value))
    shape_error("gated_activation", filt->value, gate->value);
  auto n = std::make_unique<GatedNode>();
  n->inputs_ = {filt, gate};
  const size_t sz = filt->value.numel();
  n->value = Tensor(filt->value.shape());
  n->tanh_a.resize(sz);
  n->sig_b.resize(sz);
  for (size_t i = 0; i < sz; ++i) {
    n->tanh_a[i] = std::tanh(filt->value[i]);
    n->sig_b[i] = 1.0 / (1.0 + std::exp(-gate->value[i]));
    n->value[i] = n->tanh_a[i] * n->sig_b[i];
  }
  return adopt(std::move(n));
}

Node* Tape::relu(Node* a) {
  auto n = std::make_unique<ReluNode>();
  n->inputs_ = {a};
  n->value = Tensor(a->value.shape());
  for (size_t i = 0; i < n->value.numel(); ++i)
    n->value[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  return adopt(std::move(n));
}

Node* Tape::layer_norm(Node* x, Node* gamma, Node* beta, double eps) {
  require(gamma->value.rank() == 1 && beta->value.rank() == 1,
          "layer_norm: gamma and beta must be rank-1");
  const size_t d = gamma->value.dim(0);
  const size_t last = x->value.rank() == 1 ? x->value.dim(0)
                                           : x->value.dim(x->value.rank() - 1);
  if (last != d || beta->value.dim(0) != d)
    shape_error("layer_norm", x->value, gamma->value);
  const size_t rows = x->value.numel() / d;
  auto n = std::make_unique<LayerNormNode>();
  n->inputs_ = {x, gamma, beta};
  n->value = Tensor(x->value.shape());
  n->xhat = Tensor(x->value.shape());
  n->inv_std.resize(rows);
  const double* xd = x->value.data();
  for (size_t r = 0; r < rows; ++r) {
    const double* xr = xd + r * d;
    double mean = 0.0;
    for (size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (size_t i = 0; i < d; ++i) {
      const double c = xr[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    n->inv_std[r] = inv;
    for (size_t i = 0; i < d; ++i) {
      const double xh = (xr[i] - mean) * inv;
      n->xhat[r * d + i] = xh;
      n->value[r * d + i] = gamma->value[i] * xh + beta->value[i];
    }
  }
  return adopt(std::move(n));
}

Node* Tape::softmax(Node* x, int axis) {
  size_t rows, cols, row_stride, col_stride;
  if (x->value.rank() == 1) {
    rows = 1;
    cols = x->value.dim(0);
    row_stride = cols;
    col_stride = 1;
  } else {
    require(x->value.rank() == 2, "softmax: rank-1 or rank-2 only");
    require(axis == 0 || axis == 1, "softmax: axis must be 0 or 1");
    if (axis == 1) {
      rows = x->value.dim(0);
      cols = x->value.dim(1);
      row_stride = cols;
      col_stride = 1;
    } else {
      rows = x->value.dim(1);
      cols = x->value.dim(0);
      row_stride = 1;
      col_stride = x->value.dim(1);
    }
  }
  auto n = std::make_unique<SoftmaxNode>();
  n->inputs_ = {x};
  n->rows = rows;
  n->cols = cols;
  n->row_stride = row_stride;
  n->col_stride = col_stride;
  n->value = Tensor(x->value.shape());
  for (size_t r = 0; r < rows; ++r) {
    const size_t base = r * row_stride;
    double mx = -1e300;
    for (size_t j = 0; j < cols; ++j)
      mx = std::max(mx, x->value[base + j * col_stride]);
    double sum = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      const size_t idx = base + j * col_stride;
      const double e = std::exp(x->value[idx] - mx);
      n->value[idx] = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (size_t j = 0; j < cols; ++j) n->value[base + j * col_stride] *= inv;
  }
  return adopt(std::move(n));
}

Node* Tape::mean(Node* x, size_t axis) {
  require(x->value.rank() == 2 && axis <= 1,
          "mean: rank-2 input and axis 0 or 1");
  const size_t r = x->value.dim(0);
  const size_t c = x->value.dim(1);
  auto n = std::make_unique<MeanAxisNode>();
  n->inputs_ = {x};
  n->axis = axis;
  if (axis == 0) {
    n->value = Tensor({c});
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j) n->value[j] += x->value.at(i, j);
    for (size_t j = 0; j < c; ++j) n->value[j] /= static_cast<double>(r);
  } else {
    n->value = Tensor({r});
    for (size_t i = 0; i < r; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < c; ++j) acc += x->value.at(i, j);
      n->value[i] = acc / static_cast<double>(c);
    }
  }
  return adopt(std::move(n));
}

Node* Tape::mean_all(Node* x) {
  auto n = std::make_unique<MeanAllNode>();
  n->inputs_ = {x};
  n->value = Tensor({1});
  double acc = 0.0;
  for (size_t i = 0; i < x->value.numel(); ++i) acc += x->value[i];
  n->value[0] = acc / static_cast<double>(x->value.numel());
  return adopt(std::move(n));
}

Node* Tape::concat(const std::vector<Node*>& xs, size_t axis) {
  require(!xs.empty(), "concat: needs at least one input");
  require(axis <= 1, "concat: axis must be 0 or 1");
  size_t rows = xs[0]->value.dim(0);
  size_t cols = xs[0]->value.dim(1);
  for (size_t i = 1; i < xs.size(); ++i) {
    require(xs[i]->value.rank() == 2, "concat: rank-2 inputs only");
    if (axis == 1) {
      if (xs[i]->value.dim(0) != rows)
        shape_error("concat", xs[0]->value, xs[i]->value);
      cols += xs[i]->value.dim(1);
    } else {
      if (xs[i]->value.dim(1) != cols)
        shape_error("concat", xs[0]->value, xs[i]->value);
      rows += xs[i]->value.dim(0);
    }
  }
  auto n = std::make_unique<ConcatNode>();
  n->inputs_ = xs;
  n->axis = axis;
  n->value = Tensor({rows, cols});
  size_t row_off = 0, col_off = 0;
  for (Node* in : xs) {
    const size_t r = in->value.dim(0);
    const size_t c = in->value.dim(1);
    for (size_t i = 0; i < r; ++i)
      for (size_t j = 0; j < c; ++j)
        n->value.at(i + row_off, j + col_off) = in->value.at(i, j);
    if (axis == 0)
      row_off += r;
    else
      col_off += c;
  }
  return adopt(std::move(n));
}

Node* Tape::transpose(Node* x) {
  require(x->value.rank() == 2, "transpose: rank-2 only");
  const size_t r = x->value.dim(0);
  const size_t c = x->value.dim(1);
  auto n = std::make_unique<TransposeNode>();
  n->inputs_ = {x};
  n->value = Tensor({c, r});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) n->value.at(j, i) = x->value.at(i, j);
  return adopt(std::move(n));
}

Node* Tape::cross_entropy(Node* probs, size_t target) {
  require(probs->value.rank() == 1, "cross_entropy: rank-1 probabilities");
  const size_t c = probs->value.dim(0);
  require(target < c, "cross_entropy: target class out of range");
  double sum = 0.0;
  for (size_t i = 0; i < c; ++i) sum += probs->value[i];
  require(std::abs(sum - 1.0) <= 1e-6,
          "cross_entropy: probabilities sum to " + format_double(sum) +
              ", expected 1 within 1e-6");
  auto n = std::make_unique<CrossEntropyNode>();
  n->inputs_ = {probs};
  n->target = target;
  n->value = Tensor({1});
  const double pt = std::max(probs->value[target], CrossEntropyNode::kClamp);
  n->value[0] = -std::log(pt);
  return adopt(std::move(n));
}

void Tape::backward(Node* loss) {
  if (loss->value.numel() != 1)
    throw ContractError("backward requires a scalar loss, got shape " +
                        loss->value.shape_str());
  loss->grad = Tensor(loss->value.shape());
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->requires_grad && n->grad.numel() > 0) n->backward();
  }
}

}  // namespace trajevent::autodiff
