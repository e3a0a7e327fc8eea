#include "severitas/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "severitas/errors.hpp"

namespace severitas {

namespace {

thread_local KinkTrace* kink_trace = nullptr;

void trace_pattern(const Tensor& out) {
  if (!kink_trace) return;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : out.values()) {
    h ^= v > 0.0 ? 1u : 2u;
    h *= 0x100000001b3ULL;
  }
  kink_trace->patterns.push_back(h);
}

using detail::Node;

/// Gradient buffer of input `i`, or null when that input is a constant.
std::vector<double>* input_grad(Node& n, std::size_t i) {
  Node& in = *n.inputs[i];
  if (!in.tape) return nullptr;
  return &in.grad_buffer();
}

const Tensor& input_value(const Node& n, std::size_t i) { return n.inputs[i]->value; }

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x k] += A[m x n] * B[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += arow[j] * brow[j];
      c[i * k + p] += s;
    }
  }
}

// C[k x n] += A[m x k]^T * B[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  const auto& x = a.value().values();
  auto& y = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return Tape::record(std::move(out), {a}, [deriv](Node& n) {
    auto* gx = input_grad(n, 0);
    if (!gx) return;
    const auto& x = input_value(n, 0).values();
    const auto& y = n.value.values();
    const auto& g = n.grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * deriv(x[i], y[i]);
  });
}

/// Offsets of each output element into the two broadcast inputs.
struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> a_off;
  std::vector<std::size_t> b_off;
  bool same = false;
};

BroadcastPlan plan_broadcast(const Shape& sa, const Shape& sb, const char* op) {
  BroadcastPlan plan;
  if (sa == sb) {
    plan.out = sa;
    plan.same = true;
    return plan;
  }
  const std::size_t r = std::max(sa.size(), sb.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(sa.begin(), sa.end(), pa.begin() + static_cast<std::ptrdiff_t>(r - sa.size()));
  std::copy(sb.begin(), sb.end(), pb.begin() + static_cast<std::ptrdiff_t>(r - sb.size()));
  plan.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " +
                       shape_str(sb));
    }
  }
  std::vector<std::size_t> stride_a(r, 0), stride_b(r, 0);
  std::size_t na = 1, nb = 1;
  for (std::size_t i = r; i-- > 0;) {
    stride_a[i] = pa[i] == 1 ? 0 : na;
    stride_b[i] = pb[i] == 1 ? 0 : nb;
    na *= pa[i];
    nb *= pb[i];
  }
  const std::size_t total = shape_numel(plan.out);
  plan.a_off.resize(total);
  plan.b_off.resize(total);
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t e = 0; e < total; ++e) {
    plan.a_off[e] = oa;
    plan.b_off[e] = ob;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      oa += stride_a[d];
      ob += stride_b[d];
      if (idx[d] < plan.out[d]) break;
      oa -= stride_a[d] * idx[d];
      ob -= stride_b[d] * idx[d];
      idx[d] = 0;
    }
  }
  return plan;
}

// f(a, b) forward; da, db are partials given (a, b).
template <typename F, typename Da, typename Db>
Var binary(const Var& a, const Var& b, const char* name, F f, Da da, Db db) {
  auto plan = std::make_shared<BroadcastPlan>(plan_broadcast(a.shape(), b.shape(), name));
  Tensor out(plan->out);
  const auto& x = a.value().values();
  const auto& y = b.value().values();
  auto& z = out.values();
  if (plan->same) {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[i], y[i]);
  } else {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = f(x[plan->a_off[i]], y[plan->b_off[i]]);
  }
  return Tape::record(std::move(out), {a, b}, [plan, da, db](Node& n) {
    auto* ga = input_grad(n, 0);
    auto* gb = input_grad(n, 1);
    const auto& x = input_value(n, 0).values();
    const auto& y = input_value(n, 1).values();
    const auto& g = n.grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t ia = plan->same ? i : plan->a_off[i];
      const std::size_t ib = plan->same ? i : plan->b_off[i];
      if (ga) (*ga)[ia] += g[i] * da(x[ia], y[ib]);
      if (gb) (*gb)[ib] += g[i] * db(x[ia], y[ib]);
    }
  });
}

std::vector<double> sparsemax_row(const double* z, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [z](std::size_t i, std::size_t j) { return z[i] > z[j]; });
  double cumsum = 0.0;
  double support_sum = 0.0;
  std::size_t support = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const double v = z[order[r]];
    cumsum += v;
    if (1.0 + static_cast<double>(r + 1) * v > cumsum) {
      support = r + 1;
      support_sum = cumsum;
    }
  }
  const double tau = (support_sum - 1.0) / static_cast<double>(support);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(z[i] - tau, 0.0);
  return p;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out(Shape{m, n});
  gemm_nn(a.value().data().data(), b.value().data().data(), out.data().data(), m, k, n);
  return Tape::record(std::move(out), {a, b}, [m, k, n](Node& nd) {
    const double* g = nd.grad.data().data();
    if (auto* ga = input_grad(nd, 0)) gemm_nt(g, input_value(nd, 1).data().data(), ga->data(), m, n, k);
    if (auto* gb = input_grad(nd, 1)) gemm_tn(input_value(nd, 0).data().data(), g, gb->data(), m, k, n);
  });
}

Var bmm(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[1]) {
    throw ShapeError("bmm: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  const std::size_t batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
  Tensor out(Shape{batch, m, n});
  for (std::size_t t = 0; t < batch; ++t) {
    gemm_nn(a.value().data().data() + t * m * k, b.value().data().data() + t * k * n,
            out.data().data() + t * m * n, m, k, n);
  }
  return Tape::record(std::move(out), {a, b}, [batch, m, k, n](Node& nd) {
    const double* g = nd.grad.data().data();
    auto* ga = input_grad(nd, 0);
    auto* gb = input_grad(nd, 1);
    const double* av = input_value(nd, 0).data().data();
    const double* bv = input_value(nd, 1).data().data();
    for (std::size_t t = 0; t < batch; ++t) {
      if (ga) gemm_nt(g + t * m * n, bv + t * k * n, ga->data() + t * m * k, m, n, k);
      if (gb) gemm_tn(av + t * m * k, g + t * m * n, gb->data() + t * k * n, m, k, n);
    }
  });
}

Var transpose(const Var& a) {
  const Shape& s = a.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw ShapeError("transpose: expected rank 2 or 3, got " + shape_str(s));
  }
  const std::size_t batch = s.size() == 3 ? s[0] : 1;
  const std::size_t rows = s[s.size() - 2], cols = s[s.size() - 1];
  Shape out_shape = s;
  out_shape[s.size() - 2] = cols;
  out_shape[s.size() - 1] = rows;
  Tensor out(out_shape);
  const auto& x = a.value().values();
  auto& y = out.values();
  for (std::size_t t = 0; t < batch; ++t) {
    const std::size_t base = t * rows * cols;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) y[base + j * rows + i] = x[base + i * cols + j];
  }
  return Tape::record(std::move(out), {a}, [batch, rows, cols](Node& n) {
    auto* gx = input_grad(n, 0);
    if (!gx) return;
    const auto& g = n.grad.values();
    for (std::size_t t = 0; t < batch; ++t) {
      const std::size_t base = t * rows * cols;
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) (*gx)[base + i * cols + j] += g[base + j * rows + i];
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return Tape::record(std::move(out), {a}, [](Node& n) {
    auto* gx = input_grad(n, 0);
    if (!gx) return;
    const auto& g = n.grad.values();
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

void set_kink_trace(KinkTrace* trace) { kink_trace = trace; }

Var relu(const Var& a) {
  Var out = unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
  trace_pattern(out.value());
  return out;
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return Tape::record(Tensor::scalar(s), {a}, [](Node& n) {
    auto* gx = input_grad(n, 0);
    if (!gx) return;
    const double g = n.grad[0];
    for (double& v : *gx) v += g;
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  const Shape& s0 = parts.front().shape();
  const Shape lead(s0.begin(), s0.end() - 1);
  const std::size_t rows = shape_numel(lead);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
      throw ShapeError("concat: leading dims differ, " + shape_str(s0) + " vs " + shape_str(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& x = parts[p].value().values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(r * widths[p]), widths[p],
                  out.values().begin() + static_cast<std::ptrdiff_t>(r * total + offset));
    }
    offset += widths[p];
  }
  return Tape::record(std::move(out), parts, [rows, total, widths](Node& n) {
    const auto& g = n.grad.values();
    std::size_t offset = 0;
    for (std::size_t p = 0; p < widths.size(); ++p) {
      if (auto* gx = input_grad(n, p)) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[p]; ++j) (*gx)[r * widths[p] + j] += g[r * total + offset + j];
      }
      offset += widths[p];
    }
  });
}

Var slice_last(const Var& a, std::size_t offset, std::size_t len) {
  const Shape& s = a.shape();
  const std::size_t width = s.back();
  if (len == 0 || offset + len > width) {
    throw ShapeError("slice_last: range [" + std::to_string(offset) + ", " +
                     std::to_string(offset + len) + ") outside " + shape_str(s));
  }
  const std::size_t rows = a.size() / width;
  Shape out_shape = s;
  out_shape.back() = len;
  Tensor out(out_shape);
  const auto& x = a.value().values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < len; ++j) out[r * len + j] = x[r * width + offset + j];
  return Tape::record(std::move(out), {a}, [rows, width, offset, len](Node& n) {
    auto* gx = input_grad(n, 0);
    if (!gx) return;
    const auto& g = n.grad.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < len; ++j) (*gx)[r * width + offset + j] += g[r * len + j];
  });
}

std::vector<double> sparsemax(std::span<const double> z) {
  if (z.empty()) throw ArgumentError("sparsemax: empty input");
  return sparsemax_row(z.data(), z.size());
}

Var sparsemax(const Var& z) {
  const std::size_t width = z.shape().back();
  const std::size_t rows = z.size() / width;
  Tensor out(z.shape());
  const double* x = z.value().data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    auto p = sparsemax_row(x + r * width, width);
    std::copy(p.begin(), p.end(), out.values().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  trace_pattern(out);
  // Jacobian on the support S: diag(s) - s s^T / |S|.
  return Tape::record(std::move(out), {z}, [rows, width](Node& n) {
    auto* gx = input_grad(n, 0);
    if (!gx) return;
    const auto& g = n.grad.values();
    const auto& p = n.value.values();
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t base = r * width;
      double gsum = 0.0;
      std::size_t support = 0;
      for (std::size_t j = 0; j < width; ++j) {
        if (p[base + j] > 0.0) {
          gsum += g[base + j];
          ++support;
        }
      }
      const double gmean = gsum / static_cast<double>(support);
      for (std::size_t j = 0; j < width; ++j) {
        if (p[base + j] > 0.0) (*gx)[base + j] += g[base + j] - gmean;
      }
    }
  });
}

Var conv1d(const Var& x, const Var& kernel, std::size_t padding) {
  const Shape& sx = x.shape();
  const Shape& sk = kernel.shape();
  if ((sx.size() != 2 && sx.size() != 3) || sk.size() != 3) {
    throw ShapeError("conv1d: expected input rank 2/3 and kernel rank 3, got " + shape_str(sx) +
                     " and " + shape_str(sk));
  }
  const bool batched = sx.size() == 3;
  const std::size_t batch = batched ? sx[0] : 1;
  const std::size_t c_in = sx[sx.size() - 2], len = sx.back();
  const std::size_t c_out = sk[0], k = sk[2];
  if (sk[1] != c_in) {
    throw ShapeError("conv1d: kernel " + shape_str(sk) + " does not match input " + shape_str(sx));
  }
  if (k > len + 2 * padding) {
    throw ShapeError("conv1d: kernel width " + std::to_string(k) + " exceeds padded input length " +
                     std::to_string(len + 2 * padding));
  }
  const std::size_t len_out = len + 2 * padding - k + 1;
  Shape out_shape = batched ? Shape{batch, c_out, len_out} : Shape{c_out, len_out};
  Tensor out(out_shape);
  const auto& xv = x.value().values();
  const auto& kv = kernel.value().values();
  auto& y = out.values();
  // Input position of output t under kernel tap j is t + j - padding.
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < c_out; ++o)
      for (std::size_t t = 0; t < len_out; ++t) {
        double s = 0.0;
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t j = 0; j < k; ++j) {
            const std::size_t pos = t + j;
            if (pos < padding || pos - padding >= len) continue;
            s += kv[(o * c_in + c) * k + j] * xv[(b * c_in + c) * len + pos - padding];
          }
        y[(b * c_out + o) * len_out + t] = s;
      }
  return Tape::record(std::move(out), {x, kernel},
                      [batch, c_in, c_out, len, len_out, k, padding](Node& n) {
    auto* gx = input_grad(n, 0);
    auto* gk = input_grad(n, 1);
    const auto& xv = input_value(n, 0).values();
    const auto& kv = input_value(n, 1).values();
    const auto& g = n.grad.values();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < c_out; ++o)
        for (std::size_t t = 0; t < len_out; ++t) {
          const double go = g[(b * c_out + o) * len_out + t];
          if (go == 0.0) continue;
          for (std::size_t c = 0; c < c_in; ++c)
            for (std::size_t j = 0; j < k; ++j) {
              const std::size_t pos = t + j;
              if (pos < padding || pos - padding >= len) continue;
              const std::size_t xi = (b * c_in + c) * len + pos - padding;
              const std::size_t ki = (o * c_in + c) * k + j;
              if (gx) (*gx)[xi] += go * kv[ki];
              if (gk) (*gk)[ki] += go * xv[xi];
            }
        }
  });
}

Var dropout(const Var& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ArgumentError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(x.shape());
  for (double& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mul(x, Var(std::move(mask)));
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw ShapeError("cross_entropy: logits must be rank 2, got " + shape_str(s));
  const std::size_t rows = s[0], classes = s[1];
  if (labels.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw ArgumentError("cross_entropy: label " + std::to_string(l) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
  }
  Tensor probs = softmax_rows(logits.value());
  const auto& z = logits.value().values();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = z.data() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double se = 0.0;
    for (std::size_t c = 0; c < classes; ++c) se += std::exp(row[c] - mx);
    total += mx + std::log(se) - row[labels[r]];
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return Tape::record(Tensor::scalar(total / static_cast<double>(rows)), {logits},
                      [probs = std::move(probs), lab = std::move(lab), rows, classes](Node& n) {
    auto* gx = input_grad(n, 0);
    if (!gx) return;
    const double g = n.grad[0] / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < classes; ++c) {
        const double target = static_cast<int>(c) == lab[r] ? 1.0 : 0.0;
        (*gx)[r * classes + c] += g * (probs[r * classes + c] - target);
      }
  });
}

LstmState lstm_cell(const Var& x, const LstmState& state, const LstmParams& params) {
  const Shape& sx = x.shape();
  const Shape& sh = state.h.shape();
  const Shape& wi = params.w_input.shape();
  const Shape& wh = params.w_recurrent.shape();
  if (sx.size() != 2 || sh.size() != 2 || wi.size() != 2 || wh.size() != 2) {
    throw ShapeError("lstm_cell: expected rank-2 input, state and weights");
  }
  const std::size_t hidden = sh[1];
  if (state.c.shape() != sh || sx[0] != sh[0] || wi[0] != sx[1] || wi[1] != 4 * hidden ||
      wh[0] != hidden || wh[1] != 4 * hidden || params.bias.shape() != Shape{4 * hidden}) {
    throw ShapeError("lstm_cell: shape mismatch (x " + shape_str(sx) + ", h " + shape_str(sh) +
                     ", c " + shape_str(state.c.shape()) + ", w_input " + shape_str(wi) +
                     ", w_recurrent " + shape_str(wh) + ", bias " +
                     shape_str(params.bias.shape()) + ")");
  }
  Var gates = add(add(matmul(x, params.w_input), matmul(state.h, params.w_recurrent)), params.bias);
  Var i = sigmoid(slice_last(gates, 0, hidden));
  Var f = sigmoid(slice_last(gates, hidden, hidden));
  Var g = tanh(slice_last(gates, 2 * hidden, hidden));
  Var o = sigmoid(slice_last(gates, 3 * hidden, hidden));
  Var c = add(mul(f, state.c), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: expected rank 2, got " + shape_str(logits.shape()));
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.data().data() + r * classes;
    const double mx = *std::max_element(row, row + classes);
    double se = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      out[r * classes + c] = std::exp(row[c] - mx);
      se += out[r * classes + c];
    }
    for (std::size_t c = 0; c < classes; ++c) out[r * classes + c] /= se;
  }
  return out;
}

}  // namespace severitas
