#include "codespot/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "codespot/util/error.hpp"

namespace codespot::ad::ops {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
    case OpKind::kEmbeddingLookup: return "embedding_lookup";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kGelu: return "gelu";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kCausalSelfAttention: return "causal_self_attention";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
  fail(ErrorKind::kShape, std::string(to_string(kind)) + ": " + detail);
}

void require_defined(OpKind kind, const Tensor& t) {
  if (!t.defined()) shape_error(kind, "undefined input tensor");
}

void check_finite(OpKind kind, const Tensor& out) {
  for (double v : out.data()) {
    if (!std::isfinite(v)) {
      fail(ErrorKind::kNumeric,
           std::string(to_string(kind)) + ": non-finite value in output of shape " +
               shape_string(out.shape()));
    }
  }
}

Tensor finish(OpKind kind, Shape shape, std::vector<double> data, bool requires_grad) {
  Tensor out = Tensor::from_data(std::move(shape), std::move(data), requires_grad);
  check_finite(kind, out);
  return out;
}

// y[0..n) += alpha * x[0..n)
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

inline double dot(std::size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += x[j] * y[j];
  return acc;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  constexpr OpKind kind = OpKind::kMatmul;
  require_defined(kind, a);
  require_defined(kind, b);
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    shape_error(kind, "cannot multiply " + shape_string(a.shape()) + " by " +
                          shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> c(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) axpy(n, pa[i * k + p], pb + p * n, row);
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = finish(kind, {m, n}, std::move(c), rg);
  if (rg) {
    tape.record(to_string(kind), out, [a, b, out, m, k, n]() mutable {
      const double* g = out.grad().data();
      if (a.requires_grad()) {
        // dA = G * B^T, computed row-wise against an explicit transpose.
        std::vector<double> bt(n * k);
        const double* pb = b.data().data();
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = pb[p * n + j];
        double* ga = a.grad_buffer().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) axpy(k, g[i * n + j], bt.data() + j * k, ga + i * k);
      }
      if (b.requires_grad()) {
        // dB = A^T * G
        const double* pa = a.data().data();
        double* gb = b.grad_buffer().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) axpy(n, pa[i * k + p], g + i * n, gb + p * n);
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  constexpr OpKind kind = OpKind::kAdd;
  require_defined(kind, a);
  require_defined(kind, b);
  const bool same = a.shape() == b.shape();
  const bool row_broadcast =
      !same && a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1);
  if (!same && !row_broadcast) {
    shape_error(kind, "incompatible shapes " + shape_string(a.shape()) + " and " +
                          shape_string(b.shape()));
  }
  std::vector<double> c(a.data().begin(), a.data().end());
  const double* pb = b.data().data();
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < c.size(); i += n) axpy(n, 1.0, pb, c.data() + i);

  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = finish(kind, a.shape(), std::move(c), rg);
  if (rg) {
    tape.record(to_string(kind), out, [a, b, out, n]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) axpy(g.size(), 1.0, g.data(), a.grad_buffer().data());
      if (b.requires_grad()) {
        double* gb = b.grad_buffer().data();
        for (std::size_t i = 0; i < g.size(); i += n) axpy(n, 1.0, g.data() + i, gb);
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  constexpr OpKind kind = OpKind::kMul;
  require_defined(kind, a);
  require_defined(kind, b);
  if (a.shape() != b.shape()) {
    shape_error(kind, "incompatible shapes " + shape_string(a.shape()) + " and " +
                          shape_string(b.shape()));
  }
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.data()[i] * b.data()[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  Tensor out = finish(kind, a.shape(), std::move(c), rg);
  if (rg) {
    tape.record(to_string(kind), out, [a, b, out]() mutable {
      const auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  constexpr OpKind kind = OpKind::kScale;
  require_defined(kind, a);
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.data()[i] * factor;
  Tensor out = finish(kind, a.shape(), std::move(c), a.requires_grad());
  if (a.requires_grad()) {
    tape.record(to_string(kind), out, [a, out, factor]() mutable {
      const auto g = out.grad();
      axpy(g.size(), factor, g.data(), a.grad_buffer().data());
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  constexpr OpKind kind = OpKind::kSum;
  require_defined(kind, a);
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor out = finish(kind, {}, {acc}, a.requires_grad());
  if (a.requires_grad()) {
    tape.record(to_string(kind), out, [a, out]() mutable {
      const double g = out.grad()[0];
      for (double& v : a.grad_buffer()) v += g;
    });
  }
  return out;
}

Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> ids) {
  constexpr OpKind kind = OpKind::kEmbeddingLookup;
  require_defined(kind, table);
  if (table.rank() != 2) {
    shape_error(kind, "table must be rank 2, got " + shape_string(table.shape()));
  }
  if (ids.empty()) shape_error(kind, "empty id list");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  std::vector<double> c(ids.size() * d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const int id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      fail(ErrorKind::kData, "embedding_lookup: token id " + std::to_string(id) +
                                 " out of range for vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(table.data().data() + static_cast<std::size_t>(id) * d, d, c.data() + r * d);
  }
  Tensor out = finish(kind, {ids.size(), d}, std::move(c), table.requires_grad());
  if (table.requires_grad()) {
    std::vector<int> saved(ids.begin(), ids.end());
    tape.record(to_string(kind), out, [table, out, d, saved = std::move(saved)]() mutable {
      const double* g = out.grad().data();
      double* gt = table.grad_buffer().data();
      for (std::size_t r = 0; r < saved.size(); ++r) {
        axpy(d, 1.0, g + r * d, gt + static_cast<std::size_t>(saved[r]) * d);
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  constexpr OpKind kind = OpKind::kLayerNorm;
  require_defined(kind, x);
  require_defined(kind, gain);
  require_defined(kind, bias);
  if (x.rank() != 2 || gain.shape() != Shape{x.dim(1)} || bias.shape() != Shape{x.dim(1)}) {
    shape_error(kind, "x " + shape_string(x.shape()) + " with gain " +
                          shape_string(gain.shape()) + " and bias " + shape_string(bias.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> xhat(m * n), rstd(m), c(m * n);
  const double* px = x.data().data();
  const double* pg = gain.data().data();
  const double* pbias = bias.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = px + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    const double r = 1.0 / std::sqrt(var + eps);
    rstd[i] = r;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mean) * r;
      xhat[i * n + j] = h;
      c[i * n + j] = h * pg[j] + pbias[j];
    }
  }
  const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor out = finish(kind, {m, n}, std::move(c), rg);
  if (rg) {
    tape.record(to_string(kind), out,
                [x, gain, bias, out, m, n, xhat = std::move(xhat), rstd = std::move(rstd)]() mutable {
                  const double* g = out.grad().data();
                  if (gain.requires_grad()) {
                    double* gg = gain.grad_buffer().data();
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
                  }
                  if (bias.requires_grad()) {
                    double* gb = bias.grad_buffer().data();
                    for (std::size_t i = 0; i < m; ++i) axpy(n, 1.0, g + i * n, gb);
                  }
                  if (x.requires_grad()) {
                    const double* pg = gain.data().data();
                    double* gx = x.grad_buffer().data();
                    std::vector<double> dxhat(n);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t i = 0; i < m; ++i) {
                      double mean_d = 0.0, mean_dx = 0.0;
                      for (std::size_t j = 0; j < n; ++j) {
                        dxhat[j] = g[i * n + j] * pg[j];
                        mean_d += dxhat[j];
                        mean_dx += dxhat[j] * xhat[i * n + j];
                      }
                      mean_d *= inv_n;
                      mean_dx *= inv_n;
                      for (std::size_t j = 0; j < n; ++j) {
                        gx[i * n + j] +=
                            rstd[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
                      }
                    }
                  }
                });
  }
  return out;
}

Tensor softmax(Tape& tape, const Tensor& x) {
  constexpr OpKind kind = OpKind::kSoftmax;
  require_defined(kind, x);
  if (x.rank() < 1) shape_error(kind, "softmax needs rank >= 1, got a scalar");
  const std::size_t n = x.shape().back();
  const std::size_t m = x.size() / n;
  std::vector<double> y(x.size());
  const double* px = x.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = px + i * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[i * n + j] = std::exp(row[j] - mx);
      total += y[i * n + j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < n; ++j) y[i * n + j] *= inv;
  }
  Tensor out = finish(kind, x.shape(), std::move(y), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(to_string(kind), out, [x, out, m, n]() mutable {
      const double* g = out.grad().data();
      const double* py = out.data().data();
      double* gx = x.grad_buffer().data();
      for (std::size_t i = 0; i < m; ++i) {
        const double inner = dot(n, g + i * n, py + i * n);
        for (std::size_t j = 0; j < n; ++j)
          gx[i * n + j] += py[i * n + j] * (g[i * n + j] - inner);
      }
    });
  }
  return out;
}

Tensor gelu(Tape& tape, const Tensor& x) {
  constexpr OpKind kind = OpKind::kGelu;
  require_defined(kind, x);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = x.data()[i];
    y[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  Tensor out = finish(kind, x.shape(), std::move(y), x.requires_grad());
  if (x.requires_grad()) {
    tape.record(to_string(kind), out, [x, out]() mutable {
      const auto g = out.grad();
      auto gx = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = x.data()[i];
        const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
      }
    });
  }
  return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets) {
  constexpr OpKind kind = OpKind::kCrossEntropy;
  require_defined(kind, logits);
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    shape_error(kind, "logits " + shape_string(logits.shape()) + " with " +
                          std::to_string(targets.size()) + " targets");
  }
  const std::size_t m = logits.dim(0), vocab = logits.dim(1);
  std::vector<double> probs(m * vocab, 0.0);
  std::size_t count = 0;
  double total = 0.0;
  const double* pl = logits.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const int t = targets[i];
    if (t == kIgnoreTarget) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      fail(ErrorKind::kData, "cross_entropy: target " + std::to_string(t) +
                                 " out of range for " + std::to_string(vocab) + " classes");
    }
    const double* row = pl + i * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[i * vocab + j] = std::exp(row[j] - mx);
      z += probs[i * vocab + j];
    }
    const double inv = 1.0 / z;
    for (std::size_t j = 0; j < vocab; ++j) probs[i * vocab + j] *= inv;
    total += std::log(z) + mx - row[t];
    ++count;
  }
  if (count == 0) fail(ErrorKind::kData, "cross_entropy: no target positions");
  const double mean = total / static_cast<double>(count);
  Tensor out = finish(kind, {}, {mean}, logits.requires_grad());
  if (logits.requires_grad()) {
    std::vector<int> saved(targets.begin(), targets.end());
    tape.record(to_string(kind), out,
                [logits, out, m, vocab, count, probs = std::move(probs),
                 saved = std::move(saved)]() mutable {
                  const double g = out.grad()[0] / static_cast<double>(count);
                  double* gl = logits.grad_buffer().data();
                  for (std::size_t i = 0; i < m; ++i) {
                    if (saved[i] == kIgnoreTarget) continue;
                    axpy(vocab, g, probs.data() + i * vocab, gl + i * vocab);
                    gl[i * vocab + static_cast<std::size_t>(saved[i])] -= g;
                  }
                });
  }
  return out;
}

Tensor causal_self_attention(Tape& tape, const Tensor& qkv, std::size_t batch,
                             std::size_t seq, std::size_t heads) {
  constexpr OpKind kind = OpKind::kCausalSelfAttention;
  require_defined(kind, qkv);
  if (qkv.rank() != 2 || batch == 0 || seq == 0 || heads == 0 ||
      qkv.dim(0) != batch * seq || qkv.dim(1) % (3 * heads) != 0) {
    shape_error(kind, "qkv " + shape_string(qkv.shape()) + " for batch " +
                          std::to_string(batch) + ", seq " + std::to_string(seq) +
                          ", heads " + std::to_string(heads));
  }
  const std::size_t width = qkv.dim(1);
  const std::size_t d = width / 3;
  const std::size_t hd = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const double* src = qkv.data().data();

  std::vector<double> att(batch * heads * seq * seq, 0.0);
  std::vector<double> out_data(batch * seq * d, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* a = att.data() + (b * heads + h) * seq * seq;
      for (std::size_t t = 0; t < seq; ++t) {
        const double* q = src + (b * seq + t) * width + h * hd;
        double* arow = a + t * seq;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s <= t; ++s) {
          const double* k = src + (b * seq + s) * width + d + h * hd;
          arow[s] = dot(hd, q, k) * inv_sqrt;
          mx = std::max(mx, arow[s]);
        }
        double z = 0.0;
        for (std::size_t s = 0; s <= t; ++s) {
          arow[s] = std::exp(arow[s] - mx);
          z += arow[s];
        }
        const double inv = 1.0 / z;
        double* o = out_data.data() + (b * seq + t) * d + h * hd;
        for (std::size_t s = 0; s <= t; ++s) {
          arow[s] *= inv;
          axpy(hd, arow[s], src + (b * seq + s) * width + 2 * d + h * hd, o);
        }
      }
    }
  }
  Tensor out = finish(kind, {batch * seq, d}, std::move(out_data), qkv.requires_grad());
  if (qkv.requires_grad()) {
    tape.record(to_string(kind), out,
                [qkv, out, batch, seq, heads, width, d, hd, inv_sqrt,
                 att = std::move(att)]() mutable {
                  const double* g = out.grad().data();
                  const double* src = qkv.data().data();
                  double* gq = qkv.grad_buffer().data();
                  std::vector<double> datt(seq);
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t h = 0; h < heads; ++h) {
                      const double* a = att.data() + (b * heads + h) * seq * seq;
                      for (std::size_t t = 0; t < seq; ++t) {
                        const double* arow = a + t * seq;
                        const double* go = g + (b * seq + t) * d + h * hd;
                        double inner = 0.0;
                        for (std::size_t s = 0; s <= t; ++s) {
                          const std::size_t vrow = (b * seq + s) * width + 2 * d + h * hd;
                          datt[s] = dot(hd, go, src + vrow);
                          inner += arow[s] * datt[s];
                          axpy(hd, arow[s], go, gq + vrow);
                        }
                        const std::size_t qrow = (b * seq + t) * width + h * hd;
                        for (std::size_t s = 0; s <= t; ++s) {
                          const double ds = arow[s] * (datt[s] - inner) * inv_sqrt;
                          const std::size_t krow = (b * seq + s) * width + d + h * hd;
                          axpy(hd, ds, src + krow, gq + qrow);
                          axpy(hd, ds, src + qrow, gq + krow);
                        }
                      }
                    }
                  }
                });
  }
  return out;
}

}  // namespace codespot::ad::ops
