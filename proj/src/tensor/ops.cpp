// SPDX-License-Identifier: Apache-2.0
#include "sfa/tensor/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "sfa/errors.hpp"

namespace sfa::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_mat(const Tensor& t) {
  return ConstMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_mat(Tensor& t) {
  return MutMap(t.raw(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

const Tensor& val(const detail::Node& n, std::size_t i) { return n.parents[i]->value; }
bool wants(const detail::Node& n, std::size_t i) { return n.parents[i]->requires_grad; }
Tensor& gacc(detail::Node& n, std::size_t i) { return n.parents[i]->ensure_grad(); }

void require_matrix(const Var& v, const char* op) {
  if (v.value().rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got " + shape_str(v.shape()));
  }
}

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

constexpr std::size_t kRowChunk = 64;

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  Tensor out({a.rows(), b.cols()});
  as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value());
  return Var::from_op(std::move(out), {a, b}, [](detail::Node& n) {
    auto g = as_mat(std::as_const(n.grad));
    if (wants(n, 0)) as_mat(gacc(n, 0)).noalias() += g * as_mat(val(n, 1)).transpose();
    if (wants(n, 1)) as_mat(gacc(n, 1)).noalias() += as_mat(val(n, 0)).transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](detail::Node& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(n, p)) continue;
      auto& g = gacc(n, p);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](detail::Node& n) {
    if (wants(n, 0)) {
      auto& g = gacc(n, 0);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (wants(n, 1)) {
      auto& g = gacc(n, 1);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](detail::Node& n) {
    if (wants(n, 0)) {
      auto& g = gacc(n, 0);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * val(n, 1)[i];
    }
    if (wants(n, 1)) {
      auto& g = gacc(n, 1);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * val(n, 0)[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= factor;
  return Var::from_op(std::move(out), {a}, [factor](detail::Node& n) {
    auto& g = gacc(n, 0);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * factor;
  });
}

Var add_row(const Var& x, const Var& bias) {
  if (bias.value().numel() != x.cols()) {
    throw DimensionError("add_row bias of " + shape_str(bias.shape()) + " for " + shape_str(x.shape()));
  }
  Tensor out = x.value();
  const std::size_t r = out.rows(), c = out.cols();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias.value()[j];
  }
  return Var::from_op(std::move(out), {x, bias}, [r, c](detail::Node& n) {
    if (wants(n, 0)) {
      auto& g = gacc(n, 0);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (wants(n, 1)) {
      auto& g = gacc(n, 1);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) g[j] += n.grad[i * c + j];
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_matrix(x, "linear");
  require_matrix(weight, "linear");
  if (x.cols() != weight.rows() || bias.value().numel() != weight.cols()) {
    throw DimensionError("linear shapes " + shape_str(x.shape()) + " * " + shape_str(weight.shape()) +
                         " + " + shape_str(bias.shape()));
  }
  Tensor out({x.rows(), weight.cols()});
  auto o = as_mat(out);
  o.noalias() = as_mat(x.value()) * as_mat(weight.value());
  Eigen::Map<const Eigen::RowVectorXd> b(bias.value().raw(), static_cast<Eigen::Index>(weight.cols()));
  o.rowwise() += b;
  return Var::from_op(std::move(out), {x, weight, bias}, [](detail::Node& n) {
    auto g = as_mat(std::as_const(n.grad));
    if (wants(n, 0)) as_mat(gacc(n, 0)).noalias() += g * as_mat(val(n, 1)).transpose();
    if (wants(n, 1)) as_mat(gacc(n, 1)).noalias() += as_mat(val(n, 0)).transpose() * g;
    if (wants(n, 2)) {
      auto& gb = gacc(n, 2);
      Eigen::Map<Eigen::RowVectorXd>(gb.raw(), static_cast<Eigen::Index>(gb.numel())) += g.colwise().sum();
    }
  });
}

Var gelu(const Var& x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double c = 0.044715;
  const auto n = static_cast<Eigen::Index>(x.value().numel());
  Eigen::Map<const Eigen::ArrayXd> v(x.value().raw(), n);
  // tanh(u) = 1 - 2 / (exp(2u) + 1); exp vectorizes, tanh does not.
  auto t = std::make_shared<Eigen::ArrayXd>(1.0 - 2.0 / ((2.0 * k * (v + c * v.cube())).exp() + 1.0));
  Tensor out(x.shape());
  Eigen::Map<Eigen::ArrayXd>(out.raw(), n) = 0.5 * v * (1.0 + *t);
  return Var::from_op(std::move(out), {x}, [t, k, c](detail::Node& nd) {
    auto& g = gacc(nd, 0);
    const auto m = static_cast<Eigen::Index>(g.numel());
    Eigen::Map<const Eigen::ArrayXd> xv(val(nd, 0).raw(), m), gr(nd.grad.raw(), m);
    const auto du = k * (1.0 + 3.0 * c * xv.square());
    Eigen::Map<Eigen::ArrayXd>(g.raw(), m) += gr * (0.5 * (1.0 + *t) + 0.5 * xv * (1.0 - t->square()) * du);
  });
}

Var tanh(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = std::tanh(v);
  return Var::from_op(std::move(out), {x}, [](detail::Node& n) {
    auto& g = gacc(n, 0);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (gamma.value().numel() != c || beta.value().numel() != c) {
    throw DimensionError("layer_norm affine parameters must have " + std::to_string(c) + " elements");
  }
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> inv_std(r);
  const auto& xv = x.value();
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xv[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv[i * c + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xv[i * c + j] - mu) * inv_std[i];
      xhat[i * c + j] = h;
      out[i * c + j] = h * gamma.value()[j] + beta.value()[j];
    }
  }
  return Var::from_op(std::move(out), {x, gamma, beta},
                      [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& n) {
                        const auto& gv = val(n, 1);
                        if (wants(n, 1) || wants(n, 2)) {
                          Tensor* gg = wants(n, 1) ? &gacc(n, 1) : nullptr;
                          Tensor* gb = wants(n, 2) ? &gacc(n, 2) : nullptr;
                          for (std::size_t i = 0; i < r; ++i) {
                            for (std::size_t j = 0; j < c; ++j) {
                              if (gg) (*gg)[j] += n.grad[i * c + j] * xhat[i * c + j];
                              if (gb) (*gb)[j] += n.grad[i * c + j];
                            }
                          }
                        }
                        if (!wants(n, 0)) return;
                        auto& gx = gacc(n, 0);
                        std::vector<double> dxhat(c);
                        for (std::size_t i = 0; i < r; ++i) {
                          double m1 = 0.0, m2 = 0.0;
                          for (std::size_t j = 0; j < c; ++j) {
                            dxhat[j] = n.grad[i * c + j] * gv[j];
                            m1 += dxhat[j];
                            m2 += dxhat[j] * xhat[i * c + j];
                          }
                          m1 /= static_cast<double>(c);
                          m2 /= static_cast<double>(c);
                          for (std::size_t j = 0; j < c; ++j) {
                            gx[i * c + j] += inv_std[i] * (dxhat[j] - m1 - xhat[i * c + j] * m2);
                          }
                        }
                      });
}

Var softmax(const Var& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) throw DimensionError("softmax axis " + std::to_string(axis) + " out of range");
  const std::size_t len = shape[axis];
  if (len == 0) throw DimensionError("softmax over an empty axis");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  Tensor out(shape);
  const auto& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      double s = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(xv[base + k * inner] - mx);
        out[base + k * inner] = e;
        s += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= s;
    }
  }
  return Var::from_op(std::move(out), {x}, [outer, inner, len](detail::Node& n) {
    auto& g = gacc(n, 0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += n.grad[base + k * inner] * n.value[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          g[base + k * inner] += n.value[base + k * inner] * (n.grad[base + k * inner] - dot);
        }
      }
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return Var::from_op(Tensor({1}, std::vector<double>{s}), {x}, [](detail::Node& n) {
    auto& g = gacc(n, 0);
    for (auto& v : g.data()) v += n.grad[0];
  });
}

Var mean(const Var& x) {
  const auto count = static_cast<double>(x.value().numel());
  if (count == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(x), 1.0 / count);
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return Var::from_op(std::move(out), {x}, [](detail::Node& n) {
    auto& g = gacc(n, 0);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  if (begin > end || end > x.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t c = x.cols();
  const auto& xv = x.value();
  std::vector<double> data(xv.raw() + begin * c, xv.raw() + end * c);
  Tensor out({end - begin, c}, std::move(data));
  return Var::from_op(std::move(out), {x}, [begin, c](detail::Node& n) {
    auto& g = gacc(n, 0);
    for (std::size_t i = 0; i < n.grad.numel(); ++i) g[begin * c + i] += n.grad[i];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows column mismatch");
    total += p.rows();
  }
  std::vector<double> data;
  data.reserve(total * c);
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  for (const auto& p : parts) {
    offsets.push_back(data.size());
    data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  }
  Tensor out({total, c}, std::move(data));
  std::vector<Var> parents(parts.begin(), parts.end());
  return Var::from_op(std::move(out), std::move(parents), [offsets = std::move(offsets)](detail::Node& n) {
    for (std::size_t p = 0; p < n.parents.size(); ++p) {
      if (!wants(n, p)) continue;
      auto& g = gacc(n, p);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[offsets[p] + i];
    }
  });
}

Var gather_rows(const Var& table, std::span<const std::size_t> rows) {
  require_matrix(table, "gather_rows");
  const std::size_t c = table.cols();
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= table.rows()) {
      throw DimensionError("gather_rows index " + std::to_string(rows[i]) + " out of range " +
                           std::to_string(table.rows()));
    }
    std::copy_n(table.value().raw() + rows[i] * c, c, out.raw() + i * c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return Var::from_op(std::move(out), {table}, [idx = std::move(idx), c](detail::Node& n) {
    auto& g = gacc(n, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < c; ++j) g[idx[i] * c + j] += n.grad[i * c + j];
    }
  });
}

namespace {

struct AttentionShape {
  std::size_t p, s, heads, dk, dv;
};

AttentionShape check_attention(const Var& q, const Var& k, const Var& v, std::size_t heads) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_matrix(v, "attention");
  if (k.rows() == 0) throw DimensionError("attention over zero keys");
  if (heads == 0 || q.cols() % heads != 0 || v.cols() % heads != 0) {
    throw DimensionError("attention head count does not divide widths");
  }
  if (q.cols() != k.cols()) throw DimensionError("attention d_k mismatch between Q and K");
  if (k.rows() != v.rows()) throw DimensionError("attention K and V row counts differ");
  return {q.rows(), k.rows(), heads, q.cols() / heads, v.cols() / heads};
}

std::size_t visible_keys(std::size_t row, std::size_t s, bool causal, std::size_t q_offset) {
  return causal ? std::min(s, q_offset + row + 1) : s;
}

}  // namespace

Var multi_head_attention(const Var& q, const Var& k, const Var& v, std::size_t heads, bool causal,
                         std::size_t q_offset) {
  const auto sh = check_attention(q, k, v, heads);
  const double scl = 1.0 / std::sqrt(static_cast<double>(sh.dk));
  auto Q = as_mat(q.value());
  auto K = as_mat(k.value());
  auto V = as_mat(v.value());
  Tensor out({sh.p, sh.heads * sh.dv});
  auto O = as_mat(out);
  // probs[h] is p x s; only the visible block of each row chunk is written and read
  auto probs = std::make_shared<std::vector<RowMat>>(sh.heads, RowMat(static_cast<Eigen::Index>(sh.p), static_cast<Eigen::Index>(sh.s)));
  for (std::size_t h = 0; h < sh.heads; ++h) {
    auto Qh = Q.middleCols(static_cast<Eigen::Index>(h * sh.dk), static_cast<Eigen::Index>(sh.dk));
    auto Kh = K.middleCols(static_cast<Eigen::Index>(h * sh.dk), static_cast<Eigen::Index>(sh.dk));
    auto Vh = V.middleCols(static_cast<Eigen::Index>(h * sh.dv), static_cast<Eigen::Index>(sh.dv));
    auto& P = (*probs)[h];
    for (std::size_t r0 = 0; r0 < sh.p; r0 += kRowChunk) {
      const std::size_t nr = std::min(kRowChunk, sh.p - r0);
      const std::size_t kl = visible_keys(r0 + nr - 1, sh.s, causal, q_offset);
      auto Pc = P.block(static_cast<Eigen::Index>(r0), 0, static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(kl));
      Pc.noalias() = Qh.middleRows(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(nr)) *
                     Kh.topRows(static_cast<Eigen::Index>(kl)).transpose();
      for (std::size_t i = 0; i < nr; ++i) {
        const auto lim = static_cast<Eigen::Index>(visible_keys(r0 + i, sh.s, causal, q_offset));
        auto row = Pc.row(static_cast<Eigen::Index>(i));
        const double mx = row.head(lim).maxCoeff() * scl;
        auto seg = row.head(lim).array();
        seg = (seg * scl - mx).exp();
        seg /= seg.sum();
        if (lim < static_cast<Eigen::Index>(kl)) row.tail(static_cast<Eigen::Index>(kl) - lim).setZero();
      }
      O.block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(h * sh.dv), static_cast<Eigen::Index>(nr),
              static_cast<Eigen::Index>(sh.dv))
          .noalias() = Pc * Vh.topRows(static_cast<Eigen::Index>(kl));
    }
  }
  return Var::from_op(std::move(out), {q, k, v}, [sh, scl, causal, q_offset, probs](detail::Node& n) {
    auto Q = as_mat(val(n, 0));
    auto K = as_mat(val(n, 1));
    auto V = as_mat(val(n, 2));
    auto G = as_mat(std::as_const(n.grad));
    Tensor* gq = wants(n, 0) ? &gacc(n, 0) : nullptr;
    Tensor* gk = wants(n, 1) ? &gacc(n, 1) : nullptr;
    Tensor* gv = wants(n, 2) ? &gacc(n, 2) : nullptr;
    RowMat dP;
    for (std::size_t h = 0; h < sh.heads; ++h) {
      const auto qc = static_cast<Eigen::Index>(h * sh.dk);
      const auto vc = static_cast<Eigen::Index>(h * sh.dv);
      const auto dk = static_cast<Eigen::Index>(sh.dk);
      const auto dv = static_cast<Eigen::Index>(sh.dv);
      const auto& P = (*probs)[h];
      for (std::size_t r0 = 0; r0 < sh.p; r0 += kRowChunk) {
        const std::size_t nr = std::min(kRowChunk, sh.p - r0);
        const auto kl = static_cast<Eigen::Index>(visible_keys(r0 + nr - 1, sh.s, causal, q_offset));
        const auto r0i = static_cast<Eigen::Index>(r0);
        const auto nri = static_cast<Eigen::Index>(nr);
        auto Pc = P.block(r0i, 0, nri, kl);
        auto Gc = G.block(r0i, vc, nri, dv);
        if (gv) as_mat(*gv).block(0, vc, kl, dv).noalias() += Pc.transpose() * Gc;
        if (!gq && !gk) continue;
        dP.noalias() = Gc * V.block(0, vc, kl, dv).transpose();
        for (Eigen::Index i = 0; i < nri; ++i) {
          const double dot = dP.row(i).dot(Pc.row(i));
          dP.row(i) = (Pc.row(i).array() * (dP.row(i).array() - dot)).matrix() * scl;
        }
        if (gq) as_mat(*gq).block(r0i, qc, nri, dk).noalias() += dP * K.block(0, qc, kl, dk);
        if (gk) as_mat(*gk).block(0, qc, kl, dk).noalias() += dP.transpose() * Q.block(r0i, qc, nri, dk);
      }
    }
  });
}

Var scaled_attention(const Var& q, const Var& k, const Var& v, bool causal, std::size_t q_offset) {
  return multi_head_attention(q, k, v, 1, causal, q_offset);
}

Var masked_cross_entropy(const Var& logits, std::span<const std::int64_t> targets, std::span<const bool> loss_mask) {
  require_matrix(logits, "masked_cross_entropy");
  const std::size_t t = logits.rows(), vsz = logits.cols();
  if (targets.size() != t || loss_mask.size() != t) {
    throw DimensionError("masked_cross_entropy expects " + std::to_string(t) + " targets and mask entries");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < t; ++i) {
    if (!loss_mask[i]) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vsz) {
      throw DimensionError("target id " + std::to_string(targets[i]) + " outside vocabulary");
    }
    ++count;
  }
  const auto& lv = logits.value();
  Tensor probs({t, vsz});
  double loss = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    if (!loss_mask[i]) continue;
    const double* row = lv.raw() + i * vsz;
    const double mx = *std::max_element(row, row + vsz);
    double s = 0.0;
    for (std::size_t j = 0; j < vsz; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    loss -= row[targets[i]] - lse;
    for (std::size_t j = 0; j < vsz; ++j) probs[i * vsz + j] = std::exp(row[j] - lse);
  }
  if (count) loss /= static_cast<double>(count);
  std::vector<std::int64_t> tg(targets.begin(), targets.end());
  std::vector<bool> mk(loss_mask.begin(), loss_mask.end());
  return Var::from_op(Tensor({1}, std::vector<double>{loss}), {logits},
                      [probs = std::move(probs), tg = std::move(tg), mk = std::move(mk), count, vsz](detail::Node& n) {
                        if (count == 0) return;
                        auto& g = gacc(n, 0);
                        const double w = n.grad[0] / static_cast<double>(count);
                        for (std::size_t i = 0; i < tg.size(); ++i) {
                          if (!mk[i]) continue;
                          for (std::size_t j = 0; j < vsz; ++j) g[i * vsz + j] += w * probs[i * vsz + j];
                          g[i * vsz + static_cast<std::size_t>(tg[i])] -= w;
                        }
                      });
}

Tensor attention_weights(const Tensor& q, const Tensor& k, bool causal, std::size_t q_offset) {
  Var qv(q), kv(k);
  if (q.rank() != 2 || k.rank() != 2 || q.cols() != k.cols()) throw DimensionError("attention_weights shapes");
  if (k.rows() == 0) throw DimensionError("attention over zero keys");
  const double scl = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor w({q.rows(), k.rows()});
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const std::size_t lim = visible_keys(i, k.rows(), causal, q_offset);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < lim; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < q.cols(); ++c) s += q.at(i, c) * k.at(j, c);
      w.at(i, j) = s * scl;
      mx = std::max(mx, w.at(i, j));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < lim; ++j) {
      w.at(i, j) = std::exp(w.at(i, j) - mx);
      total += w.at(i, j);
    }
    for (std::size_t j = 0; j < lim; ++j) w.at(i, j) /= total;
  }
  return w;
}

}  // namespace sfa::ops
