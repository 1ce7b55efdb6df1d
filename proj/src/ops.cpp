#include "streamtag/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

namespace streamtag::num {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using VecMap = Eigen::Map<RowVec>;
using ConstVecMap = Eigen::Map<const RowVec>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
MatMap as_matrix(Tensor& t) {
  return MatMap(t.raw(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                   " and " + shape_string(b.shape()));
}
[[noreturn]] void shape_fail(const char* op, const Tensor& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": " + why + " (shape " + shape_string(a.shape()) + ")");
}

void require_matrix_rank(const char* op, const Tensor& a) {
  if (a.rank() > 2) shape_fail(op, a, "rank > 2 not supported");
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Shared body for unary elementwise ops; `deriv(x, y)` is dy/dx.
template <typename F, typename D>
Var unary(Var a, F f, D deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t in = a.id();
  return a.graph().record(std::move(y), {a}, [in, deriv](Graph& g, std::size_t self) {
    const Tensor& xv = g.value(in);
    const Tensor& yv = g.value(self);
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(in);
    for (std::size_t i = 0; i < xv.size(); ++i) dx[i] += dy[i] * deriv(xv[i], yv[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix_rank("matmul", av);
  if (bv.rank() != 2 || av.cols() != bv.rows()) shape_fail("matmul", av, bv);
  Tensor out({av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(ia)) {
      as_matrix(g.grad(ia)).noalias() += as_matrix(dy) * as_matrix(g.value(ib)).transpose();
    }
    if (g.requires_grad(ib)) {
      as_matrix(g.grad(ib)).noalias() += as_matrix(g.value(ia)).transpose() * as_matrix(dy);
    }
  });
}

namespace {
template <typename Combine, typename Back>
Var binary_same_shape(const char* op, Var a, Var b, Combine combine, Back back) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail(op, av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = combine(av[i], bv[i]);
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib, back](Graph& g, std::size_t self) {
    back(g, g.grad(self), ia, ib);
  });
}
}  // namespace

Var add(Var a, Var b) {
  return binary_same_shape(
      "add", a, b, [](double x, double y) { return x + y; },
      [](Graph& g, const Tensor& dy, std::size_t ia, std::size_t ib) {
        if (g.requires_grad(ia)) g.grad(ia).add_inplace(dy);
        if (g.requires_grad(ib)) g.grad(ib).add_inplace(dy);
      });
}

Var sub(Var a, Var b) {
  return binary_same_shape(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](Graph& g, const Tensor& dy, std::size_t ia, std::size_t ib) {
        if (g.requires_grad(ia)) g.grad(ia).add_inplace(dy);
        if (g.requires_grad(ib)) {
          Tensor& db = g.grad(ib);
          for (std::size_t i = 0; i < dy.size(); ++i) db[i] -= dy[i];
        }
      });
}

Var mul(Var a, Var b) {
  return binary_same_shape(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](Graph& g, const Tensor& dy, std::size_t ia, std::size_t ib) {
        const Tensor& av = g.value(ia);
        const Tensor& bv = g.value(ib);
        if (g.requires_grad(ia)) {
          Tensor& da = g.grad(ia);
          for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv[i];
        }
        if (g.requires_grad(ib)) {
          Tensor& db = g.grad(ib);
          for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * av[i];
        }
      });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var add_bias(Var a, Var bias) {
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  require_matrix_rank("add_bias", av);
  if (bv.rows() != 1 || bv.cols() != av.cols()) shape_fail("add_bias", av, bv);
  Tensor out = av;
  as_matrix(out).rowwise() += ConstVecMap(bv.raw(), static_cast<Eigen::Index>(bv.cols()));
  const std::size_t ia = a.id(), ib = bias.id();
  return a.graph().record(std::move(out), {a, bias}, [ia, ib](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(ia)) g.grad(ia).add_inplace(dy);
    if (g.requires_grad(ib)) {
      Tensor& db = g.grad(ib);
      VecMap(db.raw(), static_cast<Eigen::Index>(db.size())) += as_matrix(dy).colwise().sum();
    }
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require_matrix_rank("concat", v);
    if (v.rows() != rows) shape_fail("concat", parts[0].value(), v);
    total += v.cols();
    ids.push_back(p.id());
    widths.push_back(v.cols());
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.raw() + r * v.cols(), v.cols(), out.raw() + r * total + offset);
    }
    offset += v.cols();
  }
  return parts[0].graph().record(
      std::move(out), std::move(inputs),
      [ids, widths, rows, total](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (g.requires_grad(ids[k])) {
            Tensor& dx = g.grad(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < widths[k]; ++c) {
                dx[r * widths[k] + c] += dy[r * total + off + c];
              }
            }
          }
          off += widths[k];
        }
      });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  require_matrix_rank("softmax", x);
  Tensor y(x.shape());
  const std::size_t rows = x.rows(), cols = x.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.raw() + r * cols;
    double* yr = y.raw() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double z = 0;
    for (std::size_t c = 0; c < cols; ++c) z += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= z;
  }
  const std::size_t in = a.id();
  return a.graph().record(std::move(y), {a}, [in, rows, cols](Graph& g, std::size_t self) {
    const Tensor& yv = g.value(self);
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(in);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[r * cols + c] * yv[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        dx[r * cols + c] += yv[r * cols + c] * (dy[r * cols + c] - dot);
      }
    }
  });
}

Var log_sum_exp(Var a, int axis) {
  const Tensor& x = a.value();
  require_matrix_rank("log_sum_exp", x);
  if (axis != 0 && axis != 1) shape_fail("log_sum_exp", x, "axis must be 0 or 1");
  if (x.rank() < 2 && axis != 0) shape_fail("log_sum_exp", x, "rank-1 input takes axis 0");
  if (x.size() == 0) shape_fail("log_sum_exp", x, "empty input");
  const std::size_t rows = x.rows(), cols = x.cols();
  // Reduce along columns of each row when axis selects the last dimension.
  const bool along_cols = (x.rank() < 2) || axis == 1;
  const std::size_t n_out = along_cols ? rows : cols;
  const std::size_t n_red = along_cols ? cols : rows;
  auto at = [&](const Tensor& t, std::size_t o, std::size_t k) -> double {
    return along_cols ? t[o * cols + k] : t[k * cols + o];
  };
  Tensor y(x.rank() < 2 ? Shape{} : Shape{n_out});
  for (std::size_t o = 0; o < n_out; ++o) {
    double mx = at(x, o, 0);
    for (std::size_t k = 1; k < n_red; ++k) mx = std::max(mx, at(x, o, k));
    double s = 0;
    for (std::size_t k = 0; k < n_red; ++k) s += std::exp(at(x, o, k) - mx);
    y[o] = mx + std::log(s);
  }
  const std::size_t in = a.id();
  return a.graph().record(std::move(y), {a},
                          [in, along_cols, rows, cols, n_out, n_red](Graph& g, std::size_t self) {
                            const Tensor& xv = g.value(in);
                            const Tensor& yv = g.value(self);
                            const Tensor& dy = g.grad(self);
                            Tensor& dx = g.grad(in);
                            (void)rows;
                            for (std::size_t o = 0; o < n_out; ++o) {
                              for (std::size_t k = 0; k < n_red; ++k) {
                                const std::size_t idx = along_cols ? o * cols + k : k * cols + o;
                                dx[idx] += dy[o] * std::exp(xv[idx] - yv[o]);
                              }
                            }
                          });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double s = 0;
  for (double v : x.data()) s += v;
  const std::size_t in = a.id();
  return a.graph().record(Tensor::scalar(s), {a}, [in](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0];
    for (double& v : g.grad(in).data()) v += d;
  });
}

Var embedding_lookup(Var table, std::span<const int> indices) {
  const Tensor& t = table.value();
  if (t.rank() != 2) shape_fail("embedding_lookup", t, "table must be rank 2");
  const std::size_t dim = t.cols();
  Tensor out({indices.size(), dim});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || static_cast<std::size_t>(idx) >= t.rows()) {
      shape_fail("embedding_lookup", t, "index " + std::to_string(idx) + " out of range");
    }
    std::copy_n(t.raw() + static_cast<std::size_t>(idx) * dim, dim, out.raw() + r * dim);
  }
  const std::size_t in = table.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return table.graph().record(std::move(out), {table},
                              [in, idx = std::move(idx), dim](Graph& g, std::size_t self) {
                                const Tensor& dy = g.grad(self);
                                Tensor& dt = g.grad(in);
                                for (std::size_t r = 0; r < idx.size(); ++r) {
                                  double* dst = dt.raw() + static_cast<std::size_t>(idx[r]) * dim;
                                  const double* src = dy.raw() + r * dim;
                                  for (std::size_t c = 0; c < dim; ++c) dst[c] += src[c];
                                }
                              });
}

Var embedding_lookup(Var table, int index) {
  const int one[1] = {index};
  return embedding_lookup(table, std::span<const int>(one, 1));
}

Var stack_rows(std::span<const Var> rows_in) {
  if (rows_in.empty()) throw ShapeError("stack_rows: no inputs");
  const std::size_t cols = rows_in[0].value().cols();
  Tensor out({rows_in.size(), cols});
  std::vector<std::size_t> ids;
  for (std::size_t r = 0; r < rows_in.size(); ++r) {
    const Tensor& v = rows_in[r].value();
    if (v.rows() != 1 || v.cols() != cols) shape_fail("stack_rows", rows_in[0].value(), v);
    std::copy_n(v.raw(), cols, out.raw() + r * cols);
    ids.push_back(rows_in[r].id());
  }
  return rows_in[0].graph().record(
      std::move(out), std::vector<Var>(rows_in.begin(), rows_in.end()),
      [ids, cols](Graph& g, std::size_t self) {
        const Tensor& dy = g.grad(self);
        for (std::size_t r = 0; r < ids.size(); ++r) {
          if (!g.requires_grad(ids[r])) continue;
          Tensor& dx = g.grad(ids[r]);
          for (std::size_t c = 0; c < cols; ++c) dx[c] += dy[r * cols + c];
        }
      });
}

Var row(Var a, std::size_t index) {
  const Tensor& x = a.value();
  require_matrix_rank("row", x);
  if (index >= x.rows()) shape_fail("row", x, "row " + std::to_string(index) + " out of range");
  const std::size_t cols = x.cols();
  Tensor out({1, cols});
  std::copy_n(x.raw() + index * cols, cols, out.raw());
  const std::size_t in = a.id();
  return a.graph().record(std::move(out), {a}, [in, index, cols](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(in);
    for (std::size_t c = 0; c < cols; ++c) dx[index * cols + c] += dy[c];
  });
}

Var repeat_rows(Var a, std::size_t count) {
  const Tensor& x = a.value();
  if (x.rows() != 1) shape_fail("repeat_rows", x, "input must be a single row");
  const std::size_t cols = x.cols();
  Tensor out({count, cols});
  for (std::size_t r = 0; r < count; ++r) std::copy_n(x.raw(), cols, out.raw() + r * cols);
  const std::size_t in = a.id();
  return a.graph().record(std::move(out), {a}, [in, count, cols](Graph& g, std::size_t self) {
    const Tensor& dy = g.grad(self);
    Tensor& dx = g.grad(in);
    for (std::size_t r = 0; r < count; ++r) {
      for (std::size_t c = 0; c < cols; ++c) dx[c] += dy[r * cols + c];
    }
  });
}

Var select(Var a, std::size_t flat_index) {
  const Tensor& x = a.value();
  if (flat_index >= x.size()) shape_fail("select", x, "index out of range");
  const std::size_t in = a.id();
  return a.graph().record(Tensor::scalar(x[flat_index]), {a},
                          [in, flat_index](Graph& g, std::size_t self) {
                            g.grad(in)[flat_index] += g.grad(self)[0];
                          });
}

Var lstm(Var inputs, Var w_ih, Var w_hh, Var bias, bool reverse) {
  const Tensor& x = inputs.value();
  const Tensor& wi = w_ih.value();
  const Tensor& wh = w_hh.value();
  const Tensor& b = bias.value();
  require_matrix_rank("lstm", x);
  if (wi.rank() != 2 || wi.rows() != x.cols() || wi.cols() % 4 != 0) shape_fail("lstm", x, wi);
  const std::size_t T = x.rows();
  const std::size_t H = wi.cols() / 4;
  const std::size_t G = 4 * H;
  if (wh.rank() != 2 || wh.rows() != H || wh.cols() != G) shape_fail("lstm", wi, wh);
  if (b.size() != G) shape_fail("lstm", wi, b);
  if (T == 0) shape_fail("lstm", x, "empty sequence");

  // Cache: post-activation gates (T x 4H), cell states and tanh(cell) (T x H).
  auto acts = std::make_shared<Tensor>(Shape{T, G});
  auto cells = std::make_shared<Tensor>(Shape{T, H});
  auto tcells = std::make_shared<Tensor>(Shape{T, H});
  Tensor out({T, H});

  RowMat pre = as_matrix(x) * as_matrix(wi);
  pre.rowwise() += ConstVecMap(b.raw(), static_cast<Eigen::Index>(G));
  const ConstMatMap whm = as_matrix(wh);
  RowVec gates(G);
  const double* h_prev = nullptr;
  const double* c_prev = nullptr;
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    gates = pre.row(static_cast<Eigen::Index>(t));
    if (h_prev != nullptr) {
      gates.noalias() += ConstVecMap(h_prev, static_cast<Eigen::Index>(H)) * whm;
    }
    double* a = acts->raw() + t * G;
    double* c = cells->raw() + t * H;
    double* tc = tcells->raw() + t * H;
    double* h = out.raw() + t * H;
    for (std::size_t k = 0; k < H; ++k) {
      a[k] = stable_sigmoid(gates[k]);
      a[H + k] = stable_sigmoid(gates[H + k]);
      a[2 * H + k] = std::tanh(gates[2 * H + k]);
      a[3 * H + k] = stable_sigmoid(gates[3 * H + k]);
      c[k] = a[2 * H + k] * a[k] + (c_prev ? a[H + k] * c_prev[k] : 0.0);
      tc[k] = std::tanh(c[k]);
      h[k] = a[3 * H + k] * tc[k];
    }
    h_prev = h;
    c_prev = c;
  }

  const std::size_t ix = inputs.id(), iwi = w_ih.id(), iwh = w_hh.id(), ib = bias.id();
  return inputs.graph().record(
      std::move(out), {inputs, w_ih, w_hh, bias},
      [=](Graph& g, std::size_t self) {
        const Tensor& dH = g.grad(self);
        const Tensor& hs = g.value(self);
        const ConstMatMap whm_b = as_matrix(g.value(iwh));
        RowMat dA = RowMat::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(G));
        RowMat h_before = RowMat::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(H));
        RowVec dh_next = RowVec::Zero(static_cast<Eigen::Index>(H));
        std::vector<double> dc_next(H, 0.0);
        for (std::size_t s = T; s-- > 0;) {
          const std::size_t t = reverse ? T - 1 - s : s;
          const bool has_prev = s > 0;
          const std::size_t tp = has_prev ? (reverse ? T - s : s - 1) : 0;
          const double* a = acts->raw() + t * G;
          const double* tc = tcells->raw() + t * H;
          const double* cp = has_prev ? cells->raw() + tp * H : nullptr;
          double* da = dA.data() + t * G;
          for (std::size_t k = 0; k < H; ++k) {
            const double dh = dH[t * H + k] + dh_next[static_cast<Eigen::Index>(k)];
            const double i = a[k], f = a[H + k], gg = a[2 * H + k], o = a[3 * H + k];
            const double dc = dc_next[k] + dh * o * (1.0 - tc[k] * tc[k]);
            da[k] = dc * gg * i * (1.0 - i);
            da[H + k] = has_prev ? dc * cp[k] * f * (1.0 - f) : 0.0;
            da[2 * H + k] = dc * i * (1.0 - gg * gg);
            da[3 * H + k] = dh * tc[k] * o * (1.0 - o);
            dc_next[k] = dc * f;
          }
          if (has_prev) {
            dh_next.noalias() =
                ConstVecMap(da, static_cast<Eigen::Index>(G)) * whm_b.transpose();
            std::copy_n(hs.raw() + tp * H, H, h_before.data() + t * H);
          }
        }
        if (g.requires_grad(iwh)) {
          as_matrix(g.grad(iwh)).noalias() += h_before.transpose() * dA;
        }
        if (g.requires_grad(ib)) {
          Tensor& db = g.grad(ib);
          VecMap(db.raw(), static_cast<Eigen::Index>(G)) += dA.colwise().sum();
        }
        if (g.requires_grad(ix)) {
          as_matrix(g.grad(ix)).noalias() += dA * as_matrix(g.value(iwi)).transpose();
        }
        if (g.requires_grad(iwi)) {
          as_matrix(g.grad(iwi)).noalias() += as_matrix(g.value(ix)).transpose() * dA;
        }
      });
}

}  // namespace streamtag::num
