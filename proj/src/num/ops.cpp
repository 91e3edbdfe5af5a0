#include "readnet/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "readnet/num/kernels.hpp"

namespace readnet::num {
namespace {

Graph& owner(const Var& a) {
  if (!a.valid()) throw std::logic_error("use of an unbound Var");
  return *a.graph();
}

Graph& owner(const Var& a, const Var& b) {
  auto& g = owner(a);
  g.check_owner(b);
  return g;
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

enum class Broadcast { kNone, kRow };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.rank() == 2 && b.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                              shape_string(b.shape()));
}

// Iterates the lines of a rank-2 tensor along `axis`.
struct Lines {
  std::size_t count, length, stride;
  std::size_t offset(std::size_t line, std::size_t cols, int axis) const { return axis == 1 ? line * cols : line; }
};

Lines lines_of(const Tensor& t, int axis) {
  if (axis == 1) return {t.rows(), t.cols(), 1};
  if (axis == 0) return {t.cols(), t.rows(), t.cols()};
  throw std::invalid_argument("axis must be 0 or 1, got " + std::to_string(axis));
}

template <typename Forward, typename Derivative>
Var elementwise(const Var& a, Forward f, Derivative df) {
  auto& g = owner(a);
  Tensor out = a.value();
  for (auto& x : out.data()) x = f(x);
  const auto ia = a.id();
  return g.record(std::move(out), {ia}, [ia, df](Graph& gr, std::size_t self) {
    if (!gr.requires_grad(ia)) return;
    const auto& x = gr.value(ia);
    const auto& y = gr.value(self);
    const auto& dy = gr.grad(self);
    auto& dx = gr.grad(ia);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * df(x[i], y[i]);
  });
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  auto& g = owner(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_string(av.shape()) + " vs " +
                                shape_string(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  matmul_into(av, false, bv, false, out);
  const auto ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    if (gr.requires_grad(ia)) matmul_into(dy, false, gr.value(ib), true, gr.grad(ia), true);
    if (gr.requires_grad(ib)) matmul_into(gr.value(ia), true, dy, false, gr.grad(ib), true);
  });
}

Var add(const Var& a, const Var& b) {
  auto& g = owner(a, b);
  const auto kind = broadcast_kind("add", a.value(), b.value());
  Tensor out = a.value();
  const auto& bv = b.value();
  const auto cols = out.rank() == 2 ? out.cols() : out.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += kind == Broadcast::kNone ? bv[i] : bv[i % cols];
  const auto ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib, kind, cols](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    if (gr.requires_grad(ia)) accumulate(gr.grad(ia), dy);
    if (gr.requires_grad(ib)) {
      auto& db = gr.grad(ib);
      for (std::size_t i = 0; i < dy.size(); ++i) db[kind == Broadcast::kNone ? i : i % cols] += dy[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  auto& g = owner(a, b);
  const auto kind = broadcast_kind("sub", a.value(), b.value());
  Tensor out = a.value();
  const auto& bv = b.value();
  const auto cols = out.rank() == 2 ? out.cols() : out.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= kind == Broadcast::kNone ? bv[i] : bv[i % cols];
  const auto ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib, kind, cols](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    if (gr.requires_grad(ia)) accumulate(gr.grad(ia), dy);
    if (gr.requires_grad(ib)) {
      auto& db = gr.grad(ib);
      for (std::size_t i = 0; i < dy.size(); ++i) db[kind == Broadcast::kNone ? i : i % cols] -= dy[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  auto& g = owner(a, b);
  const auto kind = broadcast_kind("mul", a.value(), b.value());
  Tensor out = a.value();
  const auto& bv = b.value();
  const auto cols = out.rank() == 2 ? out.cols() : out.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= kind == Broadcast::kNone ? bv[i] : bv[i % cols];
  const auto ia = a.id(), ib = b.id();
  return g.record(std::move(out), {ia, ib}, [ia, ib, kind, cols](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    const auto& av = gr.value(ia);
    const auto& bv = gr.value(ib);
    if (gr.requires_grad(ia)) {
      auto& da = gr.grad(ia);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * (kind == Broadcast::kNone ? bv[i] : bv[i % cols]);
    }
    if (gr.requires_grad(ib)) {
      auto& db = gr.grad(ib);
      for (std::size_t i = 0; i < dy.size(); ++i) db[kind == Broadcast::kNone ? i : i % cols] += dy[i] * av[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  auto& g = owner(a);
  Tensor out = a.value();
  for (auto& x : out.data()) x *= factor;
  const auto ia = a.id();
  return g.record(std::move(out), {ia}, [ia, factor](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    auto& dx = gr.grad(ia);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * factor;
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  auto& g = owner(parts.front());
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    g.check_owner(p);
    const auto& v = p.value();
    if (axis == 1) {
      if (rows == 0) rows = v.rows();
      if (v.rows() != rows) {
        throw std::invalid_argument("concat: row mismatch " + shape_string(parts.front().value().shape()) + " vs " +
                                    shape_string(v.shape()));
      }
      cols += v.cols();
    } else {
      if (cols == 0) cols = v.cols();
      if (v.cols() != cols) {
        throw std::invalid_argument("concat: column mismatch " + shape_string(parts.front().value().shape()) +
                                    " vs " + shape_string(v.shape()));
      }
      rows += v.rows();
    }
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t r = 0; r < v.rows(); ++r) {
      for (std::size_t c = 0; c < v.cols(); ++c) {
        if (axis == 1) {
          out(r, offset + c) = v(r, c);
        } else {
          out(offset + r, c) = v(r, c);
        }
      }
    }
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += axis == 1 ? v.cols() : v.rows();
  }
  auto parents = ids;
  return g.record(std::move(out), std::move(parents), [ids, offsets, axis](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!gr.requires_grad(ids[k])) continue;
      auto& dx = gr.grad(ids[k]);
      for (std::size_t r = 0; r < dx.rows(); ++r) {
        for (std::size_t c = 0; c < dx.cols(); ++c) {
          dx(r, c) += axis == 1 ? dy(r, offsets[k] + c) : dy(offsets[k] + r, c);
        }
      }
    }
  });
}

Var transpose(const Var& a) {
  auto& g = owner(a);
  const auto& v = a.value();
  Tensor out({v.cols(), v.rows()});
  for (std::size_t r = 0; r < v.rows(); ++r) {
    for (std::size_t c = 0; c < v.cols(); ++c) out(c, r) = v(r, c);
  }
  const auto ia = a.id();
  return g.record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    auto& dx = gr.grad(ia);
    for (std::size_t r = 0; r < dx.rows(); ++r) {
      for (std::size_t c = 0; c < dx.cols(); ++c) dx(r, c) += dy(c, r);
    }
  });
}

Var row_select(const Var& a, std::span<const std::size_t> rows) {
  auto& g = owner(a);
  const auto& v = a.value();
  if (rows.empty()) throw std::invalid_argument("row_select: empty index list");
  Tensor out({rows.size(), v.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= v.rows()) {
      throw std::out_of_range("row_select: row " + std::to_string(rows[i]) + " outside " + shape_string(v.shape()));
    }
    std::copy_n(v.row_span(rows[i]).begin(), v.cols(), out.row_span(i).begin());
  }
  const auto ia = a.id();
  std::vector<std::size_t> index(rows.begin(), rows.end());
  return g.record(std::move(out), {ia}, [ia, index = std::move(index)](Graph& gr, std::size_t self) {
    const auto& dy = gr.grad(self);
    auto& dx = gr.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) {
      auto src = dy.row_span(i);
      auto dst = dx.row_span(index[i]);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var sum(const Var& a) {
  auto& g = owner(a);
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  const auto ia = a.id();
  return g.record(Tensor::scalar(total), {ia}, [ia](Graph& gr, std::size_t self) {
    const double dy = gr.grad(self)[0];
    for (auto& x : gr.grad(ia).data()) x += dy;
  });
}

Var relu(const Var& a) {
  return elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(const Var& a) {
  return elementwise(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return elementwise(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                     [](double, double y) { return y * (1.0 - y); });
}

Var log_sigmoid(const Var& a) {
  return elementwise(a, [](double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); },
                     [](double x, double) { return 1.0 / (1.0 + std::exp(x)); });
}

Var softmax(const Var& a, int axis, const Mask& mask) {
  auto& g = owner(a);
  const auto& x = a.value();
  const auto lines = lines_of(x, axis);
  if (!mask.empty() && mask.size() != lines.length) {
    throw std::invalid_argument("softmax: mask length " + std::to_string(mask.size()) + " does not match axis of " +
                                shape_string(x.shape()));
  }
  const auto cols = x.cols();
  Tensor out(x.shape());
  for (std::size_t l = 0; l < lines.count; ++l) {
    const auto base = lines.offset(l, cols, axis);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lines.length; ++k) {
      if (mask.empty() || mask[k]) peak = std::max(peak, x[base + k * lines.stride]);
    }
    if (peak == -std::numeric_limits<double>::infinity()) throw std::invalid_argument("empty sequence");
    double total = 0.0;
    for (std::size_t k = 0; k < lines.length; ++k) {
      const auto idx = base + k * lines.stride;
      const double e = (mask.empty() || mask[k]) ? std::exp(x[idx] - peak) : 0.0;
      out[idx] = e;
      total += e;
    }
    for (std::size_t k = 0; k < lines.length; ++k) out[base + k * lines.stride] /= total;
  }
  const auto ia = a.id();
  return g.record(std::move(out), {ia}, [ia, axis](Graph& gr, std::size_t self) {
    const auto& y = gr.value(self);
    const auto& dy = gr.grad(self);
    auto& dx = gr.grad(ia);
    const auto ln = lines_of(y, axis);
    const auto cols = y.cols();
    for (std::size_t l = 0; l < ln.count; ++l) {
      const auto base = ln.offset(l, cols, axis);
      double dot = 0.0;
      for (std::size_t k = 0; k < ln.length; ++k) {
        const auto idx = base + k * ln.stride;
        dot += dy[idx] * y[idx];
      }
      for (std::size_t k = 0; k < ln.length; ++k) {
        const auto idx = base + k * ln.stride;
        dx[idx] += y[idx] * (dy[idx] - dot);
      }
    }
  });
}

Var log_softmax(const Var& a) {
  auto& g = owner(a);
  const auto& x = a.value();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row_span(r);
    const double peak = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - peak);
    const double lse = peak + std::log(total);
    auto dst = out.row_span(r);
    for (std::size_t c = 0; c < row.size(); ++c) dst[c] = row[c] - lse;
  }
  const auto ia = a.id();
  return g.record(std::move(out), {ia}, [ia](Graph& gr, std::size_t self) {
    const auto& y = gr.value(self);
    const auto& dy = gr.grad(self);
    auto& dx = gr.grad(ia);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) total += dy(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) dx(r, c) += dy(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var layer_norm(const Var& a, int axis, double eps) {
  auto& g = owner(a);
  const auto& x = a.value();
  const auto lines = lines_of(x, axis);
  const auto cols = x.cols();
  Tensor out(x.shape());
  std::vector<double> inv_std(lines.count);
  for (std::size_t l = 0; l < lines.count; ++l) {
    const auto base = lines.offset(l, cols, axis);
    double mean = 0.0;
    for (std::size_t k = 0; k < lines.length; ++k) mean += x[base + k * lines.stride];
    mean /= static_cast<double>(lines.length);
    double var = 0.0;
    for (std::size_t k = 0; k < lines.length; ++k) {
      const double d = x[base + k * lines.stride] - mean;
      var += d * d;
    }
    var /= static_cast<double>(lines.length);
    inv_std[l] = 1.0 / std::sqrt(var + eps);
    for (std::size_t k = 0; k < lines.length; ++k) {
      const auto idx = base + k * lines.stride;
      out[idx] = (x[idx] - mean) * inv_std[l];
    }
  }
  const auto ia = a.id();
  return g.record(std::move(out), {ia}, [ia, axis, inv_std = std::move(inv_std)](Graph& gr, std::size_t self) {
    const auto& y = gr.value(self);
    const auto& dy = gr.grad(self);
    auto& dx = gr.grad(ia);
    const auto ln = lines_of(y, axis);
    const auto cols = y.cols();
    const double n = static_cast<double>(ln.length);
    for (std::size_t l = 0; l < ln.count; ++l) {
      const auto base = ln.offset(l, cols, axis);
      double mean_dy = 0.0, mean_dy_y = 0.0;
      for (std::size_t k = 0; k < ln.length; ++k) {
        const auto idx = base + k * ln.stride;
        mean_dy += dy[idx];
        mean_dy_y += dy[idx] * y[idx];
      }
      mean_dy /= n;
      mean_dy_y /= n;
      for (std::size_t k = 0; k < ln.length; ++k) {
        const auto idx = base + k * ln.stride;
        dx[idx] += inv_std[l] * (dy[idx] - mean_dy - y[idx] * mean_dy_y);
      }
    }
  });
}

}  // namespace readnet::num
