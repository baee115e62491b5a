#include "mtlsp/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mtlsp {

namespace {

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

void check_shape_valid(const Shape& s) {
  if (s.empty() || s.size() > 2) {
    throw ShapeError("tensor rank must be 1 or 2");
  }
  for (int64_t d : s) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive");
  }
}

void ensure_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError(std::string("non-finite value in ") + what);
    }
  }
}

std::shared_ptr<detail::TensorNode> make_node(Shape shape, bool requires_grad) {
  auto n = std::make_shared<detail::TensorNode>();
  check_shape_valid(shape);
  n->values.assign(static_cast<size_t>(shape_size(shape)), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return n;
}

void accumulate(detail::TensorNode& node, std::span<const double> delta) {
  if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
  for (size_t i = 0; i < delta.size(); ++i) node.grad[i] += delta[i];
}

// Gradient buffer of a node on the backward path; empty span means no
// gradient reached the output, so the closure can return early.
std::span<const double> out_grad(const detail::TensorNode& node) {
  return node.grad;
}

}  // namespace

struct OpAccess {
  static Tensor wrap(std::shared_ptr<detail::TensorNode> n) {
    return Tensor(std::move(n));
  }
  static const std::shared_ptr<detail::TensorNode>& node(const Tensor& t) {
    return t.node_;
  }
};

namespace {

Tensor make_result(Shape shape, std::vector<double> values, bool requires_grad,
                   const char* op_name) {
  auto n = std::make_shared<detail::TensorNode>();
  check_shape_valid(shape);
  if (static_cast<int64_t>(values.size()) != shape_size(shape)) {
    throw ShapeError(std::string(op_name) + ": result size/shape mismatch");
  }
  ensure_finite(values, op_name);
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return OpAccess::wrap(std::move(n));
}

bool track(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

MapCM map2(const Tensor& t) {
  return MapCM(t.values().data(), t.rows(), t.cols());
}

}  // namespace

// ------------------------------- Tensor -------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return OpAccess::wrap(make_node(std::move(shape), requires_grad));
}

Tensor Tensor::constant(Shape shape, double value) {
  auto n = make_node(std::move(shape), false);
  std::fill(n->values.begin(), n->values.end(), value);
  ensure_finite(n->values, "constant");
  return OpAccess::wrap(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  check_shape_valid(shape);
  if (static_cast<int64_t>(values.size()) != shape_size(shape)) {
    throw ShapeError("tensor payload does not match shape");
  }
  ensure_finite(values, "tensor payload");
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return OpAccess::wrap(std::move(n));
}

Tensor Tensor::scalar_value(double v) { return from({1}, {v}); }

double Tensor::scalar() const {
  if (size() != 1) throw ShapeError("scalar() on tensor of size != 1");
  return node_->values[0];
}

Tensor Tensor::grad() const {
  auto g = std::make_shared<detail::TensorNode>();
  g->shape = node_->shape;
  if (node_->grad.empty()) {
    g->values.assign(node_->values.size(), 0.0);
  } else {
    g->values = node_->grad;
  }
  return OpAccess::wrap(std::move(g));
}

// ------------------------------- ops ----------------------------------

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  const int64_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<size_t>(m * n));
  MapM(out.data(), m, n) = map2(a) * map2(b);
  Tensor c = make_result({m, n}, std::move(out),
                         a.requires_grad() || b.requires_grad(), "matmul");
  if (track(tape, {&a, &b})) {
    auto an = OpAccess::node(a), bn = OpAccess::node(b),
         cn = OpAccess::node(c);
    tape->record([an, bn, cn, m, k, n]() {
      auto g = out_grad(*cn);
      if (g.empty()) return;
      MapCM gc(g.data(), m, n);
      if (an->requires_grad) {
        std::vector<double> da(static_cast<size_t>(m * k));
        MapM(da.data(), m, k) =
            gc * MapCM(bn->values.data(), k, n).transpose();
        accumulate(*an, da);
      }
      if (bn->requires_grad) {
        std::vector<double> db(static_cast<size_t>(k * n));
        MapM(db.data(), k, n) =
            MapCM(an->values.data(), m, k).transpose() * gc;
        accumulate(*bn, db);
      }
    });
  }
  return c;
}

Tensor transpose(Tape* tape, const Tensor& a) {
  const int64_t m = a.rows(), n = a.cols();
  std::vector<double> out(static_cast<size_t>(m * n));
  MapM(out.data(), n, m) = map2(a).transpose();
  Tensor c = make_result({n, m}, std::move(out), a.requires_grad(), "transpose");
  if (track(tape, {&a})) {
    auto an = OpAccess::node(a), cn = OpAccess::node(c);
    tape->record([an, cn, m, n]() {
      auto g = out_grad(*cn);
      if (g.empty()) return;
      std::vector<double> da(static_cast<size_t>(m * n));
      MapM(da.data(), m, n) = MapCM(g.data(), n, m).transpose();
      accumulate(*an, da);
    });
  }
  return c;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool bias_row = a.rank() == 2 && b.rank() == 1 && b.cols() == a.cols();
  if (!same && !bias_row) throw ShapeError("add: incompatible shapes");
  const int64_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  if (same) {
    for (int64_t i = 0; i < a.size(); ++i) out[static_cast<size_t>(i)] += b.values()[static_cast<size_t>(i)];
  } else {
    for (int64_t r = 0; r < m; ++r)
      for (int64_t c = 0; c < n; ++c)
        out[static_cast<size_t>(r * n + c)] += b.values()[static_cast<size_t>(c)];
  }
  Tensor c = make_result(a.shape(), std::move(out),
                         a.requires_grad() || b.requires_grad(), "add");
  if (track(tape, {&a, &b})) {
    auto an = OpAccess::node(a), bn = OpAccess::node(b),
         cn = OpAccess::node(c);
    tape->record([an, bn, cn, same, m, n]() {
      auto g = out_grad(*cn);
      if (g.empty()) return;
      if (an->requires_grad) accumulate(*an, g);
      if (bn->requires_grad) {
        if (same) {
          accumulate(*bn, g);
        } else {
          std::vector<double> db(static_cast<size_t>(n), 0.0);
          for (int64_t r = 0; r < m; ++r)
            for (int64_t c2 = 0; c2 < n; ++c2)
              db[static_cast<size_t>(c2)] += g[static_cast<size_t>(r * n + c2)];
          accumulate(*bn, db);
        }
      }
    });
  }
  return c;
}

Tensor scale(Tape* tape, const Tensor& a, double c) {
  if (!std::isfinite(c)) throw NumericError("scale: non-finite factor");
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& x : out) x *= c;
  Tensor r = make_result(a.shape(), std::move(out), a.requires_grad(), "scale");
  if (track(tape, {&a})) {
    auto an = OpAccess::node(a), rn = OpAccess::node(r);
    tape->record([an, rn, c]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      std::vector<double> da(g.begin(), g.end());
      for (double& x : da) x *= c;
      accumulate(*an, da);
    });
  }
  return r;
}

Tensor relu(Tape* tape, const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& x : out) x = x > 0.0 ? x : 0.0;
  Tensor r = make_result(a.shape(), std::move(out), a.requires_grad(), "relu");
  if (track(tape, {&a})) {
    auto an = OpAccess::node(a), rn = OpAccess::node(r);
    tape->record([an, rn]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      std::vector<double> da(g.size());
      for (size_t i = 0; i < g.size(); ++i)
        da[i] = an->values[i] > 0.0 ? g[i] : 0.0;
      accumulate(*an, da);
    });
  }
  return r;
}

Tensor softmax(Tape* tape, const Tensor& a) {
  const int64_t m = a.rows(), n = a.cols();
  std::vector<double> out(static_cast<size_t>(m * n));
  for (int64_t r = 0; r < m; ++r) {
    const double* row = a.values().data() + r * n;
    double* orow = out.data() + r * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < n; ++i) mx = std::max(mx, row[i]);
    double z = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      orow[i] = std::exp(row[i] - mx);
      z += orow[i];
    }
    for (int64_t i = 0; i < n; ++i) orow[i] /= z;
  }
  Tensor r = make_result(a.shape(), std::move(out), a.requires_grad(), "softmax");
  if (track(tape, {&a})) {
    auto an = OpAccess::node(a), rn = OpAccess::node(r);
    tape->record([an, rn, m, n]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      std::vector<double> da(static_cast<size_t>(m * n));
      for (int64_t r2 = 0; r2 < m; ++r2) {
        const double* y = rn->values.data() + r2 * n;
        const double* gy = g.data() + r2 * n;
        double dot = 0.0;
        for (int64_t i = 0; i < n; ++i) dot += y[i] * gy[i];
        for (int64_t i = 0; i < n; ++i)
          da[static_cast<size_t>(r2 * n + i)] = y[i] * (gy[i] - dot);
      }
      accumulate(*an, da);
    });
  }
  return r;
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, double eps) {
  const int64_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n) {
    throw ShapeError("layer_norm: gain/bias width must equal row width");
  }
  std::vector<double> out(static_cast<size_t>(m * n));
  std::vector<double> xhat(static_cast<size_t>(m * n));
  std::vector<double> inv_sigma(static_cast<size_t>(m));
  for (int64_t r = 0; r < m; ++r) {
    const double* row = x.values().data() + r * n;
    double mu = 0.0;
    for (int64_t i = 0; i < n; ++i) mu += row[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(r)] = is;
    for (int64_t i = 0; i < n; ++i) {
      const double h = (row[i] - mu) * is;
      xhat[static_cast<size_t>(r * n + i)] = h;
      out[static_cast<size_t>(r * n + i)] =
          h * gain.values()[static_cast<size_t>(i)] +
          bias.values()[static_cast<size_t>(i)];
    }
  }
  const bool rg =
      x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor r = make_result(x.shape(), std::move(out), rg, "layer_norm");
  if (track(tape, {&x, &gain, &bias})) {
    auto xn = OpAccess::node(x), gn = OpAccess::node(gain),
         bn = OpAccess::node(bias), rn = OpAccess::node(r);
    tape->record([xn, gn, bn, rn, m, n, xhat = std::move(xhat),
                  inv_sigma = std::move(inv_sigma)]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      if (gn->requires_grad) {
        std::vector<double> dg(static_cast<size_t>(n), 0.0);
        for (int64_t r2 = 0; r2 < m; ++r2)
          for (int64_t i = 0; i < n; ++i)
            dg[static_cast<size_t>(i)] += g[static_cast<size_t>(r2 * n + i)] *
                                          xhat[static_cast<size_t>(r2 * n + i)];
        accumulate(*gn, dg);
      }
      if (bn->requires_grad) {
        std::vector<double> db(static_cast<size_t>(n), 0.0);
        for (int64_t r2 = 0; r2 < m; ++r2)
          for (int64_t i = 0; i < n; ++i)
            db[static_cast<size_t>(i)] += g[static_cast<size_t>(r2 * n + i)];
        accumulate(*bn, db);
      }
      if (xn->requires_grad) {
        std::vector<double> dx(static_cast<size_t>(m * n));
        for (int64_t r2 = 0; r2 < m; ++r2) {
          const double* gy = g.data() + r2 * n;
          const double* h = xhat.data() + r2 * n;
          // dyh = gy * gain; dx = is * (dyh - mean(dyh) - h*mean(dyh*h))
          double mean_dyh = 0.0, mean_dyh_h = 0.0;
          for (int64_t i = 0; i < n; ++i) {
            const double dyh = gy[i] * gn->values[static_cast<size_t>(i)];
            mean_dyh += dyh;
            mean_dyh_h += dyh * h[i];
          }
          mean_dyh /= static_cast<double>(n);
          mean_dyh_h /= static_cast<double>(n);
          const double is = inv_sigma[static_cast<size_t>(r2)];
          for (int64_t i = 0; i < n; ++i) {
            const double dyh = gy[i] * gn->values[static_cast<size_t>(i)];
            dx[static_cast<size_t>(r2 * n + i)] =
                is * (dyh - mean_dyh - h[i] * mean_dyh_h);
          }
        }
        accumulate(*xn, dx);
      }
    });
  }
  return r;
}

Tensor embedding_lookup(Tape* tape, const Tensor& table,
                        const std::vector<int64_t>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding_lookup: table must be 2-D");
  const int64_t v = table.rows(), d = table.cols();
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  for (int64_t id : ids) {
    if (id < 0 || id >= v) {
      throw ShapeError("embedding_lookup: id out of range");
    }
  }
  const int64_t t = static_cast<int64_t>(ids.size());
  std::vector<double> out(static_cast<size_t>(t * d));
  for (int64_t r = 0; r < t; ++r) {
    const double* src = table.values().data() + ids[static_cast<size_t>(r)] * d;
    std::copy(src, src + d, out.data() + r * d);
  }
  Tensor r = make_result({t, d}, std::move(out), table.requires_grad(),
                         "embedding_lookup");
  if (track(tape, {&table})) {
    auto tn = OpAccess::node(table), rn = OpAccess::node(r);
    tape->record([tn, rn, ids, d]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      if (tn->grad.empty()) tn->grad.assign(tn->values.size(), 0.0);
      for (size_t r2 = 0; r2 < ids.size(); ++r2) {
        double* dst = tn->grad.data() + ids[r2] * d;
        const double* src = g.data() + static_cast<int64_t>(r2) * d;
        for (int64_t i = 0; i < d; ++i) dst[i] += src[i];
      }
    });
  }
  return r;
}

Tensor dropout(Tape* tape, const Tensor& x, double ratio, Rng* rng,
               bool training) {
  if (ratio < 0.0 || ratio >= 1.0) {
    throw UsageError("dropout ratio must be in [0,1)");
  }
  if (!training || ratio == 0.0) return x;
  if (rng == nullptr) throw UsageError("dropout: rng required at train time");
  const double keep_scale = 1.0 / (1.0 - ratio);
  std::vector<double> mask(static_cast<size_t>(x.size()));
  std::vector<double> out(static_cast<size_t>(x.size()));
  for (int64_t i = 0; i < x.size(); ++i) {
    const double m = rng->uniform() >= ratio ? keep_scale : 0.0;
    mask[static_cast<size_t>(i)] = m;
    out[static_cast<size_t>(i)] = x.values()[static_cast<size_t>(i)] * m;
  }
  Tensor r = make_result(x.shape(), std::move(out), x.requires_grad(), "dropout");
  if (track(tape, {&x})) {
    auto xn = OpAccess::node(x), rn = OpAccess::node(r);
    tape->record([xn, rn, mask = std::move(mask)]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      std::vector<double> dx(g.size());
      for (size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * mask[i];
      accumulate(*xn, dx);
    });
  }
  return r;
}

Tensor cross_entropy(Tape* tape, const Tensor& probs,
                     const std::vector<int64_t>& targets) {
  const int64_t t = probs.rows(), k = probs.cols();
  if (static_cast<int64_t>(targets.size()) != t) {
    throw ShapeError("cross_entropy: one target per row required");
  }
  for (int64_t id : targets) {
    if (id < 0 || id >= k) throw ShapeError("cross_entropy: target out of range");
  }
  // Guard against exact zeros from masked softmax entries.
  constexpr double kTiny = 1e-300;
  double total = 0.0;
  for (int64_t r = 0; r < t; ++r) {
    const double p = probs.at(r, targets[static_cast<size_t>(r)]);
    total -= std::log(std::max(p, kTiny));
  }
  const double inv_t = 1.0 / static_cast<double>(t);
  Tensor r = make_result({1}, {total * inv_t}, probs.requires_grad(),
                         "cross_entropy");
  if (track(tape, {&probs})) {
    auto pn = OpAccess::node(probs), rn = OpAccess::node(r);
    tape->record([pn, rn, targets, k, inv_t]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      const double go = g[0];
      if (pn->grad.empty()) pn->grad.assign(pn->values.size(), 0.0);
      for (size_t r2 = 0; r2 < targets.size(); ++r2) {
        const size_t idx = r2 * static_cast<size_t>(k) +
                           static_cast<size_t>(targets[r2]);
        const double p = std::max(pn->values[idx], 1e-300);
        pn->grad[idx] += go * (-inv_t / p);
      }
    });
  }
  return r;
}

Tensor concat(Tape* tape, const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  const int64_t other = axis == 0 ? parts[0].cols() : parts[0].rows();
  int64_t total = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if ((axis == 0 ? p.cols() : p.rows()) != other) {
      throw ShapeError("concat: mismatched widths");
    }
    total += axis == 0 ? p.rows() : p.cols();
    rg = rg || p.requires_grad();
  }
  const int64_t m = axis == 0 ? total : other;
  const int64_t n = axis == 0 ? other : total;
  std::vector<double> out(static_cast<size_t>(m * n));
  int64_t off = 0;
  for (const Tensor& p : parts) {
    if (axis == 0) {
      std::copy(p.values().begin(), p.values().end(), out.begin() + off * n);
      off += p.rows();
    } else {
      for (int64_t r = 0; r < m; ++r) {
        std::copy(p.values().data() + r * p.cols(),
                  p.values().data() + (r + 1) * p.cols(),
                  out.data() + r * n + off);
      }
      off += p.cols();
    }
  }
  Tensor r = make_result({m, n}, std::move(out), rg, "concat");
  if (tape != nullptr && rg) {
    std::vector<std::shared_ptr<detail::TensorNode>> pnodes;
    pnodes.reserve(parts.size());
    for (const Tensor& p : parts) pnodes.push_back(OpAccess::node(p));
    auto rn = OpAccess::node(r);
    tape->record([pnodes = std::move(pnodes), rn, axis, m, n]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      int64_t off2 = 0;
      for (const auto& pn : pnodes) {
        const int64_t pm = pn->shape.size() == 2 ? pn->shape[0] : 1;
        const int64_t pc = pn->shape.size() == 2 ? pn->shape[1] : pn->shape[0];
        if (pn->requires_grad) {
          std::vector<double> dp(static_cast<size_t>(pm * pc));
          if (axis == 0) {
            std::copy(g.begin() + off2 * n, g.begin() + (off2 + pm) * n,
                      dp.begin());
          } else {
            for (int64_t r2 = 0; r2 < m; ++r2)
              std::copy(g.data() + r2 * n + off2, g.data() + r2 * n + off2 + pc,
                        dp.data() + r2 * pc);
          }
          accumulate(*pn, dp);
        }
        off2 += axis == 0 ? pm : pc;
      }
    });
  }
  return r;
}

Tensor slice(Tape* tape, const Tensor& x, int axis, int64_t start,
             int64_t len) {
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  const int64_t m = x.rows(), n = x.cols();
  const int64_t extent = axis == 0 ? m : n;
  if (start < 0 || len <= 0 || start + len > extent) {
    throw ShapeError("slice: range out of bounds");
  }
  const int64_t om = axis == 0 ? len : m;
  const int64_t on = axis == 0 ? n : len;
  std::vector<double> out(static_cast<size_t>(om * on));
  if (axis == 0) {
    std::copy(x.values().begin() + start * n,
              x.values().begin() + (start + len) * n, out.begin());
  } else {
    for (int64_t r = 0; r < m; ++r)
      std::copy(x.values().data() + r * n + start,
                x.values().data() + r * n + start + len, out.data() + r * on);
  }
  Tensor r = make_result({om, on}, std::move(out), x.requires_grad(), "slice");
  if (track(tape, {&x})) {
    auto xn = OpAccess::node(x), rn = OpAccess::node(r);
    tape->record([xn, rn, axis, start, m, n, om, on]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      std::vector<double> dx(static_cast<size_t>(m * n), 0.0);
      if (axis == 0) {
        std::copy(g.begin(), g.end(), dx.begin() + start * n);
      } else {
        for (int64_t r2 = 0; r2 < om; ++r2)
          std::copy(g.data() + r2 * on, g.data() + (r2 + 1) * on,
                    dx.data() + r2 * n + start);
      }
      accumulate(*xn, dx);
    });
  }
  return r;
}

Tensor sum(Tape* tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor r = make_result({1}, {total}, x.requires_grad(), "sum");
  if (track(tape, {&x})) {
    auto xn = OpAccess::node(x), rn = OpAccess::node(r);
    tape->record([xn, rn]() {
      auto g = out_grad(*rn);
      if (g.empty()) return;
      std::vector<double> dx(xn->values.size(), g[0]);
      accumulate(*xn, dx);
    });
  }
  return r;
}

void backward(Tape& tape, const Tensor& loss) {
  if (tape.consumed_) throw Error("backward: tape already consumed");
  if (tape.ops_.empty()) throw Error("backward: empty tape");
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar");
  tape.consumed_ = true;
  auto ln = OpAccess::node(loss);
  ln->grad.assign(1, 1.0);
  for (auto it = tape.ops_.rbegin(); it != tape.ops_.rend(); ++it) (*it)();
}

}  // namespace mtlsp
