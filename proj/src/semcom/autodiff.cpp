#include "semcom/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "semcom/error.hpp"
#include "semcom/rng.hpp"

namespace semcom {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Tensor init) {
  require(!contains(name), ErrorCode::kInvalidArgument, "duplicate parameter name: " + name);
  Parameter p;
  p.grad = Tensor(init.shape());
  p.m = Tensor(init.shape());
  p.v = Tensor(init.shape());
  p.value = std::move(init);
  p.name = std::move(name);
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParameterSet::add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out,
                                    Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w({fan_in, fan_out});
  for (double& x : w.data()) x = rng.uniform(-a, a);
  return add(std::move(name), std::move(w));
}

bool ParameterSet::contains(std::string_view name) const noexcept {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  fail(ErrorCode::kInvalidArgument, "unknown parameter: " + std::string(name));
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() noexcept {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParameterSet::round_to_float() noexcept {
  for (auto& p : params_)
    for (double& x : p.value.data()) x = static_cast<double>(static_cast<float>(x));
}

std::uint64_t ParameterSet::hash() const noexcept {
  std::uint64_t h = fnv1a64("");
  auto feed = [&h](const void* ptr, std::size_t n) {
    h = fnv1a64(std::span(static_cast<const unsigned char*>(ptr), n), h);
  };
  for (const auto& p : params_) {
    feed(p.name.data(), p.name.size());
    for (std::size_t d : p.value.shape()) {
      const std::uint64_t d64 = d;
      feed(&d64, sizeof d64);
    }
    feed(p.value.data().data(), p.value.size() * sizeof(double));
  }
  return h;
}

namespace ad {

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(id_); }
Tensor Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.ext = &value;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Tensor value) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.ext = &p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  Node n;
  n.own = std::move(value);
  for (const Var& p : parents) {
    require(&p.tape() == this, ErrorCode::kInvalidArgument, "operand recorded on a different tape");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const { return nodes_.at(id).value(); }

Tensor Tape::grad(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.grad.empty() ? Tensor(n.value().shape()) : n.grad;
}

void Tape::note_branches(std::span<const double> preact) noexcept {
  std::uint64_t h = branch_signature_;
  for (double v : preact) {
    h ^= (v > 0.0) ? 0x9Bu : 0x27u;
    h *= 0x100000001B3ULL;
  }
  branch_signature_ = h;
}

void Tape::backward(Var loss) {
  require(loss.valid() && &loss.tape() == this, ErrorCode::kInvalidArgument,
          "backward: loss was not recorded on this tape");
  require(!nodes_.empty(), ErrorCode::kInvalidArgument, "backward without a forward pass");
  require(!backward_done_, ErrorCode::kInvalidArgument, "backward already ran on this tape");
  Node& root = nodes_[loss.id()];
  require(root.value().size() == 1, ErrorCode::kShapeMismatch,
          "backward: loss must be a scalar, got " + shape_string(root.value().shape()));
  backward_done_ = true;
  root.grad = Tensor(root.value().shape(), 1.0);

  std::vector<Tensor*> grad_in;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      grad_in.clear();
      for (std::size_t pid : n.parents) {
        Node& p = nodes_[pid];
        if (!p.requires_grad) {
          grad_in.push_back(nullptr);
          continue;
        }
        if (p.grad.empty()) p.grad = Tensor(p.value().shape());
        grad_in.push_back(&p.grad);
      }
      n.backward(n.grad, grad_in);
    }
    if (n.param) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), ErrorCode::kShapeMismatch,
          std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
              shape_string(b.shape()));
}

double log_sum_exp(std::span<const double> row) {
  const double mx = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (double v : row) s += std::exp(v - mx);
  return mx + std::log(s);
}

}  // namespace

Var affine(Var x, Var w, Var b) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = b.value();
  require(xv.rank() == 2 && wv.rank() == 2 && xv.cols() == wv.rows() && bv.size() == wv.cols(),
          ErrorCode::kShapeMismatch,
          "affine: x " + shape_string(xv.shape()) + " incompatible with W " +
              shape_string(wv.shape()) + " / b " + shape_string(bv.shape()));
  Tensor out({xv.rows(), wv.cols()});
  gemm(xv, wv, out);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bv[j];
  }
  return x.tape().record(std::move(out), {x, w, b},
                         [x, w](const Tensor& g, std::span<Tensor* const> gi) {
                           if (gi[0]) gemm_a_bt_acc(g, w.value(), *gi[0]);
                           if (gi[1]) gemm_at_b_acc(x.value(), g, *gi[1]);
                           if (gi[2]) {
                             auto db = gi[2]->data();
                             for (std::size_t r = 0; r < g.rows(); ++r) {
                               auto row = g.row(r);
                               for (std::size_t j = 0; j < row.size(); ++j) db[j] += row[j];
                             }
                           }
                         });
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  x.tape().note_branches(xv.data());
  Tensor out = xv;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.tape().record(std::move(out), {x}, [x](const Tensor& g, std::span<Tensor* const> gi) {
    const auto xs = x.value().data();
    auto dx = gi[0]->data();
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xs[i] > 0.0) dx[i] += g[i];
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  Tape& t = x.tape();
  const std::size_t self = t.size();
  return t.record(std::move(out), {x}, [&t, self](const Tensor& g, std::span<Tensor* const> gi) {
    const auto s = t.value(self).data();
    auto dx = gi[0]->data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  auto bs = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bs[i];
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gi) {
    for (Tensor* d : gi)
      if (d)
        for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto bs = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bs[i];
  return a.tape().record(std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    if (gi[1])
      for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  auto bs = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bs[i];
  return a.tape().record(std::move(out), {a, b},
                         [a, b](const Tensor& g, std::span<Tensor* const> gi) {
                           const auto av = a.value().data();
                           const auto bv = b.value().data();
                           if (gi[0])
                             for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * bv[i];
                           if (gi[1])
                             for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * av[i];
                         });
}

Var scale(Var x, double s) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= s;
  return x.tape().record(std::move(out), {x}, [s](const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += s * g[i];
  });
}

Var add_constant(Var x, const Tensor& c) {
  require_same_shape(x.value(), c, "add_constant");
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
  return x.tape().record(std::move(out), {x}, [](const Tensor& g, std::span<Tensor* const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
}

Var concat_cols(Var a, Var b) {
  const std::size_t ca = a.value().cols();
  Tensor out = hstack(a.value(), b.value());
  return a.tape().record(std::move(out), {a, b},
                         [ca](const Tensor& g, std::span<Tensor* const> gi) {
                           const std::size_t c = g.cols();
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                             auto row = g.row(r);
                             if (gi[0]) {
                               auto d = gi[0]->row(r);
                               for (std::size_t j = 0; j < ca; ++j) d[j] += row[j];
                             }
                             if (gi[1]) {
                               auto d = gi[1]->row(r);
                               for (std::size_t j = ca; j < c; ++j) d[j - ca] += row[j];
                             }
                           }
                         });
}

namespace {

void apply_row_map(const Tensor& m, bool transpose, std::span<const double> in, std::span<double> out) {
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += (transpose ? m.at(j, i) : m.at(i, j)) * in[j];
    out[i] += acc;
  }
}

}  // namespace

Var rows_matmul(Var x, std::shared_ptr<const std::vector<Tensor>> mats, bool transpose) {
  const Tensor& xv = x.value();
  require(mats && mats->size() == xv.rows(), ErrorCode::kShapeMismatch, "rows_matmul: one matrix per row required");
  Tensor out({xv.rows(), xv.cols()});
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const Tensor& m = (*mats)[r];
    require(m.rows() == xv.cols() && m.cols() == xv.cols(), ErrorCode::kShapeMismatch,
            "rows_matmul: matrix " + shape_string(m.shape()) + " vs row width " + std::to_string(xv.cols()));
    apply_row_map(m, transpose, xv.row(r), out.row(r));
  }
  return x.tape().record(std::move(out), {x}, [mats, transpose](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    for (std::size_t r = 0; r < g.rows(); ++r) apply_row_map((*mats)[r], !transpose, g.row(r), gi[0]->row(r));
  });
}

Var power_normalize_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.cols();
  Tensor out = xv;
  std::vector<double> energy(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double e = 0.0;
    for (double v : xv.row(r)) e += v * v;
    require(e > 0.0, ErrorCode::kInvalidArgument, "power normalization of an all-zero block");
    energy[r] = e;
    const double s = std::sqrt(static_cast<double>(m) / e);
    for (double& v : out.row(r)) v *= s;
  }
  return x.tape().record(std::move(out), {x},
                         [x, m, energy](const Tensor& g, std::span<Tensor* const> gi) {
                           const Tensor& xv = x.value();
                           for (std::size_t r = 0; r < xv.rows(); ++r) {
                             const double e = energy[r];
                             const double s = std::sqrt(static_cast<double>(m) / e);
                             auto xr = xv.row(r);
                             auto gr = g.row(r);
                             double gx = 0.0;
                             for (std::size_t j = 0; j < m; ++j) gx += gr[j] * xr[j];
                             auto d = gi[0]->row(r);
                             for (std::size_t j = 0; j < m; ++j) d[j] += s * gr[j] - s * gx * xr[j] / e;
                           }
                         });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(Tensor::scalar(s), {x}, [](const Tensor& g, std::span<Tensor* const> gi) {
    for (double& d : gi[0]->data()) d += g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  const std::size_t n = z.rows(), k = z.cols();
  require(labels.size() == n, ErrorCode::kShapeMismatch, "cross entropy: label count differs from batch");
  for (int l : labels)
    require(l >= 0 && static_cast<std::size_t>(l) < k, ErrorCode::kInvalidArgument,
            "cross entropy: label " + std::to_string(l) + " outside [0," + std::to_string(k) + ")");
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) loss += log_sum_exp(z.row(r)) - z.at(r, static_cast<std::size_t>(labels[r]));
  loss /= static_cast<double>(n);
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.tape().record(Tensor::scalar(loss), {logits},
                              [logits, lab](const Tensor& g, std::span<Tensor* const> gi) {
                                const Tensor p = softmax_rows(logits.value());
                                const double w = g[0] / static_cast<double>(p.rows());
                                for (std::size_t r = 0; r < p.rows(); ++r) {
                                  auto d = gi[0]->row(r);
                                  auto pr = p.row(r);
                                  for (std::size_t j = 0; j < pr.size(); ++j) d[j] += w * pr[j];
                                  d[static_cast<std::size_t>(lab[r])] -= w;
                                }
                              });
}

Var soft_cross_entropy(Var logits, const Tensor& targets) {
  const Tensor& z = logits.value();
  require_same_shape(z, targets, "soft_cross_entropy");
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const double lse = log_sum_exp(z.row(r));
    for (std::size_t j = 0; j < z.cols(); ++j) loss -= targets.at(r, j) * (z.at(r, j) - lse);
  }
  loss /= static_cast<double>(z.rows());
  return logits.tape().record(Tensor::scalar(loss), {logits},
                              [logits, targets](const Tensor& g, std::span<Tensor* const> gi) {
                                const Tensor p = softmax_rows(logits.value());
                                const double w = g[0] / static_cast<double>(p.rows());
                                for (std::size_t r = 0; r < p.rows(); ++r) {
                                  double tsum = 0.0;
                                  for (double t : targets.row(r)) tsum += t;
                                  auto d = gi[0]->row(r);
                                  for (std::size_t j = 0; j < p.cols(); ++j)
                                    d[j] += w * (tsum * p.at(r, j) - targets.at(r, j));
                                }
                              });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor& z = logits.value();
  require_same_shape(z, targets, "bce_with_logits");
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = z[i];
    loss += std::max(v, 0.0) - v * targets[i] + std::log1p(std::exp(-std::abs(v)));
  }
  loss /= static_cast<double>(z.rows());
  return logits.tape().record(Tensor::scalar(loss), {logits},
                              [logits, targets](const Tensor& g, std::span<Tensor* const> gi) {
                                const Tensor& z = logits.value();
                                const double w = g[0] / static_cast<double>(z.rows());
                                for (std::size_t i = 0; i < z.size(); ++i) {
                                  const double v = z[i];
                                  const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                                            : std::exp(v) / (1.0 + std::exp(v));
                                  (*gi[0])[i] += w * (s - targets[i]);
                                }
                              });
}

Var mse(Var a, Var b) { return mean(mul(sub(a, b), sub(a, b))); }

Var row_sq_distance(Var a, Var b) {
  Var d = sub(a, b);
  return scale(sum(mul(d, d)), 1.0 / static_cast<double>(a.value().rows()));
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = logits;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (double& v : row) v /= s;
  }
  return p;
}

}  // namespace ad
}  // namespace semcom
