#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

class Rng;

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Adam moment estimates travel with the parameter.
  Tensor m;
  Tensor v;
};

// Ordered, name-unique collection of trainable tensors. Iteration order is
// insertion order, which is the determinism anchor for optimizers and
// checkpoints.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter& add_glorot(std::string name, std::size_t fan_in, std::size_t fan_out, Rng& rng);

  bool contains(std::string_view name) const noexcept;
  std::size_t index_of(std::string_view name) const;
  Parameter& at(std::string_view name) { return params_[index_of(name)]; }
  const Parameter& at(std::string_view name) const { return params_[index_of(name)]; }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;
  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  void zero_grad() noexcept;
  // Rounds every value to the nearest 32-bit float, the on-disk precision.
  void round_to_float() noexcept;
  // FNV-1a over names, shapes and value bytes.
  std::uint64_t hash() const noexcept;

 private:
  std::vector<Parameter> params_;
};

namespace ad {

class Tape;

// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  // Gradient of the last backward pass; zeros if the node took no part.
  Tensor grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the output gradient and accumulates into the parents' gradients.
// Entries of grad_in are null for parents that do not require gradients.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // References an external tensor that must outlive the tape.
  Var constant_ref(const Tensor& value);
  // Leaf whose gradient is retrievable after backward (attack inputs).
  Var input(Tensor value);
  // Leaf bound to a parameter; backward accumulates into p.grad.
  Var parameter(Parameter& p);

  // Records a custom primitive. Public so tests can inject faulty rules.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  Tensor grad(std::size_t id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Running hash of every piecewise branch taken (ReLU masks). Central
  // differences are only valid when perturbations leave it unchanged.
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }
  void note_branches(std::span<const double> preact) noexcept;

 private:
  struct Node {
    Tensor own;
    const Tensor* ext = nullptr;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    const Tensor& value() const { return ext ? *ext : own; }
  };

  std::vector<Node> nodes_;
  std::uint64_t branch_signature_ = 0xCBF29CE484222325ULL;
  bool backward_done_ = false;
};

// out[i,j] = sum_k x[i,k] W[k,j] + b[j]
Var affine(Var x, Var w, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double s);
// Elementwise x + c for a constant tensor c of the same shape.
Var add_constant(Var x, const Tensor& c);
Var concat_cols(Var a, Var b);
// Row i of the result is mats[i] * x_i, or mats[i]^T * x_i when `transpose`.
Var rows_matmul(Var x, std::shared_ptr<const std::vector<Tensor>> mats, bool transpose);
// Each row rescaled to unit mean square: row * sqrt(m / sum(row^2)).
Var power_normalize_rows(Var x);
Var sum(Var x);
Var mean(Var x);
// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
// Mean over rows of -sum_k target[k] log softmax(logits)[k].
Var soft_cross_entropy(Var logits, const Tensor& targets);
// Mean over rows of sum_k BCE(sigmoid(logit), target).
Var bce_with_logits(Var logits, const Tensor& targets);
// Mean over all entries of (a - b)^2.
Var mse(Var a, Var b);
// Mean over rows of ||a_i - b_i||^2.
Var row_sq_distance(Var a, Var b);

Tensor softmax_rows(const Tensor& logits);

}  // namespace ad
}  // namespace semcom
