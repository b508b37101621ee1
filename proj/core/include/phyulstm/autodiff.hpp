#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "phyulstm/grid.hpp"

namespace phyulstm {

/// A named, persistent array owned by a model. Trainable parameters receive
/// gradients from Tape::backward; non-trainable ones (batch-norm running
/// statistics) only ride along for checkpointing.
struct Parameter {
  std::string name;
  Grid3 value;
  Grid3 grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Shape shape, bool is_trainable = true)
      : name(std::move(n)), value(shape), grad(shape), trainable(is_trainable) {}

  void zero_grad() { grad = Grid3(value.shape()); }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape is alive and not cleared.
class Var {
 public:
  Var() = default;

  const Grid3& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of executed primitives. Nodes are appended in execution
/// order, so walking them in reverse is a valid reverse topological order.
///
/// Gradient semantics: each call to backward() recomputes node gradients
/// from scratch, but parameter gradients accumulate into Parameter::grad
/// until the caller zeroes them.
class Tape {
 public:
  /// Propagates the gradient of the node's output into its inputs. The
  /// output gradient is available through grad_of(self).
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Grid3 value);
  Var variable(Grid3 value);
  Var parameter(Parameter& p);

  /// Records a primitive's output. The node requires grad if any input does;
  /// otherwise `fn` is dropped.
  Var record(Grid3 value, const std::vector<Var>& inputs, BackwardFn fn);

  void backward(Var loss);

  const Grid3& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient of the most recent backward() w.r.t. a node (zeros if none).
  Grid3 grad(Var v) const;

  /// Mutable gradient buffer for backward functions; allocated lazily.
  Grid3& grad_of(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Grid3 value;
    Grid3 grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

}  // namespace phyulstm
