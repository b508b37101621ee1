#include "phyulstm/autodiff.hpp"

#include <stdexcept>

namespace phyulstm {

const Grid3& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("Var: use of an unbound handle");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(id_); }

Var Tape::constant(Grid3 value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Grid3 value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, p.trainable, p.trainable ? &p : nullptr, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Grid3 value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw std::logic_error("Tape::record: input from a different tape");
    needs = needs || nodes_[in.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Grid3& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Grid3(n.value.shape());
  return n.grad;
}

Grid3 Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  return n.grad.empty() ? Grid3(n.value.shape()) : n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw std::logic_error("Tape::backward: loss from a different tape");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be a scalar, got shape " +
                                loss.shape().to_string());
  }
  for (Node& n : nodes_) n.grad = Grid3();
  if (!nodes_[loss.id_].requires_grad) return;

  grad_of(loss.id_)[0] = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Grid3& pg = n.param->grad;
      if (pg.shape() != n.value.shape()) pg = Grid3(n.value.shape());
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace phyulstm
