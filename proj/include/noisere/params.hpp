#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "noisere/errors.hpp"
#include "noisere/rng.hpp"
#include "noisere/tape.hpp"
#include "noisere/tensor.hpp"

namespace noisere {

// Named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.shape());
  }

  void zero_grad() { grad.fill(0.0); }
};

// Owns all parameters of one model in a stable, deterministic order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw UsageError("parameter '" + name + "' already registered");
    params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
    index_[name] = params_.back().get();
    return *params_.back();
  }

  // Uniform init in [-range, range] from a stream derived from the seed and
  // the parameter name, so that one model variant having extra parameters
  // does not perturb the init of parameters shared with another variant.
  Parameter& add_uniform(const std::string& name, Shape shape, uint64_t seed,
                         double range = 0.1) {
    Tensor t(std::move(shape));
    Rng rng = Rng::derive(seed, name);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-range, range);
    return add(name, std::move(t));
  }

  Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }

  Parameter& at(const std::string& name) {
    Parameter* p = find(name);
    if (!p) throw UsageError("unknown parameter '" + name + "'");
    return *p;
  }

  const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
  size_t size() const { return params_.size(); }

  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

  // Plain SGD: theta <- theta - lr * grad, then gradients are zeroed.
  // A non-finite gradient aborts the step naming the parameter.
  void sgd_step(double learning_rate) {
    for (auto& p : params_) {
      for (int64_t i = 0; i < p->grad.size(); ++i) {
        if (!std::isfinite(p->grad[i])) {
          throw NumericError("sgd_step: non-finite gradient in parameter '" + p->name + "'");
        }
      }
    }
    for (auto& p : params_) {
      for (int64_t i = 0; i < p->value.size(); ++i)
        p->value[i] -= learning_rate * p->grad[i];
      p->zero_grad();
    }
  }

  int64_t total_values() const {
    int64_t n = 0;
    for (auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> index_;
};

inline Tape::Var Tape::param(Parameter& p) {
  Var v = leaf(p.value);
  bindings_.emplace_back(v.id, &p);
  return v;
}

inline void Tape::backward(Var loss) {
  if (!loss.valid() || value(loss).size() != 1) {
    throw UsageError("backward: loss must be a scalar node");
  }
  for (auto& n : nodes_) n.grad = Tensor(n.value.shape());
  nodes_[static_cast<size_t>(loss.id)].grad[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    auto& n = nodes_[static_cast<size_t>(id)];
    if (n.back) n.back(*this, id);
  }
  for (auto& [id, p] : bindings_) {
    const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
    for (int64_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
  }
}

}  // namespace noisere
