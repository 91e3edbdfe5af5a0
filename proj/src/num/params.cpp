#include "readnet/num/params.hpp"

#include <cmath>
#include <stdexcept>

namespace readnet::num {

Parameter& ParameterStore::add(const std::string& name, Tensor value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(value);
  p->trainable = trainable;
  p->zero_grad();
  auto* raw = p.get();
  order_.push_back(std::move(p));
  index_.emplace(name, raw);
  return *raw;
}

Parameter& ParameterStore::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = fan_in ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
  return add(name, init_uniform(shape, bound, rng));
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

void ParameterStore::erase(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) return;
  const auto* raw = it->second;
  index_.erase(it);
  std::erase_if(order_, [raw](const auto& p) { return p.get() == raw; });
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : order_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : order_) out.push_back(p.get());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : order_) p->zero_grad();
}

void ParameterStore::set_trainable(bool trainable) {
  for (auto& p : order_) p->trainable = trainable;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : order_) n += p->value.size();
  return n;
}

namespace {

void require_gradients(ParameterStore& store, const char* who) {
  for (auto* p : store.all()) {
    if (p->trainable && p->has_grad) return;
  }
  throw std::logic_error(std::string(who) + ": no trainable parameter has a gradient");
}

}  // namespace

void adam_step(ParameterStore& store, const AdamConfig& config) {
  require_gradients(store, "adam_step");
  for (auto* p : store.all()) {
    if (!p->trainable || !p->has_grad) continue;
    if (p->first_moment.shape() != p->value.shape()) {
      p->first_moment = Tensor(p->value.shape());
      p->second_moment = Tensor(p->value.shape());
      p->steps = 0;
    }
    ++p->steps;
    const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(p->steps));
    const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(p->steps));
    auto w = p->value.data();
    auto g = p->grad.data();
    auto m = p->first_moment.data();
    auto v = p->second_moment.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
  store.zero_grad();
}

void sgd_step(ParameterStore& store, double lr) {
  require_gradients(store, "sgd_step");
  for (auto* p : store.all()) {
    if (!p->trainable || !p->has_grad) continue;
    auto w = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  }
  store.zero_grad();
}

}  // namespace readnet::num
