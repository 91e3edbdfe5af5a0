#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "readnet/num/graph.hpp"
#include "readnet/num/rng.hpp"

namespace readnet::num {

/// Ordered name -> Parameter map. Parameters live at stable addresses so a
/// Graph can hold pointers to them for the duration of a step.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  Parameter& add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  /// Drops a parameter (used when a transfer layer is re-shaped).
  void erase(const std::string& name);

  std::size_t size() const noexcept { return order_.size(); }
  /// Parameters in insertion order.
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();
  void set_trainable(bool trainable);
  std::size_t parameter_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> order_;
  std::map<std::string, Parameter*, std::less<>> index_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over every trainable parameter, then clears gradients.
/// Throws if no trainable parameter received a gradient since the last step.
void adam_step(ParameterStore& store, const AdamConfig& config);

/// Plain gradient descent; same gradient contract as adam_step.
void sgd_step(ParameterStore& store, double lr);

}  // namespace readnet::num
