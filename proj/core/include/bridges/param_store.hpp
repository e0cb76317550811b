#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "bridges/tensor.hpp"

namespace bridges {

/// Named trainable tensors plus AdamW moment state. Iteration follows
/// registration order, which is what makes optimizer steps and checkpoint
/// files deterministic.
template <class S>
class ParamStoreT {
public:
  TensorT<S>& add(const std::string& name, TensorT<S> t) {
    if (params_.count(name)) throw Error("duplicate parameter name: " + name);
    names_.push_back(name);
    return params_[name] = std::move(t);
  }

  TensorT<S>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }
  const TensorT<S>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  void zero_grad() {
    for (const auto& n : names_) {
      auto& g = params_[n].grad();
      std::fill(g.begin(), g.end(), S(0));
    }
  }

  /// Toggle requires_grad for every parameter whose name starts with prefix.
  void set_trainable(const std::string& prefix, bool trainable) {
    for (const auto& n : names_)
      if (n.rfind(prefix, 0) == 0) params_[n].set_requires_grad(trainable);
  }

  long step = 0;
  std::unordered_map<std::string, std::vector<S>> moment1, moment2;

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, TensorT<S>> params_;
};

using ParamStore = ParamStoreT<float>;

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double weight_decay = 0.05;
  double eps = 1e-8;
};

/// One decoupled-weight-decay Adam step over every trainable parameter.
/// Grads are left untouched; throws MissingGrad if a trainable parameter has
/// never been touched by backward().
void adamw_step(ParamStore& store, const AdamWConfig& cfg);

/// Binary checkpoint ("BRGS", version 1): tensor names, shapes, and raw
/// little-endian f32 payloads.
void save_checkpoint(const ParamStore& store, const std::string& path);
ParamStore load_checkpoint(const std::string& path);
std::string serialize_checkpoint(const ParamStore& store);
ParamStore deserialize_checkpoint(const std::string& bytes);

/// FNV-1a hex digest of the serialized checkpoint bytes.
std::string checkpoint_fingerprint(const ParamStore& store);

/// Double-precision copy for the finite-difference oracle.
ParamStoreT<double> widen(const ParamStore& store);

}  // namespace bridges
