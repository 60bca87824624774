#pragma once

#include <map>
#include <string>
#include <vector>

#include "emix/tensor.hpp"

namespace emix {

/// Named parameter tensors plus per-parameter Adam moment accumulators.
class ParamStore {
 public:
  Tensor2& add(const std::string& name, Tensor2 init);
  Tensor2& at(const std::string& name);
  const Tensor2& at(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  const std::map<std::string, Tensor2>& params() const { return params_; }
  long step() const { return step_; }

  /// Standard Adam update. Only parameters named in `grads` are touched;
  /// each gradient must shape-match its parameter. Increments the step
  /// counter once per call.
  void adam_step(const std::map<std::string, Tensor2>& grads, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Bit-copies every parameter from `src`. Names must match exactly when
  /// `prefix_src`/`prefix_dst` are empty; otherwise copies src params under
  /// prefix_src onto params under prefix_dst.
  void copy_from(const ParamStore& src);
  void copy_section(const std::string& prefix_src, const std::string& prefix_dst);

  /// Total number of scalar parameters.
  size_t scalar_count() const;

 private:
  std::map<std::string, Tensor2> params_;
  std::map<std::string, Tensor2> m_;
  std::map<std::string, Tensor2> v_;
  long step_ = 0;
};

/// Versioned binary checkpoint: "EMIXCKPT" magic, format version, then
/// per-parameter name, shape and raw little-endian float64 payload.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const ParamStore*>>& sections);
void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, ParamStore*>>& sections);

double grad_l2_norm(const std::map<std::string, Tensor2>& grads);

}  // namespace emix
