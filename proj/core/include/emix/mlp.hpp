#pragma once

#include <string>
#include <vector>

#include "emix/rng.hpp"
#include "emix/tape.hpp"

namespace emix {

enum class Activation { kTanh, kRelu };

/// Fully connected network bound to a named parameter section in a
/// ParamStore. The same description works for live and target copies by
/// instantiating it with different prefixes.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, int in_dim, int hidden, int n_hidden, int out_dim,
      Activation act = Activation::kTanh);

  /// Creates the parameters in `store` with scaled-normal init.
  void init(ParamStore& store, Rng& rng) const;

  /// Tape forward: x is (batch x in_dim), result (batch x out_dim).
  Tape::NodeId forward(Tape& tape, ParamStore& store, Tape::NodeId x) const;

  /// Plain forward with no recording, for rollouts and target evaluation.
  Tensor2 eval(const ParamStore& store, const Tensor2& x) const;

  const std::string& prefix() const { return prefix_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  std::vector<std::string> param_names() const;

  /// Same architecture under a different section prefix.
  Mlp with_prefix(const std::string& prefix) const;

 private:
  int n_layers() const { return n_hidden_ + 1; }
  std::string wname(int l) const { return prefix_ + "/W" + std::to_string(l); }
  std::string bname(int l) const { return prefix_ + "/b" + std::to_string(l); }

  std::string prefix_;
  int in_dim_ = 0;
  int hidden_ = 0;
  int n_hidden_ = 0;
  int out_dim_ = 0;
  Activation act_ = Activation::kTanh;
};

}  // namespace emix
