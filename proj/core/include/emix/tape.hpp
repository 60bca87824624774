#pragma once

#include <map>
#include <string>
#include <vector>

#include "emix/param_store.hpp"
#include "emix/tensor.hpp"

namespace emix {

/// Eager reverse-mode tape over Tensor2 values. Every builder method computes
/// the forward value immediately and records the op; backward() replays the
/// record in exact reverse order and returns gradients keyed by parameter
/// name. A tape is single-use: backward() consumes it.
class Tape {
 public:
  using NodeId = int;

  NodeId constant(Tensor2 v);
  NodeId param(ParamStore& store, const std::string& name);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId add_rowbias(NodeId a, NodeId bias);  // bias is 1 x cols, broadcast over rows
  NodeId scale(NodeId a, double c);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId abs(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId log(NodeId a);
  NodeId softmax_rows(NodeId a);  // stabilized with per-row max subtraction
  NodeId clamp(NodeId a, double lo, double hi);
  NodeId row_sum(NodeId a);             // rows x cols -> rows x 1
  NodeId sum(NodeId a);                 // -> 1 x 1
  NodeId mean(NodeId a);                // -> 1 x 1
  NodeId col(NodeId a, int j);          // rows x cols -> rows x 1
  NodeId gather_cols(NodeId a, std::vector<int> idx);  // per-row column pick
  NodeId slice_rows(NodeId a, int r0, int r1);         // rows [r0, r1)

  const Tensor2& value(NodeId id) const { return nodes_[id].value; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  /// Backward pass from a scalar (1x1) loss node. `seed` is the adjoint of
  /// the loss itself. Throws if the head is not scalar or the tape was
  /// already consumed.
  std::map<std::string, Tensor2> backward(NodeId loss, double seed = 1.0);

 private:
  enum class Op {
    kConst, kParam, kMatmul, kAdd, kSub, kMul, kAddRowBias, kScale,
    kTanh, kRelu, kSigmoid, kAbs, kSqrt, kLog, kSoftmaxRows, kClamp,
    kRowSum, kSum, kMean, kCol, kGather, kSliceRows,
  };
  struct Node {
    Op op;
    int a = -1, b = -1;
    Tensor2 value;
    double c0 = 0.0, c1 = 0.0;
    std::vector<int> idx;
    std::string param_name;
  };

  NodeId push(Node n, const char* where);
  const Tensor2& val(NodeId id) const { return nodes_[id].value; }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace emix
