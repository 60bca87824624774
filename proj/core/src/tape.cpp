#include "emix/tape.hpp"

#include <algorithm>
#include <cmath>

namespace emix {

Tape::NodeId Tape::push(Node n, const char* where) {
  check_finite(n.value, where);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::constant(Tensor2 v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return push(std::move(n), "constant");
}

Tape::NodeId Tape::param(ParamStore& store, const std::string& name) {
  Node n;
  n.op = Op::kParam;
  n.value = store.at(name);
  n.param_name = name;
  return push(std::move(n), "param");
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.value = emix::matmul(val(a), val(b));
  return push(std::move(n), "matmul");
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = val(a);
  for (size_t k = 0; k < n.value.size(); ++k) n.value.data[k] += val(b).data[k];
  return push(std::move(n), "add");
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("sub: shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = val(a);
  for (size_t k = 0; k < n.value.size(); ++k) n.value.data[k] -= val(b).data[k];
  return push(std::move(n), "sub");
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  if (!val(a).same_shape(val(b))) throw std::invalid_argument("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = val(a);
  for (size_t k = 0; k < n.value.size(); ++k) n.value.data[k] *= val(b).data[k];
  return push(std::move(n), "mul");
}

Tape::NodeId Tape::add_rowbias(NodeId a, NodeId bias) {
  const Tensor2& x = val(a);
  const Tensor2& b = val(bias);
  if (b.rows != 1 || b.cols != x.cols)
    throw std::invalid_argument("add_rowbias: bias must be 1 x cols");
  Node n;
  n.op = Op::kAddRowBias;
  n.a = a;
  n.b = bias;
  n.value = x;
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c) n.value.at(r, c) += b.data[c];
  return push(std::move(n), "add_rowbias");
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Node n;
  n.op = Op::kScale;
  n.a = a;
  n.c0 = c;
  n.value = val(a);
  for (double& v : n.value.data) v *= c;
  return push(std::move(n), "scale");
}

Tape::NodeId Tape::tanh(NodeId a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = val(a);
  for (double& v : n.value.data) v = std::tanh(v);
  return push(std::move(n), "tanh");
}

Tape::NodeId Tape::relu(NodeId a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.value = val(a);
  for (double& v : n.value.data) v = v > 0.0 ? v : 0.0;
  return push(std::move(n), "relu");
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = val(a);
  for (double& v : n.value.data) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n), "sigmoid");
}

Tape::NodeId Tape::abs(NodeId a) {
  Node n;
  n.op = Op::kAbs;
  n.a = a;
  n.value = val(a);
  for (double& v : n.value.data) v = std::fabs(v);
  return push(std::move(n), "abs");
}

Tape::NodeId Tape::sqrt(NodeId a) {
  Node n;
  n.op = Op::kSqrt;
  n.a = a;
  n.value = val(a);
  for (double& v : n.value.data) v = std::sqrt(v);
  return push(std::move(n), "sqrt");
}

Tape::NodeId Tape::log(NodeId a) {
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = val(a);
  for (double& v : n.value.data) v = std::log(v);
  return push(std::move(n), "log");
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a;
  n.value = val(a);
  Tensor2& y = n.value;
  for (int r = 0; r < y.rows; ++r) {
    double mx = y.at(r, 0);
    for (int c = 1; c < y.cols; ++c) mx = std::max(mx, y.at(r, c));
    double s = 0.0;
    for (int c = 0; c < y.cols; ++c) {
      y.at(r, c) = std::exp(y.at(r, c) - mx);
      s += y.at(r, c);
    }
    for (int c = 0; c < y.cols; ++c) y.at(r, c) /= s;
  }
  return push(std::move(n), "softmax_rows");
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
  Node n;
  n.op = Op::kClamp;
  n.a = a;
  n.c0 = lo;
  n.c1 = hi;
  n.value = val(a);
  for (double& v : n.value.data) v = std::clamp(v, lo, hi);
  return push(std::move(n), "clamp");
}

Tape::NodeId Tape::row_sum(NodeId a) {
  const Tensor2& x = val(a);
  Node n;
  n.op = Op::kRowSum;
  n.a = a;
  n.value = Tensor2(x.rows, 1);
  for (int r = 0; r < x.rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < x.cols; ++c) s += x.at(r, c);
    n.value.at(r, 0) = s;
  }
  return push(std::move(n), "row_sum");
}

Tape::NodeId Tape::sum(NodeId a) {
  Node n;
  n.op = Op::kSum;
  n.a = a;
  double s = 0.0;
  for (double v : val(a).data) s += v;
  n.value = Tensor2::scalar(s);
  return push(std::move(n), "sum");
}

Tape::NodeId Tape::mean(NodeId a) {
  Node n;
  n.op = Op::kMean;
  n.a = a;
  const size_t cnt = val(a).size();
  if (cnt == 0) throw std::invalid_argument("mean of empty tensor");
  double s = 0.0;
  for (double v : val(a).data) s += v;
  n.value = Tensor2::scalar(s / static_cast<double>(cnt));
  return push(std::move(n), "mean");
}

Tape::NodeId Tape::col(NodeId a, int j) {
  const Tensor2& x = val(a);
  if (j < 0 || j >= x.cols) throw std::out_of_range("col index");
  Node n;
  n.op = Op::kCol;
  n.a = a;
  n.c0 = j;
  n.value = Tensor2(x.rows, 1);
  for (int r = 0; r < x.rows; ++r) n.value.at(r, 0) = x.at(r, j);
  return push(std::move(n), "col");
}

Tape::NodeId Tape::gather_cols(NodeId a, std::vector<int> idx) {
  const Tensor2& x = val(a);
  if (static_cast<int>(idx.size()) != x.rows)
    throw std::invalid_argument("gather_cols: one index per row required");
  Node n;
  n.op = Op::kGather;
  n.a = a;
  n.idx = std::move(idx);
  n.value = Tensor2(x.rows, 1);
  for (int r = 0; r < x.rows; ++r) {
    const int j = n.idx[r];
    if (j < 0 || j >= x.cols) throw std::out_of_range("gather_cols index");
    n.value.at(r, 0) = x.at(r, j);
  }
  return push(std::move(n), "gather_cols");
}

Tape::NodeId Tape::slice_rows(NodeId a, int r0, int r1) {
  const Tensor2& x = val(a);
  if (r0 < 0 || r1 > x.rows || r0 >= r1) throw std::out_of_range("slice_rows range");
  Node n;
  n.op = Op::kSliceRows;
  n.a = a;
  n.c0 = r0;
  n.c1 = r1;
  n.value = Tensor2(r1 - r0, x.cols);
  std::copy(x.data.begin() + static_cast<size_t>(r0) * x.cols,
            x.data.begin() + static_cast<size_t>(r1) * x.cols, n.value.data.begin());
  return push(std::move(n), "slice_rows");
}

std::map<std::string, Tensor2> Tape::backward(NodeId loss, double seed) {
  if (consumed_) throw std::logic_error("tape already consumed");
  if (loss < 0 || loss >= num_nodes()) throw std::out_of_range("backward: bad node");
  const Tensor2& head = val(loss);
  if (head.rows != 1 || head.cols != 1)
    throw std::invalid_argument("backward: loss head must be 1x1");
  consumed_ = true;

  std::vector<Tensor2> adj(nodes_.size());
  std::vector<bool> live(nodes_.size(), false);
  auto touch = [&](int id) {
    if (!live[id]) {
      adj[id] = Tensor2(nodes_[id].value.rows, nodes_[id].value.cols);
      live[id] = true;
    }
  };
  touch(loss);
  adj[loss].data[0] = seed;

  std::map<std::string, Tensor2> grads;

  for (int id = loss; id >= 0; --id) {
    if (!live[id]) continue;
    const Node& n = nodes_[id];
    const Tensor2& g = adj[id];
    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kParam: {
        auto it = grads.find(n.param_name);
        if (it == grads.end()) {
          grads[n.param_name] = g;
        } else {
          for (size_t k = 0; k < g.size(); ++k) it->second.data[k] += g.data[k];
        }
        break;
      }
      case Op::kMatmul: {
        touch(n.a);
        touch(n.b);
        Tensor2 da = matmul_nt(g, val(n.b));
        Tensor2 db = matmul_tn(val(n.a), g);
        for (size_t k = 0; k < da.size(); ++k) adj[n.a].data[k] += da.data[k];
        for (size_t k = 0; k < db.size(); ++k) adj[n.b].data[k] += db.data[k];
        break;
      }
      case Op::kAdd:
        touch(n.a);
        touch(n.b);
        for (size_t k = 0; k < g.size(); ++k) {
          adj[n.a].data[k] += g.data[k];
          adj[n.b].data[k] += g.data[k];
        }
        break;
      case Op::kSub:
        touch(n.a);
        touch(n.b);
        for (size_t k = 0; k < g.size(); ++k) {
          adj[n.a].data[k] += g.data[k];
          adj[n.b].data[k] -= g.data[k];
        }
        break;
      case Op::kMul:
        touch(n.a);
        touch(n.b);
        for (size_t k = 0; k < g.size(); ++k) {
          adj[n.a].data[k] += g.data[k] * val(n.b).data[k];
          adj[n.b].data[k] += g.data[k] * val(n.a).data[k];
        }
        break;
      case Op::kAddRowBias: {
        touch(n.a);
        touch(n.b);
        const Tensor2& x = val(n.a);
        for (size_t k = 0; k < g.size(); ++k) adj[n.a].data[k] += g.data[k];
        for (int r = 0; r < x.rows; ++r)
          for (int c = 0; c < x.cols; ++c) adj[n.b].data[c] += g.at(r, c);
        break;
      }
      case Op::kScale:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k) adj[n.a].data[k] += n.c0 * g.data[k];
        break;
      case Op::kTanh:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k) {
          const double y = n.value.data[k];
          adj[n.a].data[k] += g.data[k] * (1.0 - y * y);
        }
        break;
      case Op::kRelu:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k)
          if (val(n.a).data[k] > 0.0) adj[n.a].data[k] += g.data[k];
        break;
      case Op::kSigmoid:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k) {
          const double y = n.value.data[k];
          adj[n.a].data[k] += g.data[k] * y * (1.0 - y);
        }
        break;
      case Op::kAbs:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k) {
          const double x = val(n.a).data[k];
          if (x > 0.0)
            adj[n.a].data[k] += g.data[k];
          else if (x < 0.0)
            adj[n.a].data[k] -= g.data[k];
        }
        break;
      case Op::kSqrt:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k)
          adj[n.a].data[k] += g.data[k] * 0.5 / n.value.data[k];
        break;
      case Op::kLog:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k)
          adj[n.a].data[k] += g.data[k] / val(n.a).data[k];
        break;
      case Op::kSoftmaxRows: {
        touch(n.a);
        const Tensor2& y = n.value;
        for (int r = 0; r < y.rows; ++r) {
          double dot = 0.0;
          for (int c = 0; c < y.cols; ++c) dot += g.at(r, c) * y.at(r, c);
          for (int c = 0; c < y.cols; ++c)
            adj[n.a].at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
        }
        break;
      }
      case Op::kClamp:
        touch(n.a);
        for (size_t k = 0; k < g.size(); ++k) {
          const double x = val(n.a).data[k];
          if (x >= n.c0 && x <= n.c1) adj[n.a].data[k] += g.data[k];
        }
        break;
      case Op::kRowSum: {
        touch(n.a);
        const Tensor2& x = val(n.a);
        for (int r = 0; r < x.rows; ++r)
          for (int c = 0; c < x.cols; ++c) adj[n.a].at(r, c) += g.at(r, 0);
        break;
      }
      case Op::kSum:
        touch(n.a);
        for (size_t k = 0; k < adj[n.a].size(); ++k) adj[n.a].data[k] += g.data[0];
        break;
      case Op::kMean: {
        touch(n.a);
        const double w = g.data[0] / static_cast<double>(val(n.a).size());
        for (size_t k = 0; k < adj[n.a].size(); ++k) adj[n.a].data[k] += w;
        break;
      }
      case Op::kCol: {
        touch(n.a);
        const int j = static_cast<int>(n.c0);
        for (int r = 0; r < n.value.rows; ++r) adj[n.a].at(r, j) += g.at(r, 0);
        break;
      }
      case Op::kGather:
        touch(n.a);
        for (int r = 0; r < n.value.rows; ++r) adj[n.a].at(r, n.idx[r]) += g.at(r, 0);
        break;
      case Op::kSliceRows: {
        touch(n.a);
        const int r0 = static_cast<int>(n.c0);
        for (int r = 0; r < n.value.rows; ++r)
          for (int c = 0; c < n.value.cols; ++c) adj[n.a].at(r0 + r, c) += g.at(r, c);
        break;
      }
    }
  }
  return grads;
}

}  // namespace emix
