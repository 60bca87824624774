#include "emix/mlp.hpp"

#include <cmath>

namespace emix {

Mlp::Mlp(std::string prefix, int in_dim, int hidden, int n_hidden, int out_dim, Activation act)
    : prefix_(std::move(prefix)),
      in_dim_(in_dim),
      hidden_(hidden),
      n_hidden_(n_hidden),
      out_dim_(out_dim),
      act_(act) {}

void Mlp::init(ParamStore& store, Rng& rng) const {
  for (int l = 0; l < n_layers(); ++l) {
    const int fan_in = l == 0 ? in_dim_ : hidden_;
    const int fan_out = l == n_hidden_ ? out_dim_ : hidden_;
    Tensor2 w(fan_in, fan_out);
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data) v = s * rng.normal();
    store.add(wname(l), std::move(w));
    store.add(bname(l), Tensor2(1, fan_out));
  }
}

Tape::NodeId Mlp::forward(Tape& tape, ParamStore& store, Tape::NodeId x) const {
  Tape::NodeId h = x;
  for (int l = 0; l < n_layers(); ++l) {
    h = tape.add_rowbias(tape.matmul(h, tape.param(store, wname(l))),
                         tape.param(store, bname(l)));
    if (l < n_hidden_)
      h = act_ == Activation::kTanh ? tape.tanh(h) : tape.relu(h);
  }
  return h;
}

Tensor2 Mlp::eval(const ParamStore& store, const Tensor2& x) const {
  Tensor2 h = x;
  for (int l = 0; l < n_layers(); ++l) {
    Tensor2 z = matmul(h, store.at(wname(l)));
    const Tensor2& b = store.at(bname(l));
    for (int r = 0; r < z.rows; ++r)
      for (int c = 0; c < z.cols; ++c) z.at(r, c) += b.data[c];
    if (l < n_hidden_) {
      if (act_ == Activation::kTanh)
        for (double& v : z.data) v = std::tanh(v);
      else
        for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    }
    h = std::move(z);
  }
  return h;
}

std::vector<std::string> Mlp::param_names() const {
  std::vector<std::string> out;
  for (int l = 0; l < n_layers(); ++l) {
    out.push_back(wname(l));
    out.push_back(bname(l));
  }
  return out;
}

Mlp Mlp::with_prefix(const std::string& prefix) const {
  Mlp m = *this;
  m.prefix_ = prefix;
  return m;
}

}  // namespace emix
