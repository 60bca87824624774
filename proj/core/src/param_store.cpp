#include "emix/param_store.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace emix {

Tensor2& ParamStore::add(const std::string& name, Tensor2 init) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  check_finite(init, "param init " + name);
  m_[name] = Tensor2(init.rows, init.cols);
  v_[name] = Tensor2(init.rows, init.cols);
  return params_[name] = std::move(init);
}

Tensor2& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

const Tensor2& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

void ParamStore::adam_step(const std::map<std::string, Tensor2>& grads, double lr,
                           double beta1, double beta2, double eps) {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
  for (const auto& [name, g] : grads) {
    Tensor2& p = at(name);
    if (!p.same_shape(g))
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
    Tensor2& m = m_[name];
    Tensor2& v = v_[name];
    for (size_t k = 0; k < p.size(); ++k) {
      m.data[k] = beta1 * m.data[k] + (1.0 - beta1) * g.data[k];
      v.data[k] = beta2 * v.data[k] + (1.0 - beta2) * g.data[k] * g.data[k];
      const double mh = m.data[k] / bc1;
      const double vh = v.data[k] / bc2;
      p.data[k] -= lr * mh / (std::sqrt(vh) + eps);
    }
    check_finite(p, "adam_step " + name);
  }
}

void ParamStore::copy_from(const ParamStore& src) {
  for (const auto& [name, t] : src.params_) {
    auto it = params_.find(name);
    if (it == params_.end())
      throw std::invalid_argument("copy_from: missing parameter " + name);
    it->second = t;
  }
}

void ParamStore::copy_section(const std::string& prefix_src, const std::string& prefix_dst) {
  for (const auto& [name, t] : params_) {
    if (name.rfind(prefix_src, 0) != 0) continue;
    const std::string dst = prefix_dst + name.substr(prefix_src.size());
    auto it = params_.find(dst);
    if (it == params_.end())
      throw std::invalid_argument("copy_section: missing parameter " + dst);
    it->second = t;
  }
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

namespace {

constexpr char kMagic[9] = "EMIXCKPT";
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, const double* p, size_t n) {
  // Little-endian host assumed (x86/arm64); asserted at load via magic check.
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const ParamStore*>>& sections) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  uint32_t total = 0;
  for (const auto& [_, ps] : sections) total += static_cast<uint32_t>(ps->params().size());
  write_u32(os, total);
  for (const auto& [prefix, ps] : sections) {
    for (const auto& [name, t] : ps->params()) {
      const std::string full = prefix + name;
      write_u32(os, static_cast<uint32_t>(full.size()));
      os.write(full.data(), static_cast<std::streamsize>(full.size()));
      write_u32(os, static_cast<uint32_t>(t.rows));
      write_u32(os, static_cast<uint32_t>(t.cols));
      write_f64(os, t.data.data(), t.size());
    }
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

void load_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, ParamStore*>>& sections) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  const uint32_t version = read_u32(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const uint32_t total = read_u32(is);
  for (uint32_t k = 0; k < total; ++k) {
    const uint32_t name_len = read_u32(is);
    std::string full(name_len, '\0');
    is.read(full.data(), name_len);
    const int rows = static_cast<int>(read_u32(is));
    const int cols = static_cast<int>(read_u32(is));
    Tensor2 t(rows, cols);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.size() * 8));
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    for (const auto& [prefix, ps] : sections) {
      if (full.rfind(prefix, 0) != 0) continue;
      const std::string name = full.substr(prefix.size());
      if (ps->has(name)) {
        if (!ps->at(name).same_shape(t))
          throw std::runtime_error("checkpoint shape mismatch for " + full);
        ps->at(name) = std::move(t);
      } else
        ps->add(name, std::move(t));
      break;
    }
  }
}

double grad_l2_norm(const std::map<std::string, Tensor2>& grads) {
  double s = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g.data) s += v * v;
  return std::sqrt(s);
}

}  // namespace emix
