#include "bridges/param_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bridges/rng.hpp"

namespace bridges {

void adamw_step(ParamStore& store, const AdamWConfig& cfg) {
  ++store.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.step));
  for (const auto& name : store.names()) {
    auto& p = store.at(name);
    if (!p.requires_grad()) continue;
    if (p.grad().size() != p.data().size()) throw MissingGrad(name);
    auto& m = store.moment1[name];
    auto& v = store.moment2[name];
    if (m.size() != p.data().size()) m.assign(p.data().size(), 0.0f);
    if (v.size() != p.data().size()) v.assign(p.data().size(), 0.0f);
    for (std::size_t i = 0; i < p.data().size(); ++i) {
      const double g = p.grad()[i];
      m[i] = static_cast<float>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g);
      v[i] = static_cast<float>(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      const double update = mhat / (std::sqrt(vhat) + cfg.eps) +
                            cfg.weight_decay * static_cast<double>(p.data()[i]);
      p.data()[i] = static_cast<float>(p.data()[i] - cfg.lr * update);
    }
  }
}

namespace {

constexpr char kMagic[4] = {'B', 'R', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f32(std::string& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(out, u);
}

struct Reader {
  const std::string& b;
  std::size_t at = 0;
  std::string ctx = "header";

  bool remaining(std::size_t n) const { return at + n <= b.size(); }
  std::uint8_t u8() {
    if (!remaining(1)) throw CorruptTensor(ctx);
    return static_cast<std::uint8_t>(b[at++]);
  }
  std::uint16_t u16() { return static_cast<std::uint16_t>(u8() | (u8() << 8)); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  float f32() {
    const std::uint32_t u = u32();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  std::string bytes(std::size_t n) {
    if (!remaining(n)) throw CorruptTensor(ctx);
    std::string s = b.substr(at, n);
    at += n;
    return s;
  }
};

}  // namespace

std::string serialize_checkpoint(const ParamStore& store) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& name : store.names()) {
    const auto& t = store.at(name);
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(static_cast<char>(t.shape().size()));
    for (const long d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (const float v : t.data()) put_f32(out, v);
  }
  return out;
}

ParamStore deserialize_checkpoint(const std::string& bytes) {
  Reader r{bytes};
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw BadMagic();
  r.at = 4;
  const auto version = r.u32();
  if (version != kVersion) throw VersionMismatch(version);
  const auto count = r.u32();
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u16();
    const std::string name = r.bytes(name_len);
    r.ctx = name.empty() ? "tensor " + std::to_string(i) : name;
    const int rank = r.u8();
    Shape shape;
    long n = 1;
    for (int d = 0; d < rank; ++d) {
      shape.push_back(static_cast<long>(r.u32()));
      n *= shape.back();
    }
    if (n < 0 || !r.remaining(static_cast<std::size_t>(n) * 4)) throw CorruptTensor(r.ctx);
    std::vector<float> data(static_cast<std::size_t>(n));
    for (auto& v : data) v = r.f32();
    store.add(name, Tensor::param(std::move(shape), std::move(data)));
  }
  if (r.at != bytes.size()) throw CorruptTensor("trailing bytes");
  return store;
}

void save_checkpoint(const ParamStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw WriteError(path);
  const std::string bytes = serialize_checkpoint(store);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) throw WriteError(path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BadMagic();
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

std::string checkpoint_fingerprint(const ParamStore& store) {
  const std::string bytes = serialize_checkpoint(store);
  const std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

ParamStoreT<double> widen(const ParamStore& store) {
  ParamStoreT<double> out;
  for (const auto& name : store.names()) {
    const auto& t = store.at(name);
    std::vector<double> data(t.data().begin(), t.data().end());
    auto w = TensorT<double>::param(t.shape(), std::move(data));
    w.set_requires_grad(t.requires_grad());
    out.add(name, std::move(w));
  }
  out.step = store.step;
  return out;
}

}  // namespace bridges
