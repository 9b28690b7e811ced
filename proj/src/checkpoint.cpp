#include "durflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace durflow {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[6] = {'D', 'F', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}

  template <typename T>
  void pod(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(std::span<const double> v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T pod() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    if (n > (1u << 20)) fail("string length " + std::to_string(n) + " is implausible");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }
  std::vector<double> doubles(std::size_t n) {
    std::vector<double> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("checkpoint " + path_ + ": " + what);
  }

 private:
  void check() const {
    if (!in_) fail("truncated file");
  }
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint " + path.string() + ": cannot open for writing");
  Writer w(out);
  out.write(kMagic, sizeof(kMagic));
  w.pod(Checkpoint::kVersion);
  w.pod(static_cast<std::uint32_t>(checkpoint.meta.size()));
  for (const auto& [k, v] : checkpoint.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(checkpoint.layers.size()));
  for (const auto& layer : checkpoint.layers) {
    w.str(layer.name);
    w.str(to_string(layer.kind));
    w.pod(static_cast<std::uint64_t>(layer.input_dim));
    w.pod(static_cast<std::uint64_t>(layer.output_dim));
    w.pod(static_cast<std::uint64_t>(layer.kernel_width));
  }
  w.pod(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& p : checkpoint.tensors) {
    w.str(p.name);
    w.pod(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.pod(static_cast<std::uint64_t>(d));
    w.doubles(p.value.data());
  }
  if (!out) throw std::runtime_error("checkpoint " + path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint " + path.string() + ": cannot open");
  Reader r(in, path.string());
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not a durflow checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) r.fail("unsupported version " + std::to_string(version));

  Checkpoint ck;
  const auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    ck.meta[k] = r.str();
  }
  const auto n_layers = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec spec;
    spec.name = r.str();
    try {
      spec.kind = parse_layer_kind(r.str());
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
    spec.input_dim = r.pod<std::uint64_t>();
    spec.output_dim = r.pod<std::uint64_t>();
    spec.kernel_width = r.pod<std::uint64_t>();
    ck.layers.push_back(spec);
  }
  const auto n_tensors = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) r.fail("tensor " + name + " has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.pod<std::uint64_t>();
    const auto n = shape_size(shape);
    if (n > (std::size_t{1} << 28)) r.fail("tensor " + name + " is implausibly large");
    ck.tensors.push_back(Parameter{name, Tensor(shape, r.doubles(n))});
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after last tensor");
  return ck;
}

std::uint64_t fingerprint(const std::vector<Parameter>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    for (auto d : p.value.shape()) {
      const auto d64 = static_cast<std::uint64_t>(d);
      mix(&d64, sizeof(d64));
    }
    mix(p.value.data().data(), p.value.data().size_bytes());
  }
  return h;
}

}  // namespace durflow
