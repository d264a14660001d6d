#include "ibmvs/neural/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ibmvs/error.hpp"
#include "ibmvs/random.hpp"

namespace ibmvs::nn {

void WeightStore::set(const std::string& name, Param param) {
  if (param.values.size() != param.count())
    throw DimensionError("weight '" + name + "': value count does not match dims");
  params_[name] = std::move(param);
}

const Param& WeightStore::get(const std::string& name) const {
  const Param* p = find(name);
  if (!p) throw FormatError("missing weight tensor '" + name + "'");
  return *p;
}

const Param* WeightStore::find(const std::string& name) const {
  const auto it = params_.find(name);
  return it == params_.end() ? nullptr : &it->second;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(std::string("weight file truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace

void save_weights(const WeightStore& store, std::ostream& out) {
  out.write(kWeightMagic, 4);
  put_u32(out, kWeightVersion);
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, param] : store.params()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(param.dims.size()));
    for (std::uint32_t d : param.dims) put_u32(out, d);
    for (float v : param.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) throw FormatError("failed writing weight stream");
}

void save_weights(const WeightStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write weight file " + path);
  save_weights(store, out);
}

WeightStore load_weights(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kWeightMagic, 4) != 0) throw FormatError("not a weight file (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kWeightVersion)
    throw FormatError("unsupported weight file version " + std::to_string(version));
  const std::uint32_t count = r.u32("tensor count");
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > 4096) throw FormatError("weight file: invalid name length");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "name");
    if (store.find(name)) throw FormatError("weight file: duplicate tensor '" + name + "'");
    Param param;
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("weight file: tensor '" + name + "' has rank > 8");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      param.dims.push_back(r.u32("dims"));
      n *= param.dims.back();
      if (n > (std::size_t{1} << 31)) throw FormatError("weight file: tensor '" + name + "' too large");
    }
    param.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) param.values[j] = std::bit_cast<float>(r.u32("data"));
    store.set(name, std::move(param));
  }
  if (!r.at_end()) throw FormatError("weight file: trailing bytes after last tensor");
  return store;
}

WeightStore load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open weight file " + path);
  return load_weights(in);
}

namespace {

std::string dims_string(const std::vector<std::uint32_t>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? ", " : "") + std::to_string(dims[i]);
  return s + ")";
}

}  // namespace

std::vector<std::string> check_manifest(const WeightStore& store, const Manifest& manifest) {
  std::vector<std::string> problems;
  std::map<std::string, const ParamSpec*> expected;
  for (const auto& spec : manifest) expected[spec.name] = &spec;
  for (const auto& spec : manifest) {
    const Param* p = store.find(spec.name);
    if (!p) {
      problems.push_back("missing tensor '" + spec.name + "' " + dims_string(spec.dims));
    } else if (p->dims != spec.dims) {
      problems.push_back("tensor '" + spec.name + "' has shape " + dims_string(p->dims) +
                         ", expected " + dims_string(spec.dims));
    }
  }
  for (const auto& [name, param] : store.params())
    if (!expected.count(name)) problems.push_back("unexpected tensor '" + name + "'");
  return problems;
}

WeightStore load_weights(const std::string& path, const Manifest& manifest) {
  WeightStore store = load_weights(path);
  const auto problems = check_manifest(store, manifest);
  if (!problems.empty()) {
    std::string msg = "weight file " + path + " does not match the network manifest:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw FormatError(msg);
  }
  return store;
}

WeightStore random_weights(const Manifest& manifest, std::uint64_t seed, double scale) {
  WeightStore store;
  SplitMix64 rng(seed);
  for (const auto& spec : manifest) {
    Param p;
    p.dims = spec.dims;
    p.values.resize(p.count());
    const bool is_norm = spec.name.ends_with(".norm.weight") || spec.name.ends_with(".norm.bias");
    if (is_norm) {
      const float fill = spec.name.ends_with(".norm.weight") ? 1.0f : 0.0f;
      std::fill(p.values.begin(), p.values.end(), fill);
    } else {
      // Fan-in: product of all but the leading dim for conv weights; biases
      // reuse the bound of a unit fan-in scaled down.
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < spec.dims.size(); ++d) fan_in *= spec.dims[d];
      const double bound = scale / std::sqrt(static_cast<double>(fan_in));
      for (float& v : p.values) v = static_cast<float>(rng.uniform(-bound, bound));
    }
    store.set(spec.name, std::move(p));
  }
  return store;
}

std::size_t parameter_count(const Manifest& manifest) {
  std::size_t total = 0;
  for (const auto& spec : manifest) {
    std::size_t n = 1;
    for (auto d : spec.dims) n *= d;
    total += n;
  }
  return total;
}

std::string manifest_text(const Manifest& manifest) {
  std::ostringstream out;
  for (const auto& spec : manifest) {
    out << spec.name;
    for (auto d : spec.dims) out << ' ' << d;
    out << '\n';
  }
  return out.str();
}

}  // namespace ibmvs::nn
