#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ibmvs/neural/ops.hpp"

namespace ibmvs::nn {

/// Expected name and shape of one trainable tensor.
struct ParamSpec {
  std::string name;
  std::vector<std::uint32_t> dims;
};
using Manifest = std::vector<ParamSpec>;

/// Named parameter tensors. Immutable once handed to a model.
class WeightStore {
 public:
  void set(const std::string& name, Param param);
  /// Throws FormatError naming the tensor when it is absent.
  const Param& get(const std::string& name) const;
  const Param* find(const std::string& name) const;
  const std::map<std::string, Param>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  bool operator==(const WeightStore&) const = default;

 private:
  std::map<std::string, Param> params_;
};

inline constexpr char kWeightMagic[4] = {'I', 'B', 'W', 'T'};
inline constexpr std::uint32_t kWeightVersion = 1;

/// Binary layout, all integers u32 little-endian:
///   "IBWT", version, tensor count,
///   per tensor: name length, UTF-8 name bytes, rank, dims..., float32 LE data.
/// Tensors are written in lexicographic name order.
void save_weights(const WeightStore& store, std::ostream& out);
void save_weights(const WeightStore& store, const std::string& path);
/// Reads the whole stream; truncation, bad magic/version or trailing bytes
/// throw FormatError and nothing is returned.
WeightStore load_weights(std::istream& in);
WeightStore load_weights(const std::string& path);

/// Every mismatch between store and manifest (missing, unexpected,
/// mis-shaped), one message per tensor. Empty when the store is valid.
std::vector<std::string> check_manifest(const WeightStore& store, const Manifest& manifest);
/// load_weights followed by check_manifest; throws FormatError listing
/// every problem.
WeightStore load_weights(const std::string& path, const Manifest& manifest);

/// Deterministic random store for shape and range testing. Weights are
/// uniform in +-scale / sqrt(fan_in); norm scales are 1 and shifts 0.
WeightStore random_weights(const Manifest& manifest, std::uint64_t seed, double scale = 1.0);

std::size_t parameter_count(const Manifest& manifest);
std::string manifest_text(const Manifest& manifest);

}  // namespace ibmvs::nn
