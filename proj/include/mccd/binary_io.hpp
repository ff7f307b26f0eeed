#pragma once

// Little-endian binary files: feature sidecars and model snapshots.
//
// Feature sidecar (".features.bin"):
//   char[8]  magic "MCCDFEAT"
//   u32      version (1)
//   u64      n, number of samples
//   u32      dims, feature dimension per modality
//   u32      modalities (3: audio, video, question)
//   f64[n * modalities * dims]  sample-major, then modality, then coordinate
//
// Model snapshot ("model.bin"):
//   char[8]  magic "MCCDMODL"
//   u32      version (1)
//   u32      feature_dim, hidden, bias_hidden, classes
//   u64      parameter count
//   f64[count]  parameters in ModelLayout order

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mccd/synthetic.hpp"
#include "mccd/toy_model.hpp"

namespace mccd {

class BinaryFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

template <typename T>
void put(std::ostream& out, T v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw BinaryFormatError("unexpected end of file");
  return byteswap_if_big(v);
}

inline void put_magic(std::ostream& out, const char (&magic)[9]) { out.write(magic, 8); }

inline void expect_magic(std::istream& in, const char (&magic)[9]) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0)
    throw BinaryFormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace detail

inline constexpr std::uint32_t kBinaryVersion = 1;

inline void write_features(std::ostream& out, std::span<const Features> feats) {
  const std::uint32_t dims = feats.empty() ? 0 : static_cast<std::uint32_t>(feats.front().audio.size());
  detail::put_magic(out, "MCCDFEAT");
  detail::put<std::uint32_t>(out, kBinaryVersion);
  detail::put<std::uint64_t>(out, feats.size());
  detail::put<std::uint32_t>(out, dims);
  detail::put<std::uint32_t>(out, 3);
  for (const auto& f : feats)
    for (const Vec* v : {&f.audio, &f.video, &f.question}) {
      if (v->size() != dims) throw BinaryFormatError("ragged feature vectors");
      for (double x : *v) detail::put<double>(out, x);
    }
}

inline std::vector<Features> read_features(std::istream& in) {
  detail::expect_magic(in, "MCCDFEAT");
  if (const auto v = detail::get<std::uint32_t>(in); v != kBinaryVersion)
    throw BinaryFormatError("unsupported feature file version " + std::to_string(v));
  const auto n = detail::get<std::uint64_t>(in);
  const auto dims = detail::get<std::uint32_t>(in);
  const auto modalities = detail::get<std::uint32_t>(in);
  if (modalities != 3) throw BinaryFormatError("feature file must hold 3 modalities");
  std::vector<Features> feats;
  feats.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    Features f{Vec(dims), Vec(dims), Vec(dims)};
    for (Vec* v : {&f.audio, &f.video, &f.question})
      for (double& x : *v) x = detail::get<double>(in);
    feats.push_back(std::move(f));
  }
  return feats;
}

inline void write_model(std::ostream& out, const ToyModel& m) {
  const ModelShape& s = m.shape();
  detail::put_magic(out, "MCCDMODL");
  detail::put<std::uint32_t>(out, kBinaryVersion);
  for (std::size_t v : {s.feature_dim, s.hidden, s.bias_hidden, s.classes})
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  detail::put<std::uint64_t>(out, m.parameter_count());
  for (double x : m.params()) detail::put<double>(out, x);
}

inline ToyModel read_model(std::istream& in) {
  detail::expect_magic(in, "MCCDMODL");
  if (const auto v = detail::get<std::uint32_t>(in); v != kBinaryVersion)
    throw BinaryFormatError("unsupported model file version " + std::to_string(v));
  ModelShape s;
  s.feature_dim = detail::get<std::uint32_t>(in);
  s.hidden = detail::get<std::uint32_t>(in);
  s.bias_hidden = detail::get<std::uint32_t>(in);
  s.classes = detail::get<std::uint32_t>(in);
  ToyModel m(s);
  if (detail::get<std::uint64_t>(in) != m.parameter_count())
    throw BinaryFormatError("parameter count does not match the stored shape");
  for (double& x : m.params()) x = detail::get<double>(in);
  return m;
}

}  // namespace mccd
