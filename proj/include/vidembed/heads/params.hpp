#pragma once

// HeadParams bundle layout (a VEMB container with the bundle flag set):
//
//   "VEMB" | u16 version = 1 | u16 flags = 1
//   u32 header length | header JSON {"spec": HeadSpec, "tensors": [names...]}
//   u32 CRC-32 of the header bytes
//   one plain VEMB record per tensor, in header order

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vidembed/data/rng.hpp"
#include "vidembed/data/vemb.hpp"
#include "vidembed/heads/head_spec.hpp"
#include "vidembed/numeric/tape.hpp"

namespace vidembed {

/// Learnable tensors of a head, in a fixed, named order.
template <std::floating_point T>
struct HeadParams {
  HeadSpec spec;
  std::vector<std::pair<std::string, Tensor<T>>> tensors;

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].first == name) return i;
    fail(Errc::ConfigInvalid, "no parameter named '" + name + "'");
  }
  const Tensor<T>& get(const std::string& name) const { return tensors[index_of(name)].second; }
  void set(const std::string& name, Tensor<T> value) {
    auto& slot = tensors[index_of(name)].second;
    require(slot.shape() == value.shape(), Errc::ShapeMismatch, "shape change for " + name);
    slot = std::move(value);
  }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors) n += t.size();
    return n;
  }

  template <std::floating_point U>
  HeadParams<U> cast() const {
    HeadParams<U> out{spec, {}};
    for (const auto& [name, t] : tensors) out.tensors.emplace_back(name, t.template cast<U>());
    return out;
  }

  friend bool operator==(const HeadParams& a, const HeadParams& b) {
    if (a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i)
      if (a.tensors[i].first != b.tensors[i].first || !(a.tensors[i].second == b.tensors[i].second)) return false;
    return to_json(a.spec) == to_json(b.spec);
  }
};

/// Params placed on a tape, addressable by name.
template <std::floating_point T>
struct BoundParams {
  const HeadParams<T>* params = nullptr;
  std::vector<Var<T>> vars;

  Var<T> operator[](const std::string& name) const { return vars[params->index_of(name)]; }
};

template <std::floating_point T>
BoundParams<T> bind(Tape<T>& tape, const HeadParams<T>& p, bool requires_grad) {
  BoundParams<T> b{&p, {}};
  b.vars.reserve(p.tensors.size());
  for (const auto& [_, t] : p.tensors) b.vars.push_back(tape.leaf(t.with_requires_grad(requires_grad)));
  return b;
}

/// Xavier-uniform bound sqrt(6 / (fan_in + fan_out)).
inline double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace detail {

template <std::floating_point T>
struct ParamBuilder {
  HeadParams<T>& out;
  std::uint64_t seed;

  void xavier(const std::string& name, Shape shape, std::size_t fan_in, std::size_t fan_out) {
    CounterRng rng(seed, fnv1a64(name));
    const double b = xavier_bound(fan_in, fan_out);
    std::vector<T> d(shape_numel(shape));
    for (auto& x : d) x = static_cast<T>(rng.uniform(-b, b));
    out.tensors.emplace_back(name, Tensor<T>(std::move(shape), std::move(d)));
  }
  void matrix(const std::string& name, std::size_t rows, std::size_t cols) { xavier(name, {rows, cols}, rows, cols); }
  void constant(const std::string& name, std::size_t n, T value) {
    out.tensors.emplace_back(name, Tensor<T>::filled({n}, value));
  }
};

}  // namespace detail

/// Initial parameters: Xavier-uniform weights, zero biases, layer-norm gains 1,
/// LSTM forget-gate bias 1. Each tensor draws from a stream keyed by its name.
template <std::floating_point T = float>
HeadParams<T> init_params(const HeadSpec& spec, std::uint64_t seed) {
  validate(spec);
  HeadParams<T> p{spec, {}};
  detail::ParamBuilder<T> b{p, seed};
  if (spec.kind == HeadKind::Lstm) {
    const auto D = spec.d_in, H = spec.hidden;
    for (const char* g : {"i", "f", "g", "o"}) b.matrix(std::string("lstm.W_") + g, D, H);
    for (const char* g : {"i", "f", "g", "o"}) b.matrix(std::string("lstm.U_") + g, H, H);
    for (const char* g : {"i", "f", "g", "o"}) b.constant(std::string("lstm.b_") + g, H, g[0] == 'f' ? T(1) : T(0));
    b.matrix("out.W", H, spec.d_out);
    b.constant("out.b", spec.d_out, T(0));
  } else if (spec.kind == HeadKind::Transformer) {
    const auto d = spec.d_model;
    if (spec.d_in != d) {
      b.matrix("in.W", spec.d_in, d);
      b.constant("in.b", d, T(0));
    }
    b.xavier("cls", {d}, 1, d);
    for (std::size_t l = 0; l < spec.layers; ++l) {
      const std::string pre = "l" + std::to_string(l) + ".";
      b.constant(pre + "ln1.g", d, T(1));
      b.constant(pre + "ln1.b", d, T(0));
      for (const char* proj : {"q", "k", "v", "o"}) {
        b.matrix(pre + "attn.W" + proj, d, d);
        b.constant(pre + "attn.b" + proj, d, T(0));
      }
      b.constant(pre + "ln2.g", d, T(1));
      b.constant(pre + "ln2.b", d, T(0));
      b.matrix(pre + "ffn.W1", d, spec.ffn);
      b.constant(pre + "ffn.b1", spec.ffn, T(0));
      b.matrix(pre + "ffn.W2", spec.ffn, d);
      b.constant(pre + "ffn.b2", d, T(0));
    }
    b.matrix("out.W", d, spec.d_out);
    b.constant("out.b", spec.d_out, T(0));
  }
  return p;
}

/// 64-bit FNV-1a over the spec JSON and all tensor bytes, as 16 hex digits.
template <std::floating_point T>
std::string fingerprint(const HeadParams<T>& p) {
  std::uint64_t h = fnv1a64(to_json(p.spec).dump());
  for (const auto& [name, t] : p.tensors) {
    h = fnv1a64(name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t.data().data()), t.size() * sizeof(T)), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <std::floating_point T>
std::string encode_params(const HeadParams<T>& p) {
  nlohmann::json header = {{"spec", to_json(p.spec)}, {"tensors", nlohmann::json::array()}};
  for (const auto& [name, _] : p.tensors) header["tensors"].push_back(name);
  const auto hdr = header.dump();
  std::string out(kVembMagic, 4);
  detail::put<std::uint16_t>(out, kVembVersion);
  detail::put<std::uint16_t>(out, kVembFlagBundle);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(hdr.size()));
  out += hdr;
  detail::put<std::uint32_t>(out, crc32_ieee(hdr));
  for (const auto& [_, t] : p.tensors) out += encode_vemb(t);
  return out;
}

template <std::floating_point T>
HeadParams<T> decode_params(std::string_view bytes) {
  parse_vemb_header(bytes, kVembFlagBundle);
  require(bytes.size() >= 12, Errc::TruncatedFile, "bundle header cut short");
  const auto len = detail::get<std::uint32_t>(bytes, 8);
  require(bytes.size() >= 16 + std::size_t{len}, Errc::TruncatedFile, "bundle header cut short");
  const auto hdr = bytes.substr(12, len);
  require(crc32_ieee(hdr) == detail::get<std::uint32_t>(bytes, 12 + len), Errc::ChecksumMismatch,
          "bundle header CRC-32 mismatch");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hdr);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, std::string("bundle header: ") + e.what());
  }
  auto spec = head_spec_from_json(header.at("spec"));
  // Re-create the expected layout so names and shapes are checked, then fill.
  auto p = init_params<T>(spec, 0);
  const auto names = header.at("tensors").get<std::vector<std::string>>();
  require(names.size() == p.tensors.size(), Errc::ParseError, "bundle tensor count does not match its spec");
  std::size_t off = 16 + len;
  for (std::size_t i = 0; i < names.size(); ++i) {
    require(names[i] == p.tensors[i].first, Errc::ParseError, "unexpected tensor " + names[i]);
    std::size_t used = 0;
    auto t = decode_vemb<T>(bytes.substr(off), &used);
    p.set(names[i], std::move(t));
    off += used;
  }
  require(off == bytes.size(), Errc::ParseError, "trailing bytes after parameter bundle");
  return p;
}

template <std::floating_point T>
void save_params(const std::filesystem::path& path, const HeadParams<T>& p) {
  write_file_atomic(path, encode_params(p));
}

template <std::floating_point T = float>
HeadParams<T> load_params(const std::filesystem::path& path) {
  return decode_params<T>(read_file(path));
}

}  // namespace vidembed
