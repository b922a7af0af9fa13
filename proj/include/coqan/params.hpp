#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "coqan/error.hpp"
#include "coqan/tape.hpp"

namespace coqan::nn {

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  Group group = Group::other;
  InitKind init = InitKind::gaussian;
};

// Named trainable parameters, each tagged with an optimizer group. Insertion
// order is the canonical order for initialization and checkpoints.
template <class T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  ParameterStore clone() const {
    ParameterStore out;
    for (const auto& p : params_) {
      auto& q = out.declare(p->name, p->shape, p->group, p->init);
      q.value = p->value;
    }
    return out;
  }

  Parameter<T>& declare(const std::string& name, std::vector<std::size_t> shape,
                        Group group, InitKind init) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    if (shape.empty() || shape.size() > 2)
      throw ShapeError("parameter '" + name + "' must be 1-D or 2-D");
    auto p = std::make_unique<Parameter<T>>();
    p->name = name;
    p->shape = shape;
    p->group = group;
    p->init = init;
    const auto rows = static_cast<Eigen::Index>(shape.size() == 1 ? 1 : shape[0]);
    const auto cols = static_cast<Eigen::Index>(shape.size() == 1 ? shape[0] : shape[1]);
    p->value = Matrix<T>::Zero(rows, cols);
    p->grad = Matrix<T>::Zero(rows, cols);
    index_.emplace(name, params_.size());
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<T>& declare(const ParamSpec& s) { return declare(s.name, s.shape, s.group, s.init); }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Parameter<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return *params_[it->second];
  }
  const Parameter<T>& at(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->at(name);
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  // Weights ~ N(0, stddev^2); biases zero; gains one. Draws happen in
  // declaration order from one seeded stream.
  void initialize(std::uint64_t seed, double stddev = 0.01) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    for (auto& p : params_) {
      switch (p->init) {
        case InitKind::gaussian:
          for (Eigen::Index i = 0; i < p->value.size(); ++i)
            p->value.data()[i] = static_cast<T>(normal(rng));
          break;
        case InitKind::zeros: p->value.setZero(); break;
        case InitKind::ones: p->value.setOnes(); break;
      }
    }
    zero_grad();
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  template <class U>
  void copy_values_from(const ParameterStore<U>& other) {
    if (other.size() != size()) throw ConfigError("copy_values_from: parameter count differs");
    for (std::size_t i = 0; i < size(); ++i) {
      if (other[i].name != params_[i]->name ||
          other[i].value.rows() != params_[i]->value.rows() ||
          other[i].value.cols() != params_[i]->value.cols())
        throw ConfigError("copy_values_from: layout differs at '" + params_[i]->name + "'");
      params_[i]->value = other[i].value.template cast<T>();
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

template <class T>
ParameterStore<T> init_params(const std::vector<ParamSpec>& specs, std::uint64_t seed,
                              double stddev = 0.01) {
  ParameterStore<T> store;
  for (const auto& s : specs) store.declare(s);
  store.initialize(seed, stddev);
  return store;
}

// ---------------------------------------------------------------------------
// Checkpoint: "COQAN1" | u64 LE manifest length | manifest JSON | float32 LE payload

inline constexpr std::string_view kCheckpointMagic = "COQAN1";

struct CheckpointTensor {
  std::string name;
  std::vector<std::size_t> shape;
  Group group = Group::other;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<CheckpointTensor> tensors;
};

namespace detail {
inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  }
  return v;
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
inline std::uint64_t get_u64(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[static_cast<std::size_t>(i)]);
  return v;
}
}  // namespace detail

template <class T>
std::string encode_checkpoint(const ParameterStore<T>& store, const nlohmann::json& meta) {
  nlohmann::json manifest;
  manifest["format"] = std::string(kCheckpointMagic);
  manifest["meta"] = meta;
  auto tensors = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    tensors.push_back({{"name", p.name},
                       {"shape", p.shape},
                       {"group", std::string(to_string(p.group))},
                       {"offset", offset}});
    offset += static_cast<std::size_t>(p.value.size()) * sizeof(float);
  }
  manifest["tensors"] = std::move(tensors);
  const std::string mj = manifest.dump();

  std::string out(kCheckpointMagic);
  detail::put_u64(out, mj.size());
  out += mj;
  out.reserve(out.size() + offset);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& v = store[i].value;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      const float f = static_cast<float>(v.data()[k]);
      std::uint32_t bits = detail::to_le(std::bit_cast<std::uint32_t>(f));
      char buf[4];
      std::memcpy(buf, &bits, 4);
      out.append(buf, 4);
    }
  }
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 8 ||
      bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic)
    throw ParseError("checkpoint: bad magic header");
  const std::uint64_t mlen = detail::get_u64(bytes.substr(kCheckpointMagic.size(), 8));
  const std::size_t mstart = kCheckpointMagic.size() + 8;
  if (bytes.size() < mstart + mlen) throw ParseError("checkpoint: truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(mstart, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad manifest: ") + e.what());
  }
  const std::string_view payload = bytes.substr(mstart + mlen);
  Checkpoint ck;
  ck.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& tj : manifest.at("tensors")) {
    CheckpointTensor t;
    t.name = tj.at("name").get<std::string>();
    t.shape = tj.at("shape").get<std::vector<std::size_t>>();
    t.group = tj.at("group").get<std::string>() == "text_encoder" ? Group::text_encoder : Group::other;
    const auto offset = tj.at("offset").get<std::size_t>();
    std::size_t n = 1;
    for (auto d : t.shape) n *= d;
    if (offset + n * 4 > payload.size())
      throw ParseError("checkpoint: tensor '" + t.name + "' exceeds payload");
    t.data.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits;
      std::memcpy(&bits, payload.data() + offset + 4 * k, 4);
      t.data[k] = std::bit_cast<float>(detail::to_le(bits));
    }
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

// Copies checkpoint tensors into an already-declared store; names, shapes
// and groups must match exactly.
template <class T>
void load_into(ParameterStore<T>& store, const Checkpoint& ck) {
  if (ck.tensors.size() != store.size())
    throw ConfigError("checkpoint has " + std::to_string(ck.tensors.size()) +
                      " tensors, model expects " + std::to_string(store.size()));
  for (const auto& t : ck.tensors) {
    auto& p = store.at(t.name);
    if (p.shape != t.shape || p.group != t.group)
      throw ConfigError("checkpoint tensor '" + t.name + "' does not match the model");
    for (std::size_t k = 0; k < t.data.size(); ++k) p.value.data()[k] = static_cast<T>(t.data[k]);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace coqan::nn
