// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The memdrive Authors.

#include "memdrive/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "memdrive/error.hpp"

namespace memdrive {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }
  template <typename T>
  void put(T v) {
    v = to_le(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void doubles(std::span<const double> v) {
    for (double x : v) put(x);
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for '" + path_ + "'");
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open checkpoint '" + path + "'");
  }
  template <typename T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) fail("truncated file");
    return to_le(v);
  }
  std::string str(std::uint64_t n) {
    if (n > (1ULL << 32)) fail("implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) fail("truncated file");
    return s;
  }
  std::vector<double> doubles(std::uint64_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }
  [[noreturn]] void fail(const std::string& why) {
    throw IoError("malformed checkpoint '" + path_ + "': " + why);
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void write_checkpoint(const std::string& path, const ParamStore& store, const AdamState* optimizer,
                      const std::string& metadata) {
  Writer w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(metadata.size());
  w.bytes(metadata.data(), metadata.size());
  w.put<std::uint64_t>(store.params().size());
  for (const auto& p : store.params()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    const Shape& s = p.tensor.shape();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.rank()));
    for (std::size_t i = 0; i < s.rank(); ++i) w.put<std::uint64_t>(s[i]);
    w.doubles(p.tensor.data());
  }
  w.put<std::uint8_t>(optimizer ? 1 : 0);
  if (optimizer) {
    w.put(optimizer->hyper.beta1);
    w.put(optimizer->hyper.beta2);
    w.put(optimizer->hyper.epsilon);
    w.put(optimizer->lr[0]);
    w.put(optimizer->lr[1]);
    w.put<std::uint64_t>(optimizer->step);
    for (std::size_t i = 0; i < store.params().size(); ++i) {
      w.doubles(optimizer->m.at(i));
      w.doubles(optimizer->v.at(i));
    }
  }
  w.finish();
}

CheckpointData read_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  for (char& c : magic) c = static_cast<char>(r.get<std::uint8_t>());
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  CheckpointData ck;
  ck.metadata = r.str(r.get<std::uint64_t>());
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    StoredArray a;
    a.name = r.str(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > Shape::kMaxRank) r.fail("rank " + std::to_string(rank) + " for '" + a.name + "'");
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      a.dims.push_back(r.get<std::uint64_t>());
      numel *= a.dims.back();
    }
    a.values = r.doubles(numel);
    ck.arrays.push_back(std::move(a));
  }
  if (r.get<std::uint8_t>()) {
    AdamState s;
    s.hyper.beta1 = r.get<double>();
    s.hyper.beta2 = r.get<double>();
    s.hyper.epsilon = r.get<double>();
    s.lr[0] = r.get<double>();
    s.lr[1] = r.get<double>();
    s.step = r.get<std::uint64_t>();
    for (const auto& a : ck.arrays) {
      s.m.push_back(r.doubles(a.values.size()));
      s.v.push_back(r.doubles(a.values.size()));
    }
    ck.optimizer = std::move(s);
  }
  return ck;
}

void load_parameters(const CheckpointData& ckpt, ParamStore& store) {
  if (ckpt.arrays.size() != store.params().size())
    throw ContractError("checkpoint holds " + std::to_string(ckpt.arrays.size()) +
                        " parameters, model expects " + std::to_string(store.params().size()));
  for (std::size_t i = 0; i < ckpt.arrays.size(); ++i) {
    const auto& a = ckpt.arrays[i];
    auto& p = store.params()[i];
    if (a.name != p.name)
      throw ContractError("checkpoint parameter " + std::to_string(i) + " is '" + a.name +
                          "', model expects '" + p.name + "'");
    if (a.values.size() != p.tensor.numel() || a.dims.size() != p.tensor.rank())
      throw ContractError("checkpoint shape mismatch for '" + a.name + "'");
    for (std::size_t k = 0; k < a.dims.size(); ++k)
      if (a.dims[k] != p.tensor.shape()[k])
        throw ContractError("checkpoint shape mismatch for '" + a.name + "'");
    std::copy(a.values.begin(), a.values.end(), p.tensor.mutable_data().begin());
  }
}

}  // namespace memdrive
