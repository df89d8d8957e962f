/*
 * Copyright 2026 The hgcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Binary checkpoint layout, all integers and floats little-endian:
//
//   "HGCL"  u32 version  u64 m  u64 n  u64 d  u64 k  u64 L
//   u32 array_count, then per array:
//     u32 name_len  name  u32 rank  u64 dims[rank]  f64 values[prod(dims)]
//   u64 user_count  i64 external_user_ids[]
//   u64 item_count  i64 external_item_ids[]
//   u32 config_len  config text
//
// Trainable parameters come first in declaration order; arrays whose name
// starts with "derived." hold values computed from them (personal transform
// factors) for inspection without the training data.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "hgcl/edge_io.hpp"
#include "hgcl/params.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

inline constexpr char kCheckpointMagic[4] = {'H', 'G', 'C', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint64_t m = 0, n = 0, d = 0, k = 0, layers = 0;
  std::vector<NamedArray> arrays;
  std::vector<ExternalId> user_ids;
  std::vector<ExternalId> item_ids;
  std::string config_text;

  const NamedArray* find(const std::string& name) const {
    for (const auto& a : arrays) {
      if (a.name == name) return &a;
    }
    return nullptr;
  }
};

namespace detail {

class ByteWriter {
 public:
  template <typename U>
  void put(U v) {
    static_assert(std::is_trivially_copyable_v<U>);
    unsigned char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    bytes_.insert(bytes_.end(), buf, buf + sizeof(U));
  }
  void put_bytes(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<unsigned char> take() { return std::move(bytes_); }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}
  template <typename U>
  U get() {
    need(sizeof(U));
    unsigned char buf[sizeof(U)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
    pos_ += sizeof(U);
    U v;
    std::memcpy(&v, buf, sizeof(U));
    return v;
  }
  std::string get_bytes(std::size_t len) {
    need(len);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t len) const {
    if (pos_ + len > bytes_.size()) throw CheckpointError("checkpoint truncated");
  }
  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.put_bytes(std::string(kCheckpointMagic, 4));
  w.put(kCheckpointVersion);
  for (std::uint64_t v : {ck.m, ck.n, ck.d, ck.k, ck.layers}) w.put(v);
  w.put(static_cast<std::uint32_t>(ck.arrays.size()));
  for (const auto& a : ck.arrays) {
    if (a.values.size() != a.shape.numel()) throw CheckpointError("array '" + a.name + "' size does not match its shape");
    w.put(static_cast<std::uint32_t>(a.name.size()));
    w.put_bytes(a.name);
    w.put(static_cast<std::uint32_t>(a.shape.rank()));
    for (std::size_t ax = 0; ax < a.shape.rank(); ++ax) w.put(static_cast<std::uint64_t>(a.shape[ax]));
    for (double v : a.values) w.put(v);
  }
  w.put(static_cast<std::uint64_t>(ck.user_ids.size()));
  for (ExternalId id : ck.user_ids) w.put(static_cast<std::int64_t>(id));
  w.put(static_cast<std::uint64_t>(ck.item_ids.size()));
  for (ExternalId id : ck.item_ids) w.put(static_cast<std::int64_t>(id));
  w.put(static_cast<std::uint32_t>(ck.config_text.size()));
  w.put_bytes(ck.config_text);
  return w.take();
}

inline Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
  detail::ByteReader r(bytes);
  if (r.get_bytes(4) != std::string(kCheckpointMagic, 4)) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  ck.m = r.get<std::uint64_t>();
  ck.n = r.get<std::uint64_t>();
  ck.d = r.get<std::uint64_t>();
  ck.k = r.get<std::uint64_t>();
  ck.layers = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t a = 0; a < count; ++a) {
    NamedArray arr;
    arr.name = r.get_bytes(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > Shape::kMaxRank) throw CheckpointError("array '" + arr.name + "' has rank " + std::to_string(rank));
    std::size_t dims[Shape::kMaxRank] = {};
    for (std::uint32_t ax = 0; ax < rank; ++ax) dims[ax] = static_cast<std::size_t>(r.get<std::uint64_t>());
    arr.shape = rank == 0 ? Shape{} : rank == 1 ? Shape{dims[0]} : rank == 2 ? Shape{dims[0], dims[1]} : Shape{dims[0], dims[1], dims[2]};
    arr.values.resize(arr.shape.numel());
    for (double& v : arr.values) v = r.get<double>();
    ck.arrays.push_back(std::move(arr));
  }
  ck.user_ids.resize(static_cast<std::size_t>(r.get<std::uint64_t>()));
  for (auto& id : ck.user_ids) id = r.get<std::int64_t>();
  ck.item_ids.resize(static_cast<std::size_t>(r.get<std::uint64_t>()));
  for (auto& id : ck.item_ids) id = r.get<std::int64_t>();
  ck.config_text = r.get_bytes(r.get<std::uint32_t>());
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file_bytes(path)); }

template <typename T>
void store_params(Checkpoint& ck, ParamTree<Tensor<T>>& params) {
  for_each_param(
      [&](const ParamInfo& info, Tensor<T>& t) {
        ck.arrays.push_back({info.name, t.shape(), std::vector<double>(t.values().begin(), t.values().end())});
      },
      params);
}

template <typename T>
ParamTree<Tensor<T>> restore_params(const Checkpoint& ck) {
  ParamTree<Tensor<T>> params;
  for_each_param(
      [&](const ParamInfo& info, Tensor<T>& t) {
        const NamedArray* a = ck.find(info.name);
        if (!a) throw CheckpointError("checkpoint lacks parameter '" + info.name + "'");
        t = Tensor<T>(a->shape, std::vector<T>(a->values.begin(), a->values.end()));
      },
      params);
  return params;
}

}  // namespace hgcl
