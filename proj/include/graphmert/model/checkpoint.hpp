// Copyright 2026 The GraphMERT KG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Checkpoint layout:
//
//   "GMERTCK1"                 8 bytes
//   header length              uint64, little endian
//   header                     JSON: config, relations, tensor table, step, seed
//   parameters                 float64, tensor table order, row-major
//   adam first moment          same layout
//   adam second moment         same layout

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "graphmert/model/trainer.hpp"

namespace graphmert {

inline constexpr char kCheckpointMagic[9] = "GMERTCK1";

struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> relations;
  Parameters params;
  Parameters adam_m;
  Parameters adam_v;
  int step = 0;
  uint64_t seed = 0;
  json extra = json::object();  // train config, metrics summary, ...
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little endian");

inline void append_tensors(std::string& out, const Parameters& p) {
  p.visit([&](const std::string&, const Matrix& m) {
    out.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<size_t>(m.size()));
  });
}

inline size_t read_tensors(const std::string& in, size_t offset, Parameters& p) {
  p.visit([&](const std::string& name, Matrix& m) {
    const size_t bytes = sizeof(double) * static_cast<size_t>(m.size());
    if (offset + bytes > in.size()) {
      throw Error(ErrorKind::kSchemaMismatch, "checkpoint truncated at tensor " + name);
    }
    std::memcpy(m.data(), in.data() + offset, bytes);
    offset += bytes;
  });
  return offset;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  json tensors = json::array();
  size_t offset = 0;
  ck.params.visit([&](const std::string& name, const Matrix& m) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += sizeof(double) * static_cast<size_t>(m.size());
  });
  const json header{{"format", 1},          {"config", to_json(ck.config)},
                    {"relations", ck.relations}, {"tensors", tensors},
                    {"step", ck.step},      {"seed", ck.seed},
                    {"extra", ck.extra}};
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, 8);
  const uint64_t len = h.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += h;
  detail::append_tensors(out, ck.params);
  detail::append_tensors(out, ck.adam_m);
  detail::append_tensors(out, ck.adam_v);
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& data) {
  if (data.size() < 16 || data.compare(0, 8, kCheckpointMagic) != 0) {
    throw Error(ErrorKind::kSchemaMismatch, "not a checkpoint (bad magic)");
  }
  uint64_t len = 0;
  std::memcpy(&len, data.data() + 8, sizeof(len));
  if (16 + len > data.size()) throw Error(ErrorKind::kSchemaMismatch, "checkpoint header truncated");
  json header;
  try {
    header = json::parse(data.substr(16, len));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchemaMismatch, std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", 0) != 1) {
    throw Error(ErrorKind::kSchemaMismatch, "unsupported checkpoint format");
  }
  Checkpoint ck;
  ck.config = model_config_from_json(header.at("config"));
  ck.relations = header.at("relations").get<std::vector<std::string>>();
  ck.step = header.at("step").get<int>();
  ck.seed = header.at("seed").get<uint64_t>();
  ck.extra = header.value("extra", json::object());
  ck.params = Parameters::zeros(ck.config);
  ck.adam_m = Parameters::zeros(ck.config);
  ck.adam_v = Parameters::zeros(ck.config);
  // The tensor table must describe exactly the tensors this build expects.
  size_t i = 0;
  const json& table = header.at("tensors");
  ck.params.visit([&](const std::string& name, const Matrix& m) {
    if (i >= table.size() || table[i].at("name") != name ||
        table[i].at("shape")[0].get<Eigen::Index>() != m.rows() ||
        table[i].at("shape")[1].get<Eigen::Index>() != m.cols()) {
      throw Error(ErrorKind::kSchemaMismatch, "checkpoint tensor table mismatch at " + name);
    }
    ++i;
  });
  if (i != table.size()) throw Error(ErrorKind::kSchemaMismatch, "checkpoint has extra tensors");
  size_t offset = 16 + len;
  offset = detail::read_tensors(data, offset, ck.params);
  offset = detail::read_tensors(data, offset, ck.adam_m);
  offset = detail::read_tensors(data, offset, ck.adam_v);
  if (offset != data.size()) throw Error(ErrorKind::kSchemaMismatch, "checkpoint has trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  write_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace graphmert
