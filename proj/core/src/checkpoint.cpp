// Copyright 2026 The ielab Authors.
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

#include "ielab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ielab/error.hpp"

namespace ielab {

namespace {

constexpr std::string_view kMagic = "IELAB-CKPT 1\n";

void put_f64(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw MismatchError("checkpoint has no tensor named '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    manifest.push_back({{"name", t.name},
                        {"shape", t.value.shape()},
                        {"offset", offset},
                        {"count", t.value.size()}});
    offset += t.value.size() * 8;
  }
  nlohmann::json header = {{"format_version", kCheckpointVersion},
                           {"config", ckpt.config},
                           {"metadata", ckpt.metadata},
                           {"tensors", manifest}};
  const std::string head = header.dump();
  std::string out;
  out.reserve(kMagic.size() + 24 + head.size() + offset);
  out.append(kMagic);
  out.append(std::to_string(head.size()));
  out.push_back('\n');
  out.append(head);
  for (const auto& t : ckpt.tensors) {
    for (double v : t.value.data()) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    throw ParseError("not an ielab checkpoint (bad magic line)");
  }
  std::size_t pos = kMagic.size();
  const std::size_t nl = bytes.find('\n', pos);
  if (nl == std::string_view::npos) throw ParseError("checkpoint: missing header length line");
  std::size_t head_len = 0;
  try {
    head_len = std::stoull(std::string(bytes.substr(pos, nl - pos)));
  } catch (const std::exception&) {
    throw ParseError("checkpoint: malformed header length");
  }
  pos = nl + 1;
  if (pos + head_len > bytes.size()) throw ParseError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, head_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format_version", -1) != kCheckpointVersion) {
    throw MismatchError("checkpoint format version " + header.value("format_version", nlohmann::json()).dump() +
                        " is not supported");
  }
  const std::string_view payload = bytes.substr(pos + head_len);
  Checkpoint ckpt;
  ckpt.config = header.at("config");
  ckpt.metadata = header.value("metadata", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (shape_product(shape) != count || offset + count * 8 > payload.size()) {
      throw ParseError("checkpoint: manifest entry '" + entry.at("name").get<std::string>() +
                       "' is inconsistent with the payload");
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = get_f64(payload.data() + offset + 8 * i);
    ckpt.tensors.push_back({entry.at("name").get<std::string>(), Tensor(shape, std::move(data))});
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace ielab
