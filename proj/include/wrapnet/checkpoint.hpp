// checkpoint.hpp - model checkpoint (.wnck) and bottleneck (.wnb) files.
//
// .wnck: UTF-8 header (format version, the resolved model config, and a
// parameter manifest of name/shape/dtype/byte-offset), then raw
// little-endian IEEE-754 float64 payloads in manifest order. Loading checks
// the manifest total against the file length.
//
// .wnb: structured text. Codeword as 17-significant-digit decimals, grid
// size and variant, the base-graph triangle list, and (for the ablation
// bottleneck modes) explicit carrier vertex positions.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wrapnet/config.hpp"
#include "wrapnet/mesh.hpp"
#include "wrapnet/model.hpp"
#include "wrapnet/nn.hpp"

namespace wrapnet {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

constexpr const char* kCheckpointMagic = "WNCK";
constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const WrapNetParams& params) {
  std::ostringstream header;
  header << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  KeyValueMap kv;
  params.config.to_kv(kv);
  for (const auto& [k, v] : kv.entries()) header << "config " << k << '=' << v << '\n';
  std::size_t offset = 0;
  for (const Param& p : params.store) {
    header << "param " << p.name << ' ' << p.shape.rows << ' ' << p.shape.cols << " f64 " << offset
           << '\n';
    offset += p.value.size() * sizeof(double);
  }
  header << "end-header\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  const std::string head = header.str();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Param& p : params.store)
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  out.flush();
  if (!out) throw std::runtime_error("checkpoint write failure: " + path);
}

inline WrapNetParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: empty file");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version) || magic != kCheckpointMagic)
      throw std::runtime_error("checkpoint: bad magic");
    if (version != kCheckpointVersion)
      throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  KeyValueMap kv;
  struct ManifestEntry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<ManifestEntry> manifest;
  while (std::getline(in, line)) {
    if (line == "end-header") break;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "config") {
      std::string rest;
      std::getline(ls, rest);
      kv.parse_line(rest);
    } else if (tag == "param") {
      ManifestEntry e;
      std::string dtype;
      if (!(ls >> e.name >> e.shape.rows >> e.shape.cols >> dtype >> e.offset) || dtype != "f64")
        throw std::runtime_error("checkpoint: malformed manifest line: " + line);
      manifest.push_back(e);
    } else {
      throw std::runtime_error("checkpoint: unexpected header line: " + line);
    }
  }
  if (line != "end-header") throw std::runtime_error("checkpoint: truncated header");

  const std::streampos payload_start = in.tellg();
  in.seekg(0, std::ios::end);
  const std::size_t payload_bytes = static_cast<std::size_t>(in.tellg() - payload_start);
  std::size_t expected = 0;
  for (const auto& e : manifest) expected += e.shape.size() * sizeof(double);
  if (payload_bytes != expected)
    throw std::runtime_error("checkpoint: payload length " + std::to_string(payload_bytes) +
                             " does not match manifest total " + std::to_string(expected));

  WrapNetParams params = make_params(ModelConfig::from_kv(kv));
  if (params.store.count() != manifest.size())
    throw std::runtime_error("checkpoint: manifest entry count does not match the model");
  in.seekg(payload_start);
  for (const auto& e : manifest) {
    Param& p = params.store.at(e.name);
    if (!(p.shape == e.shape))
      throw std::runtime_error("checkpoint: shape mismatch for " + e.name);
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: short read for " + e.name);
  }
  return params;
}

// --- bottleneck files ---------------------------------------------------------

constexpr const char* kBottleneckMagic = "WNB";
constexpr int kBottleneckVersion = 1;

inline void save_bottleneck(const std::string& path, const BottleneckPayload& payload) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write bottleneck file: " + path);
  out << kBottleneckMagic << ' ' << kBottleneckVersion << '\n';
  out << "grid_size " << payload.grid_size << '\n';
  out << "grid_variant " << to_string(payload.grid_variant) << '\n';
  out << "mode " << to_string(payload.mode) << '\n';
  out << "codeword " << payload.codeword.size() << '\n';
  for (std::size_t i = 0; i < payload.codeword.size(); ++i)
    out << format_double(payload.codeword[i]) << (i + 1 == payload.codeword.size() ? '\n' : ' ');
  out << "triangles " << payload.base_graph.size() << '\n';
  for (const Tri& t : payload.base_graph) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "positions " << payload.carrier_positions.size() << '\n';
  for (const Vec3& p : payload.carrier_positions)
    out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("bottleneck write failure: " + path);
}

inline BottleneckPayload load_bottleneck(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bottleneck file: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kBottleneckMagic)
    throw std::runtime_error("bottleneck file: bad magic");
  if (version != kBottleneckVersion)
    throw std::runtime_error("bottleneck file: unsupported version");
  BottleneckPayload payload;
  std::string key;
  while (in >> key) {
    if (key == "grid_size") {
      in >> payload.grid_size;
    } else if (key == "grid_variant") {
      std::string v;
      in >> v;
      payload.grid_variant = grid_variant_from_string(v);
    } else if (key == "mode") {
      std::string v;
      in >> v;
      payload.mode = bottleneck_mode_from_string(v);
    } else if (key == "codeword") {
      std::size_t n = 0;
      in >> n;
      payload.codeword.resize(n);
      for (double& c : payload.codeword)
        if (!(in >> c)) throw std::runtime_error("bottleneck file: truncated codeword");
    } else if (key == "triangles") {
      std::size_t n = 0;
      in >> n;
      payload.base_graph.resize(n);
      for (Tri& t : payload.base_graph)
        if (!(in >> t[0] >> t[1] >> t[2]))
          throw std::runtime_error("bottleneck file: truncated triangle list");
    } else if (key == "positions") {
      std::size_t n = 0;
      in >> n;
      payload.carrier_positions.resize(n);
      for (Vec3& p : payload.carrier_positions)
        if (!(in >> p.x >> p.y >> p.z))
          throw std::runtime_error("bottleneck file: truncated positions");
    } else {
      throw std::runtime_error("bottleneck file: unknown section '" + key + "'");
    }
  }
  if (payload.codeword.empty() || payload.base_graph.empty())
    throw std::runtime_error("bottleneck file: missing codeword or triangles");
  return payload;
}

}  // namespace wrapnet
