#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "blockdiff/nn/model.hpp"

namespace blockdiff::nn {

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"embed_dim", c.embed_dim},
                     {"num_heads", c.num_heads},
                     {"num_layers", c.num_layers},
                     {"max_positions", c.max_positions},
                     {"image_token_dim", c.image_token_dim},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("embed_dim").get_to(c.embed_dim);
  j.at("num_heads").get_to(c.num_heads);
  j.at("num_layers").get_to(c.num_layers);
  j.at("max_positions").get_to(c.max_positions);
  j.at("image_token_dim").get_to(c.image_token_dim);
  j.at("seed").get_to(c.seed);
}

inline void to_json(nlohmann::json& j, const AttentionRegime& r) {
  j = nlohmann::json{{"tag", to_string(r.tag)}, {"block_size", r.block_size}};
}

inline void from_json(const nlohmann::json& j, AttentionRegime& r) {
  r.tag = regime_tag_from_string(j.at("tag").get<std::string>());
  j.at("block_size").get_to(r.block_size);
}

// Checkpoint layout (little-endian):
//   magic "BDCKPT\0\0" | u32 version | u32 json_len | header json |
//   f32 payload (segments in header order)
namespace detail {
inline constexpr char kCheckpointMagic[8] = {'B', 'D', 'C', 'K', 'P', 'T', 0, 0};
}

inline void save_checkpoint(const ModelState& m, const std::string& path) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint format assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open checkpoint for write: " + path);

  nlohmann::json header;
  header["config"] = m.config;
  header["regime"] = m.regime;
  header["step_count"] = m.step_count;
  auto segs = nlohmann::json::array();
  for (const auto& s : m.params.segments()) {
    segs.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
  }
  header["segments"] = segs;

  out.write(detail::kCheckpointMagic, 8);
  uint32_t version = kCheckpointFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::string h = header.dump();
  uint32_t hlen = static_cast<uint32_t>(h.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(h.data(), hlen);
  for (const ParamStore* store : {&m.params, &m.moment1, &m.moment2}) {
    out.write(reinterpret_cast<const char*>(store->data().data()),
              static_cast<std::streamsize>(store->size() * 4));
  }
  if (!out) throw io_error("checkpoint write failed: " + path);
}

inline ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0) {
    throw io_error("not a checkpoint file: " + path);
  }
  uint32_t version = 0, hlen = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kCheckpointFormatVersion) {
    throw io_error("checkpoint format version mismatch: file has " + std::to_string(version) +
                   ", expected " + std::to_string(kCheckpointFormatVersion));
  }
  in.read(reinterpret_cast<char*>(&hlen), 4);
  if (!in || hlen > (1u << 24)) throw io_error("corrupt checkpoint header: " + path);
  std::string h(hlen, '\0');
  in.read(h.data(), hlen);
  if (!in) throw io_error("truncated checkpoint header: " + path);

  nlohmann::json header;
  ModelState m;
  try {
    header = nlohmann::json::parse(h);
    m.config = header.at("config").get<ModelConfig>();
    m.regime = header.at("regime").get<AttentionRegime>();
    m.step_count = header.at("step_count").get<int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("corrupt checkpoint header: ") + e.what());
  }
  m.config.validate();
  m.regime.validate();

  auto segs = model_segments(m.config);
  // Cross-check the stored segment table against the reconstructed layout.
  const auto& jsegs = header.at("segments");
  if (jsegs.size() != segs.size()) throw io_error("checkpoint segment table mismatch");
  for (size_t i = 0; i < segs.size(); ++i) {
    if (jsegs[i].at("name").get<std::string>() != segs[i].name ||
        jsegs[i].at("rows").get<int>() != segs[i].rows ||
        jsegs[i].at("cols").get<int>() != segs[i].cols) {
      throw io_error("checkpoint segment table mismatch at " + segs[i].name);
    }
  }
  m.params = ParamStore(segs);
  m.moment1 = ParamStore(segs);
  m.moment2 = ParamStore(segs);
  for (ParamStore* store : {&m.params, &m.moment1, &m.moment2}) {
    in.read(reinterpret_cast<char*>(store->data().data()),
            static_cast<std::streamsize>(store->size() * 4));
    if (static_cast<size_t>(in.gcount()) != store->size() * 4) {
      throw io_error("truncated checkpoint payload: " + path);
    }
  }
  return m;
}

}  // namespace blockdiff::nn
