#pragma once

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "blockdiff/common.hpp"
#include "blockdiff/rng.hpp"
#include "blockdiff/synth/font.hpp"

namespace blockdiff::synth {

struct DatasetConfig {
  int vocab_size = 64;       // content tokens, excluding EOS and the mask sentinel
  int min_len = 24;
  int max_len = 96;
  double pixel_noise = 0.0;  // additive uniform noise half-width
  std::optional<int> newline_period;
  bool misaligned = false;   // merge adjacent glyph pairs into one patch
  int num_train = 4096;
  int num_eval = 256;
  uint64_t seed = 1;

  void validate() const {
    BD_REQUIRE(vocab_size >= 2, "vocab_size must be >= 2");
    BD_REQUIRE(min_len >= 1 && min_len <= max_len, "need 1 <= min_len <= max_len");
    BD_REQUIRE(pixel_noise >= 0.0, "pixel_noise must be >= 0");
    BD_REQUIRE(num_train >= 0 && num_eval >= 0, "dataset sizes must be >= 0");
    if (newline_period) BD_REQUIRE(*newline_period >= 2, "newline_period must be >= 2");
  }

  Vocab vocab() const { return Vocab{vocab_size}; }
};

inline void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size}, {"min_len", c.min_len},
                     {"max_len", c.max_len},       {"pixel_noise", c.pixel_noise},
                     {"misaligned", c.misaligned}, {"num_train", c.num_train},
                     {"num_eval", c.num_eval},     {"seed", c.seed}};
  if (c.newline_period) j["newline_period"] = *c.newline_period;
}

inline void from_json(const nlohmann::json& j, DatasetConfig& c) {
  static const char* known[] = {"vocab_size", "min_len",   "max_len",  "pixel_noise",
                                "misaligned", "num_train", "num_eval", "seed",
                                "newline_period"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return it.key() == k; }) == std::end(known)) {
      throw config_error("unknown dataset config key: " + it.key());
    }
  }
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("min_len").get_to(c.min_len);
  j.at("max_len").get_to(c.max_len);
  if (j.contains("pixel_noise")) j.at("pixel_noise").get_to(c.pixel_noise);
  if (j.contains("misaligned")) j.at("misaligned").get_to(c.misaligned);
  if (j.contains("num_train")) j.at("num_train").get_to(c.num_train);
  if (j.contains("num_eval")) j.at("num_eval").get_to(c.num_eval);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("newline_period")) c.newline_period = j.at("newline_period").get<int>();
}

// One rendered document: flattened noisy glyph bitmaps in reading order plus
// the EOS-terminated target token sequence. In the default aligned layout
// there is exactly one patch per content token.
struct SyntheticDocument {
  std::vector<float> patches;       // num_patches * kPatchDim
  std::vector<TokenId> targets;     // content tokens followed by EOS

  int num_patches() const { return static_cast<int>(patches.size()) / kPatchDim; }
  const float* patch(int i) const { return patches.data() + static_cast<size_t>(i) * kPatchDim; }

  // Content tokens only (everything before the trailing EOS).
  std::span<const TokenId> text() const {
    return {targets.data(), targets.size() - 1};
  }
};

struct Dataset {
  DatasetConfig config;
  std::vector<SyntheticDocument> train;
  std::vector<SyntheticDocument> eval;
};

namespace detail {

inline SyntheticDocument render_document(const DatasetConfig& cfg, const GlyphFont& font,
                                         Rng& rng) {
  const Vocab vocab = cfg.vocab();
  int len = cfg.min_len + static_cast<int>(rng.uniform_int(
                              static_cast<uint64_t>(cfg.max_len - cfg.min_len + 1)));
  SyntheticDocument doc;
  doc.targets.reserve(static_cast<size_t>(len) + 1);
  for (int i = 0; i < len; ++i) {
    TokenId tok;
    if (cfg.newline_period && (i + 1) % *cfg.newline_period == 0) {
      tok = static_cast<TokenId>(cfg.vocab_size - 1);  // line-break token
    } else {
      tok = static_cast<TokenId>(rng.uniform_int(static_cast<uint64_t>(cfg.vocab_size)));
    }
    doc.targets.push_back(tok);
  }
  doc.targets.push_back(static_cast<TokenId>(vocab.eos()));

  auto add_noise = [&](float v) {
    if (cfg.pixel_noise > 0.0) {
      v += static_cast<float>(rng.uniform(-cfg.pixel_noise, cfg.pixel_noise));
    }
    return std::clamp(v, -1.0f, 2.0f);
  };

  if (!cfg.misaligned) {
    doc.patches.resize(static_cast<size_t>(len) * kPatchDim);
    for (int i = 0; i < len; ++i) {
      auto clean = font.patch(doc.targets[static_cast<size_t>(i)]);
      for (int p = 0; p < kPatchDim; ++p) {
        doc.patches[static_cast<size_t>(i) * kPatchDim + p] = add_noise(clean[static_cast<size_t>(p)]);
      }
    }
  } else {
    // Each patch averages two adjacent glyphs, so one patch accounts for two
    // output tokens and the patch index no longer matches the token index.
    int num_patches = (len + 1) / 2;
    doc.patches.resize(static_cast<size_t>(num_patches) * kPatchDim);
    for (int i = 0; i < num_patches; ++i) {
      auto a = font.patch(doc.targets[static_cast<size_t>(2 * i)]);
      auto b = 2 * i + 1 < len ? font.patch(doc.targets[static_cast<size_t>(2 * i + 1)]) : a;
      for (int p = 0; p < kPatchDim; ++p) {
        float merged = 0.5f * (a[static_cast<size_t>(p)] + b[static_cast<size_t>(p)]);
        doc.patches[static_cast<size_t>(i) * kPatchDim + p] = add_noise(merged);
      }
    }
  }
  return doc;
}

}  // namespace detail

inline Dataset generate(const DatasetConfig& cfg) {
  cfg.validate();
  Dataset ds;
  ds.config = cfg;
  GlyphFont font = build_font(cfg.vocab_size, cfg.seed);
  Rng base(cfg.seed);
  Rng train_rng = base.stream(0x747261696e);  // "train"
  Rng eval_rng = base.stream(0x6576616c);     // "eval"
  ds.train.reserve(static_cast<size_t>(cfg.num_train));
  for (int i = 0; i < cfg.num_train; ++i) {
    ds.train.push_back(detail::render_document(cfg, font, train_rng));
  }
  ds.eval.reserve(static_cast<size_t>(cfg.num_eval));
  for (int i = 0; i < cfg.num_eval; ++i) {
    ds.eval.push_back(detail::render_document(cfg, font, eval_rng));
  }
  return ds;
}

// --- serialization ---------------------------------------------------------
//
// Layout (little-endian):
//   magic "BDSYND\0\0" | u32 version | u32 json_len | config json |
//   u64 train_count | records | u64 eval_count | records
// record: u32 num_tokens | u32 num_patch_floats | tokens i32[] | patches f32[]

namespace detail {

inline constexpr char kDatasetMagic[8] = {'B', 'D', 'S', 'Y', 'N', 'D', 0, 0};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void raw(void* dst, size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n) {
      throw io_error("dataset file truncated at byte offset " + std::to_string(offset_));
    }
    offset_ += n;
  }

  template <typename T>
  T scalar() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }

  size_t offset() const { return offset_; }

 private:
  std::istream& in_;
  size_t offset_ = 0;
};

inline void write_document(std::ostream& out, const SyntheticDocument& doc) {
  uint32_t nt = static_cast<uint32_t>(doc.targets.size());
  uint32_t np = static_cast<uint32_t>(doc.patches.size());
  out.write(reinterpret_cast<const char*>(&nt), 4);
  out.write(reinterpret_cast<const char*>(&np), 4);
  out.write(reinterpret_cast<const char*>(doc.targets.data()), nt * 4);
  out.write(reinterpret_cast<const char*>(doc.patches.data()), np * 4);
}

inline SyntheticDocument read_document(Reader& r) {
  SyntheticDocument doc;
  uint32_t nt = r.scalar<uint32_t>();
  uint32_t np = r.scalar<uint32_t>();
  if (nt == 0 || nt > (1u << 24) || np > (1u << 28) || np % kPatchDim != 0) {
    throw io_error("corrupt dataset record header at byte offset " +
                   std::to_string(r.offset() - 8));
  }
  doc.targets.resize(nt);
  doc.patches.resize(np);
  r.raw(doc.targets.data(), nt * 4);
  r.raw(doc.patches.data(), np * 4);
  return doc;
}

}  // namespace detail

inline void serialize(const Dataset& ds, std::ostream& out) {
  static_assert(std::endian::native == std::endian::little,
                "dataset format assumes a little-endian host");
  out.write(detail::kDatasetMagic, 8);
  uint32_t version = kDatasetFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::string cfg = nlohmann::json(ds.config).dump();
  uint32_t json_len = static_cast<uint32_t>(cfg.size());
  out.write(reinterpret_cast<const char*>(&json_len), 4);
  out.write(cfg.data(), json_len);
  uint64_t n = ds.train.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  for (const auto& d : ds.train) detail::write_document(out, d);
  n = ds.eval.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  for (const auto& d : ds.eval) detail::write_document(out, d);
  if (!out) throw io_error("dataset write failed");
}

inline Dataset deserialize(std::istream& in) {
  detail::Reader r(in);
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, detail::kDatasetMagic, 8) != 0) {
    throw io_error("not a dataset file (bad magic at byte offset 0)");
  }
  uint32_t version = r.scalar<uint32_t>();
  if (version != kDatasetFormatVersion) {
    throw io_error("dataset format version mismatch: file has " + std::to_string(version) +
                   ", expected " + std::to_string(kDatasetFormatVersion));
  }
  uint32_t json_len = r.scalar<uint32_t>();
  if (json_len > (1u << 20)) throw io_error("dataset header json too large");
  std::string cfg(json_len, '\0');
  r.raw(cfg.data(), json_len);
  Dataset ds;
  try {
    ds.config = nlohmann::json::parse(cfg).get<DatasetConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("corrupt dataset config header: ") + e.what());
  }
  for (auto* split : {&ds.train, &ds.eval}) {
    uint64_t n = r.scalar<uint64_t>();
    if (n > (1u << 26)) {
      throw io_error("corrupt dataset record count at byte offset " +
                     std::to_string(r.offset() - 8));
    }
    split->reserve(n);
    for (uint64_t i = 0; i < n; ++i) split->push_back(detail::read_document(r));
  }
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for write: " + path);
  serialize(ds, out);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open dataset: " + path);
  return deserialize(in);
}

}  // namespace blockdiff::synth
