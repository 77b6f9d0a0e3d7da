#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace blockdiff {

// File format versions. Bumped on any incompatible layout change; loaders
// refuse mismatched versions instead of reinterpreting.
inline constexpr uint32_t kCheckpointFormatVersion = 1;
inline constexpr uint32_t kDatasetFormatVersion = 1;
inline constexpr uint32_t kTraceFormatVersion = 1;
inline constexpr uint32_t kReportFormatVersion = 1;

using TokenId = int32_t;

// Bad user-supplied configuration (CLI exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Request is inconsistent with the model, e.g. an exact cache on a
// bidirectional checkpoint (CLI exit code 3).
struct incompat_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Corrupt or unreadable files, failed invariants at runtime (CLI exit code 4).
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define BD_REQUIRE(cond, msg)                      \
  do {                                             \
    if (!(cond)) throw ::blockdiff::config_error(msg); \
  } while (0)

#define BD_CHECK(cond, msg)                            \
  do {                                                 \
    if (!(cond)) throw ::std::runtime_error(msg);      \
  } while (0)

// Token id layout shared by the synthetic task and the model:
// [0, content) are content tokens, then EOS, then the mask sentinel.
// The mask sentinel is input-only; model output heads never score it.
struct Vocab {
  int content = 0;

  int eos() const { return content; }
  int mask() const { return content + 1; }
  int total() const { return content + 2; }   // embedding rows
  int out() const { return content + 1; }     // logit columns (content + EOS)

  static Vocab from_total(int total_size) {
    BD_REQUIRE(total_size >= 3, "vocab_size must be >= 3");
    return Vocab{total_size - 2};
  }
};

}  // namespace blockdiff
