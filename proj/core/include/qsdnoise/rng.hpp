#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace qsdnoise {

/// Addressable random substream.
///
/// A stream is identified by a master seed and a path of indices; the engine
/// it hands out is a pure function of that identity, so trajectory `i` of an
/// ensemble draws the same numbers no matter which worker runs it or in what
/// order. Streams are cheap value types and can be copied across threads.
class RngStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_index = 0);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  /// First index of the path (the per-trajectory index for top-level streams).
  std::uint64_t stream_index() const noexcept { return path_.front(); }
  const std::vector<std::uint64_t>& path() const noexcept { return path_; }

  /// Child stream `index` below this one.
  RngStream substream(std::uint64_t index) const;
  RngStream substream(std::initializer_list<std::uint64_t> indices) const;

  /// Fresh engine positioned at the start of this stream.
  engine_type engine() const;

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t master_seed_;
  std::vector<std::uint64_t> path_;
};

}  // namespace qsdnoise
