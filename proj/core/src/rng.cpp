#include "qsdnoise/rng.hpp"

namespace qsdnoise {

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : master_seed_(master_seed), path_{stream_index} {}

RngStream RngStream::substream(std::uint64_t index) const {
  RngStream child = *this;
  child.path_.push_back(index);
  return child;
}

RngStream RngStream::substream(std::initializer_list<std::uint64_t> indices) const {
  RngStream child = *this;
  child.path_.insert(child.path_.end(), indices.begin(), indices.end());
  return child;
}

RngStream::engine_type RngStream::engine() const {
  // seed_seq consumes 32-bit words; the path length is mixed in so that
  // (a, b) and (a, b, 0) address different streams.
  std::vector<std::uint32_t> words;
  words.reserve(3 + 2 * path_.size());
  words.push_back(static_cast<std::uint32_t>(master_seed_));
  words.push_back(static_cast<std::uint32_t>(master_seed_ >> 32));
  words.push_back(static_cast<std::uint32_t>(path_.size()));
  for (std::uint64_t index : path_) {
    words.push_back(static_cast<std::uint32_t>(index));
    words.push_back(static_cast<std::uint32_t>(index >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return engine_type(seq);
}

}  // namespace qsdnoise
