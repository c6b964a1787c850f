#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qsdnoise/config.hpp"

namespace qsdnoise {

enum class ExitCode : int {
  ok = 0,
  failure = 1,     ///< unexpected internal error
  validation = 2,  ///< bad configuration or parameters
  divergence = 3,  ///< divergence budget exceeded
  io = 4,          ///< output could not be written
};

struct RunOptions {
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;      ///< overrides master_seed
  std::optional<std::size_t> threads;     ///< overrides threads
};

struct RunReport {
  ExitCode code = ExitCode::ok;
  std::vector<std::string> files;  ///< published names, manifest last
  std::string message;
};

/// Dispatches `config.mode`, then publishes every output together with a
/// `manifest.json` listing SHA-256 checksums. Nothing is published unless the
/// whole run succeeds.
RunReport run(ExperimentConfig config, const RunOptions& options, std::ostream& log);

}  // namespace qsdnoise
