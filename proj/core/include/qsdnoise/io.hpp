#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qsdnoise/analysis.hpp"
#include "qsdnoise/dynamics.hpp"
#include "qsdnoise/noise.hpp"

namespace qsdnoise {

/// Leading comment block of every emitted file. Wall-clock data lives only in
/// the run manifest so that data files stay byte-reproducible.
struct ProvenanceHeader {
  std::string code_version;
  std::string config_text;  ///< canonical serialized config
  std::uint64_t master_seed = 0;
  std::size_t excluded = 0;
  Provenance extra;         ///< result-level details (units, convention, ...)
};

/// The `# ...` comment block that opens every CSV.
std::string provenance_block(const ProvenanceHeader& header);

/// `%.17g`.
std::string format_number(double v);

std::string render_csv(const FidelityCurve& curve, const ProvenanceHeader& header);
std::string render_csv(const DensityCurve& curve, const ProvenanceHeader& header);
std::string render_csv(const SweepGrid& grid, std::size_t probe_index,
                       const ProvenanceHeader& header);
std::string render_csv(const MarkovScan& scan, const ProvenanceHeader& header);
std::string render_csv(const IntegrandSeries& series, const ProvenanceHeader& header);
std::string render_csv(const ConventionReport& report, const ProvenanceHeader& header);
/// Plateau onset per (J, probe time): columns J,t_probe,W_plateau.
std::string render_plateau_csv(const SweepGrid& grid, const ProvenanceHeader& header);

std::string render_json(const MomentsReport& shots, const OUStatistics& ou,
                        const ProvenanceHeader& header);
std::string render_json(const ConventionReport& report, const ProvenanceHeader& header);

std::string sha256_hex(const std::string& content);

/// Writes `content` to `path` via a temporary sibling and a rename.
/// Throws IoError with the path on failure.
template <typename Result, typename... Extra>
void emit_plotdata(const Result& result, const std::filesystem::path& path,
                   const ProvenanceHeader& header, Extra&&... extra);

void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Stages a run's files as `<name>.partial` and publishes them together.
/// Anything not committed is removed on destruction, so a failed run leaves
/// no final-named output behind.
class OutputSet {
 public:
  struct Entry {
    std::string name;
    std::string sha256;
    std::size_t bytes;
  };

  explicit OutputSet(std::filesystem::path dir);
  ~OutputSet();
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  void stage(const std::string& name, const std::string& content);
  /// Renames every staged file to its final name.
  void commit();

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<Entry> entries_;
  bool committed_ = false;
};

template <typename Result, typename... Extra>
void emit_plotdata(const Result& result, const std::filesystem::path& path,
                   const ProvenanceHeader& header, Extra&&... extra) {
  write_file_atomic(path, render_csv(result, std::forward<Extra>(extra)..., header));
}

}  // namespace qsdnoise
