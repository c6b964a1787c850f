#include "qsdnoise/io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsdnoise/errors.hpp"

namespace qsdnoise {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

class CsvWriter {
 public:
  explicit CsvWriter(const ProvenanceHeader& h) {
    out_ << "# qsdnoise " << h.code_version << "\n";
    out_ << "# master_seed: " << h.master_seed << "\n";
    out_ << "# excluded_trajectories: " << h.excluded << "\n";
    for (const auto& [k, v] : h.extra) out_ << "# " << k << ": " << v << "\n";
    out_ << "# config:\n";
    std::istringstream cfg(h.config_text);
    for (std::string line; std::getline(cfg, line);) out_ << "#   " << line << "\n";
  }

  void header(std::initializer_list<const char*> cols) {
    bool first = true;
    for (const char* c : cols) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
  }

  CsvWriter& cell(double v) {
    sep();
    out_ << format_number(v);
    return *this;
  }
  CsvWriter& cell(std::size_t v) {
    sep();
    out_ << v;
    return *this;
  }
  void end_row() {
    out_ << '\n';
    fresh_ = true;
  }

  std::string str() const { return out_.str(); }

 private:
  void sep() {
    if (!fresh_) out_ << ',';
    fresh_ = false;
  }

  std::ostringstream out_;
  bool fresh_ = true;
};

ordered_json header_json(const ProvenanceHeader& h) {
  ordered_json j;
  j["code_version"] = h.code_version;
  j["master_seed"] = h.master_seed;
  j["excluded_trajectories"] = h.excluded;
  for (const auto& [k, v] : h.extra) j[k] = v;
  j["config"] = h.config_text;
  return j;
}

// JSON has no NaN; keep the field but mark it null.
ordered_json number_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

}  // namespace

std::string provenance_block(const ProvenanceHeader& header) { return CsvWriter(header).str(); }

std::string render_csv(const FidelityCurve& curve, const ProvenanceHeader& header) {
  CsvWriter w(header);
  w.header({"t", "F", "stderr"});
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    w.cell(curve.times[i]).cell(curve.values[i]).cell(curve.stderr.empty() ? 0.0 : curve.stderr[i]);
    w.end_row();
  }
  return w.str();
}

std::string render_csv(const DensityCurve& curve, const ProvenanceHeader& header) {
  CsvWriter w(header);
  w.header({"t", "rho11", "rho00", "Re_rho10", "Im_rho10", "stderr_rho11", "stderr_rho00",
            "stderr_rho10"});
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const Matrix2& r = curve.rho[i];
    w.cell(curve.times[i]).cell(r[0].real()).cell(r[3].real()).cell(r[2].real()).cell(r[2].imag());
    w.cell(curve.stderr[i][0]).cell(curve.stderr[i][3]).cell(curve.stderr[i][2]);
    w.end_row();
  }
  return w.str();
}

std::string render_csv(const SweepGrid& grid, std::size_t probe_index,
                       const ProvenanceHeader& header) {
  CsvWriter w(header);
  w.header({"J", "W", "t_probe", "F", "stderr", "above_0.99", "n_traj"});
  for (std::size_t j = 0; j < grid.J_values.size(); ++j) {
    for (std::size_t k = 0; k < grid.W_values.size(); ++k) {
      const std::size_t idx = grid.index(j, k, probe_index);
      w.cell(grid.J_values[j]).cell(grid.W_values[k]).cell(grid.probe_times[probe_index]);
      w.cell(grid.fidelity[idx]).cell(grid.stderr[idx]);
      w.cell(std::size_t{grid.above(j, k, probe_index) ? 1u : 0u});
      w.cell(grid.n_traj[j * grid.W_values.size() + k]);
      w.end_row();
    }
  }
  return w.str();
}

std::string render_plateau_csv(const SweepGrid& grid, const ProvenanceHeader& header) {
  CsvWriter w(header);
  w.header({"J", "t_probe", "W_plateau"});
  for (std::size_t j = 0; j < grid.J_values.size(); ++j) {
    for (std::size_t t = 0; t < grid.probe_times.size(); ++t) {
      const auto onset = grid.plateau_onset(j, t);
      w.cell(grid.J_values[j]).cell(grid.probe_times[t]).cell(onset ? *onset : std::nan(""));
      w.end_row();
    }
  }
  return w.str();
}

std::string render_csv(const MarkovScan& scan, const ProvenanceHeader& header) {
  CsvWriter w(header);
  w.header({"gamma", "F_noise", "F_free", "gain"});
  for (std::size_t i = 0; i < scan.gamma_values.size(); ++i) {
    w.cell(scan.gamma_values[i]).cell(scan.F_noise[i]).cell(scan.F_free[i]).cell(scan.gain[i]);
    w.end_row();
  }
  return w.str();
}

std::string render_csv(const IntegrandSeries& s, const ProvenanceHeader& header) {
  CsvWriter w(header);
  w.header({"t", "Re_N", "Im_N", "Re_h", "Im_h", "Re_I", "Im_I"});
  for (std::size_t i = 0; i < s.times.size(); ++i) {
    w.cell(s.times[i]).cell(s.N[i].real()).cell(s.N[i].imag()).cell(s.h[i].real());
    w.cell(s.h[i].imag()).cell(s.partial_integral[i].real()).cell(s.partial_integral[i].imag());
    w.end_row();
  }
  return w.str();
}

std::string render_csv(const ConventionReport& r, const ProvenanceHeader& header) {
  CsvWriter w(header);
  w.header({"t", "log_F_riccati", "log_F_amplitude", "ratio"});
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    w.cell(r.times[i]).cell(r.log_f_riccati[i]).cell(r.log_f_amplitude[i]).cell(r.ratio[i]);
    w.end_row();
  }
  return w.str();
}

std::string render_json(const MomentsReport& shots, const OUStatistics& ou,
                        const ProvenanceHeader& header) {
  ordered_json j;
  j["provenance"] = header_json(header);

  ordered_json s;
  s["n_trains"] = shots.n_trains;
  s["n_kicks"] = shots.n_kicks;
  s["horizon"] = shots.horizon;
  s["J"] = shots.target.J;
  s["W"] = shots.target.W;
  s["amplitude_law"] = std::string(to_string(shots.target.law));
  s["rate"] = {{"value", shots.rate}, {"stderr", shots.rate_stderr}, {"target", shots.target_rate()}};
  s["amplitude_mean"] = {{"value", shots.amplitude_mean},
                         {"stderr", shots.amplitude_mean_stderr},
                         {"target", shots.target.J}};
  s["amplitude_second_moment"] = {{"value", shots.amplitude_second_moment},
                                  {"stderr", shots.amplitude_second_moment_stderr},
                                  {"target", shots.target.second_moment()}};
  s["mean_c"] = {{"value", shots.mean_c},
                 {"stderr", shots.mean_c_stderr},
                 {"target", shots.target_mean_c()}};
  s["checks"] = {{"rate_within_2pct", shots.rate_within(0.02)},
                 {"amplitude_mean_within_2pct", shots.amplitude_mean_within(0.02)},
                 {"second_moment_within_5pct", shots.second_moment_within(0.05)},
                 {"mean_c_within_3sigma", shots.mean_c_within_sigma(3.0)}};
  j["shot_noise"] = s;

  ordered_json o;
  o["gamma"] = ou.params.gamma;
  o["dt"] = ou.params.dt;
  o["n_steps"] = ou.params.n_steps;
  o["n_paths"] = ou.n_paths;
  o["relative_rms_error"] = ou.relative_rms_error;
  ordered_json lags = ordered_json::array();
  for (std::size_t i = 0; i < ou.lags.size(); ++i) {
    lags.push_back({{"lag", ou.lags[i]},
                    {"re", ou.autocorrelation[i].real()},
                    {"im", ou.autocorrelation[i].imag()},
                    {"target", ou.target[i]}});
  }
  o["autocorrelation"] = lags;
  ordered_json probes = ordered_json::array();
  for (std::size_t i = 0; i < ou.probe_times.size(); ++i) {
    probes.push_back({{"t", ou.probe_times[i]},
                      {"mean_re", ou.mean[i].real()},
                      {"mean_im", ou.mean[i].imag()},
                      {"mean_stderr", ou.mean_stderr[i]},
                      {"second_moment", ou.second_moment[i]},
                      {"second_moment_stderr", ou.second_moment_stderr[i]}});
  }
  o["probes"] = probes;
  o["checks"] = {{"autocorrelation_rms_below_5pct", ou.relative_rms_error < 0.05},
                 {"mean_within_3sigma", ou.mean_consistent_with_zero(3.0)},
                 {"stationary_within_5pct", ou.stationary_within(0.05)}};
  j["environment_noise"] = o;

  const bool pass = shots.rate_within(0.02) && shots.amplitude_mean_within(0.02) &&
                    shots.mean_c_within_sigma(3.0) && ou.relative_rms_error < 0.05 &&
                    ou.mean_consistent_with_zero(3.0);
  j["pass"] = pass;
  return j.dump(2) + "\n";
}

std::string render_json(const ConventionReport& r, const ProvenanceHeader& header) {
  ordered_json j;
  j["provenance"] = header_json(header);
  j["g"] = r.g;
  j["tolerance"] = r.tolerance;
  j["mean_ratio"] = number_or_null(r.mean_ratio);
  j["max_deviation_from_g"] = number_or_null(r.max_deviation);
  j["ratio_equals_g"] = r.ratio_equals_g;
  j["conventions_coincide"] = r.conventions_coincide;
  j["selected_convention"] = std::string(to_string(r.selected));
  return j.dump(2) + "\n";
}

std::string sha256_hex(const std::string& content) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

namespace {

void write_raw(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

fs::path partial_path(const fs::path& path) {
  fs::path p = path;
  p += ".partial";
  return p;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = partial_path(path);
  try {
    write_raw(tmp, content);
    fs::rename(tmp, path);
  } catch (const fs::filesystem_error& e) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw IoError("cannot publish " + path.string() + ": " + e.what());
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

OutputSet::OutputSet(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

OutputSet::~OutputSet() {
  if (committed_) return;
  for (const Entry& e : entries_) {
    std::error_code ec;
    fs::remove(partial_path(dir_ / e.name), ec);
  }
}

void OutputSet::stage(const std::string& name, const std::string& content) {
  write_raw(partial_path(dir_ / name), content);
  entries_.push_back({name, sha256_hex(content), content.size()});
}

void OutputSet::commit() {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::error_code ec;
    fs::rename(partial_path(dir_ / entries_[i].name), dir_ / entries_[i].name, ec);
    if (ec) {
      const std::string reason = ec.message();
      // Withdraw what was already published so the run leaves no final files.
      for (std::size_t k = 0; k < i; ++k) fs::remove(dir_ / entries_[k].name, ec);
      throw IoError("cannot publish " + (dir_ / entries_[i].name).string() + ": " + reason);
    }
  }
  committed_ = true;
}

}  // namespace qsdnoise
