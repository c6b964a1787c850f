#include "qsdnoise/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "qsdnoise/errors.hpp"

namespace qsdnoise {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::simulate: return "simulate";
    case Mode::sweep: return "sweep";
    case Mode::markov_scan: return "markov-scan";
    case Mode::washout: return "washout";
    case Mode::noise_test: return "noise-test";
    case Mode::crosscheck: return "crosscheck";
  }
  return "unknown";
}

std::optional<Mode> mode_from_string(std::string_view name) {
  for (Mode m : {Mode::simulate, Mode::sweep, Mode::markov_scan, Mode::washout,
                 Mode::noise_test, Mode::crosscheck}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

SystemParams ExperimentConfig::system() const {
  return SystemParams{omega, g, gamma, T()};
}

std::vector<std::string> preset_notes(std::string_view preset) {
  if (preset == "flux-qubit") {
    return {
        "flux-qubit preset: simulator units take omega = 1 and omega*T = 5.",
        "Physical mapping: omega ~ 1e9-1e10 Hz, relaxation time T1 ~ 1 us,",
        "time scale T ~ 5 ns (sometimes printed as '5 nm'; ns is assumed),",
        "so a noise strength J above ~1e9 Hz is needed to suppress decoherence.",
    };
  }
  return {};
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::optional<double> to_real(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::uint64_t> to_uint(const std::string& s) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::vector<double>> to_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string item = trim(std::string_view(s).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    const auto v = to_real(item);
    if (!v) return std::nullopt;
    out.push_back(*v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string list_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt(v[i]);
  }
  return out;
}

using Issues = std::vector<ConfigIssue>;

struct Field {
  const char* key;
  const char* type;  // shown in type-mismatch messages
  std::function<bool(ExperimentConfig&, const std::string&)> set;
  std::function<std::optional<std::string>(const ExperimentConfig&)> get;
};

template <typename T>
Field real_field(const char* key, T ExperimentConfig::*member) {
  return {key, "a number",
          [member](ExperimentConfig& c, const std::string& v) {
            const auto x = to_real(v);
            if (!x) return false;
            c.*member = *x;
            return true;
          },
          [member](const ExperimentConfig& c) -> std::optional<std::string> {
            if constexpr (std::is_same_v<T, std::optional<double>>) {
              if (!(c.*member)) return std::nullopt;
              return fmt(*(c.*member));
            } else {
              return fmt(c.*member);
            }
          }};
}

template <typename T>
Field count_field(const char* key, T ExperimentConfig::*member) {
  return {key, "a non-negative integer",
          [member](ExperimentConfig& c, const std::string& v) {
            const auto x = to_uint(v);
            if (!x) return false;
            c.*member = static_cast<T>(*x);
            return true;
          },
          [member](const ExperimentConfig& c) -> std::optional<std::string> {
            return std::to_string(c.*member);
          }};
}

Field list_field(const char* key, std::vector<double> ExperimentConfig::*member) {
  return {key, "a comma-separated list of numbers",
          [member](ExperimentConfig& c, const std::string& v) {
            const auto x = to_list(v);
            if (!x) return false;
            c.*member = *x;
            return true;
          },
          [member](const ExperimentConfig& c) -> std::optional<std::string> {
            if ((c.*member).empty()) return std::nullopt;
            return list_text(c.*member);
          }};
}

template <typename E>
Field enum_field(const char* key, const char* type, E ExperimentConfig::*member,
                 E (*parse)(std::string_view)) {
  return {key, type,
          [member, parse](ExperimentConfig& c, const std::string& v) {
            try {
              c.*member = parse(v);
              return true;
            } catch (const ParameterError&) {
              return false;
            }
          },
          [member](const ExperimentConfig& c) -> std::optional<std::string> {
            return std::string(to_string(c.*member));
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"mode", "one of simulate, sweep, markov-scan, washout, noise-test, crosscheck",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.mode = mode_from_string(v);
                   return c.mode.has_value();
                 },
                 [](const ExperimentConfig& c) -> std::optional<std::string> {
                   if (!c.mode) return std::nullopt;
                   return std::string(to_string(*c.mode));
                 }});
    f.push_back({"preset", "a preset name",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.preset = v;
                   return true;
                 },
                 [](const ExperimentConfig& c) -> std::optional<std::string> {
                   if (c.preset.empty()) return std::nullopt;
                   return c.preset;
                 }});
    f.push_back(real_field("omega", &ExperimentConfig::omega));
    f.push_back(real_field("omega_T", &ExperimentConfig::omega_T));
    f.push_back(real_field("g", &ExperimentConfig::g));
    f.push_back(real_field("gamma", &ExperimentConfig::gamma));
    f.push_back(real_field("J", &ExperimentConfig::J));
    f.push_back(real_field("W", &ExperimentConfig::W));
    f.push_back(enum_field("amplitude_law", "exponential or fixed",
                           &ExperimentConfig::amplitude_law, &amplitude_law_from_string));
    f.push_back(real_field("dt", &ExperimentConfig::dt));
    f.push_back(real_field("horizon", &ExperimentConfig::horizon));
    f.push_back(count_field("output_stride", &ExperimentConfig::output_stride));
    f.push_back(count_field("n_traj", &ExperimentConfig::n_traj));
    f.push_back(count_field("n_trains", &ExperimentConfig::n_trains));
    f.push_back(count_field("master_seed", &ExperimentConfig::master_seed));
    f.push_back(enum_field("train_policy", "shared or fresh", &ExperimentConfig::train_policy,
                           &train_policy_from_string));
    f.push_back(enum_field("fidelity_convention", "riccati or amplitude",
                           &ExperimentConfig::fidelity_convention,
                           &fidelity_convention_from_string));
    f.push_back({"density", "true or false",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "true") c.density = true;
                   else if (v == "false") c.density = false;
                   else return false;
                   return true;
                 },
                 [](const ExperimentConfig& c) -> std::optional<std::string> {
                   return std::string(c.density ? "true" : "false");
                 }});
    f.push_back(list_field("J_values", &ExperimentConfig::J_values));
    f.push_back(list_field("W_values", &ExperimentConfig::W_values));
    f.push_back(list_field("gamma_values", &ExperimentConfig::gamma_values));
    f.push_back(list_field("probe_times", &ExperimentConfig::probe_times));
    f.push_back(real_field("t_probe", &ExperimentConfig::t_probe));
    f.push_back(count_field("n_paths", &ExperimentConfig::n_paths));
    f.push_back(real_field("ou_dt", &ExperimentConfig::ou_dt));
    f.push_back(real_field("ou_length", &ExperimentConfig::ou_length));
    f.push_back(real_field("max_lag", &ExperimentConfig::max_lag));
    f.push_back(count_field("n_lags", &ExperimentConfig::n_lags));
    f.push_back(real_field("dt_gamma_bound", &ExperimentConfig::dt_gamma_bound));
    f.push_back(count_field("threads", &ExperimentConfig::threads));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& key) {
  for (const Field& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

void apply_preset(ExperimentConfig& c) {
  if (c.preset == "flux-qubit") {
    c.omega = 1.0;
    c.omega_T = 5.0;
  }
}

}  // namespace

std::vector<ConfigIssue> validate_config(const ExperimentConfig& c) {
  Issues issues;
  auto fail = [&](const char* key, std::string msg) { issues.push_back({key, std::move(msg)}); };
  auto positive = [&](const char* key, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, std::string(key) + " must be > 0, got " + fmt(v));
  };
  auto non_negative = [&](const char* key, double v) {
    if (!(v >= 0.0) || !std::isfinite(v))
      fail(key, std::string(key) + " must be non-negative (>= 0), got " + fmt(v));
  };

  if (!c.mode) fail("mode", "mode is required (config key or command-line subcommand)");
  if (!c.preset.empty() && c.preset != "flux-qubit")
    fail("preset", "unknown preset '" + c.preset + "' (known: flux-qubit)");

  positive("omega", c.omega);
  positive("omega_T", c.omega_T);
  non_negative("g", c.g);
  positive("gamma", c.gamma);
  if (c.J) non_negative("J", *c.J);
  if (c.W) non_negative("W", *c.W);
  for (double v : c.J_values) non_negative("J_values", v);
  for (double v : c.W_values) non_negative("W_values", v);
  for (double v : c.gamma_values) positive("gamma_values", v);
  for (double v : c.probe_times) positive("probe_times", v);
  positive("horizon", c.horizon);
  positive("t_probe", c.t_probe);
  positive("dt", c.dt);
  positive("ou_dt", c.ou_dt);
  positive("ou_length", c.ou_length);
  positive("max_lag", c.max_lag);
  positive("dt_gamma_bound", c.dt_gamma_bound);

  if (c.dt > 0.0 && c.omega > 0.0 && c.gamma > 0.0) {
    double max_gamma = c.gamma;
    for (double v : c.gamma_values) max_gamma = std::max(max_gamma, v);
    const double limit = std::min(0.01 / c.omega, 0.1 / max_gamma);
    if (c.dt > limit * (1.0 + 1e-12))
      fail("dt", "dt must be <= min(0.01/omega, 0.1/gamma) = " + fmt(limit) + ", got " + fmt(c.dt));
  }
  if (c.ou_dt > 0.0 && c.ou_dt * c.gamma > c.dt_gamma_bound)
    fail("ou_dt", "ou_dt * gamma = " + fmt(c.ou_dt * c.gamma) + " exceeds dt_gamma_bound " +
                      fmt(c.dt_gamma_bound));
  if (c.max_lag > c.ou_length) fail("max_lag", "max_lag must not exceed ou_length");
  if (c.output_stride < 1) fail("output_stride", "output_stride must be >= 1");
  if (c.n_traj < 2) fail("n_traj", "n_traj must be >= 2");
  if (c.n_trains < 1) fail("n_trains", "n_trains must be >= 1");
  if (c.n_lags < 2) fail("n_lags", "n_lags must be >= 2");

  if (c.mode) {
    switch (*c.mode) {
      case Mode::simulate:
        if (!c.J && c.J_values.empty()) fail("J", "simulate needs J or J_values");
        if (!c.W && c.W_values.empty()) fail("W", "simulate needs W or W_values");
        break;
      case Mode::markov_scan:
        if (!c.J) fail("J", "markov-scan needs J");
        if (!c.W) fail("W", "markov-scan needs W");
        if (!c.gamma_values.empty()) {
          const auto [lo, hi] = std::minmax_element(c.gamma_values.begin(), c.gamma_values.end());
          if (*hi < 10.0 * *lo * (1.0 - 1e-12))
            fail("gamma_values", "gamma_values must span at least one decade");
        }
        break;
      case Mode::washout:
        if (!c.W) fail("W", "washout needs W");
        break;
      case Mode::noise_test:
        if (!c.J) fail("J", "noise-test needs J");
        if (!c.W) fail("W", "noise-test needs W");
        if (c.n_paths < kMinMomentTrains)
          fail("n_paths", "noise-test needs n_paths >= " + std::to_string(kMinMomentTrains));
        break;
      case Mode::sweep:
      case Mode::crosscheck:
        break;
    }
  }
  return issues;
}

ParseResult parse_config(std::string_view text, std::optional<Mode> mode_override) {
  ParseResult result;
  Issues& issues = result.errors;

  struct Assignment {
    std::string key, value;
    std::size_t line;
  };
  std::vector<Assignment> assignments;
  std::map<std::string, std::size_t> seen;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({"", "line " + std::to_string(line_no) + ": expected 'key = value'"});
      continue;
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!find_field(key)) {
      issues.push_back({key, "line " + std::to_string(line_no) + ": unknown key '" + key + "'"});
      continue;
    }
    if (seen.count(key)) {
      issues.push_back({key, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'"});
      continue;
    }
    seen[key] = line_no;
    assignments.push_back({std::move(key), std::move(value), line_no});
  }

  ExperimentConfig& cfg = result.config;
  // The preset supplies defaults that explicit keys may override.
  for (const Assignment& a : assignments) {
    if (a.key == "preset") {
      cfg.preset = a.value;
      apply_preset(cfg);
    }
  }
  for (const Assignment& a : assignments) {
    if (a.key == "preset") continue;
    const Field* f = find_field(a.key);
    if (!f->set(cfg, a.value))
      issues.push_back({a.key, "line " + std::to_string(a.line) + ": " + a.key + " must be " +
                                   f->type + ", got '" + a.value + "'"});
  }
  if (mode_override) cfg.mode = mode_override;

  for (ConfigIssue& issue : validate_config(cfg)) issues.push_back(std::move(issue));
  return result;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const std::string& note : preset_notes(cfg.preset)) out += "# " + note + "\n";
  for (const Field& f : fields()) {
    if (const auto v = f.get(cfg)) out += std::string(f.key) + " = " + *v + "\n";
  }
  return out;
}

}  // namespace qsdnoise
