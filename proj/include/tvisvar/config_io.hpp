#pragma once

// Flat key-value configuration with sections:
//
//   [model]       N, p, M, deterministic, homoskedastic, prior_only, default_rows
//   [priors]      nu_B, nu_gamma_B, s_s_B, nu_s_B, nu_A, nu_gamma_A, s_s_A, nu_s_A,
//                 d_m, omega_shape, omega_scale
//   [chain]       draws, burnin, thin, seed, chains
//   [transforms]  <column> = none | log | logdiff | log100 | logdiff100
//   [patterns]    <equation> = <label> <code>    (1-based equation, repeatable)
//
// '#' and ';' start comments.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tvisvar/core_model.hpp"
#include "tvisvar/errors.hpp"

namespace tvisvar::config {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t hash = 0xcbf29ce484222325ULL) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex_digest(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

inline double to_double(const std::string& v, const std::string& key, std::size_t line) {
  double out = 0.0;
  if (!tvisvar::detail::parse_double(v, out))
    throw ParseError("'" + key + "' expects a number, got '" + v + "'", line, 0);
  return out;
}

inline std::uint64_t to_unsigned(const std::string& v, const std::string& key, std::size_t line) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ParseError("'" + key + "' expects a nonnegative integer, got '" + v + "'", line, 0);
  return out;
}

inline bool to_bool(const std::string& v, const std::string& key, std::size_t line) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("'" + key + "' expects true or false, got '" + v + "'", line, 0);
}

}  // namespace detail

/// Parses a configuration. When [model] N is absent, `N_hint` (usually the
/// number of series in the data) is used.
inline ModelConfig parse_config(std::istream& in, std::optional<std::size_t> N_hint = std::nullopt) {
  using detail::trim;
  ModelConfig cfg;
  std::optional<std::size_t> N;
  DefaultRows default_rows = DefaultRows::LowerTriangular;
  std::map<std::size_t, PatternDeclaration> declared;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no, 1);
      section = trim(line.substr(1, line.size() - 2));
      static const std::vector<std::string> known{"model", "priors", "chain", "transforms", "patterns"};
      if (std::find(known.begin(), known.end(), section) == known.end())
        throw ParseError("unknown section [" + section + "]", line_no, 1);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no, 1);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ParseError("key '" + key + "' outside of a section", line_no, 1);
    auto unknown = [&] { throw ParseError("unknown key '" + key + "' in [" + section + "]", line_no, 1); };
    auto num = [&] { return detail::to_double(value, key, line_no); };
    auto uint = [&] { return detail::to_unsigned(value, key, line_no); };
    if (section == "model") {
      if (key == "N") N = uint();
      else if (key == "p") cfg.p = uint();
      else if (key == "M") cfg.M = uint();
      else if (key == "deterministic") cfg.deterministic_columns = detail::split(value, ',');
      else if (key == "homoskedastic") cfg.homoskedastic = detail::to_bool(value, key, line_no);
      else if (key == "prior_only") cfg.prior_only = detail::to_bool(value, key, line_no);
      else if (key == "default_rows") {
        if (value == "lower") default_rows = DefaultRows::LowerTriangular;
        else if (value == "unrestricted") default_rows = DefaultRows::Unrestricted;
        else throw ParseError("default_rows must be lower or unrestricted", line_no, 0);
      } else unknown();
    } else if (section == "priors") {
      auto& P = cfg.priors;
      if (key == "nu_B") P.B.nu = num();
      else if (key == "nu_gamma_B") P.B.nu_gamma = num();
      else if (key == "s_s_B") P.B.s_s = num();
      else if (key == "nu_s_B") P.B.nu_s = num();
      else if (key == "nu_A") P.A.nu = num();
      else if (key == "nu_gamma_A") P.A.nu_gamma = num();
      else if (key == "s_s_A") P.A.s_s = num();
      else if (key == "nu_s_A") P.A.nu_s = num();
      else if (key == "d_m") P.d_m = num();
      else if (key == "omega_shape") P.omega_shape = num();
      else if (key == "omega_scale") P.omega_scale = num();
      else unknown();
    } else if (section == "chain") {
      auto& C = cfg.chain;
      if (key == "draws") C.draws = uint();
      else if (key == "burnin") C.burnin = uint();
      else if (key == "thin") C.thin = uint();
      else if (key == "seed") C.seed = uint();
      else if (key == "chains") C.chains = uint();
      else unknown();
    } else if (section == "transforms") {
      cfg.transforms[key] = Transform::parse(value);
    } else if (section == "patterns") {
      const auto eqn = detail::to_unsigned(key, "pattern equation", line_no);
      if (eqn == 0) throw ParseError("pattern equations are numbered from 1", line_no, 1);
      const auto parts = detail::split(value, ' ');
      std::string label, code;
      if (parts.size() == 1) {
        code = parts[0];
        label = code;
      } else if (parts.size() == 2) {
        label = parts[0];
        code = parts[1];
      } else {
        throw ParseError("pattern line must be '<equation> = [label] <code>'", line_no, 0);
      }
      declared[eqn - 1].emplace_back(label, code);
    }
  }
  if (!N) N = N_hint;
  if (!N) throw ValidationError("[model] N is required when no data are supplied");
  cfg.N = *N;
  cfg.d_dim = 1 + cfg.deterministic_columns.size();
  cfg.patterns = build_pattern_set(cfg.N, declared, default_rows);
  cfg.validate();
  return cfg;
}

inline ModelConfig parse_config_string(const std::string& text,
                                       std::optional<std::size_t> N_hint = std::nullopt) {
  std::istringstream in(text);
  return parse_config(in, N_hint);
}

inline ModelConfig load_config_file(const std::string& path,
                                    std::optional<std::size_t> N_hint = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  return parse_config(in, N_hint);
}

/// Canonical text of the model-defining sections (no [chain]); equal configs
/// give equal text.
inline std::string model_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "[model]\nN = " << cfg.N << "\np = " << cfg.p << "\nM = " << cfg.M << "\n";
  os << "deterministic = ";
  for (std::size_t i = 0; i < cfg.deterministic_columns.size(); ++i)
    os << (i ? ", " : "") << cfg.deterministic_columns[i];
  os << "\nhomoskedastic = " << (cfg.homoskedastic ? "true" : "false")
     << "\nprior_only = " << (cfg.prior_only ? "true" : "false") << "\n\n";
  const auto& P = cfg.priors;
  os << "[priors]\nnu_B = " << P.B.nu << "\nnu_gamma_B = " << P.B.nu_gamma << "\ns_s_B = " << P.B.s_s
     << "\nnu_s_B = " << P.B.nu_s << "\nnu_A = " << P.A.nu << "\nnu_gamma_A = " << P.A.nu_gamma
     << "\ns_s_A = " << P.A.s_s << "\nnu_s_A = " << P.A.nu_s << "\nd_m = " << P.d_m
     << "\nomega_shape = " << P.omega_shape << "\nomega_scale = " << P.omega_scale << "\n\n";
  os << "[transforms]\n";
  for (const auto& [name, t] : cfg.transforms) os << name << " = " << t.str() << "\n";
  os << "\n[patterns]\n";
  for (std::size_t n = 0; n < cfg.N; ++n)
    for (const auto& pat : cfg.patterns.equations[n])
      os << n + 1 << " = " << pat.label << " " << pat.code(cfg.N) << "\n";
  return os.str();
}

/// Full canonical text including [chain].
inline std::string config_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << model_text(cfg);
  const auto& C = cfg.chain;
  os << "\n[chain]\ndraws = " << C.draws << "\nburnin = " << C.burnin << "\nthin = " << C.thin
     << "\nseed = " << C.seed << "\nchains = " << C.chains << "\n";
  return os.str();
}

/// Digest of the model-defining configuration.
inline std::string config_digest(const ModelConfig& cfg) {
  const auto text = model_text(cfg);
  return hex_digest(fnv1a(text.data(), text.size()));
}

}  // namespace tvisvar::config
