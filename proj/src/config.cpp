// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#include "transfr/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <type_traits>
#include <variant>

#include "transfr/errors.hpp"

namespace transfr {
namespace {

template <typename... Ts>
using Members = std::variant<Ts ExperimentConfig::*...>;
using Field = std::conditional_t<
    std::is_same_v<std::size_t, std::uint64_t>,
    Members<int, std::size_t, double, bool, std::string, std::vector<double>>,
    Members<std::uint64_t, int, std::size_t, double, bool, std::string,
            std::vector<double>>>;

const std::vector<std::pair<std::string, Field>>& fields() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, Field>> f = {
      {"seed", &C::seed},
      {"threads", &C::threads},
      {"e", &C::e},
      {"f_enc", &C::f_enc},
      {"d", &C::d},
      {"adapter_layers", &C::adapter_layers},
      {"encoder_heads", &C::encoder_heads},
      {"encoder_layers", &C::encoder_layers},
      {"eta_c", &C::eta_c},
      {"eta_s", &C::eta_s},
      {"baseline_eta_s", &C::baseline_eta_s},
      {"n_negatives", &C::n_negatives},
      {"rounds", &C::rounds},
      {"fraction", &C::fraction},
      {"pap_epochs", &C::pap_epochs},
      {"target_epochs", &C::target_epochs},
      {"candidate_size", &C::candidate_size},
      {"k", &C::k},
      {"dp", &C::dp},
      {"dp_clip", &C::dp_clip},
      {"dp_sigma", &C::dp_sigma},
      {"dp_sigmas", &C::dp_sigmas},
      {"pretrain", &C::pretrain},
      {"fat", &C::fat},
      {"pap", &C::pap},
      {"source", &C::source},
      {"target", &C::target},
      {"cold", &C::cold},
      {"texts", &C::texts},
      {"embeddings", &C::embeddings},
      {"student", &C::student},
      {"min_user", &C::min_user},
      {"min_item", &C::min_item},
      {"synthetic_users", &C::synthetic_users},
      {"synthetic_items", &C::synthetic_items},
      {"synthetic_cold_items", &C::synthetic_cold_items},
      {"synthetic_topics", &C::synthetic_topics},
      {"synthetic_styles", &C::synthetic_styles},
      {"distill_teacher_layers", &C::distill_teacher_layers},
      {"distill_student_layers", &C::distill_student_layers},
      {"distill_teacher_dim", &C::distill_teacher_dim},
      {"distill_student_dim", &C::distill_student_dim},
      {"distill_heads", &C::distill_heads},
      {"distill_sequences", &C::distill_sequences},
      {"distill_vocab", &C::distill_vocab},
      {"distill_epochs", &C::distill_epochs},
      {"distill_lr", &C::distill_lr},
      {"theory_taus", &C::theory_taus},
      {"theory_l", &C::theory_l},
      {"theory_f", &C::theory_f},
      {"theory_d", &C::theory_d},
      {"theory_n", &C::theory_n},
      {"theory_iters", &C::theory_iters},
      {"theory_lr", &C::theory_lr},
  };
  return f;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

template <typename T>
  requires(std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
bool parse_value(const std::string& s, T& v) {
  return parse_number(s, v);
}
bool parse_value(const std::string& s, int& v) { return parse_number(s, v); }
bool parse_value(const std::string& s, double& v) {
  return parse_number(s, v) && std::isfinite(v);
}
bool parse_value(const std::string& s, bool& v) {
  if (s == "true" || s == "on" || s == "1") return v = true, true;
  if (s == "false" || s == "off" || s == "0") return v = false, true;
  return false;
}
bool parse_value(const std::string& s, std::string& v) {
  v = s;
  return true;
}
bool parse_value(const std::string& s, std::vector<double>& v) {
  v.clear();
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    double x = 0;
    if (!parse_value(trim(item), x)) return false;
    v.push_back(x);
  }
  return true;
}

std::string show(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
template <typename T>
  requires(std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
std::string show(T v) {
  return std::to_string(v);
}
std::string show(int v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(const std::string& v) { return v; }
std::string show(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += show(v[i]);
  }
  return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("key '" + key + "': " + what);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  require(c.threads >= 1, "threads", "must be >= 1");
  require(c.e >= 1, "e", "must be >= 1");
  require(c.f_enc >= 1, "f_enc", "must be >= 1");
  require(c.d >= 1 && c.d <= c.f_enc, "d", "must be in [1, f_enc]");
  require(c.adapter_layers >= 1, "adapter_layers", "must be >= 1");
  require(c.encoder_heads >= 1 && c.f_enc % c.encoder_heads == 0,
          "encoder_heads", "must divide f_enc");
  require(c.eta_c > 0, "eta_c", "must be > 0");
  require(c.eta_s > 0, "eta_s", "must be > 0");
  require(c.baseline_eta_s > 0, "baseline_eta_s", "must be > 0");
  require(c.rounds >= 1, "rounds", "must be >= 1");
  require(c.fraction > 0 && c.fraction <= 1, "fraction", "must be in (0, 1]");
  require(c.pap_epochs >= 0, "pap_epochs", "must be >= 0");
  require(c.target_epochs >= 0, "target_epochs", "must be >= 0");
  require(c.candidate_size != 1, "candidate_size", "must be 0 or >= 2");
  require(c.k >= 1, "k", "must be >= 1");
  require(c.dp_clip > 0, "dp_clip", "must be > 0");
  require(c.dp_sigma >= 0, "dp_sigma", "must be >= 0");
  require(!c.dp_sigmas.empty(), "dp_sigmas", "must not be empty");
  for (double s : c.dp_sigmas) require(s >= 0, "dp_sigmas", "entries must be >= 0");
  require(c.distill_student_layers >= 1 &&
              c.distill_teacher_layers >= c.distill_student_layers,
          "distill_student_layers", "must be in [1, distill_teacher_layers]");
  require(c.distill_heads >= 1 && c.distill_teacher_dim % c.distill_heads == 0 &&
              c.distill_student_dim % c.distill_heads == 0,
          "distill_heads", "must divide both distill dims");
  require(c.distill_epochs >= 0, "distill_epochs", "must be >= 0");
  require(c.distill_lr > 0, "distill_lr", "must be > 0");
  require(c.distill_vocab >= 2, "distill_vocab", "must be >= 2");
  require(!c.theory_taus.empty(), "theory_taus", "must not be empty");
  for (double t : c.theory_taus) require(t >= 0, "theory_taus", "entries must be >= 0");
  require(c.theory_l >= c.theory_f && c.theory_f >= c.theory_d && c.theory_d >= 1,
          "theory_d", "need theory_l >= theory_f >= theory_d >= 1");
  require(c.theory_n >= 1, "theory_n", "must be >= 1");
  require(c.theory_iters >= 1, "theory_iters", "must be >= 1");
  require(c.theory_lr > 0, "theory_lr", "must be > 0");
}

ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, Field> index(fields().begin(), fields().end());
  ExperimentConfig cfg;
  std::map<std::string, std::size_t> seen_at;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    auto it = index.find(key);
    if (it == index.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (auto [pos, fresh] = seen_at.emplace(key, lineno); !fresh) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                        "' already set on line " + std::to_string(pos->second));
    }
    const bool ok = std::visit(
        [&](auto member) { return parse_value(value, cfg.*member); }, it->second);
    if (!ok) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key +
                        "': cannot parse '" + value + "'");
    }
  }
  try {
    validate(cfg);
  } catch (const ConfigError& e) {
    // Point at the offending line when the key was set explicitly.
    const std::string msg = e.what();
    for (const auto& [key, at] : seen_at) {
      if (msg.rfind("key '" + key + "'", 0) == 0) {
        throw ConfigError("line " + std::to_string(at) + ": " + msg);
      }
    }
    throw;
  }
  return cfg;
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, field] : fields()) {
    out += key + " = " +
           std::visit([&](auto member) { return show(cfg.*member); }, field) + "\n";
  }
  return out;
}

}  // namespace transfr
