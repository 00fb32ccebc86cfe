#include "run_config.h"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "sqdr/error.h"

namespace sqdr {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double ToDouble(const std::string& v, bool* ok) {
  size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  *ok = used != 0 && used == v.size() && std::isfinite(x);
  return x;
}

using Setter = std::function<bool(RunConfig&, const std::string&)>;

template <typename T>
Setter Int(T* (*get)(RunConfig&)) {
  return [get](RunConfig& c, const std::string& v) {
    bool ok = false;
    const double x = ToDouble(v, &ok);
    if (!ok || x != std::floor(x) || std::abs(x) > 2147483647.0) return false;
    *get(c) = static_cast<T>(x);
    return true;
  };
}

Setter Dbl(double* (*get)(RunConfig&)) {
  return [get](RunConfig& c, const std::string& v) {
    bool ok = false;
    *get(c) = ToDouble(v, &ok);
    return ok;
  };
}

const std::map<std::string, Setter>& Setters() {
  static const std::map<std::string, Setter> table = {
      {"data.train",
       [](RunConfig& c, const std::string& v) { c.train_data = v; return !v.empty(); }},
      {"data.val",
       [](RunConfig& c, const std::string& v) { c.val_data = v; return !v.empty(); }},
      {"frontend.n_filters", Int<int>([](RunConfig& c) { return &c.model.frontend.n_filters; })},
      {"frontend.half_len", Int<int>([](RunConfig& c) { return &c.model.frontend.half_len; })},
      {"frontend.frame_len", Int<int>([](RunConfig& c) { return &c.model.frontend.frame_len; })},
      {"frontend.hop_len", Int<int>([](RunConfig& c) { return &c.model.frontend.hop_len; })},
      {"frontend.sample_rate",
       Int<int>([](RunConfig& c) { return &c.model.frontend.sample_rate; })},
      {"frontend.log_floor", Dbl([](RunConfig& c) { return &c.model.frontend.log_floor; })},
      {"model.channels", Int<int>([](RunConfig& c) { return &c.model.channels; })},
      {"model.n_encoders", Int<int>([](RunConfig& c) { return &c.model.n_encoders; })},
      {"model.patch", Int<int>([](RunConfig& c) { return &c.model.patch; })},
      {"model.groups", Int<int>([](RunConfig& c) { return &c.model.groups; })},
      {"train.epochs", Int<int>([](RunConfig& c) { return &c.train.epochs; })},
      {"train.batch_size", Int<int>([](RunConfig& c) { return &c.train.batch_size; })},
      {"train.peak_lr", Dbl([](RunConfig& c) { return &c.train.peak_lr; })},
      {"train.warmup_frac", Dbl([](RunConfig& c) { return &c.train.warmup_frac; })},
      {"train.hold_frac", Dbl([](RunConfig& c) { return &c.train.hold_frac; })},
      {"train.decay_power", Dbl([](RunConfig& c) { return &c.train.decay_power; })},
      {"train.shift_prob", Dbl([](RunConfig& c) { return &c.train.shift_prob; })},
      {"train.shift_ms", Dbl([](RunConfig& c) { return &c.train.shift_ms; })},
      {"train.noise_db_lo", Dbl([](RunConfig& c) { return &c.train.noise_db_lo; })},
      {"train.noise_db_hi", Dbl([](RunConfig& c) { return &c.train.noise_db_hi; })},
      {"train.window_s", Dbl([](RunConfig& c) { return &c.train.window_s; })},
      {"train.val_stride_s", Dbl([](RunConfig& c) { return &c.train.val_stride_s; })},
      {"train.seed",
       [](RunConfig& c, const std::string& v) {
         if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) return false;
         try {
           c.train.seed = std::stoull(v);
         } catch (const std::logic_error&) {
           return false;
         }
         return true;
       }},
      {"train.record_wall_time",
       [](RunConfig& c, const std::string& v) {
         if (v != "true" && v != "false") return false;
         c.train.record_wall_time = v == "true";
         return true;
       }},
      {"loss.lambda", Dbl([](RunConfig& c) { return &c.train.lambda; })},
      {"loss.margin", Dbl([](RunConfig& c) { return &c.train.margin; })},
  };
  return table;
}

}  // namespace

RunConfig ParseRunConfig(const std::string& text, const std::string& origin) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = Trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::string at = origin + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidConfig, at + "expected 'key = value'");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    const auto it = Setters().find(key);
    if (it == Setters().end()) {
      throw Error(ErrorKind::kInvalidConfig, at + "unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw Error(ErrorKind::kInvalidConfig, at + "duplicate key '" + key + "'");
    }
    if (!it->second(config, value)) {
      throw Error(ErrorKind::kInvalidConfig, at + "bad value '" + value + "' for '" + key + "'");
    }
  }
  if (config.train_data.empty()) {
    throw Error(ErrorKind::kInvalidConfig, origin + ": missing data.train");
  }
  config.model.Validate();
  config.train.Validate();
  return config;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kInvalidConfig, "cannot read config " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return ParseRunConfig(s.str(), path.string());
}

}  // namespace sqdr
