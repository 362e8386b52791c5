#include "derain/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace derain {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double to_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("expected a number");
  return v;
}

int to_int(std::string_view s) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("expected an integer");
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true" || s == "on" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "off" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expected true or false");
}

template <class T>
struct Field {
  std::string section;
  std::string key;
  std::function<void(T&, std::string_view)> set;
  std::function<std::string(const T&)> get;
};

template <class T, class Access>
Field<T> real(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key), [access](T& c, std::string_view v) { access(c) = to_double(v); },
          [access](T c) { return format_double(access(c)); }};
}

template <class T, class Access>
Field<T> integer(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key), [access](T& c, std::string_view v) { access(c) = to_int(v); },
          [access](T c) { return std::to_string(access(c)); }};
}

template <class T, class Access>
Field<T> flag(std::string section, std::string key, Access access) {
  return {std::move(section), std::move(key), [access](T& c, std::string_view v) { access(c) = to_bool(v); },
          [access](T c) { return std::string(access(c) ? "true" : "false"); }};
}

using C = EngineConfig;

const std::vector<Field<C>>& engine_fields() {
  static const std::vector<Field<C>> fields = {
      real<C>("model", "lambda", [](C& c) -> double& { return c.lambda; }),
      real<C>("model", "alpha", [](C& c) -> double& { return c.alpha; }),
      real<C>("model", "beta", [](C& c) -> double& { return c.beta; }),
      real<C>("model", "rho", [](C& c) -> double& { return c.rho; }),
      integer<C>("model", "amelioration_period", [](C& c) -> int& { return c.amelioration_period; }),
      integer<C>("model", "outer_iters", [](C& c) -> int& { return c.outer_iters; }),
      real<C>("model", "outer_tol", [](C& c) -> double& { return c.outer_tol; }),
      {"model", "scales", [](C& c, std::string_view v) { c.scales = parse_scale_list(v); },
       [](const C& c) { return format_scale_list(c.scales); }},
      real<C>("model", "sigma2_init", [](C& c) -> double& { return c.sigma2_init; }),
      real<C>("model", "b_init", [](C& c) -> double& { return c.b_init; }),
      integer<C>("model", "bootstrap_frames", [](C& c) -> int& { return c.bootstrap_frames; }),
      flag<C>("model", "enable_alignment", [](C& c) -> bool& { return c.enable_alignment; }),
      flag<C>("model", "enable_amelioration", [](C& c) -> bool& { return c.enable_amelioration; }),
      real<C>("model", "background_rate", [](C& c) -> double& { return c.background_rate; }),
      real<C>("model", "align_trim", [](C& c) -> double& { return c.align_trim; }),
      flag<C>("model", "ameliorate_after_bootstrap", [](C& c) -> bool& { return c.ameliorate_after_bootstrap; }),
      flag<C>("model", "object_full_frame", [](C& c) -> bool& { return c.object_full_frame; }),
      integer<C>("csc", "max_iters", [](C& c) -> int& { return c.csc.max_iters; }),
      real<C>("csc", "tolerance", [](C& c) -> double& { return c.csc.tolerance; }),
      real<C>("csc", "penalty_factor", [](C& c) -> double& { return c.csc.penalty_factor; }),
      real<C>("csc", "balance_ratio", [](C& c) -> double& { return c.csc.balance_ratio; }),
      real<C>("csc", "balance_step", [](C& c) -> double& { return c.csc.balance_step; }),
      real<C>("csc", "relaxation", [](C& c) -> double& { return c.csc.relaxation; }),
      real<C>("dictionary", "forgetting", [](C& c) -> double& { return c.dictionary.forgetting; }),
      integer<C>("dictionary", "sweeps", [](C& c) -> int& { return c.dictionary.sweeps; }),
      real<C>("tv", "tolerance", [](C& c) -> double& { return c.tv_tolerance; }),
      integer<C>("tv", "max_iters", [](C& c) -> int& { return c.tv_max_iters; }),
      integer<C>("align", "max_iters", [](C& c) -> int& { return c.align.max_iters; }),
      real<C>("align", "step_tolerance", [](C& c) -> double& { return c.align.step_tolerance; }),
      integer<C>("align", "pyramid_levels", [](C& c) -> int& { return c.align.pyramid_levels; }),
      integer<C>("align", "max_halvings", [](C& c) -> int& { return c.align.max_halvings; }),
      integer<C>("align", "frame_halvings", [](C& c) -> int& { return c.align_halvings; }),
  };
  return fields;
}

using S = StreakParams;

const std::vector<Field<S>>& streak_fields() {
  static const std::vector<Field<S>> fields = {
      real<S>("streaks", "angle", [](S& p) -> double& { return p.angle; }),
      real<S>("streaks", "length", [](S& p) -> double& { return p.length; }),
      real<S>("streaks", "width", [](S& p) -> double& { return p.width; }),
      real<S>("streaks", "density", [](S& p) -> double& { return p.density; }),
      real<S>("streaks", "intensity", [](S& p) -> double& { return p.intensity; }),
      real<S>("streaks", "angle_rate", [](S& p) -> double& { return p.angle_rate; }),
      real<S>("streaks", "length_rate", [](S& p) -> double& { return p.length_rate; }),
      real<S>("streaks", "width_rate", [](S& p) -> double& { return p.width_rate; }),
      real<S>("streaks", "density_rate", [](S& p) -> double& { return p.density_rate; }),
      real<S>("streaks", "intensity_rate", [](S& p) -> double& { return p.intensity_rate; }),
  };
  return fields;
}

template <class T>
T parse_ini(std::string_view text, const std::string& origin, const std::vector<Field<T>>& fields, T value) {
  std::string section;
  std::map<std::pair<std::string, std::string>, int> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const auto& f : fields) known = known || f.section == section;
      if (!known) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view val = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where + "key '" + key + "' outside any section");
    const Field<T>* field = nullptr;
    for (const auto& f : fields)
      if (f.section == section && f.key == key) field = &f;
    if (!field) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
    if (const auto [it, fresh] = seen.emplace(std::pair{section, key}, line_no); !fresh)
      throw ConfigError(where + "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    try {
      field->set(value, val);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what() + ", got '" + std::string(val) + "'");
    }
  }
  return value;
}

template <class T>
std::string format_ini(const T& value, const std::vector<Field<T>>& fields) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(value) << '\n';
  }
  return out.str();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<ScaleSpec> parse_scale_list(std::string_view text) {
  std::vector<ScaleSpec> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string_view item = trim(text.substr(pos, end - pos));
    pos = end + 1;
    const auto x = item.find('x');
    if (x == std::string_view::npos) throw std::invalid_argument("scale entries look like 13x3 (patch x filters)");
    out.push_back({to_int(trim(item.substr(0, x))), to_int(trim(item.substr(x + 1)))});
  }
  return out;
}

std::string format_scale_list(const std::vector<ScaleSpec>& scales) {
  std::string out;
  for (const ScaleSpec& s : scales) {
    if (!out.empty()) out += ", ";
    out += std::to_string(s.patch_size) + "x" + std::to_string(s.filter_count);
  }
  return out;
}

EngineConfig parse_engine_config(std::string_view text, const std::string& origin) {
  EngineConfig cfg = parse_ini(text, origin, engine_fields(), EngineConfig{});
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
  return parse_engine_config(read_text(path), path.string());
}

std::string format_engine_config(const EngineConfig& cfg) { return format_ini(cfg, engine_fields()); }

StreakParams parse_streak_params(std::string_view text, const std::string& origin) {
  StreakParams p = parse_ini(text, origin, streak_fields(), StreakParams{});
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return p;
}

StreakParams load_streak_params(const std::filesystem::path& path) {
  return parse_streak_params(read_text(path), path.string());
}

std::string format_streak_params(const StreakParams& p) { return format_ini(p, streak_fields()); }

}  // namespace derain
