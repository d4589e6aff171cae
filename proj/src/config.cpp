#include "sgdreg/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "sgdreg/error.hpp"

namespace sgdreg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  try {
    std::size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos == t.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError(field + ": expected a number, got '" + text + "'");
}

std::uint64_t to_uint(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (!t.empty() && t[0] != '-' && t[0] != '+') {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(t, &pos);
      if (pos == t.size()) return v;
    } catch (const std::exception&) {
    }
  }
  throw ValidationError(field + ": expected a non-negative integer, got '" + text + "'");
}

bool to_bool(const std::string& field, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ValidationError(field + ": expected true or false, got '" + text + "'");
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string& field, const std::string&)> set;
  std::function<std::optional<std::string>(const RunConfig&)> get;
};

#define SGDREG_STRING(SEC, KEY, MEMBER)                                                  \
  Field {                                                                                \
    #SEC, #KEY,                                                                          \
        [](RunConfig& c, const std::string&, const std::string& v) { c.MEMBER = trim(v); }, \
        [](const RunConfig& c) -> std::optional<std::string> { return c.MEMBER; }        \
  }
#define SGDREG_DOUBLE(SEC, KEY, MEMBER)                                                   \
  Field {                                                                                 \
    #SEC, #KEY,                                                                           \
        [](RunConfig& c, const std::string& f, const std::string& v) {                    \
          c.MEMBER = to_double(f, v);                                                     \
        },                                                                                \
        [](const RunConfig& c) -> std::optional<std::string> { return fmt(c.MEMBER); }    \
  }
#define SGDREG_UINT(SEC, KEY, MEMBER)                                                     \
  Field {                                                                                 \
    #SEC, #KEY,                                                                           \
        [](RunConfig& c, const std::string& f, const std::string& v) {                    \
          c.MEMBER = static_cast<decltype(c.MEMBER)>(to_uint(f, v));                      \
        },                                                                                \
        [](const RunConfig& c) -> std::optional<std::string> {                            \
          return std::to_string(c.MEMBER);                                                \
        }                                                                                 \
  }
#define SGDREG_BOOL(SEC, KEY, MEMBER)                                                     \
  Field {                                                                                 \
    #SEC, #KEY,                                                                           \
        [](RunConfig& c, const std::string& f, const std::string& v) {                    \
          c.MEMBER = to_bool(f, v);                                                       \
        },                                                                                \
        [](const RunConfig& c) -> std::optional<std::string> {                            \
          return std::string(c.MEMBER ? "true" : "false");                                \
        }                                                                                 \
  }
#define SGDREG_OPT_DOUBLE(SEC, KEY, MEMBER)                                               \
  Field {                                                                                 \
    #SEC, #KEY,                                                                           \
        [](RunConfig& c, const std::string& f, const std::string& v) {                    \
          c.MEMBER = to_double(f, v);                                                     \
        },                                                                                \
        [](const RunConfig& c) -> std::optional<std::string> {                            \
          if (!c.MEMBER) return std::nullopt;                                             \
          return fmt(*c.MEMBER);                                                          \
        }                                                                                 \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SGDREG_STRING(problem, type, problem.type),
      SGDREG_UINT(problem, m, problem.m),
      SGDREG_UINT(problem, n, problem.n),
      SGDREG_STRING(problem, layout, problem.layout),
      SGDREG_DOUBLE(problem, s, problem.s),
      SGDREG_DOUBLE(problem, kappa, problem.kappa),
      SGDREG_DOUBLE(problem, c_background, problem.c_background),
      SGDREG_STRING(problem, forcing, problem.forcing),
      SGDREG_DOUBLE(problem, forcing_scale, problem.forcing_scale),

      SGDREG_STRING(solver, variant, solver.variant),
      SGDREG_STRING(solver, schedule, solver.schedule),
      SGDREG_DOUBLE(solver, eta0, solver.eta0),
      SGDREG_DOUBLE(solver, alpha, solver.alpha),
      SGDREG_OPT_DOUBLE(solver, box_lo, solver.box_lo),
      SGDREG_OPT_DOUBLE(solver, box_hi, solver.box_hi),
      SGDREG_BOOL(solver, enforce_step_bound, solver.enforce_step_bound),

      SGDREG_DOUBLE(source, nu, source.nu),
      SGDREG_STRING(source, w, source.w),
      SGDREG_DOUBLE(source, w_decay, source.w_decay),
      SGDREG_DOUBLE(source, w_norm, source.w_norm),
      SGDREG_STRING(source, w_file, source.w_file),

      SGDREG_DOUBLE(noise, delta, noise.delta),
      SGDREG_UINT(noise, seed, noise.seed),
      SGDREG_BOOL(noise, fresh, noise.fresh),

      SGDREG_STRING(stopping, rule, stopping.rule),
      SGDREG_UINT(stopping, max_iter, stopping.max_iter),
      SGDREG_STRING(stopping, apriori_table, stopping.apriori_table),
      SGDREG_DOUBLE(stopping, apriori_scale, stopping.apriori_scale),
      SGDREG_DOUBLE(stopping, apriori_power, stopping.apriori_power),

      SGDREG_UINT(mc, M, mc.M),
      SGDREG_UINT(mc, seed, mc.seed),
      SGDREG_STRING(mc, checkpoints, mc.checkpoints),
      SGDREG_UINT(mc, per_decade, mc.per_decade),

      SGDREG_STRING(output, dir, output.dir),
      SGDREG_STRING(output, prefix, output.prefix),
  };
  return table;
}

#undef SGDREG_STRING
#undef SGDREG_DOUBLE
#undef SGDREG_UINT
#undef SGDREG_BOOL
#undef SGDREG_OPT_DOUBLE

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options) {
    if (v == o) return true;
  }
  return false;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ValidationError(message);
}

}  // namespace

void validate_config(const RunConfig& c) {
  const auto& p = c.problem;
  require(one_of(p.type, {"tp1", "tp2", "tp1_broken_adjoint"}),
          "problem.type must be tp1 or tp2 (got '" + p.type + "')");
  require(p.n >= 1, "problem.n must be >= 1");
  require(p.m >= p.n, "problem.n = " + std::to_string(p.n) + " exceeds problem.m = " +
                          std::to_string(p.m));
  require(one_of(p.layout, {"contiguous", "round_robin"}),
          "problem.layout must be contiguous or round_robin");
  if (p.type != "tp2") {
    require(p.s > 0.0 && std::isfinite(p.s), "problem.s must be > 0");
    require(p.kappa >= 0.0 && std::isfinite(p.kappa), "problem.kappa must be >= 0");
  } else {
    require(p.m >= 8, "problem.m must be >= 8 for tp2");
    require(std::isfinite(p.c_background), "problem.c_background must be finite");
    require(one_of(p.forcing, {"sine", "one", "zero"}), "problem.forcing must be sine, one or zero");
    require(std::isfinite(p.forcing_scale) && p.forcing_scale > 0.0,
            "problem.forcing_scale must be positive");
  }

  const auto& s = c.solver;
  require(one_of(s.variant, {"sgd", "landweber", "sgd_projected"}),
          "solver.variant must be sgd, landweber or sgd_projected");
  require(one_of(s.schedule, {"constant", "polynomial"}),
          "solver.schedule must be constant or polynomial");
  require(s.eta0 > 0.0 && std::isfinite(s.eta0), "solver.eta0 must be > 0");
  if (s.schedule == "polynomial") {
    require(s.alpha > 0.0 && s.alpha < 1.0,
            "solver.alpha = " + fmt(s.alpha) +
                " is outside (0, 1) required for the polynomial schedule eta_k = eta0 k^-alpha");
  }
  if (s.variant == "sgd_projected") {
    require(s.box_lo && s.box_hi, "solver.box_lo and solver.box_hi are required for sgd_projected");
    require(*s.box_lo <= *s.box_hi, "solver.box_lo must not exceed solver.box_hi");
  }

  if (c.source.present) {
    const auto& src = c.source;
    require(src.nu > 0.0 && src.nu <= 0.5, "source.nu must be in (0, 1/2]");
    require(one_of(src.w, {"power", "e1", "ones", "sine", "file"}),
            "source.w must be power, e1, ones, sine or file");
    require(src.w_norm >= 0.0 && std::isfinite(src.w_norm), "source.w_norm must be >= 0");
    require(src.w != "file" || !src.w_file.empty(), "source.w_file is required when source.w = file");
    require(std::isfinite(src.w_decay), "source.w_decay must be finite");
  }

  require(c.noise.delta >= 0.0 && std::isfinite(c.noise.delta), "noise.delta must be >= 0");

  const auto& st = c.stopping;
  require(one_of(st.rule, {"max_iter", "apriori", "kstar"}),
          "stopping.rule must be max_iter, apriori or kstar");
  if (st.rule == "kstar") {
    require(c.source.present, "stopping.rule = kstar needs a [source] section");
    require(s.schedule == "polynomial", "stopping.rule = kstar needs the polynomial schedule");
    require(c.noise.delta > 0.0, "stopping.rule = kstar needs noise.delta > 0");
    require(c.source.w_norm > 0.0, "stopping.rule = kstar needs source.w_norm > 0");
  }
  if (st.rule == "apriori") {
    require(c.noise.delta > 0.0 || !st.apriori_table.empty(),
            "stopping.rule = apriori needs noise.delta > 0");
    require(st.apriori_scale > 0.0 && st.apriori_power > 0.0,
            "stopping.apriori_scale and stopping.apriori_power must be > 0");
  }

  require(c.mc.M >= 2, "mc.M must be >= 2");
  require(c.mc.per_decade >= 1, "mc.per_decade must be >= 1");
  if (c.mc.checkpoints != "log") {
    std::stringstream ss(c.mc.checkpoints);
    std::string item;
    std::uint64_t prev = 0;
    while (std::getline(ss, item, ',')) {
      const std::uint64_t k = to_uint("mc.checkpoints", item);
      require(k > prev, "mc.checkpoints must be strictly increasing positive integers");
      prev = k;
    }
    require(prev > 0, "mc.checkpoints is empty");
  }
  require(!c.output.prefix.empty(), "output.prefix must not be empty");
}

// Drops '; ...' and '# ...' comments that start a line or follow whitespace.
std::string strip_comments(const std::string& text) {
  std::istringstream lines(text);
  std::string out, line;
  while (std::getline(lines, line)) {
    for (std::size_t p = 0; p < line.size(); ++p) {
      if ((line[p] == ';' || line[p] == '#') && (p == 0 || line[p - 1] == ' ' || line[p - 1] == '\t')) {
        line.erase(p);
        break;
      }
    }
    out += line;
    out += '\n';
  }
  return out;
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(strip_comments(text));
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config syntax: ") + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ValidationError("config key '" + section + "' must belong to a section");
    }
    if (section == "source") c.source.present = true;
    bool known_section = false;
    for (const auto& f : fields()) known_section = known_section || section == f.section;
    if (!known_section) throw ValidationError("unknown config section [" + section + "]");
    for (const auto& [key, value] : body) {
      const Field* f = find_field(section, key);
      if (!f) throw ValidationError("unknown config key " + section + "." + key);
      f->set(c, section + "." + key, value.data());
    }
  }
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream os;
  std::string current;
  for (const auto& f : fields()) {
    if (std::string(f.section) == "source" && !config.source.present) continue;
    const auto v = f.get(config);
    if (!v) continue;
    if (current != f.section) {
      if (!current.empty()) os << '\n';
      os << '[' << f.section << "]\n";
      current = f.section;
    }
    os << f.key << " = " << *v << '\n';
  }
  return os.str();
}

void set_config_value(RunConfig& config, const std::string& section, const std::string& key,
                      const std::string& value) {
  const Field* f = find_field(section, key);
  if (!f) throw ValidationError("unknown config key " + section + "." + key);
  RunConfig next = config;
  if (section == "source") next.source.present = true;
  f->set(next, section + "." + key, value);
  validate_config(next);
  config = std::move(next);
}

void set_config_values(RunConfig& config, const std::vector<std::string>& assignments) {
  RunConfig next = config;
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    const auto dot = a.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ValidationError("expected section.key=value, got '" + a + "'");
    }
    const std::string section = trim(a.substr(0, dot));
    const std::string key = trim(a.substr(dot + 1, eq - dot - 1));
    const Field* f = find_field(section, key);
    if (!f) throw ValidationError("unknown config key " + section + "." + key);
    if (section == "source") next.source.present = true;
    f->set(next, section + "." + key, trim(a.substr(eq + 1)));
  }
  validate_config(next);
  config = std::move(next);
}

}  // namespace sgdreg
