#include "dsheat/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "dsheat/moments.hpp"
#include "dsheat/solver.hpp"
#include "dsheat/spectral.hpp"

namespace dsheat::cli {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json default_config() {
  return json::parse(R"({
    "kernel": {"type": "simple", "dim": 1},
    "sigma": {"type": "linear", "nu": 1.0},
    "noise": {"family": "rademacher", "scale": 1.0, "mode": "spacetime"},
    "initial": {"type": "delta", "mass": 1.0},
    "box_radius": null,
    "n_max": 20,
    "replicas": 2000,
    "seed": 1,
    "p_grid": [1.0, 2.0, 3.0, 4.0],
    "simulate": {"paths": 1},
    "spectral": {"lambda": [1.2, 1.5, 2.0, 5.0]},
    "temporal": {"paths": 20, "mc_paths": 1000000},
    "picard": {"iterations": 6, "lambda": 1.2720196495140689, "replicas": 1000}
  })");
}

namespace {

// Keys accepted per section; anything else is a typo worth reporting.
const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"", {"kernel", "sigma", "noise", "initial", "box_radius", "n_max", "replicas", "seed", "p_grid", "simulate",
            "spectral", "temporal", "picard", "workers", "output_dir"}},
      {"kernel", {"type", "dim", "stay", "table"}},
      {"sigma", {"type", "nu", "c"}},
      {"noise", {"family", "scale", "mode", "white"}},
      {"initial", {"type", "mass", "value", "radius", "entries"}},
      {"simulate", {"paths"}},
      {"spectral", {"lambda"}},
      {"temporal", {"paths", "mc_paths"}},
      {"picard", {"iterations", "lambda", "replicas"}},
  };
  return keys;
}

int line_at(const std::string& text, std::size_t pos) {
  int line = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

// Line of `"key"` (inside `"section"` when given) in the raw file, 0 if absent.
int line_of(const std::string& text, const std::string& section, const std::string& key = "") {
  if (text.empty()) return 0;
  std::size_t pos = text.find("\"" + section + "\"");
  if (pos == std::string::npos) return 0;
  if (!key.empty()) {
    const std::size_t k = text.find("\"" + key + "\"", pos);
    if (k != std::string::npos) pos = k;
  }
  return line_at(text, pos);
}

[[noreturn]] void fail(const std::string& text, const std::string& section, const std::string& key,
                       const std::string& msg) {
  const int line = line_of(text, section, key);
  const std::string where = section + (key.empty() ? "" : "." + key);
  if (line > 0) throw ConfigError("config line " + std::to_string(line) + " (" + where + "): " + msg, line);
  throw ConfigError("config key " + where + " (default or override): " + msg, 0);
}

// Like merge_patch, except that null is a value rather than a deletion.
void merge_into(json& base, const json& patch) {
  for (const auto& item : patch.items()) {
    if (item.value().is_object() && base.contains(item.key()) && base[item.key()].is_object())
      merge_into(base[item.key()], item.value());
    else
      base[item.key()] = item.value();
  }
}

void set_dotted(json& j, const std::string& dotted, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + dotted + "' is malformed", 0);
    if (dot == std::string::npos) {
      if (value.is_object() && node->contains(part) && (*node)[part].is_object())
        merge_into((*node)[part], value);
      else
        (*node)[part] = value;
      return;
    }
    if (!(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

void check_keys(const json& cfg, const std::string& text) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object", 1);
  for (const auto& [section, keys] : allowed_keys()) {
    const json* node = section.empty() ? &cfg : (cfg.contains(section) ? &cfg.at(section) : nullptr);
    if (!node) continue;
    if (!node->is_object()) fail(text, section, "", "must be an object");
    for (const auto& item : node->items())
      if (!keys.count(item.key())) fail(text, section.empty() ? item.key() : section, section.empty() ? "" : item.key(),
                                        "unknown key '" + item.key() + "'");
  }
}

template <class T>
T get_as(const json& cfg, const std::string& text, const std::string& section, const std::string& key) {
  const json& node = key.empty() ? cfg.at(section) : cfg.at(section).at(key);
  try {
    return node.get<T>();
  } catch (const json::exception&) {
    fail(text, section, key, "has the wrong type");
  }
}

}  // namespace

Resolved resolve_config(const std::optional<std::string>& path,
                        const std::vector<std::pair<std::string, std::string>>& overrides) {
  Resolved r;
  r.config = default_config();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot read config file " + *path, 0);
    std::stringstream ss;
    ss << in.rdbuf();
    r.source_text = ss.str();
    json file;
    try {
      file = json::parse(r.source_text, nullptr, true, true);
    } catch (const json::parse_error& e) {
      const int line = line_at(r.source_text, e.byte > 0 ? e.byte - 1 : 0);
      throw ConfigError("config line " + std::to_string(line) + ": " + e.what(), line);
    }
    check_keys(file, r.source_text);
    merge_into(r.config, file);
  }
  for (const auto& [key, raw] : overrides) {
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;  // bare words are strings
    }
    set_dotted(r.config, key, value);
  }
  check_keys(r.config, r.source_text);
  if (r.config.contains("workers")) {
    if (!r.config["workers"].is_number_integer()) fail(r.source_text, "workers", "", "must be an integer");
    r.workers = r.config["workers"].get<int>();
    r.config.erase("workers");
  }
  if (r.config.contains("output_dir")) {
    if (!r.config["output_dir"].is_string()) fail(r.source_text, "output_dir", "", "must be a string");
    r.output_dir = r.config["output_dir"].get<std::string>();
    r.config.erase("output_dir");
  }
  return r;
}

json kernel_shorthand(const std::string& s) {
  auto dim_of = [&](const std::string& d) {
    if (d.size() != 1 || d[0] < '1' || d[0] > '3') throw ConfigError("bad kernel shorthand '" + s + "'", 0);
    return d[0] - '0';
  };
  if (s.rfind("simple", 0) == 0) return {{"type", "simple"}, {"dim", dim_of(s.substr(6))}};
  if (s.rfind("lazy", 0) == 0) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("lazy kernel shorthand needs ':stay', e.g. lazy1:0.5", 0);
    try {
      return {{"type", "lazy"}, {"dim", dim_of(s.substr(4, colon - 4))}, {"stay", std::stod(s.substr(colon + 1))}};
    } catch (const std::logic_error&) {
      throw ConfigError("bad kernel shorthand '" + s + "'", 0);
    }
  }
  throw ConfigError("unknown kernel shorthand '" + s + "' (use simpleD or lazyD:a)", 0);
}

WalkKernel kernel_from(const json& k) {
  const auto type = k.at("type").get<std::string>();
  const int dim = k.value("dim", 1);
  if (type == "simple") return WalkKernel::simple(dim);
  if (type == "lazy") return WalkKernel::lazy(dim, k.at("stay").get<double>());
  if (type == "custom") {
    std::vector<KernelEntry> table;
    for (const auto& e : k.at("table")) {
      const auto off = e.at("offset").get<std::vector<int>>();
      if (static_cast<int>(off.size()) != dim) throw std::invalid_argument("offset length must equal dim");
      Site z{0, 0, 0};
      for (int a = 0; a < dim; ++a) z[a] = off[static_cast<std::size_t>(a)];
      table.push_back({z, e.at("p").get<double>()});
    }
    return WalkKernel::custom(dim, std::move(table));
  }
  throw std::invalid_argument("kernel type must be simple, lazy or custom");
}

SigmaSpec sigma_from(const json& s) {
  const auto type = s.at("type").get<std::string>();
  if (type == "linear") return SigmaSpec::linear(s.at("nu").get<double>());
  if (type == "affine") return SigmaSpec::affine(s.at("nu").get<double>(), s.at("c").get<double>());
  throw std::invalid_argument("sigma type must be linear or affine");
}

NoiseModel noise_from(const json& n) {
  const auto fam = n.at("family").get<std::string>();
  const auto mode = n.value("mode", std::string("spacetime"));
  NoiseMode m;
  if (mode == "spacetime")
    m = NoiseMode::spacetime;
  else if (mode == "temporal")
    m = NoiseMode::temporal;
  else
    throw std::invalid_argument("noise mode must be spacetime or temporal");
  NoiseFamily f;
  if (fam == "rademacher")
    f = NoiseFamily::rademacher;
  else if (fam == "uniform")
    f = NoiseFamily::uniform_symmetric;
  else if (fam == "constant")
    f = NoiseFamily::constant;
  else
    throw std::invalid_argument("noise family must be rademacher, uniform or constant");
  const double scale = n.at("scale").get<double>();
  if (n.contains("white")) return NoiseModel::make(m, f, scale, n.at("white").get<bool>());
  // Unflagged: white exactly when the law has mean 0 and variance 1.
  const auto plain = NoiseModel::make(m, f, scale);
  const bool white = std::abs(plain.mean()) <= 1e-12 && std::abs(plain.variance() - 1.0) <= 1e-12;
  return white ? NoiseModel::make(m, f, scale, true) : plain;
}

LatticeField initial_from(const json& i, int dim) {
  const auto type = i.at("type").get<std::string>();
  if (type == "delta") return LatticeField::delta(dim, i.value("mass", 1.0));
  if (type == "box") return LatticeField::uniform_box(dim, i.at("radius").get<int>(), i.at("value").get<double>());
  if (type == "table") {
    LatticeField f(dim);
    for (const auto& e : i.at("entries")) {
      const auto site = e.at("site").get<std::vector<int>>();
      if (static_cast<int>(site.size()) != dim) throw std::invalid_argument("site length must equal the kernel dim");
      Site x{0, 0, 0};
      for (int a = 0; a < dim; ++a) x[a] = site[static_cast<std::size_t>(a)];
      if (!std::isfinite(e.at("value").get<double>())) throw std::invalid_argument("initial values must be finite");
      f.set(x, e.at("value").get<double>());
    }
    f.trim();
    return f;
  }
  throw std::invalid_argument("initial type must be delta, box or table");
}

namespace {

// --- Validated run inputs --------------------------------------------------

struct Inputs {
  json cfg;
  std::string text;
  int workers = 0;
  WalkKernel kernel = WalkKernel::simple(1);
  SigmaSpec sigma = SigmaSpec::linear(0.0);
  NoiseModel noise = NoiseModel::white_rademacher();
  LatticeField u0{1};
  std::optional<Box> box;
  int n_max = 0;
  int replicas = 0;
  std::uint64_t seed = 0;
  std::vector<double> p_grid;
};

template <class F>
auto build(const std::string& text, const std::string& section, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(text, section, "", e.what());
  }
}

Inputs validate(const Resolved& r) {
  Inputs in;
  in.cfg = r.config;
  in.text = r.source_text;
  in.workers = r.workers.value_or(0);
  if (in.workers < 0) throw ConfigError("workers must be >= 0", 0);
  const json& c = in.cfg;
  in.kernel = build(in.text, "kernel", [&] { return kernel_from(c.at("kernel")); });
  in.sigma = build(in.text, "sigma", [&] { return sigma_from(c.at("sigma")); });
  in.noise = build(in.text, "noise", [&] { return noise_from(c.at("noise")); });
  in.u0 = build(in.text, "initial", [&] { return initial_from(c.at("initial"), in.kernel.dim()); });
  in.n_max = get_as<int>(c, in.text, "n_max", "");
  if (in.n_max < 0) fail(in.text, "n_max", "", "must be >= 0");
  in.replicas = get_as<int>(c, in.text, "replicas", "");
  if (in.replicas < 2) fail(in.text, "replicas", "", "must be >= 2");
  in.seed = get_as<std::uint64_t>(c, in.text, "seed", "");
  in.p_grid = get_as<std::vector<double>>(c, in.text, "p_grid", "");
  if (in.p_grid.empty()) fail(in.text, "p_grid", "", "must not be empty");
  for (double p : in.p_grid)
    if (!(p >= 1.0)) fail(in.text, "p_grid", "", "entries must be >= 1");
  if (!c.at("box_radius").is_null()) {
    const int br = get_as<int>(c, in.text, "box_radius", "");
    if (br < 0) fail(in.text, "box_radius", "", "must be >= 0");
    in.box = Box::ball(in.kernel.dim(), br);
  }
  if (in.sigma.at_zero() != 0.0 && !in.box)
    fail(in.text, "sigma", "", "sigma(0) != 0 forces every site; set box_radius");
  return in;
}

// --- Output handling ------------------------------------------------------

class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_ = true;
    }
  }
  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    written_.push_back(p);
    out << content;
    if (!out) throw std::runtime_error("write failed for " + p.string());
  }
  void rollback() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
    if (created_) fs::remove(dir_, ec);
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool created_ = false;
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string moments_header() { return "n,p,estimate,stderr\n"; }
std::string exponent_header() { return "p,gamma_hat,uncertainty,window\n"; }

std::string exponent_row(const ExponentEstimate& e) {
  return format_double(e.p) + "," + format_double(e.gamma_hat) + "," + format_double(e.uncertainty) + "," +
         std::to_string(e.n1) + "-" + std::to_string(e.n2) + "\n";
}

json box_json(const std::optional<Box>& b) {
  if (!b) return nullptr;
  json lo = json::array(), hi = json::array();
  for (int a = 0; a < b->dim(); ++a) {
    lo.push_back(b->lo()[a]);
    hi.push_back(b->hi()[a]);
  }
  return {{"lo", lo}, {"hi", hi}};
}

// --- Subcommands ----------------------------------------------------------

int cmd_simulate(const Inputs& in, OutputSet& out, std::ostream& log) {
  const int paths = get_as<int>(in.cfg, in.text, "simulate", "paths");
  if (paths < 1) fail(in.text, "simulate", "paths", "must be >= 1");
  const int dim = in.kernel.dim();

  std::string traj = "replica,n";
  for (int a = 0; a < dim; ++a) traj += ",x" + std::to_string(a);
  traj += ",value\n";
  json support = json::array();
  for (int r = 0; r < paths; ++r) {
    const auto t = evolve(in.kernel, in.sigma, in.u0, in.noise, in.n_max, {in.seed, static_cast<std::uint64_t>(r)},
                          in.box);
    for (int n = 0; n <= t.horizon(); ++n) {
      const auto& u = t.at(n);
      auto row = [&](const Site& x, double v) {
        traj += std::to_string(r) + "," + std::to_string(n);
        for (int a = 0; a < dim; ++a) traj += "," + std::to_string(x[a]);
        traj += "," + format_double(v) + "\n";
      };
      if (u.resolved())
        u.resolved()->for_each([&](const Site& x, std::size_t) { row(x, u(x)); });
      else
        u.for_each_nonzero(row);
    }
    if (in.sigma.at_zero() == 0.0 && !in.box) {
      const auto rep = support_metrics(t, in.kernel);
      json rows = json::array();
      for (const auto& s : rep.rows) rows.push_back({{"n", s.n}, {"radius", s.radius}, {"count", s.count}});
      support.push_back({{"replica", r}, {"radius_recursion_holds", rep.all_ok}, {"rows", rows}});
    }
  }
  out.write("trajectory.csv", traj);

  std::string moments = moments_header();
  std::string exponents = exponent_header();
  SimulationConfig sc{in.kernel, in.sigma, in.noise, in.u0, in.box};
  std::vector<MomentSeries> series;
  for (double p : in.p_grid) {
    MomentRequest req;
    req.p = p;
    req.target = MomentTarget::sup;
    req.n_max = in.n_max;
    req.replicas = in.replicas;
    req.seed = in.seed;
    req.workers = in.workers;
    series.push_back(mc_moments(sc, req));
  }
  for (int n = 0; n <= in.n_max; ++n)
    for (const auto& s : series)
      moments += std::to_string(n) + "," + format_double(s.p) + "," +
                 format_double(s.value[static_cast<std::size_t>(n)][0]) + "," +
                 format_double(s.stderr_[static_cast<std::size_t>(n)][0]) + "\n";
  if (in.n_max >= 2)
    for (const auto& s : series) exponents += exponent_row(estimate_exponent(s.column(), s.p));
  out.write("moments.csv", moments);
  out.write("exponent.csv", exponents);

  json meta = {{"kernel", in.kernel.label()}, {"sigma", in.sigma.label()}, {"noise", in.noise.label()},
               {"seed", in.seed},           {"paths", paths},           {"n_max", in.n_max},
               {"replicas", in.replicas},   {"box", box_json(in.box)},  {"moment_target", "sup_x |u_n(x)|"},
               {"support", support}};
  out.write("metadata.json", dump(meta));
  log << "simulate: " << paths << " trajectories, " << in.replicas << " moment replicas -> " << out.dir().string()
      << "\n";
  return kSuccess;
}

int cmd_exact_moments(const Inputs& in, OutputSet& out, std::ostream& log) {
  if (in.sigma.kind() == SigmaSpec::Kind::custom || in.sigma.at_zero() != 0.0)
    fail(in.text, "sigma", "", "exact second moments need sigma(z) = nu z");
  if (in.noise.mode() != NoiseMode::spacetime || !in.noise.is_white())
    fail(in.text, "noise", "", "exact second moments need white space-time noise");
  const double nu = std::abs(in.sigma.slope());
  const auto m = exact_second_moment(in.kernel, in.u0, nu, in.n_max);
  const auto sup = sup_series(m);
  std::string moments = moments_header();
  for (int n = 0; n <= in.n_max; ++n)
    moments += std::to_string(n) + ",2," + format_double(sup[static_cast<std::size_t>(n)]) + ",0\n";
  out.write("moments.csv", moments);
  std::string exponents = exponent_header();
  if (in.n_max >= 2) {
    const auto e = estimate_exponent(sup, 2.0);
    exponents += exponent_row(e);
    log << "exact-moments: gamma_hat(2) = " << format_double(e.gamma_hat) << " over [" << e.n1 << ", " << e.n2
        << "]\n";
  }
  out.write("exponent.csv", exponents);
  return kSuccess;
}

int cmd_spectral(const Inputs& in, OutputSet& out, std::ostream& log) {
  const auto lambdas = get_as<std::vector<double>>(in.cfg, in.text, "spectral", "lambda");
  for (double l : lambdas)
    if (!(l > 1.0) || !std::isfinite(l)) fail(in.text, "spectral", "lambda", "values must be finite and > 1");
  SpectralProfile profile(in.kernel);
  std::string csv = "lambda,upsilon_series,upsilon_quadrature,abs_diff\n";
  json simple_extras = json::array();
  const bool simple1 = in.kernel.label() == "simple(1)";
  for (double l : lambdas) {
    const double s = upsilon_series(profile, l).value;
    const double q = upsilon_quadrature(in.kernel, l, profile.quadrature_points());
    csv += format_double(l) + "," + format_double(s) + "," + format_double(q) + "," + format_double(std::abs(s - q)) +
           "\n";
    if (simple1)
      simple_extras.push_back({{"lambda", l},
                               {"lambda_upsilon_closed_form", std::pow(1.0 - 1.0 / l, -0.5)},
                               {"kummer_1F1_half_one", simple_walk::kummer_value(l)}});
    log << "Upsilon(" << format_double(l) << ") = " << format_double(s) << " (series), " << format_double(q)
        << " (quadrature)\n";
  }
  out.write("upsilon.csv", csv);

  json bounds = json::array();
  for (double p : in.p_grid) {
    if (p < 2.0) continue;
    const auto b = liapounov_bounds(profile, p, in.sigma);
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(v < 0 ? "-inf" : "inf"); };
    bounds.push_back({{"p", b.p},
                      {"c_p", b.cp},
                      {"lip_sigma", b.lip},
                      {"L_sigma", b.lower_sigma},
                      {"upper", num(b.upper)},
                      {"lower", num(b.lower)}});
  }
  json report = {{"kernel", in.kernel.label()}, {"sigma", in.sigma.label()}, {"bounds", bounds}};
  if (simple1) report["simple_walk"] = simple_extras;
  out.write("bounds.json", dump(report));
  return kSuccess;
}

int cmd_temporal(const Inputs& in, OutputSet& out, std::ostream& log) {
  TemporalRequest req;
  req.p_grid = in.p_grid;
  req.n_max = in.n_max;
  req.paths = get_as<int>(in.cfg, in.text, "temporal", "paths");
  req.seed = in.seed;
  req.workers = in.workers;
  const auto mc_paths = get_as<std::uint64_t>(in.cfg, in.text, "temporal", "mc_paths");
  if (mc_paths < 2) fail(in.text, "temporal", "mc_paths", "must be >= 2");
  const TemporalReport rep =
      build(in.text, "noise", [&] { return temporal_report(in.kernel, in.noise, in.u0, req); });

  std::string csv = moments_header();
  json grid = json::array();
  std::vector<TemporalMoments> tm;
  for (std::size_t i = 0; i < rep.p_grid.size(); ++i) {
    tm.push_back(temporal_moment_mc(in.noise, rep.u0_total, rep.p_grid[i], in.n_max, mc_paths, in.seed, in.workers));
    grid.push_back({{"p", rep.p_grid[i]},
                    {"gamma", rep.gamma[i]},
                    {"log_moment_prediction", rep.log_moment_prediction[i]},
                    {"mc_moment", tm.back().mean.back()},
                    {"mc_stderr", tm.back().stderr_.back()},
                    {"exact_moment", tm.back().exact.back()}});
  }
  for (int n = 0; n <= in.n_max; ++n)
    for (const auto& t : tm)
      csv += std::to_string(n) + "," + format_double(t.p) + "," +
             format_double(t.mean[static_cast<std::size_t>(n)]) + "," +
             format_double(t.stderr_[static_cast<std::size_t>(n)]) + "\n";
  out.write("temporal_moments.csv", csv);

  json j = {{"distribution", rep.distribution},
            {"kernel", in.kernel.label()},
            {"n_max", rep.n_max},
            {"u0_total", rep.u0_total},
            {"gamma_prime_0", rep.gamma_prime0},
            {"gamma_zero_at_zero", rep.gamma_zero_at_zero},
            {"gamma_convex_on_grid", rep.gamma_convex},
            {"grid", grid},
            {"paths", rep.paths},
            {"mc_paths", mc_paths},
            {"log_sup_rate_mean", rep.log_sup_rate_mean},
            {"log_sup_rate_stderr", rep.log_sup_rate_stderr},
            {"log_total_rate_mean", rep.log_total_rate_mean},
            {"max_identity_error", rep.max_identity_error}};
  out.write("temporal.json", dump(j));
  log << "temporal: Gamma'(0+) = " << format_double(rep.gamma_prime0) << ", mean (1/n) ln M_n = "
      << format_double(rep.log_sup_rate_mean) << "\n";
  return kSuccess;
}

// --- verify ---------------------------------------------------------------

struct Check {
  std::string suite;
  std::string status;  // pass, fail, skip
  std::string detail;
};

std::vector<Check> run_checks(const Inputs& in) {
  std::vector<Check> checks;
  const bool closed = in.sigma.at_zero() == 0.0 && !in.box;
  const int verify_paths = std::min(in.replicas, 100);

  {  // Duhamel
    double worst = 0.0;
    const int n = std::max(in.n_max, 1);
    for (int r = 0; r < std::min(verify_paths, 20); ++r) {
      const NoiseStream st{in.seed, static_cast<std::uint64_t>(r)};
      const auto t = evolve(in.kernel, in.sigma, in.u0, in.noise, n, st, in.box);
      worst = std::max(worst, max_abs_diff_resolved(duhamel_eval(in.kernel, in.sigma, in.u0, in.noise, st, t, n - 1),
                                                    t.at(n)));
    }
    checks.push_back({"duhamel", worst <= 1e-10 ? "pass" : "fail", "max |diff| = " + format_double(worst)});
  }

  if (closed) {  // finite support
    bool ok = true;
    for (int r = 0; r < verify_paths && ok; ++r)
      ok = support_metrics(evolve(in.kernel, in.sigma, in.u0, in.noise, in.n_max,
                                  {in.seed, static_cast<std::uint64_t>(r)}),
                           in.kernel)
               .all_ok;
    checks.push_back({"finite support", ok ? "pass" : "fail", "R_{n+1} <= R_n + R on " +
                                                                    std::to_string(verify_paths) + " paths"});
  } else {
    checks.push_back({"finite support", "skip", "sigma(0) != 0 or boxed run"});
  }

  {  // growth ceiling
    bool ok = true;
    const double cs = in.sigma.growth(), ct = in.sigma.offset(), cx = in.noise.bound();
    for (int r = 0; r < verify_paths && ok; ++r) {
      double prev = -1.0;
      evolve_each(in.kernel, in.sigma, in.u0, in.noise, in.n_max, {in.seed, static_cast<std::uint64_t>(r)}, in.box,
                  [&](int, const LatticeField& u) {
                    const double m = u.sup_norm();
                    if (prev >= 0.0 && m > (prev * (1.0 + cs * cx) + ct * cx) * (1.0 + 1e-12)) ok = false;
                    prev = m;
                    return ok;
                  });
    }
    checks.push_back({"growth ceiling", ok ? "pass" : "fail", "sup-norm recursion on every step"});
  }

  {  // comparison / positivity
    const auto v = check_comparison(in.kernel, in.sigma, in.noise);
    const bool nonneg =
        std::all_of(in.u0.values().begin(), in.u0.values().end(), [](double x) { return x >= 0.0; });
    if (!v.holds || !closed || !nonneg) {
      checks.push_back({"comparison", "skip",
                        v.holds ? "needs sigma(0) = 0, no box and u0 >= 0"
                                : "P00 = " + format_double(v.stay_probability) + " < C_xi Lip = " +
                                      format_double(v.noise_bound * v.lip)});
    } else {
      LatticeField v0 = in.u0;
      for (double& x : v0.mutable_values()) x *= 0.5;
      const auto res = paired_comparison(in.kernel, in.sigma, in.noise, in.u0, v0, in.n_max, verify_paths, in.seed,
                                         in.workers);
      const bool ok = res.order_violations == 0 && res.positivity_violations == 0;
      checks.push_back({"comparison", ok ? "pass" : "fail",
                        std::to_string(res.order_violations) + " order and " +
                            std::to_string(res.positivity_violations) + " sign violations in " +
                            std::to_string(res.checks) + " checks"});
    }
  }

  if (in.sigma.at_zero() == 0.0) {  // Picard
    PicardOptions po;
    po.n_max = std::min(in.n_max, 20);
    po.iterations = get_as<int>(in.cfg, in.text, "picard", "iterations");
    po.lambda = get_as<double>(in.cfg, in.text, "picard", "lambda");
    po.replicas = get_as<int>(in.cfg, in.text, "picard", "replicas");
    po.seed = in.seed;
    po.workers = in.workers;
    const auto rep = build(in.text, "picard", [&] { return picard_solve(in.kernel, in.sigma, in.u0, in.noise, po); });
    if (!rep.contraction_expected) {
      checks.push_back({"picard", "skip", rep.warning});
    } else {
      bool ok = true;
      double worst = 0.0;
      for (std::size_t i = 0; i < rep.ratio.size(); ++i) {
        if (std::isnan(rep.ratio[i])) continue;
        worst = std::max(worst, rep.ratio[i]);
        if (rep.ratio[i] > rep.predicted_factor + 3.0 * rep.ratio_se[i]) ok = false;
      }
      checks.push_back({"picard", ok ? "pass" : "fail",
                        "max ratio " + format_double(worst) + " vs factor " + format_double(rep.predicted_factor)});
    }
  } else {
    checks.push_back({"picard", "skip", "sigma(0) != 0"});
  }

  const bool linear = in.sigma.at_zero() == 0.0 && in.sigma.kind() != SigmaSpec::Kind::custom;
  if (linear && in.noise.is_white() && in.noise.mode() == NoiseMode::spacetime && closed) {  // oracles
    const int n_max = std::min(in.n_max, 25);
    const auto exact = exact_second_moment(in.kernel, in.u0, std::abs(in.sigma.slope()), n_max);
    const Box sites = in.u0.support_box().dilated(n_max * in.kernel.radius());
    MomentRequest req;
    req.sites = sites;
    req.n_max = n_max;
    req.replicas = in.replicas;
    req.seed = in.seed;
    req.workers = in.workers;
    SimulationConfig sc{in.kernel, in.sigma, in.noise, in.u0, in.box};
    const auto second = mc_moments(sc, req);
    req.p = 1.0;
    req.absolute = false;
    const auto first = mc_moments(sc, req);
    const auto powers = kernel_powers(in.kernel, n_max);
    double z2 = 0.0, z1 = 0.0;
    for (int n = 0; n <= n_max; ++n) {
      const auto mean = apply_slice(powers[static_cast<std::size_t>(n)], in.u0);
      sites.for_each([&](const Site& x, std::size_t i) {
        auto z = [](double est, double se, double truth) {
          const double d = std::abs(est - truth);
          const double floor = 1e-12 * std::max(std::abs(truth), 1e-300);
          return d <= floor ? 0.0 : (se > 0.0 ? d / se : std::numeric_limits<double>::infinity());
        };
        const auto nn = static_cast<std::size_t>(n);
        z2 = std::max(z2, z(second.value[nn][i], second.stderr_[nn][i], exact[nn](x)));
        z1 = std::max(z1, z(first.value[nn][i], first.stderr_[nn][i], mean(x)));
      });
    }
    checks.push_back({"second-moment oracle", z2 <= 5.0 ? "pass" : "fail", "max |z| = " + format_double(z2)});
    checks.push_back({"mean oracle", z1 <= 5.0 ? "pass" : "fail", "max |z| = " + format_double(z1)});
  } else {
    checks.push_back({"second-moment oracle", "skip", "needs linear sigma and white space-time noise"});
  }

  {  // spectral
    SpectralProfile profile(in.kernel);
    double worst = 0.0;
    for (double l : {1.2, 1.5, 2.0, 5.0})
      worst = std::max(worst, std::abs(upsilon_series(profile, l).value -
                                       upsilon_quadrature(in.kernel, l, profile.quadrature_points())));
    double trip = 0.0;
    for (double x : {0.25, 0.5, 1.0, 2.0}) {
      const double l = upsilon_inverse(profile, x);
      if (l > 1.0) trip = std::max(trip, std::abs(upsilon_series(profile, l).value - x));
    }
    const bool ok = worst <= 1e-8 && trip <= 1e-8;
    checks.push_back({"spectral", ok ? "pass" : "fail",
                      "series/quadrature " + format_double(worst) + ", round trip " + format_double(trip)});
  }
  return checks;
}

int cmd_verify(const Inputs& in, OutputSet& out, std::ostream& log) {
  const auto checks = run_checks(in);
  std::string csv = "suite,status,detail\n";
  bool failed = false;
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.suite.size());
  for (const auto& c : checks) {
    csv += c.suite + "," + c.status + ",\"" + c.detail + "\"\n";
    log << c.suite << std::string(width + 2 - c.suite.size(), ' ') << c.status << "  " << c.detail << "\n";
    failed = failed || c.status == "fail";
  }
  out.write("verify.csv", csv);
  return failed ? kVerificationFailed : kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete stochastic heat equation toolkit"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::vector<std::string> set, kernel, lambda, nu, nmax, workers, seed, out, replicas;
  } f;

  std::vector<CLI::App*> subs;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "sample trajectories and Monte Carlo moments"},
      {"exact-moments", "second moment from the deterministic recursion"},
      {"spectral", "Upsilon, its inverse and the moment-exponent bounds"},
      {"temporal", "time-only noise: Gamma(p) and path statistics"},
      {"verify", "run the consistency checks on a config"}};
  for (const auto& [name, what] : commands) {
    auto* s = app.add_subcommand(name, what);
    s->add_option("-c,--config", f.config, "JSON config file");
    s->add_option("--set", f.set, "override, key=value (value parsed as JSON)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--kernel", f.kernel, "simpleD or lazyD:a")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--lambda", f.lambda, "spectral lambda")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--nu", f.nu, "linear sigma slope")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--nmax", f.nmax, "horizon")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--replicas", f.replicas, "replica count")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--workers", f.workers, "worker threads (0 = all)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--seed", f.seed, "master seed")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    s->add_option("--out", f.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    subs.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kConfigError;
  }
  CLI::App* sub = nullptr;
  for (auto* s : subs)
    if (s->parsed()) sub = s;

  // Overrides in command-line order.
  std::vector<std::pair<std::string, std::string>> overrides;
  std::map<std::string, std::size_t> seen;
  for (const CLI::Option* opt : sub->parse_order()) {
    const std::string name = opt->get_name();
    const std::size_t k = seen[name]++;
    const auto& res = opt->results();
    if (k >= res.size()) continue;
    const std::string& v = res[k];
    try {
      if (name == "--set") {
        const auto eq = v.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + v + "'", 0);
        overrides.emplace_back(v.substr(0, eq), v.substr(eq + 1));
      } else if (name == "--kernel") {
        overrides.emplace_back("kernel", kernel_shorthand(v).dump());
      } else if (name == "--lambda") {
        overrides.emplace_back("spectral.lambda", "[" + v + "]");
      } else if (name == "--nu") {
        overrides.emplace_back("sigma", json{{"type", "linear"}, {"nu", json::parse(v)}}.dump());
      } else if (name == "--nmax") {
        overrides.emplace_back("n_max", v);
      } else if (name == "--replicas") {
        overrides.emplace_back("replicas", v);
      } else if (name == "--workers") {
        overrides.emplace_back("workers", v);
      } else if (name == "--seed") {
        overrides.emplace_back("seed", v);
      } else if (name == "--out") {
        overrides.emplace_back("output_dir", json(v).dump());
      }
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << "\n";
      return kConfigError;
    } catch (const json::exception& e) {
      err << "error: bad value for " << name << ": " << e.what() << "\n";
      return kConfigError;
    }
  }

  Inputs in;
  fs::path dir;
  try {
    const Resolved r = resolve_config(f.config.empty() ? std::nullopt : std::optional<std::string>(f.config), overrides);
    in = validate(r);
    if (r.output_dir)
      dir = *r.output_dir;
    else if (const char* env = std::getenv("DSHEAT_OUT_DIR"); env && *env)
      dir = env;
    else
      dir = "dsheat_out";
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "error: config: " << e.what() << "\n";
    return kConfigError;
  }

  std::optional<OutputSet> outputs;
  try {
    outputs.emplace(dir);
    outputs->write("config.json", dump(in.cfg));
    const std::string name = sub->get_name();
    int code = kSuccess;
    if (name == "simulate")
      code = cmd_simulate(in, *outputs, out);
    else if (name == "exact-moments")
      code = cmd_exact_moments(in, *outputs, out);
    else if (name == "spectral")
      code = cmd_spectral(in, *outputs, out);
    else if (name == "temporal")
      code = cmd_temporal(in, *outputs, out);
    else
      code = cmd_verify(in, *outputs, out);
    return code;
  } catch (const ConfigError& e) {
    if (outputs) outputs->rollback();
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    if (outputs) outputs->rollback();
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace dsheat::cli
