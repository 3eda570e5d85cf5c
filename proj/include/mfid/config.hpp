#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mfid/errors.hpp"
#include "mfid/grid.hpp"
#include "mfid/mobility.hpp"
#include "mfid/pdhg.hpp"

namespace mfid {

/// Full round-trip decimal formatting used by every numeric emitter.
inline std::string fmt_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

/// Sum of isotropic Gaussian bumps plus a constant offset.
struct GaussianMixtureSpec {
  struct Bump {
    double amp = 0.0, cx = 0.0, cy = 0.0, sharp = 0.0;
    bool operator==(const Bump&) const = default;
  };
  std::vector<Bump> bumps;
  double offset = 0.0;

  double operator()(double x, double y) const {
    double v = offset;
    for (const Bump& b : bumps)
      v += b.amp * std::exp(-b.sharp * ((x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy)));
    return v;
  }

  SpatialField evaluate(const SpaceGrid& g) const {
    SpatialField f(g);
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) f(j, l) = (*this)(g.x1(j), g.x2(l));
    return f;
  }

  bool operator==(const GaussianMixtureSpec&) const = default;
};

/// Mobility selection: a catalog name with parameters, the affine pair, or
/// free-form V1/V2 built from the named scalar forms (`zero`, `const K`,
/// `linear C C3`, `power A`, `fkpp`, `inv_fpp c0 c1 ...`).
struct MobilitySpec {
  std::string name = "wasserstein";
  double alpha = 2.0;
  double c1 = 1.0, c2 = 1.0, c3 = 0.0;
  std::vector<double> f_coeffs;
  double u_min = 0.1, u_max = 10.0;  // allen_cahn convexity sampling range
  std::string v1_form, v2_form;      // used when name == "custom"

  bool operator==(const MobilitySpec&) const = default;
};

enum class TerminalKind { Indicator, Entropy };

struct ExperimentConfig {
  // [problem]
  int nx1 = 64, nx2 = 64, nt = 16;
  GaussianMixtureSpec u0;
  GaussianMixtureSpec u1;
  bool has_u1 = false;
  TerminalKind terminal = TerminalKind::Indicator;
  double terminal_weight = 1.0;
  PotentialSpec::Kind potential = PotentialSpec::Kind::None;
  double c = 0.0;
  double reference_t_final = 1.0;
  double reference_dt = 0.0;  // 0: pick 80% of the stability bound
  // [mobility]
  MobilitySpec mobility;
  // [solver]
  SolveConfig solver;
  // [output]
  std::string out_dir = "out";
  std::vector<double> snapshot_times;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& s, int line) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw ConfigError("line " + std::to_string(line) + ": expected a number, got '" + s + "'");
  }
  if (pos != s.size())
    throw ConfigError("line " + std::to_string(line) + ": trailing characters in number '" + s +
                      "'");
  return v;
}

inline int parse_int(const std::string& s, int line) {
  const double v = parse_double(s, line);
  const int i = int(v);
  if (double(i) != v)
    throw ConfigError("line " + std::to_string(line) + ": expected an integer, got '" + s + "'");
  return i;
}

inline std::vector<double> parse_numbers(const std::string& s, int line) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, line));
  return out;
}

/// "amp cx cy sharp, amp cx cy sharp, ..."
inline std::vector<GaussianMixtureSpec::Bump> parse_bumps(const std::string& s, int line) {
  std::vector<GaussianMixtureSpec::Bump> out;
  std::string part;
  std::istringstream in(s);
  while (std::getline(in, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    const auto nums = parse_numbers(part, line);
    if (nums.size() != 4)
      throw ConfigError("line " + std::to_string(line) +
                        ": a gaussian bump needs 4 numbers (amp cx cy sharp)");
    out.push_back({nums[0], nums[1], nums[2], nums[3]});
  }
  return out;
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& cfg);
inline EntropySpec scale_terminal_weight(const EntropySpec& spec, double w);

/// Parses the flat `[section]` / `key = value` / `#`-comment grammar.
/// Sections: problem, mobility, solver, output. Unknown sections, unknown
/// keys and repeated keys are hard errors carrying the line number;
/// validation errors carry the key path.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::string section;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool saw_tau = false, saw_sigma = false;

  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (const auto h = s.find('#'); h != std::string::npos) s = s.substr(0, h);
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(line) + ": malformed section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      if (section != "problem" && section != "mobility" && section != "solver" &&
          section != "output")
        throw ConfigError("line " + std::to_string(line) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string val = detail::trim(s.substr(eq + 1));
    if (section.empty())
      throw ConfigError("line " + std::to_string(line) + ": key outside any section");
    const std::string path = section + "." + key;
    if (seen.count(path))
      throw ConfigError("line " + std::to_string(line) + ": duplicate key " + path +
                        " (first at line " + std::to_string(seen[path]) + ")");
    seen[path] = line;

    auto d = [&] { return detail::parse_double(val, line); };
    auto i = [&] { return detail::parse_int(val, line); };

    if (section == "problem") {
      if (key == "nx1") cfg.nx1 = i();
      else if (key == "nx2") cfg.nx2 = i();
      else if (key == "nt") cfg.nt = i();
      else if (key == "u0_offset") cfg.u0.offset = d();
      else if (key == "u0_gaussians") cfg.u0.bumps = detail::parse_bumps(val, line);
      else if (key == "u1_offset") { cfg.u1.offset = d(); cfg.has_u1 = true; }
      else if (key == "u1_gaussians") { cfg.u1.bumps = detail::parse_bumps(val, line); cfg.has_u1 = true; }
      else if (key == "terminal") {
        if (val == "indicator") cfg.terminal = TerminalKind::Indicator;
        else if (val == "entropy") cfg.terminal = TerminalKind::Entropy;
        else throw ConfigError("line " + std::to_string(line) + ": terminal must be indicator|entropy");
      }
      else if (key == "terminal_weight") cfg.terminal_weight = d();
      else if (key == "potential") {
        if (val == "none") cfg.potential = PotentialSpec::Kind::None;
        else if (val == "entropy") cfg.potential = PotentialSpec::Kind::Entropy;
        else if (val == "quadratic") cfg.potential = PotentialSpec::Kind::Quadratic;
        else throw ConfigError("line " + std::to_string(line) + ": potential must be none|entropy|quadratic");
      }
      else if (key == "c") cfg.c = d();
      else if (key == "reference_t_final") cfg.reference_t_final = d();
      else if (key == "reference_dt") cfg.reference_dt = d();
      else throw ConfigError("line " + std::to_string(line) + ": unknown key " + path);
    } else if (section == "mobility") {
      if (key == "name") cfg.mobility.name = val;
      else if (key == "alpha") cfg.mobility.alpha = d();
      else if (key == "c1") cfg.mobility.c1 = d();
      else if (key == "c2") cfg.mobility.c2 = d();
      else if (key == "c3") cfg.mobility.c3 = d();
      else if (key == "f_coeffs") cfg.mobility.f_coeffs = detail::parse_numbers(val, line);
      else if (key == "u_min") cfg.mobility.u_min = d();
      else if (key == "u_max") cfg.mobility.u_max = d();
      else if (key == "v1") cfg.mobility.v1_form = val;
      else if (key == "v2") cfg.mobility.v2_form = val;
      else throw ConfigError("line " + std::to_string(line) + ": unknown key " + path);
    } else if (section == "solver") {
      if (key == "mode") {
        if (val == "general") cfg.solver.mode = SolveMode::General;
        else if (val == "affine") cfg.solver.mode = SolveMode::Affine;
        else throw ConfigError("line " + std::to_string(line) + ": mode must be general|affine");
      }
      else if (key == "tau") { cfg.solver.tau = d(); saw_tau = true; }
      else if (key == "sigma") { cfg.solver.sigma = d(); saw_sigma = true; }
      else if (key == "max_iters") cfg.solver.max_iters = i();
      else if (key == "tol_residual") cfg.solver.tol_residual = d();
      else if (key == "tol_energy_rel") cfg.solver.tol_energy_rel = d();
      else if (key == "newton_eps") cfg.solver.newton_eps = d();
      else if (key == "newton_max_iters") cfg.solver.newton_max_iters = i();
      else if (key == "log_every") cfg.solver.log_every = i();
      else throw ConfigError("line " + std::to_string(line) + ": unknown key " + path);
    } else {  // output
      if (key == "dir") cfg.out_dir = val;
      else if (key == "snapshot_times") cfg.snapshot_times = detail::parse_numbers(val, line);
      else throw ConfigError("line " + std::to_string(line) + ": unknown key " + path);
    }
  }
  (void)saw_tau;
  (void)saw_sigma;

  validate_config(cfg);
  return cfg;
}

/// Canonical emission; parse(emit(cfg)) reproduces cfg exactly.
inline std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto bumps = [](const GaussianMixtureSpec& gm) {
    std::string s;
    for (std::size_t k = 0; k < gm.bumps.size(); ++k) {
      const auto& b = gm.bumps[k];
      if (k) s += ", ";
      s += fmt_g17(b.amp) + " " + fmt_g17(b.cx) + " " + fmt_g17(b.cy) + " " + fmt_g17(b.sharp);
    }
    return s;
  };
  out << "[problem]\n";
  out << "nx1 = " << cfg.nx1 << "\n";
  out << "nx2 = " << cfg.nx2 << "\n";
  out << "nt = " << cfg.nt << "\n";
  out << "u0_offset = " << fmt_g17(cfg.u0.offset) << "\n";
  if (!cfg.u0.bumps.empty()) out << "u0_gaussians = " << bumps(cfg.u0) << "\n";
  if (cfg.has_u1) {
    out << "u1_offset = " << fmt_g17(cfg.u1.offset) << "\n";
    if (!cfg.u1.bumps.empty()) out << "u1_gaussians = " << bumps(cfg.u1) << "\n";
  }
  out << "terminal = " << (cfg.terminal == TerminalKind::Indicator ? "indicator" : "entropy")
      << "\n";
  out << "terminal_weight = " << fmt_g17(cfg.terminal_weight) << "\n";
  out << "potential = "
      << (cfg.potential == PotentialSpec::Kind::None
              ? "none"
              : cfg.potential == PotentialSpec::Kind::Entropy ? "entropy" : "quadratic")
      << "\n";
  out << "c = " << fmt_g17(cfg.c) << "\n";
  out << "reference_t_final = " << fmt_g17(cfg.reference_t_final) << "\n";
  out << "reference_dt = " << fmt_g17(cfg.reference_dt) << "\n";
  out << "\n[mobility]\n";
  out << "name = " << cfg.mobility.name << "\n";
  out << "alpha = " << fmt_g17(cfg.mobility.alpha) << "\n";
  out << "c1 = " << fmt_g17(cfg.mobility.c1) << "\n";
  out << "c2 = " << fmt_g17(cfg.mobility.c2) << "\n";
  out << "c3 = " << fmt_g17(cfg.mobility.c3) << "\n";
  if (!cfg.mobility.f_coeffs.empty()) {
    out << "f_coeffs =";
    for (double x : cfg.mobility.f_coeffs) out << " " << fmt_g17(x);
    out << "\n";
  }
  out << "u_min = " << fmt_g17(cfg.mobility.u_min) << "\n";
  out << "u_max = " << fmt_g17(cfg.mobility.u_max) << "\n";
  if (!cfg.mobility.v1_form.empty()) out << "v1 = " << cfg.mobility.v1_form << "\n";
  if (!cfg.mobility.v2_form.empty()) out << "v2 = " << cfg.mobility.v2_form << "\n";
  out << "\n[solver]\n";
  out << "mode = " << (cfg.solver.mode == SolveMode::General ? "general" : "affine") << "\n";
  out << "tau = " << fmt_g17(cfg.solver.tau) << "\n";
  out << "sigma = " << fmt_g17(cfg.solver.sigma) << "\n";
  out << "max_iters = " << cfg.solver.max_iters << "\n";
  out << "tol_residual = " << fmt_g17(cfg.solver.tol_residual) << "\n";
  out << "tol_energy_rel = " << fmt_g17(cfg.solver.tol_energy_rel) << "\n";
  out << "newton_eps = " << fmt_g17(cfg.solver.newton_eps) << "\n";
  out << "newton_max_iters = " << cfg.solver.newton_max_iters << "\n";
  out << "log_every = " << cfg.solver.log_every << "\n";
  out << "\n[output]\n";
  out << "dir = " << cfg.out_dir << "\n";
  if (!cfg.snapshot_times.empty()) {
    out << "snapshot_times =";
    for (double t : cfg.snapshot_times) out << " " << fmt_g17(t);
    out << "\n";
  }
  return out.str();
}

/// Scalar form parser for custom mobilities: `zero`, `const K`,
/// `linear C C3`, `power A`, `fkpp`, `inv_fpp c0 c1 ...`.
inline MobilityFn parse_mobility_form(const std::string& text) {
  std::istringstream in(text);
  std::string form;
  in >> form;
  std::vector<double> args;
  double x;
  while (in >> x) args.push_back(x);
  auto need = [&](std::size_t n) {
    if (args.size() != n)
      throw ConfigError("mobility form '" + text + "': expected " + std::to_string(n) +
                        " parameter(s)");
  };
  if (form == "zero") { need(0); return MobilityFn::zero(); }
  if (form == "const") { need(1); return MobilityFn::constant(args[0]); }
  if (form == "linear") { need(2); return MobilityFn::linear(args[0], args[1]); }
  if (form == "power") { need(1); return MobilityFn::power(args[0]); }
  if (form == "fkpp") { need(0); return MobilityFn::fkpp(); }
  if (form == "inv_fpp") {
    if (args.size() < 3) throw ConfigError("mobility form 'inv_fpp' needs >= 3 coefficients");
    return MobilityFn::inv_second_derivative(args);
  }
  throw ConfigError("unknown mobility form '" + form + "'");
}

struct ResolvedMobility {
  MobilityPair pair;
  EntropySpec lyapunov;  // the catalog's G, used for entropy terminals and references
};

inline ResolvedMobility resolve_mobility(const MobilitySpec& m) {
  if (m.name == "custom") {
    if (m.v1_form.empty() || m.v2_form.empty())
      throw ConfigError("mobility.custom requires both v1 and v2 forms");
    MobilityPair p{parse_mobility_form(m.v1_form), parse_mobility_form(m.v2_form), "custom", 0.0,
                   {}};
    return {p, EntropySpec::entropy()};
  }
  if (m.name == "affine") {
    AffineParams ap{m.c1, m.c2, m.c3};
    ap.validate();
    return {make_affine_pair(ap), EntropySpec::entropy()};
  }
  CatalogParams params;
  params.alpha = m.alpha;
  params.f_coeffs = m.f_coeffs;
  params.check_lo = m.u_min;
  params.check_hi = m.u_max;
  CatalogEntry e = catalog_lookup(m.name, params);
  return {e.pair, e.entropy};
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.nx1 < 2 || cfg.nx2 < 2 || cfg.nt < 2)
    throw ConfigError("problem.nx1/nx2/nt: grid must be at least 2 in every direction");
  resolve_mobility(cfg.mobility);  // throws on unresolvable names
  cfg.solver.validate();
  if (cfg.terminal == TerminalKind::Indicator && !cfg.has_u1)
    throw ConfigError("problem.terminal: indicator requires u1_offset/u1_gaussians");
  if (cfg.solver.mode == SolveMode::Affine && cfg.mobility.name != "affine")
    throw ConfigError("solver.mode: affine mode requires mobility.name = affine");
  if (!(cfg.terminal_weight > 0.0)) throw ConfigError("problem.terminal_weight must be positive");
  if (cfg.potential != PotentialSpec::Kind::None && !(cfg.c > 0.0))
    throw ConfigError("problem.c: a potential needs a positive strength");
  const SpaceGrid g(cfg.nx1, cfg.nx2);
  const SpatialField f0 = cfg.u0.evaluate(g);
  for (double v : f0.v)
    if (!(v > 0.0)) throw ConfigError("problem.u0: density must be strictly positive");
  if (cfg.has_u1) {
    const SpatialField f1 = cfg.u1.evaluate(g);
    for (double v : f1.v)
      if (!(v > 0.0)) throw ConfigError("problem.u1: density must be strictly positive");
  }
  for (double t : cfg.snapshot_times)
    if (t < 0.0 || t > 1.0)
      throw ConfigError("output.snapshot_times: times must lie in [0, 1]");
  if (!(cfg.reference_t_final > 0.0))
    throw ConfigError("problem.reference_t_final must be positive");
  if (cfg.reference_dt < 0.0) throw ConfigError("problem.reference_dt must be >= 0");
}

/// Snapshot times resolve to the nearest grid level; the runner records the
/// actual t in the snapshot metadata.
inline std::vector<int> snapshot_indices(const ExperimentConfig& cfg) {
  std::vector<int> idx;
  const Grid g(cfg.nx1, cfg.nx2, cfg.nt);
  for (double t : cfg.snapshot_times) {
    int n = int(std::lround(t / g.dt));
    n = std::max(0, std::min(g.nt - 1, n));
    if (idx.empty() || idx.back() != n) idx.push_back(n);
  }
  return idx;
}

inline ControlProblem build_problem(const ExperimentConfig& cfg) {
  ControlProblem prob;
  prob.grid = Grid(cfg.nx1, cfg.nx2, cfg.nt);
  ResolvedMobility rm = resolve_mobility(cfg.mobility);
  prob.pair = rm.pair;
  switch (cfg.potential) {
    case PotentialSpec::Kind::None: prob.potential = PotentialSpec::none(); break;
    case PotentialSpec::Kind::Entropy: prob.potential = PotentialSpec::entropy(cfg.c); break;
    case PotentialSpec::Kind::Quadratic: prob.potential = PotentialSpec::quadratic(cfg.c); break;
  }
  prob.u0 = cfg.u0.evaluate(prob.grid.space());
  if (cfg.has_u1) prob.u1 = cfg.u1.evaluate(prob.grid.space());
  if (cfg.terminal == TerminalKind::Indicator) {
    EntropySpec t;
    t.kind = EntropySpec::Kind::Indicator;
    prob.terminal = t;
  } else {
    prob.terminal = scale_terminal_weight(rm.lyapunov, cfg.terminal_weight);
  }
  if (cfg.mobility.name == "affine")
    prob.affine = AffineParams{cfg.mobility.c1, cfg.mobility.c2, cfg.mobility.c3};
  return prob;
}

enum class ExampleScale { Desk, Paper };

/// Built-in experiment presets reproducing the two published setups.
/// Names: example1_alpha<k> (k = 1..4) and example2_row<r> (r = 1..3).
inline ExperimentConfig build_example(const std::string& name,
                                      ExampleScale scale = ExampleScale::Paper) {
  ExperimentConfig cfg;
  if (scale == ExampleScale::Paper) {
    cfg.nx1 = cfg.nx2 = 128;
    cfg.nt = 30;
  } else {
    cfg.nx1 = cfg.nx2 = 64;
    cfg.nt = 16;
  }
  cfg.terminal = TerminalKind::Indicator;
  cfg.potential = PotentialSpec::Kind::Entropy;
  cfg.c = 0.1;
  cfg.snapshot_times = {0.0, 0.24, 0.48, 0.72, 0.9, 1.0};
  cfg.out_dir = "out/" + name;

  if (name.rfind("example1_alpha", 0) == 0) {
    const std::string tail = name.substr(std::string("example1_alpha").size());
    int a = 0;
    try {
      a = std::stoi(tail);
    } catch (...) {
      throw ConfigError("build_example: bad alpha suffix in '" + name + "'");
    }
    if (a < 1 || a > 4) throw ConfigError("build_example: alpha must be 1..4");
    cfg.u0.offset = 1.0;
    cfg.u0.bumps = {{10.0, 0.3, 0.7, 60.0}};
    cfg.u1.offset = 1.0;
    cfg.u1.bumps = {{20.0, 0.7, 0.3, 60.0}};
    cfg.has_u1 = true;
    cfg.mobility.name = "diffusion_reaction_alpha";
    cfg.mobility.alpha = double(a);
    return cfg;
  }
  if (name.rfind("example2_row", 0) == 0) {
    const std::string tail = name.substr(std::string("example2_row").size());
    int r = 0;
    try {
      r = std::stoi(tail);
    } catch (...) {
      throw ConfigError("build_example: bad row suffix in '" + name + "'");
    }
    cfg.u0.offset = 1.0;
    cfg.u0.bumps = {{15.0, 0.5, 0.5, 80.0}};
    cfg.u1.offset = 1.0;
    cfg.u1.bumps = {{15.0, 0.3, 0.3, 80.0}, {15.0, 0.7, 0.7, 80.0}};
    cfg.has_u1 = true;
    if (r == 1) {
      cfg.mobility.name = "fisher_kpp";  // V1 = u, V2 = u(u-1)/log u
    } else if (r == 2) {
      cfg.mobility.name = "custom";  // V1 = sqrt(u), V2 = u(u-1)/log u
      cfg.mobility.v1_form = "power 0.5";
      cfg.mobility.v2_form = "fkpp";
    } else if (r == 3) {
      cfg.mobility.name = "custom";  // V1 = sqrt(u), V2 = u
      cfg.mobility.v1_form = "power 0.5";
      cfg.mobility.v2_form = "linear 1 0";
    } else {
      throw ConfigError("build_example: row must be 1..3");
    }
    return cfg;
  }
  throw ConfigError("build_example: unknown example '" + name + "'");
}

inline EntropySpec scale_terminal_weight(const EntropySpec& spec, double w) {
  if (w == 1.0) return spec;
  switch (spec.kind) {
    case EntropySpec::Kind::Entropy:
      return EntropySpec::entropy(spec.weight * w);
    case EntropySpec::Kind::Quadratic:
      return EntropySpec::quadratic(spec.beta * w);
    case EntropySpec::Kind::Custom: {
      auto g = spec.custom_g, gp = spec.custom_gp, gpp = spec.custom_gpp;
      return EntropySpec::custom([g, w](double u) { return w * g(u); },
                                 [gp, w](double u) { return w * gp(u); },
                                 [gpp, w](double u) { return w * gpp(u); });
    }
    case EntropySpec::Kind::Indicator:
      break;
  }
  throw ConfigError("scale_terminal_weight: unsupported terminal kind");
}

}  // namespace mfid
