#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfid/errors.hpp"
#include "mfid/grid.hpp"
#include "mfid/rootfind.hpp"
#include "mfid/stencils.hpp"

namespace mfid {

/// Positivity floor for log/power mobility evaluation: the clipped density
/// update can produce exact zeros that would break log-based integrands.
inline constexpr double kPositivityFloor = 1e-10;

namespace detail {

// u(u-1)/log(u) expanded at u = 1+w; removable singularity filled by the
// series on |w| < 1e-4 where the direct quotient loses digits.
inline constexpr double kFkppWindow = 1e-4;

inline double fkpp_series(double w) {
  return 1.0 + w * (1.5 + w * (5.0 / 12.0 + w * (-1.0 / 24.0 + w * (11.0 / 720.0))));
}
inline double fkpp_series_d1(double w) {
  return 1.5 + w * (5.0 / 6.0 + w * (-0.125 + w * (11.0 / 180.0)));
}
inline double fkpp_series_d2(double w) { return 5.0 / 6.0 + w * (-0.25 + w * (11.0 / 60.0)); }

inline double poly_eval(const std::vector<double>& c, double u, int deriv) {
  // d-th derivative of sum c[k] u^k, Horner on the shifted coefficients
  double s = 0.0;
  for (int k = int(c.size()) - 1; k >= deriv; --k) {
    double fac = 1.0;
    for (int m = 0; m < deriv; ++m) fac *= double(k - m);
    s = s * u + fac * c[k];
  }
  return s;
}

}  // namespace detail

/// Reaction mobility of the Fisher-KPP pair, V2(u) = u(u-1)/log u, with the
/// removable singularity at u = 1 filled by its limit.
inline double v2_fkpp_guarded(double u) {
  if (!(u > 0.0)) throw std::domain_error("v2_fkpp_guarded: u must be positive");
  const double w = u - 1.0;
  if (std::abs(w) < detail::kFkppWindow) return detail::fkpp_series(w);
  return u * w / std::log(u);
}

/// Scalar mobility function with closed-form first and second derivatives.
/// A tagged form keeps the per-cell Newton loop free of indirect calls.
struct MobilityFn {
  enum class Form { Zero, Const, Linear, Power, Fkpp, InvPolySecond };

  Form form = Form::Zero;
  double c = 1.0;      // Const: V = c; Linear: V = c*(u + c3)
  double c3 = 0.0;     // Linear shift
  double alpha = 1.0;  // Power: V = u^alpha
  std::vector<double> poly;  // InvPolySecond: V = 1/f''(u), f = sum poly[k] u^k

  static MobilityFn zero() { return {}; }
  static MobilityFn constant(double k) { return {Form::Const, k}; }
  static MobilityFn linear(double c_, double c3_) { return {Form::Linear, c_, c3_}; }
  static MobilityFn identity() { return linear(1.0, 0.0); }
  static MobilityFn power(double a) {
    MobilityFn m{Form::Power};
    m.alpha = a;
    return m;
  }
  static MobilityFn fkpp() { return {Form::Fkpp}; }
  static MobilityFn inv_second_derivative(std::vector<double> f_coeffs) {
    MobilityFn m{Form::InvPolySecond};
    m.poly = std::move(f_coeffs);
    return m;
  }

  bool is_zero() const { return form == Form::Zero; }

  void eval_all(double u, double& v, double& dv, double& ddv) const {
    switch (form) {
      case Form::Zero:
        v = dv = ddv = 0.0;
        return;
      case Form::Const:
        v = c;
        dv = ddv = 0.0;
        return;
      case Form::Linear:
        v = c * (u + c3);
        dv = c;
        ddv = 0.0;
        return;
      case Form::Power: {
        const double uu = std::max(u, kPositivityFloor);
        if (alpha == 1.0) {
          v = uu;
          dv = 1.0;
          ddv = 0.0;
        } else if (alpha == 2.0) {
          v = uu * uu;
          dv = 2.0 * uu;
          ddv = 2.0;
        } else if (alpha == 0.5) {
          const double s = std::sqrt(uu);
          v = s;
          dv = 0.5 / s;
          ddv = -0.25 / (s * uu);
        } else {
          v = std::pow(uu, alpha);
          dv = alpha * v / uu;
          ddv = alpha * (alpha - 1.0) * v / (uu * uu);
        }
        return;
      }
      case Form::Fkpp: {
        const double uu = std::max(u, kPositivityFloor);
        const double w = uu - 1.0;
        if (std::abs(w) < detail::kFkppWindow) {
          v = detail::fkpp_series(w);
          dv = detail::fkpp_series_d1(w);
          ddv = detail::fkpp_series_d2(w);
        } else {
          const double L = std::log(uu);
          const double iL = 1.0 / L;
          v = uu * w * iL;
          dv = (2.0 * uu - 1.0) * iL - w * iL * iL;
          ddv = 2.0 * iL - (2.0 * uu - 1.0) / uu * iL * iL - iL * iL +
                2.0 * w / uu * iL * iL * iL;
        }
        return;
      }
      case Form::InvPolySecond: {
        const double h = detail::poly_eval(poly, u, 2);
        const double hp = detail::poly_eval(poly, u, 3);
        const double hpp = detail::poly_eval(poly, u, 4);
        v = 1.0 / h;
        dv = -hp / (h * h);
        ddv = (2.0 * hp * hp - h * hpp) / (h * h * h);
        return;
      }
    }
  }

  double value(double u) const {
    double v, dv, ddv;
    eval_all(u, v, dv, ddv);
    return v;
  }
  double deriv(double u) const {
    double v, dv, ddv;
    eval_all(u, v, dv, ddv);
    return dv;
  }
  double second(double u) const {
    double v, dv, ddv;
    eval_all(u, v, dv, ddv);
    return ddv;
  }
};

/// Provenance of a catalog entry: the (F, G, R) triple whose quotients the
/// mobilities are, where the source gives them explicitly. Test-only.
struct FgrSource {
  std::function<double(double)> f_prime;
  std::function<double(double)> g_prime;
  std::function<double(double)> g_second;
  std::function<double(double)> reaction;
};

struct MobilityPair {
  MobilityFn v1;
  MobilityFn v2;
  std::string label;
  double u_min = 0.0;  // both mobilities finite and nonnegative for u > u_min
  std::optional<FgrSource> fgr;
};

/// Lyapunov integrand G with its derivative and the conjugate derivative
/// (G*)' = (G')^{-1} that drives the terminal density update.
struct EntropySpec {
  enum class Kind { Entropy, Quadratic, Indicator, Custom };

  Kind kind = Kind::Entropy;
  double weight = 1.0;  // Entropy: G = weight*(u log u - u)
  double beta = 1.0;    // Quadratic: G = (beta/2) u^2
  double target = 0.0;  // Indicator: fixed terminal value (scalar form)
  std::function<double(double)> custom_g, custom_gp, custom_gpp, custom_gsp;

  static EntropySpec entropy(double weight = 1.0) {
    EntropySpec s;
    s.kind = Kind::Entropy;
    s.weight = weight;
    return s;
  }
  static EntropySpec quadratic(double beta) {
    EntropySpec s;
    s.kind = Kind::Quadratic;
    s.beta = beta;
    return s;
  }
  static EntropySpec indicator(double target) {
    EntropySpec s;
    s.kind = Kind::Indicator;
    s.target = target;
    return s;
  }
  static EntropySpec custom(std::function<double(double)> g, std::function<double(double)> gp,
                            std::function<double(double)> gpp,
                            std::function<double(double)> gsp = nullptr) {
    EntropySpec s;
    s.kind = Kind::Custom;
    s.custom_g = std::move(g);
    s.custom_gp = std::move(gp);
    s.custom_gpp = std::move(gpp);
    s.custom_gsp = std::move(gsp);
    return s;
  }

  double g(double u) const {
    switch (kind) {
      case Kind::Entropy: {
        const double uu = std::max(u, kPositivityFloor);
        return weight * (uu * std::log(uu) - uu);
      }
      case Kind::Quadratic:
        return 0.5 * beta * u * u;
      case Kind::Indicator:
        return 0.0;  // finite branch; the solver pins the terminal slice
      case Kind::Custom:
        return custom_g(u);
    }
    return 0.0;
  }

  double g_prime(double u) const {
    switch (kind) {
      case Kind::Entropy:
        return weight * std::log(std::max(u, kPositivityFloor));
      case Kind::Quadratic:
        return beta * u;
      case Kind::Indicator:
        throw std::domain_error("EntropySpec: indicator has no pointwise derivative");
      case Kind::Custom:
        return custom_gp(u);
    }
    return 0.0;
  }

  double g_second(double u) const {
    switch (kind) {
      case Kind::Entropy:
        return weight / std::max(u, kPositivityFloor);
      case Kind::Quadratic:
        return beta;
      case Kind::Indicator:
        throw std::domain_error("EntropySpec: indicator has no pointwise derivative");
      case Kind::Custom:
        return custom_gpp(u);
    }
    return 0.0;
  }

  /// (G*)'(p), the inverse of G'. Indicator returns the fixed target
  /// regardless of p. Custom without a closed inverse solves G'(x) = p by
  /// safeguarded Newton to 1e-12.
  double g_star_prime(double p) const {
    switch (kind) {
      case Kind::Entropy: {
        double a = p / weight;
        a = std::min(std::max(a, -700.0), 700.0);
        return std::exp(a);
      }
      case Kind::Quadratic:
        return p / beta;
      case Kind::Indicator:
        return target;
      case Kind::Custom: {
        if (custom_gsp) return custom_gsp(p);
        double lo = kPositivityFloor, hi = 1.0;
        for (int k = 0; k < 400 && custom_gp(hi) < p; ++k) hi *= 2.0;
        if (custom_gp(lo) > p) return lo;
        auto r = newton_bisection([&](double x) { return custom_gp(x) - p; },
                                  [&](double x) { return custom_gpp(x); }, lo, hi,
                                  0.5 * (lo + hi), 1e-12, 200);
        return r.x;
      }
    }
    return 0.0;
  }
};

inline double legendre_conjugate_prime(const EntropySpec& spec, double p) {
  return spec.g_star_prime(p);
}

/// Running potential integrand s(u) with strength c; the objective carries
/// +s(u) per interior time level.
struct PotentialSpec {
  enum class Kind { None, Entropy, Quadratic };

  Kind kind = Kind::None;
  double c = 0.0;

  static PotentialSpec none() { return {}; }
  static PotentialSpec entropy(double c_) { return {Kind::Entropy, c_}; }
  static PotentialSpec quadratic(double c_) { return {Kind::Quadratic, c_}; }

  double s(double u) const {
    switch (kind) {
      case Kind::None:
        return 0.0;
      case Kind::Entropy: {
        const double uu = std::max(u, kPositivityFloor);
        return c * (uu * std::log(uu) - uu);
      }
      case Kind::Quadratic:
        return 0.5 * c * u * u;
    }
    return 0.0;
  }
  double s_prime(double u) const {
    switch (kind) {
      case Kind::None:
        return 0.0;
      case Kind::Entropy:
        return c * std::log(std::max(u, kPositivityFloor));
      case Kind::Quadratic:
        return c * u;
    }
    return 0.0;
  }
  double s_second(double u) const {
    switch (kind) {
      case Kind::None:
        return 0.0;
      case Kind::Entropy:
        return c / std::max(u, kPositivityFloor);
      case Kind::Quadratic:
        return c;
    }
    return 0.0;
  }

  /// Resolvent (Id + sigma (s*)')^{-1}(rhs). Quadratic is closed form;
  /// entropy reduces to a Lambert W evaluated in the log domain; s == 0
  /// forces the dual variable to zero.
  double resolvent(double rhs, double sigma) const {
    switch (kind) {
      case Kind::None:
        return 0.0;
      case Kind::Entropy: {
        if (sigma == 0.0) return rhs;
        const double z = std::log(sigma / c) + rhs / c;
        return rhs - c * lambert_w_log(z);
      }
      case Kind::Quadratic:
        return rhs / (1.0 + sigma / c);
    }
    return 0.0;
  }
  double conjugate_prime(double p) const {
    switch (kind) {
      case Kind::None:
        return 0.0;
      case Kind::Entropy: {
        double a = std::min(std::max(p / c, -700.0), 700.0);
        return std::exp(a);
      }
      case Kind::Quadratic:
        return p / c;
    }
    return 0.0;
  }

  bool operator==(const PotentialSpec&) const = default;
};

struct CatalogParams {
  double alpha = 2.0;             // power_alpha, diffusion_reaction_alpha
  std::vector<double> f_coeffs;   // allen_cahn double-well f
  double check_lo = 0.1;          // allen_cahn convexity sampling range
  double check_hi = 10.0;
};

struct CatalogEntry {
  MobilityPair pair;
  EntropySpec entropy;
  std::string source;  // textual (F, G, R) provenance
};

/// The mobility catalog. Every entry is the quotient pair
/// V1 = F'/G'', V2 = -R/G' of an explicit (F, G, R) triple where the
/// triple is known; those entries carry the closures for the consistency
/// tests.
inline CatalogEntry catalog_lookup(const std::string& name, const CatalogParams& params = {}) {
  auto entropy_fgr = [](std::function<double(double)> fp, std::function<double(double)> r) {
    FgrSource s;
    s.f_prime = std::move(fp);
    s.g_prime = [](double u) { return std::log(std::max(u, kPositivityFloor)); };
    s.g_second = [](double u) { return 1.0 / std::max(u, kPositivityFloor); };
    s.reaction = std::move(r);
    return s;
  };

  if (name == "wasserstein") {
    MobilityPair p{MobilityFn::identity(), MobilityFn::zero(), "wasserstein", 0.0,
                   entropy_fgr([](double) { return 1.0; }, [](double) { return 0.0; })};
    return {p, EntropySpec::entropy(), "F = u, G = u log u - u, R = 0"};
  }
  if (name == "power_alpha") {
    MobilityPair p{MobilityFn::power(params.alpha), MobilityFn::zero(), "power_alpha", 0.0, {}};
    return {p, EntropySpec::entropy(), "F'/G'' = u^alpha, R = 0"};
  }
  if (name == "h_minus_1") {
    MobilityPair p{MobilityFn::constant(1.0), MobilityFn::zero(), "h_minus_1", 0.0, {}};
    return {p, EntropySpec::entropy(), "F'/G'' = 1, R = 0"};
  }
  if (name == "fisher_rao") {
    MobilityPair p{MobilityFn::zero(), MobilityFn::identity(), "fisher_rao", 0.0,
                   entropy_fgr([](double) { return 0.0; },
                               [](double u) { return -u * std::log(std::max(u, kPositivityFloor)); })};
    return {p, EntropySpec::entropy(), "F = 0, G = u log u - u, R = -u log u"};
  }
  if (name == "diffusion_reaction_alpha") {
    const double a = params.alpha;
    MobilityPair p{MobilityFn::identity(), MobilityFn::power(a), "diffusion_reaction_alpha", 0.0,
                   entropy_fgr([](double) { return 1.0; },
                               [a](double u) {
                                 const double uu = std::max(u, kPositivityFloor);
                                 return -std::pow(uu, a) * std::log(uu);
                               })};
    return {p, EntropySpec::entropy(), "F = u, G = u log u - u, R = -u^alpha log u"};
  }
  if (name == "constant_regularized") {
    FgrSource s;
    s.f_prime = [](double) { return 1.0; };
    s.g_prime = [](double u) { return std::log(u + 1.0) + 1.0; };
    s.g_second = [](double u) { return 1.0 / (u + 1.0); };
    s.reaction = [](double) { return 0.0; };
    MobilityPair p{MobilityFn::linear(1.0, 1.0), MobilityFn::zero(), "constant_regularized", 0.0, s};
    EntropySpec g = EntropySpec::custom(
        [](double u) { return (u + 1.0) * std::log(u + 1.0); },
        [](double u) { return std::log(u + 1.0) + 1.0; },
        [](double u) { return 1.0 / (u + 1.0); },
        [](double p_) { return std::exp(std::min(p_ - 1.0, 700.0)) - 1.0; });
    return {p, g, "F = u, G = (u+1) log(u+1), R = 0"};
  }
  if (name == "fisher_kpp") {
    MobilityPair p{MobilityFn::identity(), MobilityFn::fkpp(), "fisher_kpp", 0.0,
                   entropy_fgr([](double) { return 1.0; }, [](double u) { return u * (1.0 - u); })};
    return {p, EntropySpec::entropy(), "F = u, G = u log u - u, R = u(1-u)"};
  }
  if (name == "allen_cahn") {
    if (params.f_coeffs.size() < 3)
      throw ConfigError("catalog_lookup: allen_cahn requires polynomial f coefficients");
    const auto& cf = params.f_coeffs;
    // V1 = 1/f'' must stay positive on the requested range; f need not be
    // globally convex, so sample and refuse otherwise.
    const int samples = 256;
    for (int k = 0; k <= samples; ++k) {
      const double u = params.check_lo + (params.check_hi - params.check_lo) * k / samples;
      if (detail::poly_eval(cf, u, 2) <= 0.0)
        throw ConfigError("catalog_lookup: allen_cahn f''(u) <= 0 at u = " + std::to_string(u));
    }
    FgrSource s;
    s.f_prime = [](double) { return 1.0; };
    s.g_prime = [cf](double u) { return detail::poly_eval(cf, u, 1); };
    s.g_second = [cf](double u) { return detail::poly_eval(cf, u, 2); };
    s.reaction = [cf](double u) { return -detail::poly_eval(cf, u, 1); };
    MobilityPair p{MobilityFn::inv_second_derivative(cf), MobilityFn::constant(1.0), "allen_cahn",
                   params.check_lo, s};
    EntropySpec g = EntropySpec::custom([cf](double u) { return detail::poly_eval(cf, u, 0); },
                                        [cf](double u) { return detail::poly_eval(cf, u, 1); },
                                        [cf](double u) { return detail::poly_eval(cf, u, 2); });
    return {p, g, "F = u, G = f(u), R = -f'(u)"};
  }
  throw ConfigError("catalog_lookup: unknown mobility '" + name + "'");
}

/// Dissipation functional I(u) = int |grad G'(u)|^2 V1(u) + |G'(u)|^2 V2(u).
/// Face values of V1 are arithmetic means of the adjacent cells and the
/// gradient uses the same backward-difference face stencil as grad_phi, so
/// the explicit-flow dissipation identity is exact in space.
inline double information_functional(const SpatialField& u, const MobilityPair& pair,
                                     const EntropySpec& spec) {
  const SpaceGrid& g = u.grid;
  for (double x : u.v)
    if (!(x > pair.u_min))
      throw std::domain_error("information_functional: u outside mobility domain");

  SpatialField gp(g);
  for (int j = 0; j < g.nx1; ++j)
    for (int l = 0; l < g.nx2; ++l) gp(j, l) = spec.g_prime(u(j, l));

  double acc = 0.0;
  if (!pair.v1.is_zero()) {
    for (int j = 1; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) {
        const double d = (gp(j, l) - gp(j - 1, l)) / g.dx1;
        const double vf = 0.5 * (pair.v1.value(u(j, l)) + pair.v1.value(u(j - 1, l)));
        acc += d * d * vf;
      }
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 1; l < g.nx2; ++l) {
        const double d = (gp(j, l) - gp(j, l - 1)) / g.dx2;
        const double vf = 0.5 * (pair.v1.value(u(j, l)) + pair.v1.value(u(j, l - 1)));
        acc += d * d * vf;
      }
  }
  if (!pair.v2.is_zero()) {
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) acc += gp(j, l) * gp(j, l) * pair.v2.value(u(j, l));
  }
  return acc * g.cell_area();
}

}  // namespace mfid
