#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "perfpeel/errors.hpp"
#include "perfpeel/peel.hpp"

namespace perfpeel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// k / (s_R - k - 1), infinite when the denominator is not positive.
double range_ratio(Index k, Index s_R) {
  const Index den = s_R - k - 1;
  return den > 0 ? static_cast<double>(k) / static_cast<double>(den) : kInf;
}

// s_R / (s_L - s_R - 1), infinite when the denominator is not positive.
double regression_ratio(Index s_R, Index s_L) {
  const Index den = s_L - s_R - 1;
  return den > 0 ? static_cast<double>(s_R) / static_cast<double>(den) : kInf;
}

struct Constants {
  double linear;     // 30 or 10
  double quadratic;  // 900 or 100
};

Constants constants_for(Variant v) {
  return v == Variant::generalized_nystrom ? Constants{30.0, 900.0} : Constants{10.0, 100.0};
}

bool range_ok(Variant v, Index k, Index s_R, double beta) {
  return range_ratio(k, s_R) <= beta / constants_for(v).linear;
}
bool perforation_ok(Variant v, Index k, Index s_R, Index t_R, double beta) {
  return range_ratio(k, s_R) / static_cast<double>(t_R) <= beta * beta / constants_for(v).quadratic;
}
bool regression_ok(Index s_R, Index s_L, double beta) {
  return regression_ratio(s_R, s_L) <= beta * beta / 900.0;
}
bool left_perforation_ok(Index t_L, double beta) {
  return 1.0 / static_cast<double>(t_L) <= beta * beta / 100.0;
}

// Smallest x >= lo with pred(x); pred must be monotone.
Index smallest_satisfying(Index lo, const std::function<bool(Index)>& pred) {
  Index hi = std::max<Index>(lo, 1);
  while (!pred(hi)) {
    if (hi > (std::numeric_limits<Index>::max() >> 2)) throw ConfigError("parameter search overflow");
    hi *= 2;
  }
  while (lo < hi) {
    const Index mid = lo + (hi - lo) / 2;
    if (pred(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace

std::string variant_name(Variant v) {
  return v == Variant::generalized_nystrom ? "generalized_nystrom" : "rsvd";
}

Variant parse_variant(const std::string& name) {
  if (name == "generalized_nystrom" || name == "gn" || name == "GN") return Variant::generalized_nystrom;
  if (name == "rsvd" || name == "RSVD") return Variant::rsvd;
  throw ConfigError("unknown variant '" + name + "' (expected generalized_nystrom or rsvd)");
}

std::vector<std::string> validity_violations(const PeelConfig& cfg) {
  std::vector<std::string> out;
  if (!cfg.beta) return out;
  const double beta = *cfg.beta;
  const Constants c = constants_for(cfg.variant);
  const auto fmt = [](double x) { return std::to_string(x); };
  if (!range_ok(cfg.variant, cfg.k, cfg.s_R, beta)) {
    out.push_back("k/(s_R-k-1) = " + fmt(range_ratio(cfg.k, cfg.s_R)) + " > beta/" +
                  fmt(c.linear) + " = " + fmt(beta / c.linear));
  }
  if (!perforation_ok(cfg.variant, cfg.k, cfg.s_R, cfg.t_R, beta)) {
    out.push_back("k/(s_R-k-1)/t_R = " +
                  fmt(range_ratio(cfg.k, cfg.s_R) / static_cast<double>(cfg.t_R)) + " > beta^2/" +
                  fmt(c.quadratic) + " = " + fmt(beta * beta / c.quadratic));
  }
  if (cfg.variant == Variant::generalized_nystrom) {
    if (!regression_ok(cfg.s_R, cfg.s_L, beta)) {
      out.push_back("s_R/(s_L-s_R-1) = " + fmt(regression_ratio(cfg.s_R, cfg.s_L)) +
                    " > beta^2/900 = " + fmt(beta * beta / 900.0));
    }
  } else if (!left_perforation_ok(cfg.t_L, beta)) {
    out.push_back("1/t_L = " + fmt(1.0 / static_cast<double>(cfg.t_L)) + " > beta^2/100 = " +
                  fmt(beta * beta / 100.0));
  }
  return out;
}

void validate(const PeelConfig& cfg) {
  if (cfg.k < 1) throw ConfigError("k must be at least 1");
  if (cfg.s_R < cfg.k) throw ConfigError("s_R must be at least k");
  if (cfg.t_R < 1 || cfg.t_L < 1) throw ConfigError("t_R and t_L must be at least 1");
  if (cfg.variant == Variant::generalized_nystrom && cfg.s_L < cfg.s_R) {
    throw ConfigError("generalized Nystrom needs s_L >= s_R");
  }
  if (cfg.beta && !(*cfg.beta > 0.0 && *cfg.beta <= 1.0)) {
    throw ConfigError("beta must lie in (0, 1]");
  }
  if (cfg.validation == Validation::strict) {
    const auto v = validity_violations(cfg);
    if (!v.empty()) {
      std::string msg = "configuration violates the validity conditions for beta:";
      for (const auto& s : v) msg += "\n  " + s;
      throw ConfigError(msg);
    }
  }
}

PeelConfig params_for_beta(Index k, double beta, Variant variant, ParamProfile profile) {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  PeelConfig cfg;
  cfg.k = k;
  cfg.variant = variant;
  cfg.beta = beta;

  if (profile == ParamProfile::unperforated) {
    if (variant != Variant::generalized_nystrom) {
      throw ConfigError("the unperforated profile exists for generalized Nystrom only");
    }
    cfg.t_R = 1;
    cfg.s_R = smallest_satisfying(k + 2, [&](Index s) {
      return range_ok(variant, k, s, beta) && perforation_ok(variant, k, s, 1, beta);
    });
  } else {
    cfg.s_R = smallest_satisfying(k + 2, [&](Index s) { return range_ok(variant, k, s, beta); });
    cfg.t_R = smallest_satisfying(1, [&](Index t) { return perforation_ok(variant, k, cfg.s_R, t, beta); });
  }

  if (variant == Variant::generalized_nystrom) {
    cfg.t_L = 1;
    cfg.s_L = smallest_satisfying(cfg.s_R + 2, [&](Index s) { return regression_ok(cfg.s_R, s, beta); });
  } else {
    cfg.s_L = cfg.s_R;
    cfg.t_L = smallest_satisfying(1, [&](Index t) { return left_perforation_ok(t, beta); });
  }
  return cfg;
}

QueryCounts expected_counts(const PeelConfig& cfg, Index n) {
  const HodlrStructure s = hodlr_structure(n, cfg.k);
  const std::int64_t L = s.L;
  QueryCounts c;
  c.forward = 2 * L * cfg.s_R * cfg.t_R;
  if (cfg.variant == Variant::generalized_nystrom) {
    c.transpose = (2 * L + 1) * cfg.s_L * cfg.t_L;
  } else {
    c.transpose = 2 * L * cfg.s_R * cfg.t_L + s.n_base * cfg.t_L;
  }
  return c;
}

}  // namespace perfpeel
