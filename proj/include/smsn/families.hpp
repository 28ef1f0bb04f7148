#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "smsn/linalg.hpp"

namespace smsn {

enum class Family { normal, skew_normal, skew_t, skew_slash, skew_cont_normal };

// Which SMSN member, together with its mixing parameter nu:
//   normal / skew_normal : U == 1, nu empty
//   skew_t               : U ~ Gamma(nu/2, nu/2), nu > 0
//   skew_slash           : U ~ Beta(nu, 1), nu > 0
//   skew_cont_normal     : U in {nu2, 1} with P(U=nu2) = nu1
struct MixingFamily {
  Family tag = Family::normal;
  Vec nu;

  static MixingFamily normal() { return {Family::normal, Vec()}; }
  static MixingFamily skew_normal() { return {Family::skew_normal, Vec()}; }
  static MixingFamily skew_t(double nu) {
    return {Family::skew_t, Vec::Constant(1, nu)};
  }
  static MixingFamily skew_slash(double nu) {
    return {Family::skew_slash, Vec::Constant(1, nu)};
  }
  static MixingFamily skew_cont_normal(double nu1, double nu2) {
    Vec v(2);
    v << nu1, nu2;
    return {Family::skew_cont_normal, v};
  }

  bool has_nu() const {
    return tag == Family::skew_t || tag == Family::skew_slash ||
           tag == Family::skew_cont_normal;
  }
  // whether lambda is a free parameter when fitting
  bool skewed() const { return tag != Family::normal; }
  int nu_dim() const { return tag == Family::skew_cont_normal ? 2 : (has_nu() ? 1 : 0); }

  void validate() const {
    switch (tag) {
      case Family::normal:
      case Family::skew_normal:
        if (nu.size() != 0) throw std::invalid_argument("family takes no nu");
        break;
      case Family::skew_t:
        if (nu.size() != 1 || !(nu[0] > 0.0))
          throw std::invalid_argument("skew-t requires nu > 0");
        break;
      case Family::skew_slash:
        if (nu.size() != 1 || !(nu[0] > 0.0))
          throw std::invalid_argument("skew-slash requires nu > 0");
        break;
      case Family::skew_cont_normal:
        if (nu.size() != 2 || !(nu[0] >= 0.0) || !(nu[0] < 1.0) || !(nu[1] > 0.0) ||
            !(nu[1] < 1.0))
          throw std::invalid_argument(
              "skew-contaminated-normal requires nu1 in [0,1), nu2 in (0,1)");
        break;
    }
  }

  double draw_u(std::mt19937_64& rng) const {
    switch (tag) {
      case Family::normal:
      case Family::skew_normal:
        return 1.0;
      case Family::skew_t: {
        std::gamma_distribution<double> g(nu[0] / 2.0, 2.0 / nu[0]);
        return g(rng);
      }
      case Family::skew_slash: {
        std::uniform_real_distribution<double> un(0.0, 1.0);
        double v = un(rng);
        while (v <= 0.0) v = un(rng);
        return std::pow(v, 1.0 / nu[0]);
      }
      case Family::skew_cont_normal: {
        std::uniform_real_distribution<double> un(0.0, 1.0);
        return un(rng) < nu[0] ? nu[1] : 1.0;
      }
    }
    return 1.0;
  }

  std::string name() const {
    switch (tag) {
      case Family::normal: return "normal";
      case Family::skew_normal: return "sn";
      case Family::skew_t: return "st";
      case Family::skew_slash: return "ssl";
      case Family::skew_cont_normal: return "scn";
    }
    return "?";
  }
};

// k1 = E{U^{-1/2}} and c = -sqrt(2/pi) * k1. Throws std::domain_error when
// k1 is infinite (skew-t needs nu > 1, skew-slash nu > 1/2).
std::pair<double, double> k1_and_c(const MixingFamily& family);

}  // namespace smsn
