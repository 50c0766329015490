#pragma once

#include "garchrank/rng.hpp"

#include <string>
#include <variant>

namespace garchrank {

struct StandardNormal {};

// (1 - phi) N(0,1) + phi N(2,1), shifted and scaled to mean 0, variance 1.
struct MixtureNormal {
  double phi;
};

// Student t with 1/phi degrees of freedom, scaled to unit variance.
struct StudentT {
  double phi;
};

// Innovation law of a GARCH process. Every variant is standardized so that
// samples have mean 0 and variance 1.
class InnovationDist {
 public:
  using Variant = std::variant<StandardNormal, MixtureNormal, StudentT>;

  InnovationDist() = default;

  static InnovationDist normal();
  static InnovationDist mixture(double phi);
  // phi == 0 is the standard normal limit.
  static InnovationDist student_t(double phi);

  const Variant& variant() const { return v_; }
  bool is_normal() const { return std::holds_alternative<StandardNormal>(v_); }

  double sample(RngStream& rng) const;
  double cdf(double x) const;
  double pdf(double x) const;

  // Raw-law location subtracted and scale divided out by the standardization.
  double location() const;
  double scale() const;

  // E(eps^4); +inf when the fourth moment does not exist.
  double fourth_moment() const;

  std::string name() const;

 private:
  explicit InnovationDist(Variant v) : v_(v) {}
  Variant v_{StandardNormal{}};
};

}  // namespace garchrank
