#include "garchrank/innovations.hpp"

#include "garchrank/special.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace garchrank {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double mixture_scale(double phi) { return std::sqrt(1.0 + 4.0 * phi * (1.0 - phi)); }

double t_dof(double phi) { return 1.0 / phi; }

double t_scale(double phi) {
  const double nu = t_dof(phi);
  return std::sqrt(nu / (nu - 2.0));
}

}  // namespace

InnovationDist InnovationDist::normal() { return InnovationDist(StandardNormal{}); }

InnovationDist InnovationDist::mixture(double phi) {
  if (!(phi >= 0.0 && phi <= 1.0)) {
    throw std::invalid_argument("mixture weight must lie in [0, 1]");
  }
  if (phi == 0.0) return normal();
  return InnovationDist(MixtureNormal{phi});
}

InnovationDist InnovationDist::student_t(double phi) {
  if (!(phi >= 0.0 && phi < 0.5)) {
    throw std::invalid_argument("Student t needs 1/phi > 2 degrees of freedom");
  }
  if (phi == 0.0) return normal();
  return InnovationDist(StudentT{phi});
}

double InnovationDist::sample(RngStream& rng) const {
  return std::visit(
      overloaded{
          [&](StandardNormal) { return rng.normal(); },
          [&](MixtureNormal m) {
            const double raw = rng.normal() + (rng.uniform() < m.phi ? 2.0 : 0.0);
            return (raw - 2.0 * m.phi) / mixture_scale(m.phi);
          },
          [&](StudentT t) {
            std::student_t_distribution<double> dist(t_dof(t.phi));
            return dist(rng.engine()) / t_scale(t.phi);
          },
      },
      v_);
}

double InnovationDist::cdf(double x) const {
  return std::visit(
      overloaded{
          [&](StandardNormal) { return normal_cdf(x); },
          [&](MixtureNormal m) {
            const double y = x * mixture_scale(m.phi) + 2.0 * m.phi;
            return (1.0 - m.phi) * normal_cdf(y) + m.phi * normal_cdf(y - 2.0);
          },
          [&](StudentT t) {
            boost::math::students_t_distribution<double> dist(t_dof(t.phi));
            return boost::math::cdf(dist, x * t_scale(t.phi));
          },
      },
      v_);
}

double InnovationDist::pdf(double x) const {
  return std::visit(
      overloaded{
          [&](StandardNormal) { return normal_pdf(x); },
          [&](MixtureNormal m) {
            const double s = mixture_scale(m.phi);
            const double y = x * s + 2.0 * m.phi;
            return s * ((1.0 - m.phi) * normal_pdf(y) + m.phi * normal_pdf(y - 2.0));
          },
          [&](StudentT t) {
            boost::math::students_t_distribution<double> dist(t_dof(t.phi));
            const double s = t_scale(t.phi);
            return s * boost::math::pdf(dist, x * s);
          },
      },
      v_);
}

double InnovationDist::location() const {
  if (const auto* m = std::get_if<MixtureNormal>(&v_)) return 2.0 * m->phi;
  return 0.0;
}

double InnovationDist::scale() const {
  return std::visit(overloaded{
                        [](StandardNormal) { return 1.0; },
                        [](MixtureNormal m) { return mixture_scale(m.phi); },
                        [](StudentT t) { return t_scale(t.phi); },
                    },
                    v_);
}

double InnovationDist::fourth_moment() const {
  return std::visit(
      overloaded{
          [](StandardNormal) { return 3.0; },
          [](MixtureNormal m) {
            // Each component is N(a, 1) after centering: E(Z + a)^4 = a^4 + 6a^2 + 3.
            const double a0 = -2.0 * m.phi;
            const double a1 = 2.0 - 2.0 * m.phi;
            auto m4 = [](double a) { return a * a * a * a + 6.0 * a * a + 3.0; };
            const double s2 = 1.0 + 4.0 * m.phi * (1.0 - m.phi);
            return ((1.0 - m.phi) * m4(a0) + m.phi * m4(a1)) / (s2 * s2);
          },
          [](StudentT t) {
            const double nu = t_dof(t.phi);
            if (nu <= 4.0) return std::numeric_limits<double>::infinity();
            return 3.0 * (nu - 2.0) / (nu - 4.0);
          },
      },
      v_);
}

std::string InnovationDist::name() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](StandardNormal) { os << "normal"; },
                 [&](MixtureNormal m) { os << "mixture(phi=" << m.phi << ")"; },
                 [&](StudentT t) { os << "student_t(phi=" << t.phi << ")"; },
             },
             v_);
  return os.str();
}

}  // namespace garchrank
