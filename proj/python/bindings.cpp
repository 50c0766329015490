// Python bindings: thin wrappers returning plain dicts and lists.
#include "garchrank/experiments.hpp"
#include "garchrank/garch.hpp"
#include "garchrank/ksample.hpp"
#include "garchrank/qml.hpp"
#include "garchrank/ranks.hpp"
#include "garchrank/special.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
namespace gr = garchrank;

namespace {

py::dict spec_dict(const gr::GarchSpec& s) {
  py::dict d;
  d["omega"] = s.omega;
  d["alpha"] = s.alpha;
  d["beta"] = s.beta;
  return d;
}

py::dict fit_dict(const gr::FitResult& f, const gr::ModelDiagnostics& d) {
  py::dict out;
  out["theta_hat"] = spec_dict(f.spec_hat);
  out["objective"] = f.objective;
  out["converged"] = f.converged;
  out["at_boundary"] = f.at_boundary;
  out["residuals"] = f.residuals;
  out["sigma2"] = f.sigma2;
  out["U_hat"] = d.U_hat;
  out["tau_hat"] = d.tau_hat;
  out["kappa_hat"] = d.kappa_hat;
  out["delta_hat"] = d.delta_hat;
  return out;
}

py::dict test_dict(const gr::TestResult& r) {
  py::dict out;
  out["score"] = std::string(gr::score_name(r.score));
  out["T"] = r.T;
  out["mu"] = r.mu;
  out["L_N"] = r.L_N;
  out["dof"] = r.dof;
  out["p_asymptotic"] = r.p_asymptotic;
  out["sigma_hat"] = r.sigma_hat.matrix;
  out["sigma_form"] = std::string(gr::sigma_form_name(r.sigma_hat.form));
  out["reject"] = r.reject;
  out["N"] = r.N;
  py::list fits;
  for (std::size_t i = 0; i < r.fits.size(); ++i) fits.append(fit_dict(r.fits[i], r.diagnostics[i]));
  out["fits"] = fits;
  return out;
}

gr::GarchSpec make_spec(double omega, std::vector<double> alpha, std::vector<double> beta) {
  gr::GarchSpec s{omega, std::move(alpha), std::move(beta)};
  s.validate();
  return s;
}

gr::TestOptions test_options(const std::string& score, double level, const std::string& form,
                             const std::string& dof) {
  gr::TestOptions o;
  o.score = gr::parse_score(score);
  o.level = level;
  o.sigma_form = gr::parse_sigma_form(form);
  o.dof_rule = gr::parse_dof_rule(dof);
  return o;
}

std::vector<gr::Orders> expand_orders(std::size_t k, const std::vector<gr::Orders>& orders) {
  if (orders.empty()) return std::vector<gr::Orders>(k, {1, 1});
  if (orders.size() == 1) return std::vector<gr::Orders>(k, orders.front());
  return orders;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Rank-based k-sample tests on GARCH residuals";

  py::register_exception<gr::FitError>(m, "FitError", PyExc_RuntimeError);

  m.def("dgp1", [] { return spec_dict(gr::dgp1()); });
  m.def("dgp2", [] { return spec_dict(gr::dgp2()); });

  m.def(
      "simulate",
      [](double omega, std::vector<double> alpha, std::vector<double> beta, std::size_t n,
         const std::string& law, std::size_t n0, std::uint64_t seed) {
        const auto spec = make_spec(omega, std::move(alpha), std::move(beta));
        gr::SimulatedSample s;
        {
          py::gil_scoped_release release;
          s = gr::simulate(spec, gr::law_for(law, 0.0), n, n0, seed);
        }
        py::dict out;
        out["x"] = s.values;
        out["sigma2"] = s.volatilities;
        out["eps"] = s.innovations;
        return out;
      },
      py::arg("omega"), py::arg("alpha"), py::arg("beta"), py::arg("n"),
      py::arg("law") = "normal", py::arg("n0") = 500, py::arg("seed") = 1);

  m.def(
      "fit",
      [](const std::vector<double>& x, std::size_t p, std::size_t q) {
        gr::FitResult f;
        gr::ModelDiagnostics d;
        {
          py::gil_scoped_release release;
          f = gr::fit(x, p, q);
          d = gr::diagnose(f, x);
        }
        return fit_dict(f, d);
      },
      py::arg("x"), py::arg("p") = 1, py::arg("q") = 1);

  m.def(
      "linear_statistics",
      [](std::vector<std::vector<double>> groups, const std::string& score) {
        return gr::linear_statistics(gr::PooledSample(std::move(groups)), gr::parse_score(score));
      },
      py::arg("groups"), py::arg("score") = "wilcoxon");

  m.def(
      "asymptotic_test",
      [](const std::vector<std::vector<double>>& samples, const std::vector<gr::Orders>& orders,
         const std::string& score, double level, const std::string& sigma_form,
         const std::string& dof_rule) {
        const auto opt = test_options(score, level, sigma_form, dof_rule);
        gr::TestResult r;
        {
          py::gil_scoped_release release;
          r = gr::asymptotic_test(samples, expand_orders(samples.size(), orders), opt);
        }
        return test_dict(r);
      },
      py::arg("samples"), py::arg("orders") = std::vector<gr::Orders>{},
      py::arg("score") = "wilcoxon", py::arg("level") = 0.05, py::arg("sigma_form") = "complete",
      py::arg("dof_rule") = "contrast");

  m.def(
      "bootstrap_test",
      [](const std::vector<std::vector<double>>& samples, const std::vector<gr::Orders>& orders,
         const std::string& score, double level, std::size_t B, std::size_t n0,
         std::uint64_t seed, bool fast, std::size_t workers) {
        const auto opt = test_options(score, level, "complete", "contrast");
        gr::BootstrapOptions bo;
        bo.B = B;
        bo.n0 = n0;
        bo.seed = seed;
        bo.recompute_sigma = !fast;
        bo.workers = workers;
        gr::BootstrapResult r;
        {
          py::gil_scoped_release release;
          r = gr::bootstrap_test(samples, expand_orders(samples.size(), orders), opt, bo);
        }
        py::dict out = test_dict(r.observed);
        out["p_bootstrap"] = r.p_bootstrap;
        out["critical_value"] = r.critical_value;
        out["replicates"] = r.replicates;
        out["dropped"] = r.dropped;
        out["reject"] = r.reject;
        return out;
      },
      py::arg("samples"), py::arg("orders") = std::vector<gr::Orders>{},
      py::arg("score") = "wilcoxon", py::arg("level") = 0.05, py::arg("B") = 199,
      py::arg("n0") = 500, py::arg("seed") = 0, py::arg("fast") = false, py::arg("workers") = 1);

  m.def(
      "lyapunov_exponent",
      [](double omega, std::vector<double> alpha, std::vector<double> beta, const std::string& law,
         std::size_t t_max, std::size_t reps, std::uint64_t seed) {
        const auto spec = make_spec(omega, std::move(alpha), std::move(beta));
        return gr::lyapunov_exponent(spec, gr::law_for(law, 0.0), t_max, reps, seed).value;
      },
      py::arg("omega"), py::arg("alpha"), py::arg("beta"), py::arg("law") = "normal",
      py::arg("t_max") = 2000, py::arg("reps") = 20, py::arg("seed") = 1);

  m.def("inverse_normal_cdf", &gr::inverse_normal_cdf, py::arg("u"));
  m.def("chi2_survival", &gr::chi2_survival, py::arg("x"), py::arg("dof"));
  m.def(
      "null_mean", [](const std::string& score) { return gr::null_mean(gr::parse_score(score)); },
      py::arg("score"));
}
