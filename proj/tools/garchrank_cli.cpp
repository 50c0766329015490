// garchrank command-line tool: simulate, fit, test, mc, diag.
#include "garchrank/csv.hpp"
#include "garchrank/experiments.hpp"
#include "garchrank/garch.hpp"
#include "garchrank/ksample.hpp"
#include "garchrank/qml.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

using nlohmann::ordered_json;
namespace gr = garchrank;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

gr::Orders parse_orders(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("orders must look like p,q");
  try {
    return {std::stoul(s.substr(0, comma)), std::stoul(s.substr(comma + 1))};
  } catch (const std::logic_error&) {
    throw UsageError("bad orders '" + s + "'");
  }
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

ordered_json spec_json(const gr::GarchSpec& s) {
  return {{"omega", s.omega}, {"alpha", s.alpha}, {"beta", s.beta}};
}

ordered_json fit_json(const gr::FitResult& f, const gr::ModelDiagnostics& d) {
  ordered_json j;
  j["theta_hat"] = spec_json(f.spec_hat);
  j["objective"] = f.objective;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  j["at_boundary"] = f.at_boundary;
  j["gradient_norm"] = f.gradient_norm;
  j["diagnostics"] = {{"U_hat", matrix_json(d.U_hat)},
                      {"tau_hat", vector_json(d.tau_hat)},
                      {"kappa_hat", d.kappa_hat},
                      {"delta_hat", vector_json(d.delta_hat)},
                      {"U_singular", d.U_singular},
                      {"ridge", d.ridge}};
  return j;
}

ordered_json test_json(const gr::TestResult& r) {
  ordered_json j;
  j["score"] = std::string(gr::score_name(r.score));
  j["level"] = r.level;
  j["N"] = r.N;
  j["T"] = r.T;
  j["mu"] = r.mu;
  j["L_N"] = r.L_N;
  j["dof"] = r.dof;
  j["p_asymptotic"] = r.p_asymptotic;
  j["sigma_hat"] = matrix_json(r.sigma_hat.matrix);
  j["sigma_form"] = std::string(gr::sigma_form_name(r.sigma_hat.form));
  j["sigma_ridge"] = r.sigma_hat.ridge_applied;
  j["reject"] = r.reject;
  ordered_json fits = ordered_json::array();
  for (std::size_t i = 0; i < r.fits.size(); ++i) fits.push_back(fit_json(r.fits[i], r.diagnostics[i]));
  j["fits"] = fits;
  return j;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

gr::GarchSpec pick_spec(const std::string& dgp, const std::optional<double>& omega,
                        const std::vector<double>& alpha, const std::vector<double>& beta) {
  if (omega) {
    gr::GarchSpec s{*omega, alpha, beta};
    s.validate();
    return s;
  }
  if (dgp == "dgp1") return gr::dgp1();
  if (dgp == "dgp2") return gr::dgp2();
  throw UsageError("unknown dgp '" + dgp + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank-based k-sample tests for GARCH innovation laws"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a GARCH series to CSV or JSON");
  std::string sim_dgp = "dgp1", sim_law = "normal", sim_out, sim_format = "csv";
  std::optional<double> sim_omega;
  std::vector<double> sim_alpha, sim_beta;
  std::size_t sim_n = 500, sim_n0 = 500;
  std::uint64_t sim_seed = 1;
  bool sim_full = false;
  sim->add_option("--dgp", sim_dgp, "dgp1 or dgp2")->capture_default_str();
  sim->add_option("--omega", sim_omega, "explicit omega (with --alpha/--beta)");
  sim->add_option("--alpha", sim_alpha, "ARCH coefficients")->delimiter(',');
  sim->add_option("--beta", sim_beta, "GARCH coefficients")->delimiter(',');
  sim->add_option("--law", sim_law, "normal | mixture:phi | t:phi")->capture_default_str();
  sim->add_option("-n,--n", sim_n, "series length")->capture_default_str();
  sim->add_option("--n0", sim_n0, "discarded warm-up")->capture_default_str();
  sim->add_option("--seed", sim_seed)->capture_default_str();
  sim->add_option("-o,--out", sim_out, "output file (default stdout)");
  sim->add_option("--format", sim_format)->check(CLI::IsMember({"csv", "json"}));
  sim->add_flag("--full", sim_full, "also write volatilities and innovations");

  // fit
  auto* fitc = app.add_subcommand("fit", "QML fit of one CSV series");
  std::string fit_path, fit_column, fit_orders = "1,1", fit_init = "omega", fit_out;
  bool fit_prices = false;
  std::size_t fit_tail = 0, fit_col_index = 0;
  fitc->add_option("csv", fit_path)->required();
  fitc->add_option("--column", fit_column, "column header");
  fitc->add_option("--column-index", fit_col_index);
  fitc->add_flag("--prices", fit_prices, "column holds prices; fit log-returns");
  fitc->add_option("--tail", fit_tail, "keep only the last N values");
  fitc->add_option("--orders", fit_orders, "p,q")->capture_default_str();
  fitc->add_option("--init", fit_init)->check(CLI::IsMember({"omega", "first"}));
  fitc->add_option("-o,--out", fit_out);

  // test
  auto* tst = app.add_subcommand("test", "k-sample test on CSV series");
  std::vector<std::string> tst_paths, tst_orders{"1,1"};
  std::string tst_score = "wilcoxon", tst_column, tst_form = "complete", tst_dof = "contrast",
              tst_out;
  double tst_level = 0.05;
  std::size_t tst_B = 0, tst_n0 = 500, tst_tail = 0, tst_col_index = 0, tst_workers = 1;
  std::uint64_t tst_seed = 0;
  bool tst_prices = false, tst_fast = false;
  tst->add_option("csv", tst_paths, "one CSV per sample")->required()->expected(2, -1);
  tst->add_option("--score", tst_score)->check(CLI::IsMember({"wilcoxon", "w", "vdw", "mood", "klotz"}));
  tst->add_option("--level", tst_level)->capture_default_str();
  tst->add_option("--bootstrap", tst_B, "bootstrap replicates (0: asymptotic only)");
  tst->add_option("--seed", tst_seed);
  tst->add_option("--n0", tst_n0)->capture_default_str();
  tst->add_option("--orders", tst_orders, "p,q once for all samples or once per sample");
  tst->add_option("--column", tst_column);
  tst->add_option("--column-index", tst_col_index);
  tst->add_flag("--prices", tst_prices);
  tst->add_option("--tail", tst_tail);
  tst->add_option("--sigma-form", tst_form)->check(CLI::IsMember({"published", "complete", "influence"}));
  tst->add_option("--dof", tst_dof)->check(CLI::IsMember({"full", "contrast"}));
  tst->add_flag("--fast", tst_fast, "reuse the observed dispersion in bootstrap replicates");
  tst->add_option("--workers", tst_workers);
  tst->add_option("-o,--out", tst_out);

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo size/power study");
  std::string mc_config, mc_out, mc_table;
  std::uint64_t mc_seed = 0;
  std::optional<std::size_t> mc_workers;
  mc->add_option("--config", mc_config, "key = value study file")->required();
  mc->add_option("--seed", mc_seed)->required();
  mc->add_option("--workers", mc_workers);
  mc->add_option("-o,--out", mc_out, "JSON report (default stdout)");
  mc->add_option("--table", mc_table, "also write the text table here ('-' for stderr)");

  // diag
  auto* dg = app.add_subcommand("diag", "Residual empirical process remainder sweep");
  std::string dg_dgp = "dgp1", dg_law = "normal", dg_out;
  std::vector<std::size_t> dg_ns{250, 1000};
  std::size_t dg_reps = 100, dg_workers = 1;
  std::uint64_t dg_seed = 1;
  dg->add_option("--dgp", dg_dgp)->capture_default_str();
  dg->add_option("--law", dg_law)->capture_default_str();
  dg->add_option("--n", dg_ns)->delimiter(',');
  dg->add_option("--reps", dg_reps)->capture_default_str();
  dg->add_option("--seed", dg_seed)->capture_default_str();
  dg->add_option("--workers", dg_workers);
  dg->add_option("-o,--out", dg_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      const auto spec = pick_spec(sim_dgp, sim_omega, sim_alpha, sim_beta);
      const auto s = gr::simulate(spec, gr::law_for(sim_law, 0.0), sim_n, sim_n0, sim_seed);
      if (sim_format == "json") {
        ordered_json j{{"spec", spec_json(spec)}, {"law", sim_law}, {"seed", sim_seed},
                       {"n0", sim_n0}, {"x", s.values}};
        if (sim_full) {
          j["sigma2"] = s.volatilities;
          j["eps"] = s.innovations;
        }
        emit(j.dump(2) + "\n", sim_out);
      } else {
        const std::string path = sim_out.empty() ? "/dev/stdout" : sim_out;
        if (sim_full) {
          gr::write_csv(path, {"x", "sigma2", "eps"}, {s.values, s.volatilities, s.innovations});
        } else {
          gr::write_csv(path, {"x"}, {s.values});
        }
      }
    } else if (*fitc) {
      gr::CsvOptions co;
      co.column = fit_column;
      co.column_index = fit_col_index;
      co.prices = fit_prices;
      co.tail = fit_tail;
      const auto series = gr::ingest_csv(fit_path, co);
      const auto ord = parse_orders(fit_orders);
      gr::FitOptions fo;
      fo.init_rule = fit_init == "first" ? gr::InitRule::FirstSquared : gr::InitRule::Omega;
      const auto f = gr::fit(series.values, ord.first, ord.second, fo);
      ordered_json j = fit_json(f, gr::diagnose(f, series.values));
      j["n"] = series.values.size();
      j["rows_dropped"] = series.rows_dropped;
      emit(j.dump(2) + "\n", fit_out);
    } else if (*tst) {
      gr::CsvOptions co;
      co.column = tst_column;
      co.column_index = tst_col_index;
      co.prices = tst_prices;
      co.tail = tst_tail;
      std::vector<std::vector<double>> samples;
      std::size_t dropped = 0;
      for (const auto& p : tst_paths) {
        auto s = gr::ingest_csv(p, co);
        dropped += s.rows_dropped;
        samples.push_back(std::move(s.values));
      }
      std::vector<gr::Orders> orders;
      if (tst_orders.size() == 1) {
        orders.assign(samples.size(), parse_orders(tst_orders.front()));
      } else if (tst_orders.size() == samples.size()) {
        for (const auto& o : tst_orders) orders.push_back(parse_orders(o));
      } else {
        throw UsageError("--orders must be given once or once per sample");
      }
      gr::TestOptions opt;
      opt.score = gr::parse_score(tst_score);
      opt.level = tst_level;
      opt.sigma_form = gr::parse_sigma_form(tst_form);
      opt.dof_rule = gr::parse_dof_rule(tst_dof);
      ordered_json j;
      if (tst_B > 0) {
        gr::BootstrapOptions bo;
        bo.B = tst_B;
        bo.n0 = tst_n0;
        bo.seed = tst_seed;
        bo.recompute_sigma = !tst_fast;
        bo.workers = gr::resolve_workers(tst_workers);
        const auto r = gr::bootstrap_test(samples, orders, opt, bo);
        j = test_json(r.observed);
        j["p_bootstrap"] = r.p_bootstrap;
        j["critical_value"] = r.critical_value;
        j["B"] = r.B;
        j["n0"] = r.n0;
        j["seed"] = r.seed;
        j["dropped"] = r.dropped;
        j["reject"] = r.reject;
        j["reject_asymptotic"] = r.observed.reject;
        j["warnings"] = r.warnings;
      } else {
        j = test_json(gr::asymptotic_test(samples, orders, opt));
      }
      j["rows_dropped"] = dropped;
      emit(j.dump(2) + "\n", tst_out);
    } else if (*mc) {
      auto cfg = gr::load_study_config(mc_config);
      cfg.seed = mc_seed;
      if (mc_workers) cfg.workers = *mc_workers;
      const auto report = gr::run_study(cfg);
      emit(gr::report_json(report), mc_out);
      if (!mc_table.empty()) {
        if (mc_table == "-") {
          std::cerr << gr::report_table(report);
        } else {
          emit(gr::report_table(report), mc_table);
        }
      }
      std::fprintf(stderr, "runtime %.1f s\n", report.runtime_seconds);
    } else if (*dg) {
      const auto spec = pick_spec(dg_dgp, std::nullopt, {}, {});
      const auto sweep = gr::remainder_sweep(spec, gr::law_for(dg_law, 0.0), dg_ns, dg_reps,
                                             dg_seed, gr::resolve_workers(dg_workers));
      ordered_json j{{"dgp", dg_dgp}, {"law", dg_law}, {"replicates", sweep.replicates},
                     {"n", sweep.ns}, {"median_sup_remainder", sweep.median_sup}};
      emit(j.dump(2) + "\n", dg_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
