// tvfrailty: fit, simulate and study time-varying shared frailty models for
// paired current status data.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tvfrailty/io.hpp"
#include "tvfrailty/rfv.hpp"

namespace fs = std::filesystem;
using namespace tvf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitDataError = 2;
constexpr int kExitNonConvergence = 3;

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string model_path;
  std::string data_path;
  std::string out_dir = ".";
  double delta = 0.0;  // 0: keep the model's grid step
  std::uint64_t seed = 1;
  int replicates = 50;
  double ci_level = 0.95;
  bool allow_increasing = false;
  double tol = 0.0;  // 0: optimizer default
};

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

fs::path out_path(const Common& c, const std::string& file) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / file;
}

std::ofstream open_out(const Common& c, const std::string& file) {
  const auto p = out_path(c, file);
  std::ofstream out(p);
  if (!out) throw DomainError("cannot write '" + p.string() + "'");
  return out;
}

void write_json(const Common& c, const std::string& file, const json& j) {
  auto out = open_out(c, file);
  out << j.dump(2) << '\n';
}

ModelConfig load_model(const Common& c) {
  ModelConfig m = read_model_file(c.model_path);
  if (c.delta > 0.0) {
    m.hazard1.delta = c.delta;
    m.hazard2.delta = c.delta;
    m.hazard1.validate();
    m.hazard2.validate();
  }
  if (c.allow_increasing && !m.allow_increasing) {
    m.allow_increasing = true;
    m.rebuild_parameters();
  }
  m.validate();
  return m;
}

// Ages off the hazard grid are a data problem, reported by age.
void check_grid(const ModelConfig& m, const CurrentStatusDataset& d) {
  for (const auto& r : d.rows) {
    try {
      (void)m.hazard1.grid_index(r.age);
    } catch (const DomainError&) {
      throw DataError("age " + format_number(r.age) + " is not a multiple of the model grid step " +
                      format_number(m.hazard1.delta));
    }
  }
}

std::vector<double> parse_ages(const std::string& spec) {
  // "first:last[:step]" or a comma-separated list
  std::vector<double> ages;
  if (spec.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
    if (parts.size() < 2 || parts.size() > 3) throw DomainError("ages: expected first:last[:step]");
    const double step = parts.size() == 3 ? parts[2] : 1.0;
    if (!(step > 0.0)) throw DomainError("ages: step must be positive");
    const auto n = static_cast<long>(std::floor((parts[1] - parts[0]) / step + 1e-9));
    for (long i = 0; i <= n; ++i) ages.push_back(parts[0] + static_cast<double>(i) * step);
  } else {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) ages.push_back(std::stod(item));
  }
  if (ages.empty()) throw DomainError("ages: empty list");
  return ages;
}

FitOptions fit_options(const Common& c, const std::vector<std::string>& profile) {
  FitOptions o;
  o.ci_level = c.ci_level;
  if (c.tol > 0.0) {
    o.optim.gradient_tol = c.tol;
    o.optim.gradient_rel_tol = 0.0;
  }
  o.profile = profile;
  return o;
}

// ---------------------------------------------------------------------------

int cmd_fit(const Common& c, const std::vector<std::string>& profile) {
  const auto model = load_model(c);
  const auto data = read_dataset_csv_file(c.data_path);
  check_grid(model, data);
  const auto f = fit(model, data, fit_options(c, profile));
  write_json(c, "fit.json", fit_to_json(f));

  const auto ages = data.ages();
  const auto inst = f.config.instantiate();
  const auto table = bivariate_table(inst.frailty, inst.hazard1, inst.hazard2, ages);
  {
    auto out = open_out(c, "prevalence.csv");
    out << "age,n1,observed1,fitted1,n2,observed2,fitted2\n";
    for (std::size_t a = 0; a < ages.size(); ++a) {
      const auto& r = data.rows[a];
      const double n1 = r.paired_total() + r.m0x + r.m1x, n2 = r.paired_total() + r.mx0 + r.mx1;
      const double e1 = r.n[2] + r.n[3] + r.m1x, e2 = r.n[1] + r.n[3] + r.mx1;
      out << format_number(r.age) << ',' << format_number(n1) << ','
          << format_number(n1 > 0 ? e1 / n1 : std::nan("")) << ',' << format_number(1.0 - table.marginal1[a]) << ','
          << format_number(n2) << ',' << format_number(n2 > 0 ? e2 / n2 : std::nan("")) << ','
          << format_number(1.0 - table.marginal2[a]) << '\n';
    }
  }
  {
    auto out = open_out(c, "phi_empirical.csv");
    write_phi_csv(out, empirical_phi(data));
  }
  {
    auto out = open_out(c, "phi_fitted.csv");
    write_phi_csv(out, fitted_phi(f.config, ages));
  }
  {
    auto out = open_out(c, "rfv_star.csv");
    out << "age,rfv_star\n";
    const auto curve = rfv_star_curve(inst.frailty, inst.hazard1, ages);
    for (std::size_t a = 0; a < ages.size(); ++a)
      out << format_number(ages[a]) << ',' << format_number(curve[a]) << '\n';
  }

  std::printf("loglik %.6f  aic %.4f  deviance %.4f on %d df\n", f.loglik_max, f.aic, f.deviance, f.df);
  for (const auto& e : f.estimates) {
    std::printf("  %-12s %.6g", e.name.c_str(), e.value);
    if (!e.free) std::printf("  (fixed)");
    else if (std::isfinite(e.se)) std::printf("  se %.3g", e.se);
    if (e.profile_ci)
      std::printf("  %g%% CI [%.6g, %.6g]", 100 * e.profile_ci->level, e.profile_ci->lower, e.profile_ci->upper);
    std::printf("\n");
  }
  if (!f.convergence.converged) throw NonConvergence("fit did not converge: " + f.convergence.message);
  return kExitOk;
}

int cmd_simulate(const Common& c, const std::string& ages_spec, int n_per_age) {
  const auto model = load_model(c);
  const auto ages = parse_ages(ages_spec);
  const auto d = simulate_dataset(model, ages, n_per_age, c.seed);
  auto out = open_out(c, "dataset.csv");
  write_dataset_csv(out, d);
  return kExitOk;
}

struct StudyArgs {
  std::string scenario = "a";
  double k = 0.2;
  double rho = 0.01;
  double beta = 1.0;
  int n_per_age = 200;
  std::string ages = "1:50";
  unsigned threads = 0;
  std::string fit_model_path;
  std::vector<std::string> profile;
};

int cmd_study(const Common& c, const StudyArgs& s) {
  SimDesign d;
  d.scenario = s.scenario;
  if (!c.model_path.empty()) {
    d.truth = load_model(c);
    Common fc = c;
    fc.model_path = s.fit_model_path.empty() ? c.model_path : s.fit_model_path;
    d.fit_config = load_model(fc);
  } else if (s.scenario == "a") {
    d.truth = d.fit_config = scenario_a(s.k, s.rho);
  } else if (s.scenario == "b") {
    d.truth = d.fit_config = scenario_b(s.k, s.beta);
  } else if (s.scenario == "misspecified") {
    d.truth = scenario_misspecified(s.rho);
    d.fit_config = scenario_a(1.0, s.rho);
  } else {
    throw DomainError("unknown scenario '" + s.scenario + "' (a, b, misspecified) and no --model given");
  }
  d.ages = parse_ages(s.ages);
  d.n_per_age = s.n_per_age;
  d.replicates = c.replicates;
  d.seed = c.seed;
  d.threads = s.threads;
  d.fit_options = fit_options(c, {});
  d.profile_params = s.profile;
  const auto rep = run_study(d);
  {
    auto out = open_out(c, "study.csv");
    write_study_csv(out, rep);
  }
  write_json(c, "study.json", study_to_json(rep, d));
  write_study_csv(std::cout, rep);
  std::printf("%d of %d replicates converged\n", rep.converged, rep.replicates);
  return kExitOk;
}

int cmd_phi(const Common& c) {
  const auto data = read_dataset_csv_file(c.data_path);
  auto out = open_out(c, "phi.csv");
  write_phi_csv(out, empirical_phi(data));
  return kExitOk;
}

struct RfvArgs {
  double k = 0.5;
  std::vector<double> betas{0.8, 1.0, 1.25};
  double rho = 1e-4;
  std::string hazard = "constant";
  double t_max = 50;
  double s_max = 1e3;
  int s_points = 61;
};

HazardSpec rfv_hazard(const std::string& name, double delta) {
  if (name == "constant") return HazardSpec::log_linear(-3.34, 0.0, delta);
  if (name == "increasing") return HazardSpec::log_linear(-4.5, 1.0 / 25.0, delta);
  if (name == "decreasing") return HazardSpec::log_linear(-2.5, -1.0 / 25.0, delta);
  throw DomainError("rfv: hazard must be constant, increasing or decreasing");
}

int cmd_rfv(const Common& c, const RfvArgs& r) {
  const double delta = c.delta > 0.0 ? c.delta : 1.0;
  const auto hazard = rfv_hazard(r.hazard, delta);
  std::vector<double> ts;
  for (double t = 0.0; t <= r.t_max + 1e-9; t += delta) ts.push_back(t);
  const bool increasing_h = r.rho < 0.0;
  if (increasing_h && !c.allow_increasing)
    throw DomainError("rfv: negative rho gives an increasing h(t); pass --allow-increasing-h");

  std::vector<std::vector<double>> star;
  for (double beta : r.betas) {
    const auto spec = FrailtySpec::unit_mean(r.k, beta, ModulationFn::exp_quadratic(r.rho, increasing_h));
    star.push_back(rfv_star_curve(spec, hazard, ts));
  }
  {
    auto out = open_out(c, "rfv_star.csv");
    out << "t";
    for (double b : r.betas) out << ",beta_" << short_number(b);
    out << '\n';
    for (std::size_t i = 0; i < ts.size(); ++i) {
      out << format_number(ts[i]);
      for (const auto& s : star) out << ',' << format_number(s[i]);
      out << '\n';
    }
  }
  {
    auto out = open_out(c, "rfv_scaled.csv");
    out << "s";
    for (double b : r.betas) out << ",beta_" << short_number(b);
    out << '\n';
    // s = 0, then log-spaced from 1e-3 to s_max
    std::vector<double> ss{0.0};
    for (int i = 0; i < r.s_points; ++i)
      ss.push_back(1e-3 * std::pow(r.s_max / 1e-3, static_cast<double>(i) / (r.s_points - 1)));
    for (double s : ss) {
      out << format_number(s);
      for (double b : r.betas) out << ',' << format_number(rfv_scaled(GenGammaParams::unit_mean(r.k, b), s));
      out << '\n';
    }
  }
  return kExitOk;
}

int cmd_survivor(const Common& c, const std::string& ages_spec) {
  const auto model = load_model(c);
  const auto ages = parse_ages(ages_spec);
  const auto m = model.instantiate();
  const auto t = bivariate_table(m.frailty, m.hazard1, m.hazard2, ages);
  auto out = open_out(c, "survivor.csv");
  out << "age,s00,s01,s10,s11,s1,s2\n";
  for (std::size_t a = 0; a < ages.size(); ++a) {
    const auto& x = t.cells[a];
    out << format_number(ages[a]) << ',' << format_number(x.s00) << ',' << format_number(x.s01) << ','
        << format_number(x.s10) << ',' << format_number(x.s11) << ',' << format_number(t.marginal1[a]) << ','
        << format_number(t.marginal2[a]) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying shared frailty models for paired current status data"};
  app.require_subcommand(1);
  Common c;

  auto add_common = [&](CLI::App* s) {
    s->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
    s->add_option("--delta", c.delta, "Override the hazard grid step");
    s->add_flag("--allow-increasing-h", c.allow_increasing, "Allow h(t) to increase (rho < 0)");
  };

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a dataset");
  std::vector<std::string> profile;
  bool no_profile = false;
  add_common(fit_cmd);
  fit_cmd->add_option("--model", c.model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--data", c.data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--ci-level", c.ci_level, "Profile-likelihood interval level")->capture_default_str();
  fit_cmd->add_option("--profile", profile, "Parameters to profile (default: all free)")->delimiter(',');
  fit_cmd->add_flag("--no-profile", no_profile, "Skip profile intervals");
  fit_cmd->add_option("--tol", c.tol, "Absolute gradient tolerance");

  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a dataset from a model");
  std::string sim_ages = "1:50";
  int sim_n = 200;
  add_common(sim_cmd);
  sim_cmd->add_option("--model", c.model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sim_cmd->add_option("--ages", sim_ages, "first:last[:step] or a list")->capture_default_str();
  sim_cmd->add_option("--n-per-age", sim_n, "Individuals per age")->capture_default_str();

  auto* study_cmd = app.add_subcommand("study", "Monte Carlo study of estimator behaviour");
  StudyArgs sa;
  add_common(study_cmd);
  study_cmd->add_option("--scenario", sa.scenario, "a, b or misspecified")->capture_default_str();
  study_cmd->add_option("--k", sa.k, "Frailty shape")->capture_default_str();
  study_cmd->add_option("--rho", sa.rho, "Decay rate of h(t)")->capture_default_str();
  study_cmd->add_option("--beta", sa.beta, "Generalized gamma beta (scenario b)")->capture_default_str();
  study_cmd->add_option("--model", c.model_path, "Truth model JSON (replaces the scenario)")
      ->check(CLI::ExistingFile);
  study_cmd->add_option("--fit-model", sa.fit_model_path, "Model JSON to fit (default: truth)")
      ->check(CLI::ExistingFile);
  study_cmd->add_option("--n-per-age", sa.n_per_age, "Individuals per age")->capture_default_str();
  study_cmd->add_option("--ages", sa.ages, "first:last[:step] or a list")->capture_default_str();
  study_cmd->add_option("--replicates", c.replicates, "Number of replicates")->capture_default_str();
  study_cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  study_cmd->add_option("--threads", sa.threads, "Worker threads (0: all cores)");
  study_cmd->add_option("--ci-level", c.ci_level, "Interval level for coverage")->capture_default_str();
  study_cmd->add_option("--profile", sa.profile, "Parameters with profile intervals per replicate")
      ->delimiter(',');
  study_cmd->add_option("--tol", c.tol, "Absolute gradient tolerance");

  auto* phi_cmd = app.add_subcommand("phi", "Empirical association by age");
  add_common(phi_cmd);
  phi_cmd->add_option("--data", c.data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);

  auto* rfv_cmd = app.add_subcommand("rfv", "Relative frailty variance curves");
  RfvArgs ra;
  add_common(rfv_cmd);
  rfv_cmd->add_option("--k", ra.k, "Frailty shape")->capture_default_str();
  rfv_cmd->add_option("--betas", ra.betas, "Generalized gamma beta values")->delimiter(',');
  rfv_cmd->add_option("--rho", ra.rho, "h(t) = exp(-rho t^2)")->capture_default_str();
  rfv_cmd->add_option("--hazard", ra.hazard, "constant, increasing or decreasing")->capture_default_str();
  rfv_cmd->add_option("--t-max", ra.t_max, "Last age")->capture_default_str();
  rfv_cmd->add_option("--s-max", ra.s_max, "Largest s for RFV(s)")->capture_default_str();

  auto* surv_cmd = app.add_subcommand("survivor", "Tabulate bivariate survivor probabilities");
  std::string surv_ages = "0:50";
  add_common(surv_cmd);
  surv_cmd->add_option("--model", c.model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  surv_cmd->add_option("--ages", surv_ages, "first:last[:step] or a list")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*fit_cmd) {
      std::vector<std::string> wanted = profile.empty() ? std::vector<std::string>{"all"} : profile;
      if (no_profile) wanted.clear();
      return cmd_fit(c, wanted);
    }
    if (*sim_cmd) return cmd_simulate(c, sim_ages, sim_n);
    if (*study_cmd) return cmd_study(c, sa);
    if (*phi_cmd) return cmd_phi(c);
    if (*rfv_cmd) return cmd_rfv(c, ra);
    if (*surv_cmd) return cmd_survivor(c, surv_ages);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitDataError;
  } catch (const NonConvergence& e) {
    std::cerr << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
