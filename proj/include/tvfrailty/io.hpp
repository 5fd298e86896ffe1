#pragma once

// File formats: dataset CSV, model JSON, and the report files written by the
// command-line tool. Numbers in CSV files use 17 significant digits; JSON
// numbers use the shortest representation that round-trips.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tvfrailty/association.hpp"
#include "tvfrailty/errors.hpp"
#include "tvfrailty/fitting.hpp"
#include "tvfrailty/likelihood.hpp"
#include "tvfrailty/model.hpp"
#include "tvfrailty/simulation.hpp"

namespace tvf {

using json = nlohmann::ordered_json;

inline constexpr int kModelSchemaVersion = 1;

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// JSON has no infinities; non-finite values become null.
inline json json_number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------------------
// Dataset CSV

inline const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> c{"age", "n00", "n01", "n10", "n11", "m0x", "m1x", "mx0", "mx1"};
  return c;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_field(const std::string& text, const std::string& where, bool integer) {
  if (text.empty()) throw DataError(where + ": empty value");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": '" + text + "' is not a number");
  }
  if (used != text.size()) throw DataError(where + ": '" + text + "' is not a number");
  if (!std::isfinite(v) || v < 0.0) throw DataError(where + ": '" + text + "' must be finite and nonnegative");
  if (integer && v != std::floor(v)) throw DataError(where + ": count '" + text + "' is not an integer");
  return v;
}

}  // namespace detail

// Header required; columns may come in any order; the four paired counts and
// age are mandatory, the single-test counts default to 0. Blank lines and
// lines starting with '#' are skipped.
inline CurrentStatusDataset read_dataset_csv(std::istream& in, const std::string& source = "<input>") {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = detail::split_csv_line(t);
    break;
  }
  if (header.empty()) throw DataError(source + ": missing header line");

  const auto& known = dataset_columns();
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (std::find(known.begin(), known.end(), header[i]) == known.end())
      throw DataError(source + ": line " + std::to_string(line_no) + ", column " + std::to_string(i + 1) +
                      ": unknown column '" + header[i] + "'");
    if (pos.count(header[i]))
      throw DataError(source + ": line " + std::to_string(line_no) + ": duplicate column '" + header[i] + "'");
    pos[header[i]] = i;
  }
  for (std::size_t i = 0; i < 5; ++i)
    if (!pos.count(known[i])) throw DataError(source + ": header lacks required column '" + known[i] + "'");

  CurrentStatusDataset data;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = detail::split_csv_line(t);
    const std::string row_where = source + ": line " + std::to_string(line_no);
    if (fields.size() != header.size())
      throw DataError(row_where + ": expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    auto get = [&](const std::string& col, bool integer) {
      const auto it = pos.find(col);
      if (it == pos.end()) return 0.0;
      return detail::parse_field(fields[it->second], row_where + ", column '" + col + "'", integer);
    };
    CurrentStatusRow r;
    r.age = get("age", false);
    r.n = {get("n00", true), get("n01", true), get("n10", true), get("n11", true)};
    r.m0x = get("m0x", true);
    r.m1x = get("m1x", true);
    r.mx0 = get("mx0", true);
    r.mx1 = get("mx1", true);
    if (!data.rows.empty() && !(r.age > data.rows.back().age))
      throw DataError(row_where + ", column 'age': ages must be strictly ascending (" + format_number(r.age) +
                      " after " + format_number(data.rows.back().age) + ")");
    data.rows.push_back(r);
  }
  data.validate();
  return data;
}

inline CurrentStatusDataset read_dataset_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  return read_dataset_csv(in, path);
}

inline void write_dataset_csv(std::ostream& out, const CurrentStatusDataset& data) {
  const auto& cols = dataset_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : data.rows) {
    out << format_number(r.age);
    for (double c : {r.n[0], r.n[1], r.n[2], r.n[3], r.m0x, r.m1x, r.mx0, r.mx1}) out << ',' << format_number(c);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Model JSON

namespace detail {

inline std::string family_name(ModelConfig::Family f) {
  return f == ModelConfig::Family::gamma ? "gamma" : "gengamma";
}

inline std::string h_kind_name(ModulationFn::Kind k) {
  switch (k) {
    case ModulationFn::Kind::constant_one:
      return "constant";
    case ModulationFn::Kind::exp_quadratic:
      return "exp_quadratic";
    case ModulationFn::Kind::exp_transition:
      return "exp_transition";
  }
  return "constant";
}

inline ModulationFn::Kind parse_h_kind(const std::string& s) {
  if (s == "constant") return ModulationFn::Kind::constant_one;
  if (s == "exp_quadratic") return ModulationFn::Kind::exp_quadratic;
  if (s == "exp_transition") return ModulationFn::Kind::exp_transition;
  throw DomainError("model: unknown h_kind '" + s + "' (constant, exp_quadratic, exp_transition)");
}

inline json hazard_to_json(const HazardSpec& h) {
  json j;
  if (h.kind == HazardSpec::Kind::log_linear) {
    j["kind"] = "log_linear";
    j["a"] = h.a;
    j["b"] = h.b;
  } else {
    j["kind"] = "piecewise_constant";
    j["cutpoints"] = h.cutpoints;
    j["rates"] = h.rates;
  }
  j["delta"] = h.delta;
  return j;
}

inline HazardSpec hazard_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw DomainError("model: " + where + " must be an object");
  const std::string kind = j.value("kind", "piecewise_constant");
  const double delta = j.value("delta", 1.0);
  if (kind == "log_linear") return HazardSpec::log_linear(j.value("a", 0.0), j.value("b", 0.0), delta);
  if (kind == "piecewise_constant")
    return HazardSpec::piecewise(j.value("cutpoints", std::vector<double>{}),
                                 j.value("rates", std::vector<double>{0.05}), delta);
  throw DomainError("model: " + where + ".kind '" + kind + "' is not piecewise_constant or log_linear");
}

}  // namespace detail

inline json model_to_json(const ModelConfig& c) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["name"] = c.name;
  j["family"] = detail::family_name(c.family);
  j["packing"] = c.packing == ModelConfig::Packing::k_beta ? "k_beta" : "alpha_beta";
  j["h_kind"] = detail::h_kind_name(c.modulation);
  j["allow_increasing"] = c.allow_increasing;
  j["limit_is_beta"] = c.limit_is_beta;
  j["two_component"] = c.two_component;
  j["hazard1"] = detail::hazard_to_json(c.hazard(1));
  j["hazard2"] = detail::hazard_to_json(c.hazard(2));
  json params = json::object();
  for (const auto& p : c.parameters) {
    json q;
    q["value"] = p.value;
    q["free"] = p.free;
    q["link"] = link_name(p.link);
    if (p.link == Link::logit) {
      q["lower"] = p.lower;
      q["upper"] = p.upper;
    }
    params[p.name] = q;
  }
  j["parameters"] = params;
  return j;
}

// Parameters may be given as a number (value, free) or as an object with
// value / free / link / lower / upper.
inline ModelConfig model_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("model: top level must be a JSON object");
  const int version = j.value("schema_version", 0);
  if (version != kModelSchemaVersion)
    throw DomainError("model: schema_version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kModelSchemaVersion) + ")");
  static const std::vector<std::string> keys{"schema_version", "name",          "family",  "packing",
                                             "h_kind",         "allow_increasing", "limit_is_beta",
                                             "two_component",  "hazard1",       "hazard2", "parameters"};
  for (const auto& [k, v] : j.items())
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw DomainError("model: unknown field '" + k + "'");

  const std::string family = j.value("family", "gamma");
  if (family != "gamma" && family != "gengamma")
    throw DomainError("model: family '" + family + "' is not gamma or gengamma");
  const std::string packing = j.value("packing", "k_beta");
  if (packing != "k_beta" && packing != "alpha_beta")
    throw DomainError("model: packing '" + packing + "' is not k_beta or alpha_beta");
  const HazardSpec h1 = detail::hazard_from_json(j.value("hazard1", json::object()), "hazard1");
  const HazardSpec h2 = j.contains("hazard2") ? detail::hazard_from_json(j["hazard2"], "hazard2") : h1;

  ModelConfig c = ModelConfig::build(
      family == "gamma" ? ModelConfig::Family::gamma : ModelConfig::Family::gengamma,
      detail::parse_h_kind(j.value("h_kind", "constant")), h1, h2, j.value("two_component", false),
      packing == "k_beta" ? ModelConfig::Packing::k_beta : ModelConfig::Packing::alpha_beta,
      j.value("allow_increasing", false));
  c.name = j.value("name", "model");
  c.limit_is_beta = j.value("limit_is_beta", false);
  c.rebuild_parameters();

  if (j.contains("parameters")) {
    const auto& ps = j["parameters"];
    if (!ps.is_object()) throw DomainError("model: parameters must be an object");
    for (const auto& [name, v] : ps.items()) {
      if (!c.has(name)) {
        std::string allowed;
        for (const auto& p : c.parameters) allowed += (allowed.empty() ? "" : ", ") + p.name;
        throw DomainError("model: parameter '" + name + "' does not belong to this model (" + allowed + ")");
      }
      Parameter& p = c.param(name);
      if (v.is_number()) {
        p.value = v.get<double>();
      } else if (v.is_object()) {
        p.value = v.value("value", p.value);
        p.free = v.value("free", p.free);
        if (v.contains("link")) p.link = parse_link(v["link"].get<std::string>());
        p.lower = v.value("lower", p.lower);
        p.upper = v.value("upper", p.upper);
      } else {
        throw DomainError("model: parameter '" + name + "' must be a number or an object");
      }
    }
  }
  c.validate();
  return c;
}

inline ModelConfig read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open model file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError("model file '" + path + "': " + e.what());
  }
  try {
    return model_from_json(j);
  } catch (const json::exception& e) {
    throw DomainError("model file '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports

inline json fit_to_json(const FitResult& f) {
  json j;
  j["model"] = model_to_json(f.config);
  json est = json::array();
  for (const auto& e : f.estimates) {
    json q;
    q["name"] = e.name;
    q["value"] = e.value;
    q["free"] = e.free;
    if (e.free) {
      q["eta"] = e.eta;
      q["se"] = json_number(e.se);
      q["se_eta"] = json_number(e.se_eta);
    }
    if (e.profile_ci) {
      const auto& ci = *e.profile_ci;
      q["profile_ci"] = {{"level", ci.level},        {"lower", json_number(ci.lower)},
                         {"upper", json_number(ci.upper)}, {"lower_open", ci.lower_open},
                         {"upper_open", ci.upper_open},    {"warning", ci.warning}};
    }
    est.push_back(q);
  }
  j["estimates"] = est;
  j["loglik_initial"] = json_number(f.loglik_initial);
  j["loglik"] = json_number(f.loglik_max);
  j["n_params"] = f.n_params;
  j["aic"] = json_number(f.aic);
  j["deviance"] = json_number(f.deviance);
  j["df"] = f.df;
  const auto& c = f.convergence;
  j["convergence"] = {{"converged", c.converged},
                      {"max_iter", c.max_iter},
                      {"degenerate_hessian", c.degenerate_hessian},
                      {"iterations", c.iterations},
                      {"evaluations", c.evaluations},
                      {"gradient_norm", json_number(c.gradient_norm)},
                      {"message", c.message}};
  return j;
}

inline void write_study_csv(std::ostream& out, const StudyReport& r) {
  out << "scenario,param,true,bias,rmse,mean_se,sd,coverage\n";
  for (const auto& p : r.parameters)
    out << r.scenario << ',' << p.name << ',' << format_number(p.truth) << ',' << format_number(p.bias) << ','
        << format_number(p.rmse) << ',' << format_number(p.mean_se) << ',' << format_number(p.sd) << ','
        << format_number(p.wald_coverage) << '\n';
}

inline json study_to_json(const StudyReport& r, const SimDesign& d) {
  json j;
  j["scenario"] = r.scenario;
  j["design"] = {{"n_per_age", d.n_per_age},
                 {"ages", d.ages},
                 {"replicates", d.replicates},
                 {"seed", d.seed},
                 {"ci_level", d.fit_options.ci_level},
                 {"truth", model_to_json(d.truth)},
                 {"fit_model", model_to_json(d.fit_config)}};
  j["converged"] = r.converged;
  j["nonconverged"] = r.nonconverged;
  json ps = json::array();
  for (const auto& p : r.parameters)
    ps.push_back({{"param", p.name},
                  {"true", p.truth},
                  {"mean", json_number(p.mean)},
                  {"bias", json_number(p.bias)},
                  {"rmse", json_number(p.rmse)},
                  {"mean_se", json_number(p.mean_se)},
                  {"sd", json_number(p.sd)},
                  {"coverage", json_number(p.wald_coverage)},
                  {"profile_coverage", json_number(p.profile_coverage)},
                  {"n", p.n}});
  j["parameters"] = ps;
  json fails = json::array();
  for (std::size_t i = 0; i < r.outcomes.size(); ++i)
    if (!r.outcomes[i].converged) fails.push_back({{"replicate", i}, {"reason", r.outcomes[i].error}});
  j["failures"] = fails;
  return j;
}

// Points and exclusions merged in age order; status is "ok" or the reason.
inline void write_phi_csv(std::ostream& out, const PhiSeries& s) {
  struct Line {
    double age;
    std::string text;
  };
  std::vector<Line> lines;
  for (const auto& p : s.points)
    lines.push_back({p.age, format_number(p.age) + ',' + format_number(p.phi) + ',' + format_number(p.weight) + ",ok"});
  for (const auto& e : s.excluded)
    lines.push_back({e.age, format_number(e.age) + ",nan,0,\"" + e.reason + '"'});
  std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.age < b.age; });
  out << "age,phi,weight,status\n";
  for (const auto& l : lines) out << l.text << '\n';
}

}  // namespace tvf
