#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvpmai/csv.hpp"
#include "tvpmai/decomposition.hpp"
#include "tvpmai/error.hpp"
#include "tvpmai/evaluation.hpp"
#include "tvpmai/mai.hpp"
#include "tvpmai/panel.hpp"
#include "tvpmai/pool.hpp"
#include "tvpmai/simulation.hpp"

namespace tvpmai::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// FNV-1a over the canonical option dump; manifests embed it so reruns can be
// matched to their configuration.
std::string config_hash(const json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const json& options, const std::vector<std::string>& outputs) {
  json manifest;
  manifest["command"] = command;
  manifest["options"] = options;
  manifest["config_hash"] = config_hash(options);
  manifest["outputs"] = outputs;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

GroupTemplate template_from(const TimeSeriesPanel& panel,
                            const std::vector<int>& group_sizes) {
  if (!group_sizes.empty()) {
    GroupTemplate tmpl;
    tmpl.group_sizes = group_sizes;
    tmpl.validate();
    if (tmpl.total_series() != panel.cols())
      throw ValidationError("group sizes cover " +
                            std::to_string(tmpl.total_series()) +
                            " series, panel has " + std::to_string(panel.cols()));
    return tmpl;
  }
  if (!panel.group_labels.empty())
    return GroupTemplate::from_labels(panel.group_labels);
  throw ValidationError(
      "no block structure: pass --group-sizes or a panel with #group metadata");
}

struct EstimateOptions {
  std::string input;
  std::string out = "out";
  int q = 1;
  int p = 1;
  double lambda = 0.99;
  double kappa = 0.96;
  double tol = 1e-6;
  int max_iter = 100;
  double beta0_var = 4.0;
  bool h0_sample_cov = false;
  bool restricted = false;
  bool dump_beliefs = false;
  bool dump_components = false;
  std::vector<int> group_sizes;
};

void add_estimation_flags(CLI::App* cmd, EstimateOptions& o) {
  cmd->add_option("--input", o.input, "normalized panel CSV")->required();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--q", o.q, "number of indexes");
  cmd->add_option("--p", o.p, "lag order");
  cmd->add_option("--lambda", o.lambda, "forgetting factor in (0,1]");
  cmd->add_option("--kappa", o.kappa, "EWMA decay in (0,1]");
  cmd->add_option("--tol", o.tol, "relative omega convergence tolerance");
  cmd->add_option("--max-iter", o.max_iter, "switching iteration cap");
  cmd->add_option("--beta0-var", o.beta0_var, "prior state variance scale");
  cmd->add_flag("--h0-sample-cov", o.h0_sample_cov,
                "initialize H0 at the sample covariance instead of I");
  cmd->add_flag("--restricted", o.restricted,
                "estimate under the block identification template");
  cmd->add_flag("--dump-beliefs", o.dump_beliefs,
                "write the filtered state path to beliefs.csv");
  cmd->add_option("--group-sizes", o.group_sizes,
                  "series per group, in panel order")
      ->delimiter(',');
}

json estimation_config(const EstimateOptions& o) {
  json j;
  j["input"] = o.input;
  j["q"] = o.q;
  j["p"] = o.p;
  j["lambda"] = o.lambda;
  j["kappa"] = o.kappa;
  j["tol"] = o.tol;
  j["max_iter"] = o.max_iter;
  j["beta0_var"] = o.beta0_var;
  j["h0_sample_cov"] = o.h0_sample_cov;
  j["restricted"] = o.restricted;
  j["group_sizes"] = o.group_sizes;
  return j;
}

MaiFit run_estimate(const TimeSeriesPanel& panel, const EstimateOptions& o) {
  ModelSpec spec;
  spec.q = o.q;
  spec.p = o.p;
  spec.lambda = o.lambda;
  spec.kappa = o.kappa;
  if (o.restricted) {
    spec.restriction = template_from(panel, o.group_sizes);
    if (spec.restriction->num_groups() != o.q)
      throw ValidationError("q must equal the number of groups (" +
                            std::to_string(spec.restriction->num_groups()) + ")");
  }
  SwitchingOptions sw;
  sw.tol = o.tol;
  sw.max_iter = o.max_iter;
  sw.beta0_var_scale = o.beta0_var;
  sw.h0_sample_cov = o.h0_sample_cov;
  return switching_estimate(panel.values, spec, sw);
}

void write_omega_json(const fs::path& path, const TimeSeriesPanel& panel,
                      const MaiFit& fit) {
  json j;
  j["series_ids"] = panel.series_ids;
  j["q"] = fit.spec.q;
  j["p"] = fit.spec.p;
  j["lambda"] = fit.spec.lambda;
  j["kappa"] = fit.spec.kappa;
  j["restricted"] = fit.spec.restriction.has_value();
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["log_pl"] = fit.log_pl;
  j["log_pl_trace"] = fit.log_pl_trace;
  j["omega"] = matrix_to_json(fit.omega.omega);
  if (!fit.spec.restriction)
    j["omega_orthonormalized"] =
        matrix_to_json(orthonormalize_columns(fit.omega.omega));
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

void write_indexes_csv(const fs::path& path, const TimeSeriesPanel& panel,
                       const MaiFit& fit) {
  std::ofstream out(path);
  out << "date";
  for (int j = 0; j < fit.spec.q; ++j) out << ",f" << (j + 1);
  out << "\n";
  for (int t = 0; t < fit.indexes.rows(); ++t) {
    out << panel.dates[t].str();
    for (int j = 0; j < fit.spec.q; ++j)
      out << "," << csv::format_sig(fit.indexes(t, j));
    out << "\n";
  }
}

int cmd_transform(const std::string& input, const std::string& date_column,
                  const std::string& out, bool dry_run) {
  const TimeSeriesPanel prepared = prepare_panel(input, date_column);
  std::cout << "N=" << prepared.cols() << " T=" << prepared.rows() << "\n";
  if (dry_run) return 0;

  const fs::path dir = prepare_out_dir(out);
  write_normalized_panel(prepared, (dir / "panel.csv").string());
  json options;
  options["input"] = input;
  options["date_column"] = date_column;
  options["dry_run"] = dry_run;
  write_manifest(dir, "transform", options, {"panel.csv"});
  return 0;
}

int cmd_estimate(const EstimateOptions& o) {
  const TimeSeriesPanel panel = read_normalized_panel(o.input);
  const MaiFit fit = run_estimate(panel, o);
  const fs::path dir = prepare_out_dir(o.out);
  write_omega_json(dir / "omega.json", panel, fit);
  write_indexes_csv(dir / "indexes.csv", panel, fit);
  std::vector<std::string> outputs = {"omega.json", "indexes.csv"};
  if (o.dump_beliefs) {
    write_beliefs_csv(fit.beliefs, (dir / "beliefs.csv").string());
    outputs.push_back("beliefs.csv");
  }
  write_manifest(dir, "estimate", estimation_config(o), outputs);
  std::cout << "converged=" << (fit.converged ? "true" : "false")
            << " iterations=" << fit.iterations
            << " logPL=" << csv::format_sig(fit.log_pl) << "\n";
  return 0;
}

struct GridOptions {
  std::vector<int> qs{1};
  std::vector<double> lambdas{0.99};
  std::vector<double> kappas{0.96};
  int p = 1;
  double alpha = 0.99;
};

void add_grid_flags(CLI::App* cmd, GridOptions& g) {
  cmd->add_option("--q", g.qs, "index-count grid")->delimiter(',');
  cmd->add_option("--lambda", g.lambdas, "forgetting factor grid")->delimiter(',');
  cmd->add_option("--kappa", g.kappas, "EWMA decay grid")->delimiter(',');
  cmd->add_option("--p", g.p, "lag order");
  cmd->add_option("--alpha", g.alpha, "model-probability forgetting factor");
}

std::vector<ModelSpec> grid_specs(const GridOptions& g,
                                  std::optional<double> fix_lambda,
                                  std::optional<double> fix_kappa) {
  std::vector<double> lambdas = fix_lambda ? std::vector<double>{*fix_lambda}
                                           : g.lambdas;
  std::vector<double> kappas = fix_kappa ? std::vector<double>{*fix_kappa}
                                         : g.kappas;
  if (g.qs.empty() || lambdas.empty() || kappas.empty())
    throw ValidationError("model grid must not be empty");
  std::vector<ModelSpec> specs;
  for (int q : g.qs)
    for (double l : lambdas)
      for (double k : kappas) {
        ModelSpec s;
        s.q = q;
        s.p = g.p;
        s.lambda = l;
        s.kappa = k;
        specs.push_back(s);
      }
  return specs;
}

json grid_config(const GridOptions& g) {
  json j;
  j["q"] = g.qs;
  j["lambda"] = g.lambdas;
  j["kappa"] = g.kappas;
  j["p"] = g.p;
  j["alpha"] = g.alpha;
  return j;
}

int cmd_pool(const std::string& input, const GridOptions& grid,
             const std::string& mode, const std::vector<int>& horizons,
             bool emit_forecasts, int threads, const std::string& out) {
  const TimeSeriesPanel panel = read_normalized_panel(input);
  const std::vector<ModelSpec> specs = grid_specs(grid, {}, {});

  PoolRunOptions opt;
  opt.alpha = grid.alpha;
  opt.mode = mode == "dms" ? PoolMode::kDms : PoolMode::kDma;
  opt.horizons = horizons;
  opt.emit_forecasts = emit_forecasts;
  opt.workers = threads;
  opt.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
  const PoolRunResult res = run_pool(panel.values, specs, opt);

  const fs::path dir = prepare_out_dir(out);
  {
    std::ofstream w(dir / "weights.csv");
    w << "t,date,model,pi_pred,pi_post\n";
    for (const auto& step : res.steps)
      for (std::size_t k = 0; k < specs.size(); ++k)
        w << step.t << "," << panel.dates[step.t].str() << ","
          << specs[k].fingerprint() << "," << csv::format_sig(step.pi_pred[k])
          << "," << csv::format_sig(step.pi_post[k]) << "\n";
  }
  {
    std::ofstream w(dir / "ranking.csv");
    w << "rank,q,lambda,kappa,log_pl,pi_final\n";
    const Eigen::VectorXd& final_pi = res.steps.back().pi_post;
    int rank = 1;
    for (int k : res.ranking) {
      w << rank++ << "," << specs[k].q << "," << csv::format_sig(specs[k].lambda)
        << "," << csv::format_sig(specs[k].kappa) << ","
        << (res.fits[k] ? csv::format_sig(res.total_log_pl[k]) : "---") << ","
        << csv::format_sig(final_pi[k]) << "\n";
    }
  }
  {
    std::ofstream w(dir / "selected.csv");
    w << "t,date,model\n";
    for (const auto& step : res.steps)
      w << step.t << "," << panel.dates[step.t].str() << ","
        << specs[step.selected].fingerprint() << "\n";
  }
  std::vector<std::string> outputs = {"weights.csv", "ranking.csv", "selected.csv"};
  if (emit_forecasts) {
    std::ofstream w(dir / "pool_forecasts.csv");
    w << "origin,date,horizon,variable,mean,var\n";
    for (const auto& fc : res.forecasts) {
      const Eigen::VectorXd mean = fc.dist.mean();
      for (int i = 0; i < mean.size(); ++i)
        w << fc.origin << "," << panel.dates[fc.origin].str() << ","
          << fc.horizon << "," << panel.series_ids[i] << ","
          << csv::format_sig(mean[i]) << ","
          << csv::format_sig(fc.dist.marginal_variance(i)) << "\n";
    }
    outputs.push_back("pool_forecasts.csv");
  }

  json options = grid_config(grid);
  options["input"] = input;
  options["mode"] = mode;
  options["horizons"] = horizons;
  options["models"] = json::array();
  for (const auto& s : specs) options["models"].push_back(s.fingerprint());
  write_manifest(dir, "pool", options, outputs);

  std::cout << "pooled " << specs.size() << " models over "
            << res.steps.size() << " steps";
  if (!res.warnings.empty()) std::cout << " (" << res.warnings.size() << " failed)";
  std::cout << "\n";
  return 0;
}

int cmd_decompose(const EstimateOptions& o) {
  const TimeSeriesPanel panel = read_normalized_panel(o.input);
  EstimateOptions eo = o;
  eo.restricted = true;
  const GroupTemplate tmpl = template_from(panel, o.group_sizes);
  eo.q = tmpl.num_groups();
  const MaiFit fit = run_estimate(panel, eo);
  const Eigen::MatrixXd shares = share_series(fit, tmpl);

  const fs::path dir = prepare_out_dir(o.out);
  {
    std::ofstream w(dir / "shares.csv");
    w << "date,series_id,common_share\n";
    for (int s = 0; s < shares.rows(); ++s) {
      const int t = o.p + s;  // beliefs align with t = p..T-1
      for (int i = 0; i < panel.cols(); ++i)
        w << panel.dates[t].str() << "," << panel.series_ids[i] << ","
          << csv::format_sig(shares(s, i)) << "\n";
    }
  }
  write_omega_json(dir / "omega.json", panel, fit);
  std::vector<std::string> outputs = {"shares.csv", "omega.json"};
  if (o.dump_components) {
    // Lower-triangle (vech) entries of both parts, one row per (t, i, j).
    std::ofstream w(dir / "components.csv");
    w << "date,row,col,H_com,H_idio\n";
    for (std::size_t s = 0; s < fit.beliefs.size(); ++s) {
      const VolShares v =
          variance_decompose(fit.beliefs[s].H, fit.omega.omega, 1e-8,
                             static_cast<int>(s));
      const int t = o.p + static_cast<int>(s);
      for (int c = 0; c < panel.cols(); ++c)
        for (int r = c; r < panel.cols(); ++r)
          w << panel.dates[t].str() << "," << r << "," << c << ","
            << csv::format_sig(v.H_com(r, c)) << ","
            << csv::format_sig(v.H_idio(r, c)) << "\n";
    }
    outputs.push_back("components.csv");
  }
  json options = estimation_config(o);
  options["q"] = eo.q;
  write_manifest(dir, "decompose", options, outputs);
  std::cout << "decomposed " << shares.rows() << " periods, "
            << panel.cols() << " series\n";
  return 0;
}

struct ForecastOptions {
  std::string input;
  std::string out = "out";
  GridOptions grid;
  std::vector<std::string> models{"dma", "rw"};
  std::string benchmark;
  std::vector<std::string> variables;
  std::vector<std::string> external;
  int h_max = 8;
  int initial_window = 60;
  bool rw_density = false;
  bool var_intercept = true;
  bool warm_start = true;
  bool window_standardize = true;
  int threads = 1;
  double beta0_var = 4.0;
  bool h0_sample_cov = false;
};

std::unique_ptr<ModelRunner> make_runner(const std::string& name,
                                         const ForecastOptions& o) {
  auto mai = [&](PoolMode mode, std::optional<double> fl,
                 std::optional<double> fk, const std::string& tag) {
    MaiRunnerOptions mo;
    mo.specs = grid_specs(o.grid, fl, fk);
    mo.alpha = o.grid.alpha;
    mo.mode = mode;
    mo.warm_start = o.warm_start;
    mo.workers = o.threads;
    mo.tag = tag;
    mo.switching.beta0_var_scale = o.beta0_var;
    mo.switching.h0_sample_cov = o.h0_sample_cov;
    return mai_runner(mo);
  };
  if (name == "dma") return mai(PoolMode::kDma, {}, {}, name);
  if (name == "dms") return mai(PoolMode::kDms, {}, {}, name);
  if (name == "dma-fixed-beta") return mai(PoolMode::kDma, 1.0, {}, name);
  if (name == "dms-fixed-beta") return mai(PoolMode::kDms, 1.0, {}, name);
  if (name == "dma-fixed-h") return mai(PoolMode::kDma, {}, 1.0, name);
  if (name == "dms-fixed-h") return mai(PoolMode::kDms, {}, 1.0, name);
  if (name == "dma-const") return mai(PoolMode::kDma, 1.0, 1.0, name);
  if (name == "dms-const") return mai(PoolMode::kDms, 1.0, 1.0, name);
  if (name == "rw") return baseline_rw(o.rw_density);
  if (name.rfind("var", 0) == 0) {
    const std::string digits = name.substr(3);
    const int p = digits.empty() ? o.grid.p : std::stoi(digits);
    return baseline_var_ols(p, o.var_intercept, name);
  }
  throw ValidationError("unknown model '" + name + "'");
}

void write_metric_csv(const fs::path& path, const MetricTable& abs,
                      const MetricTable* rel, double MetricCell::*field) {
  std::ofstream w(path);
  w << "model,variable,horizon,value,ratio,status\n";
  for (const auto& m : abs.models) {
    for (const auto& v : abs.variables) {
      for (int h : abs.horizons) {
        const MetricCell* a = abs.cell(m, v, h);
        if (a == nullptr) continue;
        w << m << "," << v << "," << h << ",";
        if (a->diverged) {
          w << "---,---,diverged\n";
          continue;
        }
        const double value = a->*field;
        w << (std::isfinite(value) ? csv::format_sig(value) : "n/a") << ",";
        const MetricCell* r = rel ? rel->cell(m, v, h) : nullptr;
        if (r == nullptr) {
          w << "n/a";
        } else if (r->diverged) {
          w << "---";
        } else {
          const double ratio = r->*field;
          w << (std::isfinite(ratio) ? csv::format_sig(ratio) : "n/a");
        }
        w << "," << (a->diverged ? "diverged" : "ok") << "\n";
      }
    }
  }
}

int cmd_forecast(const ForecastOptions& o) {
  const TimeSeriesPanel normalized = read_normalized_panel(o.input);
  // Work on the transformed scale; each window standardizes itself.
  const TimeSeriesPanel panel = normalized.standardized()
                                    ? destandardize_panel(normalized)
                                    : normalized;

  HarnessOptions hopt;
  hopt.h_max = o.h_max;
  hopt.initial_window = o.initial_window;
  hopt.window_standardize = o.window_standardize;
  hopt.variables = o.variables;

  std::vector<ForecastRecord> records;
  for (const auto& name : o.models) {
    auto runner = make_runner(name, o);
    auto rs = expanding_window_forecast(panel, *runner, hopt);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  for (const auto& path : o.external) {
    auto rs = load_forecast_records(path);
    records.insert(records.end(), rs.begin(), rs.end());
  }
  if (records.empty()) throw ValidationError("no forecast records produced");

  const MetricTable abs = compute_metrics(records);
  std::optional<MetricTable> rel;
  if (!o.benchmark.empty()) rel = relative_table(abs, o.benchmark);

  const fs::path dir = prepare_out_dir(o.out);
  write_forecast_records(records, (dir / "forecasts.csv").string());
  write_metric_csv(dir / "metrics_rmsfe.csv", abs, rel ? &*rel : nullptr,
                   &MetricCell::rmsfe);
  write_metric_csv(dir / "metrics_mafe.csv", abs, rel ? &*rel : nullptr,
                   &MetricCell::mafe);
  write_metric_csv(dir / "metrics_alpl.csv", abs, rel ? &*rel : nullptr,
                   &MetricCell::alpl);
  {
    std::ofstream w(dir / "tables.txt");
    w << render_metric_tables(rel ? *rel : abs);
  }

  json options = grid_config(o.grid);
  options["input"] = o.input;
  options["models"] = o.models;
  options["grid_members"] = json::array();
  for (const auto& s : grid_specs(o.grid, {}, {}))
    options["grid_members"].push_back(s.fingerprint());
  options["benchmark"] = o.benchmark;
  options["variables"] = o.variables;
  options["external"] = o.external;
  options["h_max"] = o.h_max;
  options["initial_window"] = o.initial_window;
  options["rw_density"] = o.rw_density;
  options["var_intercept"] = o.var_intercept;
  options["warm_start"] = o.warm_start;
  options["window_standardize"] = o.window_standardize;
  options["beta0_var"] = o.beta0_var;
  options["h0_sample_cov"] = o.h0_sample_cov;
  write_manifest(dir, "forecast", options,
                 {"forecasts.csv", "metrics_rmsfe.csv", "metrics_mafe.csv",
                  "metrics_alpl.csv", "tables.txt"});
  std::cout << "wrote " << records.size() << " records for "
            << abs.models.size() << " models\n";
  return 0;
}

int cmd_simulate(int n, int q, int p, int T, int burn_in, double sigma_beta,
                 std::uint64_t seed, int break_at, double break_scale,
                 double target_radius, const std::string& out) {
  DgpSpec spec;
  spec.n_series = n;
  spec.q = q;
  spec.p = p;
  spec.T = T;
  spec.burn_in = burn_in;
  spec.sigma_beta = sigma_beta;
  spec.seed = seed;
  spec.variance_break_at = break_at;
  spec.variance_break_scale = break_scale;
  spec.target_radius = target_radius;
  const SimulatedPanel sim = simulate_mai(spec);

  const fs::path dir = prepare_out_dir(out);
  {
    // Raw panel format: tcode row of ones, readable by `transform`.
    std::ofstream w(dir / "panel.csv");
    w << "date," << csv::join(sim.panel.series_ids, ",") << "\n";
    w << "tcode";
    for (int i = 0; i < sim.panel.cols(); ++i) w << ",1";
    w << "\n";
    for (int t = 0; t < sim.panel.rows(); ++t) {
      w << sim.panel.dates[t].str();
      for (int i = 0; i < sim.panel.cols(); ++i)
        w << "," << csv::format_full(sim.panel.values(t, i));
      w << "\n";
    }
  }
  {
    json truth;
    truth["n"] = n;
    truth["q"] = q;
    truth["p"] = p;
    truth["T"] = T;
    truth["seed"] = seed;
    truth["sigma_beta"] = sigma_beta;
    truth["variance_break_at"] = break_at;
    truth["variance_break_scale"] = break_scale;
    truth["omega"] = matrix_to_json(sim.truth.omega);
    std::ofstream w(dir / "truth.json");
    w << truth.dump(2) << "\n";
  }
  json options;
  options["n"] = n;
  options["q"] = q;
  options["p"] = p;
  options["T"] = T;
  options["burn_in"] = burn_in;
  options["sigma_beta"] = sigma_beta;
  options["seed"] = seed;
  options["variance_break_at"] = break_at;
  options["variance_break_scale"] = break_scale;
  options["target_radius"] = target_radius;
  write_manifest(prepare_out_dir(out), "simulate", options,
                 {"panel.csv", "truth.json"});
  std::cout << "simulated N=" << n << " T=" << T << " seed=" << seed << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Time-varying multivariate autoregressive index models"};
  app.require_subcommand(1);
  // Flat key=value per [subcommand] section (or dotted subcommand.key);
  // repeated keys accumulate into grids, command-line flags win.
  app.set_config("--config", "", "key=value config file");

  // transform
  std::string t_input, t_date = "date", t_out = "out";
  bool t_dry = false;
  auto* t = app.add_subcommand("transform",
                               "load, difference and standardize a raw panel");
  t->add_option("--input", t_input, "raw CSV panel")->required();
  t->add_option("--date-column", t_date, "date column name");
  t->add_option("--out", t_out, "output directory");
  t->add_flag("--dry-run", t_dry, "validate without writing");

  // estimate
  EstimateOptions eo;
  auto* e = app.add_subcommand("estimate", "fit one index model");
  add_estimation_flags(e, eo);

  // pool
  std::string p_input, p_mode = "dma", p_out = "out";
  GridOptions p_grid;
  std::vector<int> p_horizons{1};
  bool p_forecasts = false;
  int p_threads = 1;
  auto* p = app.add_subcommand("pool", "dynamic model averaging over a grid");
  p->add_option("--input", p_input, "normalized panel CSV")->required();
  add_grid_flags(p, p_grid);
  p->add_option("--mode", p_mode, "dma or dms")
      ->check(CLI::IsMember({"dma", "dms"}));
  p->add_option("--horizons", p_horizons, "forecast horizons")->delimiter(',');
  p->add_flag("--emit-forecasts", p_forecasts, "write per-origin pool forecasts");
  p->add_option("--threads", p_threads, "parallel model fits");
  p->add_option("--out", p_out, "output directory");

  // decompose
  EstimateOptions dopt;
  auto* d = app.add_subcommand("decompose",
                               "common/idiosyncratic volatility shares");
  add_estimation_flags(d, dopt);
  d->add_flag("--dump-components", dopt.dump_components,
              "write vech(H_com), vech(H_idio) per period to components.csv");

  // forecast
  ForecastOptions fo;
  auto* f = app.add_subcommand("forecast", "expanding-window evaluation");
  f->add_option("--input", fo.input, "normalized panel CSV")->required();
  add_grid_flags(f, fo.grid);
  f->add_option("--models", fo.models,
                "models: dma dms dma-fixed-beta dms-fixed-beta dma-fixed-h "
                "dms-fixed-h dma-const dms-const rw varN")
      ->delimiter(',');
  f->add_option("--benchmark", fo.benchmark, "benchmark model tag for ratios");
  f->add_option("--vars", fo.variables, "series ids to evaluate")->delimiter(',');
  f->add_option("--external", fo.external, "external forecast record CSVs");
  f->add_option("--h-max", fo.h_max, "maximum horizon");
  f->add_option("--initial-window", fo.initial_window,
                "observations in the first estimation window");
  f->add_flag("--rw-density", fo.rw_density,
              "score the random walk with a difference-variance density");
  f->add_flag("!--no-var-intercept", fo.var_intercept,
              "drop the intercept from the VAR baselines");
  f->add_flag("!--no-warm-start", fo.warm_start,
              "re-initialize omega from PCA at every origin");
  f->add_flag("!--no-window-standardize", fo.window_standardize,
              "use the panel scale as-is");
  f->add_option("--threads", fo.threads, "parallel pool-member fits");
  f->add_option("--beta0-var", fo.beta0_var, "prior state variance scale");
  f->add_flag("--h0-sample-cov", fo.h0_sample_cov,
              "initialize H0 at the sample covariance");
  f->add_option("--out", fo.out, "output directory");

  // simulate
  int s_n = 6, s_q = 2, s_p = 1, s_T = 500, s_burn = 100, s_break = -1;
  double s_sigma = 0.0, s_break_scale = 1.0, s_radius = 0.6;
  std::uint64_t s_seed = 0;
  std::string s_out = "out";
  auto* s = app.add_subcommand("simulate", "draw a synthetic index-model panel");
  s->add_option("--n", s_n, "number of series");
  s->add_option("--q", s_q, "number of indexes");
  s->add_option("--p", s_p, "lag order");
  s->add_option("--t", s_T, "sample length");
  s->add_option("--burn-in", s_burn, "discarded leading draws");
  s->add_option("--sigma-beta", s_sigma, "coefficient random-walk step std");
  s->add_option("--seed", s_seed, "RNG seed");
  s->add_option("--break-at", s_break, "variance break row (-1: none)");
  s->add_option("--break-scale", s_break_scale, "variance break factor");
  s->add_option("--target-radius", s_radius,
                "spectral radius of the drawn index dynamics");
  s->add_option("--out", s_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (t->parsed()) return cmd_transform(t_input, t_date, t_out, t_dry);
    if (e->parsed()) return cmd_estimate(eo);
    if (p->parsed())
      return cmd_pool(p_input, p_grid, p_mode, p_horizons, p_forecasts,
                      p_threads, p_out);
    if (d->parsed()) return cmd_decompose(dopt);
    if (f->parsed()) return cmd_forecast(fo);
    if (s->parsed())
      return cmd_simulate(s_n, s_q, s_p, s_T, s_burn, s_sigma, s_seed, s_break,
                          s_break_scale, s_radius, s_out);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace tvpmai::cli
