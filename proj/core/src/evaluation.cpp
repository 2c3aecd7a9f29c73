#include "tvpmai/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "tvpmai/csv.hpp"
#include "tvpmai/error.hpp"
#include "tvpmai/parallel.hpp"

namespace tvpmai {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct WindowStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

WindowStats window_stats(const Eigen::MatrixXd& window) {
  const int T = static_cast<int>(window.rows());
  const int N = static_cast<int>(window.cols());
  WindowStats s;
  s.mean = window.colwise().mean();
  s.std.resize(N);
  for (int i = 0; i < N; ++i) {
    const double ss = (window.col(i).array() - s.mean[i]).square().sum();
    s.std[i] = std::sqrt(ss / std::max(T - 1, 1));
    if (!(s.std[i] > 1e-14))
      throw NumericalError("zero-variance column in estimation window");
  }
  return s;
}

class RwRunner final : public ModelRunner {
 public:
  explicit RwRunner(bool enable_density) : enable_density_(enable_density) {}

  std::string tag() const override { return "rw"; }
  bool provides_density() const override { return enable_density_; }

  std::vector<GaussianMixture> forecast(const Eigen::MatrixXd& window,
                                        int h_max) override {
    const int T = static_cast<int>(window.rows());
    const int N = static_cast<int>(window.cols());
    if (T < 3) throw NumericalError("window too short for the random walk");

    const Eigen::VectorXd last = window.row(T - 1).transpose();
    // Flat predictive variance from in-sample first differences.
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) {
      Eigen::VectorXd d = window.col(i).tail(T - 1) - window.col(i).head(T - 1);
      const double m = d.mean();
      cov(i, i) = (d.array() - m).square().sum() / (d.size() - 1);
      if (!(cov(i, i) > 0.0))
        throw NumericalError("degenerate difference variance in RW baseline");
    }

    std::vector<GaussianMixture> out;
    for (int h = 1; h <= h_max; ++h) {
      GaussianMixture g;
      g.weights = Eigen::VectorXd::Ones(1);
      g.means = {last};
      g.covs = {cov};
      out.push_back(std::move(g));
    }
    return out;
  }

 private:
  bool enable_density_;
};

class VarOlsRunner final : public ModelRunner {
 public:
  VarOlsRunner(int p, bool include_intercept, std::string tag)
      : p_(p), intercept_(include_intercept), tag_(std::move(tag)) {
    if (tag_.empty()) tag_ = "var" + std::to_string(p_);
  }

  std::string tag() const override { return tag_; }

  std::vector<GaussianMixture> forecast(const Eigen::MatrixXd& window,
                                        int h_max) override {
    const int T = static_cast<int>(window.rows());
    const int N = static_cast<int>(window.cols());
    const int m = (intercept_ ? 1 : 0) + N * p_;
    const int rows = T - p_;
    if (rows <= m)
      throw NumericalError("VAR(" + std::to_string(p_) +
                           ") has more regressors than observations");

    Eigen::MatrixXd X(rows, m);
    Eigen::MatrixXd Yr(rows, N);
    for (int t = p_; t < T; ++t) {
      int c = 0;
      if (intercept_) X(t - p_, c++) = 1.0;
      for (int h = 1; h <= p_; ++h)
        for (int i = 0; i < N; ++i) X(t - p_, c++) = window(t - h, i);
      Yr.row(t - p_) = window.row(t);
    }

    Eigen::MatrixXd G = X.transpose() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success ||
        d.minCoeff() < 1e-10 * std::max(1.0, d.maxCoeff()))
      throw NumericalError("rank-deficient VAR regressor matrix");
    Eigen::MatrixXd coef = ldlt.solve(X.transpose() * Yr);  // m x N

    const Eigen::MatrixXd resid = Yr - X * coef;
    const int dof = rows - m;
    Eigen::MatrixXd sigma = resid.transpose() * resid / double(dof);
    sigma = (sigma + sigma.transpose()) * 0.5;

    Eigen::VectorXd c0 = intercept_ ? coef.row(0).transpose().eval()
                                    : Eigen::VectorXd::Zero(N).eval();
    std::vector<Eigen::MatrixXd> A(p_);
    const int off = intercept_ ? 1 : 0;
    for (int h = 0; h < p_; ++h)
      A[h] = coef.middleRows(off + h * N, N).transpose();

    // Iterated point path.
    std::vector<Eigen::VectorXd> path;
    for (int r = 0; r < p_; ++r)
      path.push_back(window.row(T - p_ + r).transpose());
    std::vector<GaussianMixture> out;

    // Companion recursion for the forecast-error covariance.
    const int np = N * p_;
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(np, np);
    for (int h = 0; h < p_; ++h) F.block(0, h * N, N, N) = A[h];
    if (p_ > 1) F.block(N, 0, N * (p_ - 1), N * (p_ - 1)).setIdentity();
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(np, np);
    S.topLeftCorner(N, N) = sigma;
    Eigen::MatrixXd E = Eigen::MatrixXd::Zero(np, np);

    for (int h = 1; h <= h_max; ++h) {
      Eigen::VectorXd mean = c0;
      for (int l = 1; l <= p_; ++l) mean += A[l - 1] * path[path.size() - l];
      path.push_back(mean);
      E = (F * E * F.transpose() + S).eval();
      E = ((E + E.transpose()) * 0.5).eval();

      GaussianMixture g;
      g.weights = Eigen::VectorXd::Ones(1);
      g.means = {mean};
      g.covs = {E.topLeftCorner(N, N)};
      out.push_back(std::move(g));
    }
    return out;
  }

 private:
  int p_;
  bool intercept_;
  std::string tag_;
};

class MaiRunner final : public ModelRunner {
 public:
  explicit MaiRunner(MaiRunnerOptions options) : opt_(std::move(options)) {
    if (opt_.specs.empty()) throw ValidationError("mai runner needs at least one spec");
    if (opt_.tag.empty())
      opt_.tag = opt_.specs.size() == 1
                     ? "mai_" + opt_.specs[0].fingerprint()
                     : (opt_.mode == PoolMode::kDma ? "mai_dma" : "mai_dms");
    warm_.resize(opt_.specs.size());
  }

  std::string tag() const override { return opt_.tag; }
  void reset() override { warm_.assign(opt_.specs.size(), std::nullopt); }

  std::vector<GaussianMixture> forecast(const Eigen::MatrixXd& window,
                                        int h_max) override {
    const int K = static_cast<int>(opt_.specs.size());
    const int T = static_cast<int>(window.rows());
    const int N = static_cast<int>(window.cols());

    std::vector<std::optional<MaiFit>> fits(K);
    parallel_for(K, opt_.workers, [&](int k) {
      SwitchingOptions so = opt_.switching;
      if (opt_.warm_start && warm_[k]) so.omega_init = warm_[k];
      try {
        fits[k] = switching_estimate(window, opt_.specs[k], so);
      } catch (const ValidationError&) {
        throw;  // bad configuration, not a numerical failure
      } catch (const std::exception&) {
        fits[k] = std::nullopt;
      }
    });
    int alive = 0;
    for (int k = 0; k < K; ++k) {
      if (fits[k]) {
        if (opt_.warm_start) warm_[k] = fits[k]->omega.omega;
        ++alive;
      }
    }
    if (alive == 0)
      throw NumericalError("every pool member failed on this window");

    // Weight recursion over the window's common usable range, in log space.
    int max_p = 1;
    for (const auto& s : opt_.specs) max_p = std::max(max_p, s.p);
    Eigen::VectorXd log_pi =
        Eigen::VectorXd::Constant(K, -std::log(double(K)));
    for (int t = max_p; t < T; ++t) {
      Eigen::VectorXd logd(K);
      for (int k = 0; k < K; ++k) {
        logd[k] = fits[k]
                      ? fits[k]->beliefs[t - opt_.specs[k].p].log_pred_density
                      : -std::numeric_limits<double>::infinity();
      }
      log_pi = log_pool_update_weights(
          log_pool_predict_weights(log_pi, opt_.alpha), logd);
    }
    Eigen::VectorXd pi_origin =
        log_pool_predict_weights(log_pi, opt_.alpha);
    for (int k = 0; k < K; ++k)
      pi_origin[k] = std::isfinite(pi_origin[k]) ? std::exp(pi_origin[k]) : 0.0;

    std::vector<IteratedForecast> per_model(K);
    for (int k = 0; k < K; ++k) {
      if (!fits[k]) continue;
      per_model[k] = iterate_forecast(*fits[k], window, h_max);
    }

    std::vector<GaussianMixture> out;
    for (int h = 1; h <= h_max; ++h) {
      Eigen::VectorXd w = pi_origin;
      std::vector<Eigen::VectorXd> means;
      std::vector<Eigen::MatrixXd> covs;
      for (int k = 0; k < K; ++k) {
        if (!fits[k]) {
          w[k] = 0.0;
          means.push_back(Eigen::VectorXd::Zero(N));
          covs.push_back(Eigen::MatrixXd::Identity(N, N));
          continue;
        }
        means.push_back(per_model[k].means[h - 1]);
        covs.push_back(per_model[k].covs[h - 1]);
      }
      const double ws = w.sum();
      if (ws <= 0.0) throw NumericalError("pool collapsed at the origin");
      w /= ws;
      if (opt_.mode == PoolMode::kDms && K > 1) {
        const int sel = dms_select(w);
        w.setZero();
        w[sel] = 1.0;
      }
      out.push_back(dma_forecast(w, means, covs));
    }
    return out;
  }

 private:
  MaiRunnerOptions opt_;
  std::vector<std::optional<Eigen::MatrixXd>> warm_;
};

}  // namespace

std::vector<ForecastRecord> expanding_window_forecast(
    const TimeSeriesPanel& panel, ModelRunner& runner,
    const HarnessOptions& options) {
  validate_panel(panel);
  const int T = panel.rows();
  const int N = panel.cols();
  if (options.h_max < 1) throw ValidationError("h_max must be >= 1");
  if (options.initial_window < 2 || options.initial_window >= T)
    throw ValidationError("initial window must leave at least one forecast target");

  std::vector<int> record_vars;
  if (options.variables.empty()) {
    for (int i = 0; i < N; ++i) record_vars.push_back(i);
  } else {
    for (const auto& id : options.variables) {
      const int idx = panel.series_index(id);
      if (idx < 0)
        throw ValidationError("variable '" + id + "' not found in the panel");
      record_vars.push_back(idx);
    }
  }

  std::vector<ForecastRecord> records;
  runner.reset();

  for (int origin = options.initial_window - 1; origin + 1 < T; ++origin) {
    const int h_avail = std::min(options.h_max, T - 1 - origin);
    Eigen::MatrixXd window = panel.values.topRows(origin + 1);

    WindowStats stats;
    if (options.window_standardize) {
      stats = window_stats(window);
      for (int i = 0; i < N; ++i)
        window.col(i) = (window.col(i).array() - stats.mean[i]) / stats.std[i];
    } else {
      stats.mean = Eigen::VectorXd::Zero(N);
      stats.std = Eigen::VectorXd::Ones(N);
    }

    std::vector<GaussianMixture> dists;
    bool failed = false;
    try {
      dists = runner.forecast(window, options.h_max);
      if (static_cast<int>(dists.size()) < h_avail)
        throw NumericalError("runner returned too few horizons");
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      failed = true;
    }

    for (int h = 1; h <= h_avail; ++h) {
      for (int idx : record_vars) {
        ForecastRecord r;
        r.origin = origin;
        r.origin_date = panel.dates[origin].str();
        r.horizon = h;
        r.variable = panel.series_ids[idx];
        r.model = runner.tag();
        r.actual = panel.values(origin + h, idx);
        if (failed) {
          r.diverged = true;
          r.point = kNaN;
          r.pred_var = kNaN;
          r.log_score = kNaN;
        } else {
          const GaussianMixture& g = dists[h - 1];
          const double point_std = g.mean()[idx];
          const double var_std = g.marginal_variance(idx);
          r.point = stats.mean[idx] + stats.std[idx] * point_std;
          r.pred_var = stats.std[idx] * stats.std[idx] * var_std;
          if (runner.provides_density()) {
            const double actual_std =
                (r.actual - stats.mean[idx]) / stats.std[idx];
            r.log_score = g.marginal_logpdf(idx, actual_std) -
                          std::log(stats.std[idx]);
          } else {
            r.log_score = kNaN;
          }
          if (!std::isfinite(r.point) || !(r.pred_var > 0.0) ||
              (runner.provides_density() && !std::isfinite(r.log_score))) {
            r.diverged = true;
          }
        }
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

namespace {

void require_clean(const std::vector<ForecastRecord>& records) {
  if (records.empty()) throw ValidationError("empty record set");
  for (const auto& r : records)
    if (r.diverged)
      throw ValidationError("record set contains divergent forecasts");
}

}  // namespace

double rmsfe(const std::vector<ForecastRecord>& records) {
  require_clean(records);
  double acc = 0.0;
  for (const auto& r : records) {
    const double e = r.actual - r.point;
    acc += e * e;
  }
  return std::sqrt(acc / records.size());
}

double mafe(const std::vector<ForecastRecord>& records) {
  require_clean(records);
  double acc = 0.0;
  for (const auto& r : records) acc += std::abs(r.actual - r.point);
  return acc / records.size();
}

double alpl(const std::vector<ForecastRecord>& records) {
  require_clean(records);
  double acc = 0.0;
  for (const auto& r : records) {
    if (!std::isfinite(r.log_score)) return kNaN;  // no-density model
    acc += r.log_score;
  }
  return acc / records.size();
}

const MetricCell* MetricTable::cell(const std::string& model,
                                    const std::string& variable,
                                    int horizon) const {
  const auto it = cells.find({model, variable, horizon});
  return it == cells.end() ? nullptr : &it->second;
}

MetricTable compute_metrics(const std::vector<ForecastRecord>& records) {
  if (records.empty()) throw ValidationError("empty record set");

  std::map<std::tuple<std::string, std::string, int>,
           std::vector<ForecastRecord>>
      groups;
  std::set<std::string> models, variables;
  std::set<int> horizons;
  for (const auto& r : records) {
    groups[{r.model, r.variable, r.horizon}].push_back(r);
    models.insert(r.model);
    variables.insert(r.variable);
    horizons.insert(r.horizon);
  }

  MetricTable table;
  table.models.assign(models.begin(), models.end());
  table.variables.assign(variables.begin(), variables.end());
  table.horizons.assign(horizons.begin(), horizons.end());

  for (auto& [key, group] : groups) {
    MetricCell cell;
    cell.count = static_cast<int>(group.size());
    const bool any_diverged =
        std::any_of(group.begin(), group.end(),
                    [](const ForecastRecord& r) { return r.diverged; });
    if (any_diverged) {
      cell.diverged = true;
      cell.rmsfe = cell.mafe = cell.alpl = kNaN;
    } else {
      cell.rmsfe = rmsfe(group);
      cell.mafe = mafe(group);
      cell.alpl = alpl(group);
    }
    table.cells[key] = cell;
  }
  return table;
}

MetricTable relative_table(const MetricTable& metrics,
                           const std::string& benchmark) {
  if (std::find(metrics.models.begin(), metrics.models.end(), benchmark) ==
      metrics.models.end())
    throw ValidationError("benchmark model '" + benchmark +
                          "' absent from the record set");

  MetricTable rel = metrics;
  rel.benchmark = benchmark;
  for (const auto& v : metrics.variables) {
    for (int h : metrics.horizons) {
      const MetricCell* bench = metrics.cell(benchmark, v, h);
      for (const auto& m : metrics.models) {
        const auto key = std::make_tuple(m, v, h);
        const auto it = rel.cells.find(key);
        if (it == rel.cells.end()) continue;
        MetricCell& cell = it->second;
        if (bench == nullptr || bench->diverged) {
          // Undefined against a divergent benchmark.
          cell.diverged = true;
          cell.rmsfe = cell.mafe = cell.alpl = kNaN;
          continue;
        }
        if (cell.diverged) continue;
        if (m == benchmark) {
          cell.rmsfe = cell.mafe = 1.0;
          cell.alpl = std::isfinite(cell.alpl) ? 1.0 : kNaN;
          continue;
        }
        cell.rmsfe /= bench->rmsfe;
        cell.mafe /= bench->mafe;
        cell.alpl = (std::isfinite(cell.alpl) && std::isfinite(bench->alpl))
                        ? cell.alpl / bench->alpl
                        : kNaN;
      }
    }
  }
  return rel;
}

std::string render_metric_tables(const MetricTable& rel) {
  std::ostringstream os;
  const int width = 12;
  auto pad = [&](const std::string& s) {
    std::string t = s;
    if (static_cast<int>(t.size()) < width)
      t.insert(0, width - t.size(), ' ');
    return t;
  };
  auto fmt = [&](double x, bool diverged) {
    if (diverged) return pad("---");
    if (!std::isfinite(x)) return pad("n/a");
    return pad(csv::format_sig(x));
  };

  struct Panel {
    const char* title;
    double MetricCell::*field;
  };
  const Panel panels[] = {{"RMSFE", &MetricCell::rmsfe},
                          {"MAFE", &MetricCell::mafe},
                          {"ALPL", &MetricCell::alpl}};

  for (const auto& v : rel.variables) {
    os << "== " << v;
    if (!rel.benchmark.empty()) os << "  (relative to " << rel.benchmark << ")";
    os << " ==\n";
    for (const auto& panel : panels) {
      os << panel.title << "\n";
      os << pad("h");
      for (const auto& m : rel.models) os << pad(m);
      os << "\n";
      for (int h : rel.horizons) {
        os << pad(std::to_string(h));
        for (const auto& m : rel.models) {
          const MetricCell* c = rel.cell(m, v, h);
          if (c == nullptr) {
            os << pad("n/a");
          } else {
            os << fmt(c->*panel.field, c->diverged);
          }
        }
        os << "\n";
      }
    }
    os << "\n";
  }
  return os.str();
}

void write_forecast_records(const std::vector<ForecastRecord>& records,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "model,origin,origin_date,horizon,variable,point,pred_var,log_score,"
         "actual,diverged\n";
  for (const auto& r : records) {
    out << r.model << "," << r.origin << "," << r.origin_date << ","
        << r.horizon << "," << r.variable << "," << csv::format_sig(r.point)
        << "," << csv::format_sig(r.pred_var) << ","
        << csv::format_sig(r.log_score) << "," << csv::format_sig(r.actual)
        << "," << (r.diverged ? 1 : 0) << "\n";
  }
}

std::vector<ForecastRecord> load_forecast_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open record file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty record file");
  const auto header = csv::split_line(line);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (csv::trim(header[i]) == name) return static_cast<int>(i);
    throw ParseError("record file misses column '" + name + "'");
  };
  const int c_model = col("model"), c_origin = col("origin"),
            c_h = col("horizon"), c_var = col("variable"),
            c_point = col("point"), c_actual = col("actual");
  int c_date = -1, c_pvar = -1, c_score = -1, c_div = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = csv::trim(header[i]);
    if (name == "origin_date") c_date = static_cast<int>(i);
    if (name == "pred_var") c_pvar = static_cast<int>(i);
    if (name == "log_score") c_score = static_cast<int>(i);
    if (name == "diverged") c_div = static_cast<int>(i);
  }

  std::vector<ForecastRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split_line(line);
    if (cells.size() != header.size())
      throw ParseError("record row " + std::to_string(line_no) +
                       " has the wrong cell count");
    const std::string where = "record row " + std::to_string(line_no);
    ForecastRecord r;
    r.model = csv::trim(cells[c_model]);
    r.origin = csv::parse_int(cells[c_origin], where);
    if (c_date >= 0) r.origin_date = csv::trim(cells[c_date]);
    r.horizon = csv::parse_int(cells[c_h], where);
    r.variable = csv::trim(cells[c_var]);
    r.diverged = c_div >= 0 && csv::trim(cells[c_div]) == "1";
    if (r.diverged) {
      r.point = r.pred_var = r.log_score = kNaN;
      r.actual = csv::parse_number(cells[c_actual], where);
    } else {
      r.point = csv::parse_number(cells[c_point], where);
      r.actual = csv::parse_number(cells[c_actual], where);
      r.pred_var = c_pvar >= 0 ? csv::parse_number(cells[c_pvar], where) : kNaN;
      const std::string score =
          c_score >= 0 ? csv::trim(cells[c_score]) : std::string();
      r.log_score = (score.empty() || score == "nan" || score == "n/a")
                        ? kNaN
                        : csv::parse_number(score, where);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::unique_ptr<ModelRunner> baseline_rw(bool enable_density) {
  return std::make_unique<RwRunner>(enable_density);
}

std::unique_ptr<ModelRunner> baseline_var_ols(int p, bool include_intercept,
                                              const std::string& tag) {
  if (p < 1) throw ValidationError("VAR order must be >= 1");
  return std::make_unique<VarOlsRunner>(p, include_intercept, tag);
}

std::unique_ptr<ModelRunner> mai_runner(const MaiRunnerOptions& options) {
  return std::make_unique<MaiRunner>(options);
}

}  // namespace tvpmai
