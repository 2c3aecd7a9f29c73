#ifndef TVPMAI_EVALUATION_HPP
#define TVPMAI_EVALUATION_HPP

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "tvpmai/panel.hpp"
#include "tvpmai/pool.hpp"

namespace tvpmai {

// One out-of-sample forecast: model `model` stood at `origin` (row index of
// the last estimation observation) and predicted `variable` at origin +
// horizon. Values are on the transformed (stationary) scale of the panel.
struct ForecastRecord {
  int origin = 0;
  std::string origin_date;
  int horizon = 1;
  std::string variable;
  double point = 0.0;
  double pred_var = 0.0;
  double log_score = 0.0;  // NaN when the model provides no density
  double actual = 0.0;
  std::string model;
  bool diverged = false;
};

// A model the harness can re-estimate at every origin. forecast() receives
// the estimation window (already standardized when the harness standardizes
// per window) and returns one predictive distribution per horizon 1..h_max.
// Runners may keep warm-start state between calls; reset() clears it.
class ModelRunner {
 public:
  virtual ~ModelRunner() = default;
  virtual std::string tag() const = 0;
  virtual void reset() {}
  virtual std::vector<GaussianMixture> forecast(const Eigen::MatrixXd& window,
                                                int h_max) = 0;
  virtual bool provides_density() const { return true; }
};

struct HarnessOptions {
  int h_max = 8;
  int initial_window = 60;  // observations in the first estimation sample
  // Standardize each window on its own sample and map the forecasts back;
  // leaves no look-ahead into the forecast window.
  bool window_standardize = true;
  std::vector<std::string> variables;  // series ids to record; empty = all
};

// Expanding-window evaluation of one model. A runner failure at an origin
// yields diverged records for that origin; the harness continues.
std::vector<ForecastRecord> expanding_window_forecast(
    const TimeSeriesPanel& panel, ModelRunner& runner,
    const HarnessOptions& options);

// Point and density accuracy over a group of records (no divergences):
//   rmsfe = sqrt(mean of squared errors), mafe = mean absolute error,
//   alpl = mean log predictive score.
double rmsfe(const std::vector<ForecastRecord>& records);
double mafe(const std::vector<ForecastRecord>& records);
double alpl(const std::vector<ForecastRecord>& records);

struct MetricCell {
  double rmsfe = 0.0;
  double mafe = 0.0;
  double alpl = 0.0;  // NaN when the model provides no density
  int count = 0;
  bool diverged = false;
};

struct MetricTable {
  std::vector<std::string> models;
  std::vector<std::string> variables;
  std::vector<int> horizons;
  std::map<std::tuple<std::string, std::string, int>, MetricCell> cells;
  std::string benchmark;  // set on relative tables

  const MetricCell* cell(const std::string& model, const std::string& variable,
                         int horizon) const;
};

// Groups records by (model, variable, horizon). Any diverged record marks
// its whole cell divergent.
MetricTable compute_metrics(const std::vector<ForecastRecord>& records);

// Ratios against the benchmark model: rmsfe/mafe as model-over-benchmark
// (lower is better), alpl likewise as a ratio (higher is better). The
// benchmark's own cells are exactly 1; cells where the benchmark diverged
// are undefined and stay marked.
MetricTable relative_table(const MetricTable& metrics,
                           const std::string& benchmark);

// Tables 3-5 style fixed-width text: one block per variable, one panel per
// metric, "---" for divergences, "n/a" for missing densities.
std::string render_metric_tables(const MetricTable& rel);

// Forecast-record CSV (also the format for externally supplied models).
void write_forecast_records(const std::vector<ForecastRecord>& records,
                            const std::string& path);
std::vector<ForecastRecord> load_forecast_records(const std::string& path);

// Built-in baselines.
std::unique_ptr<ModelRunner> baseline_rw(bool enable_density = false);
std::unique_ptr<ModelRunner> baseline_var_ols(int p, bool include_intercept = true,
                                              const std::string& tag = "");

struct MaiRunnerOptions {
  std::vector<ModelSpec> specs;  // grid; a single spec bypasses pooling
  double alpha = 0.99;
  PoolMode mode = PoolMode::kDma;
  SwitchingOptions switching;
  bool warm_start = true;  // reuse each spec's omega across origins
  int workers = 1;
  std::string tag;
};

// DMA/DMS (or single-spec) index-model runner: re-estimates every spec on
// each window, runs the weight recursion over the window, and combines the
// per-model iterated forecasts with the origin weights.
std::unique_ptr<ModelRunner> mai_runner(const MaiRunnerOptions& options);

}  // namespace tvpmai

#endif  // TVPMAI_EVALUATION_HPP
