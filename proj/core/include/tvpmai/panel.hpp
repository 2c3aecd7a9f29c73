#ifndef TVPMAI_PANEL_HPP
#define TVPMAI_PANEL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tvpmai {

// Calendar quarter. Panels are quarterly; dates must be strictly increasing
// with a constant step in quarters.
struct QuarterDate {
  int year = 1960;
  int quarter = 1;  // 1..4

  int serial() const { return year * 4 + (quarter - 1); }
  bool operator==(const QuarterDate&) const = default;
  std::string str() const;

  // Accepts "1960Q1", "1960:Q1", "1960:1", "1960-03" and "1960-03-31"
  // (months map to quarters).
  static QuarterDate parse(const std::string& text);
  static QuarterDate from_serial(int serial);
};

// A macro panel: T observations on N series, plus the per-series transform
// codes and the standardization statistics needed to map forecasts back to
// the transformed scale.
//
// `values` holds whatever stage of the pipeline the panel is at: raw levels
// after load_panel, stationary series after transform_panel, standardized
// series after standardize_panel. means/stds are filled by
// standardize_panel and are empty (size 0) before that.
struct TimeSeriesPanel {
  std::vector<QuarterDate> dates;        // length T
  std::vector<std::string> series_ids;   // length N
  Eigen::MatrixXd values;                // T x N
  std::vector<int> tcodes;               // length N, codes 1..7
  Eigen::VectorXd means;                 // length N once standardized
  Eigen::VectorXd stds;                  // length N once standardized
  std::vector<std::string> group_labels; // optional, length N when present

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  bool standardized() const { return stds.size() == cols() && cols() > 0; }

  int series_index(const std::string& id) const;  // -1 when absent
};

// Reads a raw CSV panel: header row of series ids with one date column, an
// optional second row of transform codes (first cell "tcode", "transform:"
// or empty), then one row per quarter. Missing tcode row means all 1s.
TimeSeriesPanel load_panel(const std::string& path,
                           const std::string& date_column = "date");

// Stationarity transform for one series. Codes:
//   1: x        2: dx        3: d2x       4: ln(x)
//   5: dln(x)   6: d2ln(x)   7: d(x_t/x_{t-1} - 1)
// Output lengths are T, T-1 or T-2 depending on the code. Codes 4-7 require
// strictly positive inputs.
Eigen::VectorXd apply_transform(const Eigen::VectorXd& x, int tcode);

// Rows consumed by differencing for a given code (0, 1 or 2).
int transform_loss(int tcode);

// Applies each column's tcode and trims all columns to the common date
// support (drops max-loss leading rows uniformly).
TimeSeriesPanel transform_panel(const TimeSeriesPanel& raw);

// Centers and scales every column to mean 0, std 1 (sample std, T-1
// denominator), recording the stats. Throws on zero-variance columns.
TimeSeriesPanel standardize_panel(const TimeSeriesPanel& panel);

// Inverse of standardize_panel on the stored stats.
TimeSeriesPanel destandardize_panel(const TimeSeriesPanel& panel);

// Convenience: load + transform + standardize.
TimeSeriesPanel prepare_panel(const std::string& path,
                              const std::string& date_column = "date");

// Normalized panel file: metadata lines `#tcode:`, `#mean:`, `#std:` and
// optionally `#group:`, then a plain CSV. Values are written at full
// precision; this is a machine-interchange format.
void write_normalized_panel(const TimeSeriesPanel& panel, const std::string& path);
TimeSeriesPanel read_normalized_panel(const std::string& path);

// Checks the panel invariants (aligned dates, equal spacing, finite values)
// and throws ValidationError on violation. Called by the pipeline stages.
void validate_panel(const TimeSeriesPanel& panel);

}  // namespace tvpmai

#endif  // TVPMAI_PANEL_HPP
