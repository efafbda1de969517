#pragma once

// Windowed action distributions and the distance / overlap metrics between a generated
// trajectory and the real one.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfsim/judge.hpp"
#include "mfsim/kernels.hpp"

namespace mfsim {

inline constexpr std::size_t kDefaultWindow = 16;

struct DistributionSeries {
  std::size_t window = kDefaultWindow;
  struct Track {
    std::vector<std::vector<double>> vectors;  // per index, over the dimension's labels
    std::vector<bool> empty;                   // window held only `unknown` labels
  };
  std::vector<Track> dims;  // schema order

  std::size_t length() const { return dims.empty() ? 0 : dims.front().vectors.size(); }
};

/// Histogram of the w most recent labels at every index (fewer at the start), normalized.
/// `unknown` labels are left out of counts and normalizer.
DistributionSeries window_distribution(std::span<const LabelVector> labels, const DimensionSchema& schema,
                                       std::size_t w, Exec exec = Exec::serial);

/// KL(p || q) after adding eps to every entry and renormalizing.
double kl_divergence(std::span<const double> p, std::span<const double> q, double eps = 1e-6);
/// Sum of absolute CDF differences with unit spacing between adjacent labels.
double wasserstein1(std::span<const double> p, std::span<const double> q);
/// Accumulated DTW cost over (len a + len b).
double dtw_distance(std::span<const double> a, std::span<const double> b);

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
};

/// Per-step label multisets (label indices; negatives ignored) for one dimension.
F1Scores f1_scores(const std::vector<std::vector<int>>& real, const std::vector<std::vector<int>>& generated,
                   std::size_t labels);

struct MetricValues {
  double kl = 0.0;
  double wasserstein = 0.0;
  double dtw = 0.0;
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

struct DimensionMetrics {
  std::string name;
  // Unset when the dimension had no comparable (non-empty) windows.
  std::optional<MetricValues> values;
};

struct RadarValues {
  // (max - v) / (max - min) over the comparison set; 1 when every report ties.
  double kl = 1.0;
  double wasserstein = 1.0;
  double dtw = 1.0;
  std::optional<double> nll;
  // Already larger-is-better; copied through.
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

struct MetricReport {
  std::string event_id;
  std::string label;  // free-form run name used in comparisons
  std::size_t window = kDefaultWindow;
  std::size_t first_step = 0;
  std::size_t steps = 0;
  std::vector<DimensionMetrics> dimensions;
  MetricValues aggregate;  // mean over dimensions with values
  std::optional<double> nll;
  std::size_t judge_failures = 0;
  std::optional<RadarValues> radar;

  nlohmann::json to_json() const;
  /// One row per dimension x metric, then the aggregate, then nll and radar rows.
  std::string to_csv() const;
};

/// Fills `radar` on every report of the comparison set.
void inverse_normalize(std::vector<MetricReport>& reports);

struct EvalOptions {
  std::size_t window = kDefaultWindow;
  // Default: the step after the generated run's warm-up.
  std::optional<std::size_t> first_step;
  Exec exec = Exec::serial;
};

struct Evaluation {
  MetricReport report;
  std::vector<std::size_t> steps;  // evaluated trajectory steps
  DistributionSeries real;         // sampled at the end of each evaluated step
  DistributionSeries generated;
};

/// `policy` is the generating backend; NLL is reported only when it exposes log-probabilities.
Evaluation evaluate(const Trajectory& real, const Trajectory& generated, const Judge& judge,
                    const DimensionSchema& schema, const GenerativeBackend* policy = nullptr,
                    const EvalOptions& options = {});

MetricReport evaluate_run(const Trajectory& real, const Trajectory& generated, const Judge& judge,
                          const DimensionSchema& schema, const GenerativeBackend* policy = nullptr,
                          const EvalOptions& options = {});

/// step,dimension,label,real,generated rows of per-label proportions.
std::string series_csv(const Evaluation& evaluation, const DimensionSchema& schema);

}  // namespace mfsim
