#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phyulstm/datasets.hpp"
#include "phyulstm/dynamics.hpp"
#include "phyulstm/training.hpp"

namespace phyulstm {

/// Sample correlation coefficient. Throws std::invalid_argument on length
/// mismatch, fewer than two samples, non-finite values, or when both series
/// are constant. A single constant series yields 0.
double pearson_r(std::span<const double> u, std::span<const double> v);

/// Channels correlated by the evaluator, in report order.
inline constexpr const char* kEvalChannels[] = {"x", "v", "g"};

struct RecordEval {
  std::string id;
  /// Absent when the record lacks that truth channel or r is undefined.
  std::map<std::string, double> r;
  /// Non-empty when prediction failed or a correlation was rejected.
  std::vector<std::string> flags;

  bool flagged() const { return !flags.empty(); }
};

struct ChannelSummary {
  std::size_t count = 0;
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;
  /// Share of the counted records with r strictly above the threshold.
  double fraction_above = 0.0;
};

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  std::string regime;
  std::string dataset;
  std::string split;
  double threshold = 0.9;
  std::vector<RecordEval> records;
  std::map<std::string, ChannelSummary> summary;

  std::vector<std::string> flagged_ids() const;
  /// Recomputes `summary` from `records`.
  void summarize();
  std::string to_json() const;
};

using Predictor = std::function<StateTrajectory(const GroundMotionRecord&)>;

/// Runs `predictor` on every record; failures are flagged and skipped.
EvalReport evaluate_predictions(std::span<const GroundMotionRecord* const> records, const Predictor& predictor,
                                double threshold = 0.9);

/// evaluate_predictions with the checkpoint as predictor.
EvalReport evaluate_model(const Checkpoint& model, std::span<const GroundMotionRecord* const> records,
                          double threshold = 0.9);

struct PlotFiles {
  std::filesystem::path history;
  std::filesystem::path hysteresis;
};

/// Writes <stem>_history.csv (t, ag, x/v/a/g true and predicted) and
/// <stem>_hysteresis.csv (x, v, g for truth and prediction) into `dir`.
PlotFiles export_plot_data(const StateTrajectory& pred, const StateTrajectory& truth,
                           const std::filesystem::path& dir, const std::string& stem);

/// Ground-truth trajectory view of a labelled record (missing channels empty).
StateTrajectory trajectory_of(const GroundMotionRecord& record);

}  // namespace phyulstm
