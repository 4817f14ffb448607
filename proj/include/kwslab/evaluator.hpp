#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kwslab/model.hpp"
#include "kwslab/synth.hpp"

namespace kws {

struct Detection {
  std::string utterance_id;
  std::int64_t trigger_time_ms = 0;  // first row at or above threshold
  std::int64_t peak_time_ms = 0;
  double peak_score = 0.0;

  bool operator==(const Detection&) const = default;
};

/// Threshold scan over one keyword-posterior sequence.
///
/// A detection opens at the first row with score >= threshold and follows the
/// running peak until the score drops below threshold or the row is more than
/// `debounce_ms` after the trigger. A new detection may open only once
/// `debounce_ms` has elapsed since the previous trigger.
std::vector<Detection> detect(std::span<const double> scores, std::span<const std::int64_t> times_ms,
                              double threshold, std::int64_t debounce_ms = 1000, const std::string& id = "");

struct StreamResult {
  std::vector<Detection> detections;
  bool skipped = false;  // utterance shorter than one window
};

/// Runs the detector over an utterance in eval mode and scans the keyword posterior.
StreamResult stream_detect(const ModelParams<float>& params, const FeatureMatrix& features, double threshold,
                           Index stride_frames = 10, std::int64_t debounce_ms = 1000, const std::string& id = "");

struct DetPoint {
  double threshold = 0.0;
  std::int64_t false_accepts = 0;  // negatives with score >= threshold
  std::int64_t false_rejects = 0;  // positives with score < threshold
};

struct DetCurve {
  std::vector<DetPoint> points;  // ascending threshold
  std::int64_t n_pos = 0;
  std::int64_t n_neg = 0;
};

/// DET curve with one point per distinct score.
DetCurve compute_det(std::span<const double> pos_scores, std::span<const double> neg_scores);

struct OperatingPoint {
  double threshold = 0.0;
  std::int64_t fa_count = 0;
  std::int64_t fr_count = 0;
  double achieved_frr = 0.0;
  double fa_rate = 0.0;
};

/// Largest threshold with FR/n_pos <= target_frr. Throws InfeasibleError
/// (carrying the minimum achievable FRR) when no point qualifies.
OperatingPoint operating_point(const DetCurve& curve, double target_frr);

struct LatencyRecord {
  std::string utterance_id;
  std::int64_t endpoint_ms = 0;
  std::int64_t trigger_ms = 0;
  std::int64_t peak_ms = 0;
  double peak_score = 0.0;
  std::int64_t latency_ms = 0;  // trigger - endpoint; negative means early
};

struct LatencyStats {
  std::vector<LatencyRecord> records;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

/// Latency of the first detection on each positive example, matched by id.
LatencyStats latency_stats(const std::vector<Detection>& detections, const std::vector<Example>& examples);

/// Linear-interpolated quantile (q in [0,1]) of a non-empty sample.
double quantile(std::vector<double> values, double q);

/// Mean latency reduction of `model` relative to `baseline`, each measured at
/// its own operating threshold; positive means `model` is earlier.
inline double latency_reduction_ms(const LatencyStats& model, const LatencyStats& baseline) {
  return baseline.mean - model.mean;
}

struct EvalConfig {
  double target_frr = 0.05;
  Index stride = 10;
  std::int64_t debounce_ms = 1000;
};

struct EvalReport {
  DetCurve curve;
  OperatingPoint op;
  double target_frr = 0.05;
  std::vector<Detection> detections;  // all utterances, at the operating threshold
  LatencyStats latency;
  double mean_peak_offset_ms = 0.0;   // track argmax time minus endpoint, over positives
  int skipped = 0;
};

EvalReport evaluate(const ModelParams<float>& params, const std::vector<Example>& examples, const EvalConfig& cfg);

/// det_curve.csv, latency.csv, operating_points.csv.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace kws
