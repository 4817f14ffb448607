#include "kwslab/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>

namespace kws {

std::vector<Detection> detect(std::span<const double> scores, std::span<const std::int64_t> times_ms,
                              double threshold, std::int64_t debounce_ms, const std::string& id) {
  if (scores.size() != times_ms.size()) throw DimensionError("detect: scores and times differ in length");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractViolation("detect: threshold must be in (0,1)");
  std::vector<Detection> out;
  std::optional<Detection> open;
  std::optional<std::int64_t> last_trigger;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    const std::int64_t t = times_ms[i];
    if (open) {
      if (s >= threshold && t - open->trigger_time_ms <= debounce_ms) {
        if (s > open->peak_score) {
          open->peak_score = s;
          open->peak_time_ms = t;
        }
        continue;
      }
      out.push_back(*open);
      open.reset();
    }
    if (s >= threshold && (!last_trigger || t - *last_trigger >= debounce_ms)) {
      open = Detection{id, t, t, s};
      last_trigger = t;
    }
  }
  if (open) out.push_back(*open);
  return out;
}

namespace {

std::vector<double> keyword_scores(const PosteriorTrack<float>& track) {
  std::vector<double> s(std::size_t(track.rows()));
  for (Index i = 0; i < track.rows(); ++i) s[std::size_t(i)] = double(track.probs(i, 1));
  return s;
}

}  // namespace

StreamResult stream_detect(const ModelParams<float>& params, const FeatureMatrix& features, double threshold,
                           Index stride_frames, std::int64_t debounce_ms, const std::string& id) {
  StreamResult r;
  if (features.frames.rows() < params.arch.input_frames) {
    r.skipped = true;
    return r;
  }
  Rng unused(0);
  const auto track = posterior_track(params, features, stride_frames, Mode::eval, unused);
  const auto scores = keyword_scores(track);
  r.detections = detect(scores, track.frame_times_ms, threshold, debounce_ms, id);
  return r;
}

DetCurve compute_det(std::span<const double> pos_scores, std::span<const double> neg_scores) {
  if (pos_scores.empty() || neg_scores.empty())
    throw ContractViolation("compute_det needs at least one positive and one negative score");
  std::vector<double> pos(pos_scores.begin(), pos_scores.end());
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> thresholds;
  thresholds.reserve(pos.size() + neg.size());
  std::merge(pos.begin(), pos.end(), neg.begin(), neg.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  DetCurve curve;
  curve.n_pos = std::int64_t(pos.size());
  curve.n_neg = std::int64_t(neg.size());
  curve.points.reserve(thresholds.size());
  for (double th : thresholds) {
    const auto below_pos = std::lower_bound(pos.begin(), pos.end(), th) - pos.begin();
    const auto below_neg = std::lower_bound(neg.begin(), neg.end(), th) - neg.begin();
    curve.points.push_back({th, std::int64_t(neg.size()) - below_neg, below_pos});
  }
  return curve;
}

OperatingPoint operating_point(const DetCurve& curve, double target_frr) {
  if (!(target_frr > 0.0 && target_frr < 1.0)) throw ContractViolation("target FRR must be in (0,1)");
  if (curve.points.empty() || curve.n_pos <= 0) throw ContractViolation("operating_point on an empty curve");
  std::optional<DetPoint> best;
  double min_frr = 1.0;
  for (const auto& p : curve.points) {
    const double frr = double(p.false_rejects) / double(curve.n_pos);
    min_frr = std::min(min_frr, frr);
    if (frr <= target_frr && (!best || p.threshold > best->threshold)) best = p;
  }
  if (!best) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "no threshold reaches FRR <= %g; minimum achievable FRR is %g", target_frr, min_frr);
    throw InfeasibleError(buf, min_frr);
  }
  OperatingPoint op;
  op.threshold = best->threshold;
  op.fa_count = best->false_accepts;
  op.fr_count = best->false_rejects;
  op.achieved_frr = double(best->false_rejects) / double(curve.n_pos);
  op.fa_rate = curve.n_neg ? double(best->false_accepts) / double(curve.n_neg) : 0.0;
  return op;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractViolation("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * double(values.size() - 1);
  const auto lo = std::size_t(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (values[hi] - values[lo]) * (pos - double(lo));
}

LatencyStats latency_stats(const std::vector<Detection>& detections, const std::vector<Example>& examples) {
  std::map<std::string, const Example*> by_id;
  for (const auto& ex : examples) by_id[ex.id] = &ex;
  std::map<std::string, const Detection*> first;
  for (const auto& d : detections) {
    auto it = by_id.find(d.utterance_id);
    if (it == by_id.end()) throw ContractViolation("detection on unknown utterance " + d.utterance_id);
    if (it->second->label != Label::keyword) continue;
    if (it->second->endpoint_frame < 0)
      throw ContractViolation("detection on " + d.utterance_id + " which has no keyword endpoint");
    auto [slot, inserted] = first.emplace(d.utterance_id, &d);
    if (!inserted && d.trigger_time_ms < slot->second->trigger_time_ms) slot->second = &d;
  }
  LatencyStats stats;
  std::vector<double> lat;
  for (const auto& ex : examples) {
    auto it = first.find(ex.id);
    if (it == first.end()) continue;
    const Detection& d = *it->second;
    LatencyRecord r;
    r.utterance_id = ex.id;
    r.endpoint_ms = std::int64_t(ex.endpoint_frame) * ex.features.frame_shift_ms;
    r.trigger_ms = d.trigger_time_ms;
    r.peak_ms = d.peak_time_ms;
    r.peak_score = d.peak_score;
    r.latency_ms = d.trigger_time_ms - r.endpoint_ms;
    stats.records.push_back(r);
    lat.push_back(double(r.latency_ms));
  }
  if (!lat.empty()) {
    double sum = 0.0;
    for (double v : lat) sum += v;
    stats.mean = sum / double(lat.size());
    stats.median = quantile(lat, 0.5);
    stats.p95 = quantile(lat, 0.95);
  }
  return stats;
}

EvalReport evaluate(const ModelParams<float>& params, const std::vector<Example>& examples, const EvalConfig& cfg) {
  EvalReport report;
  report.target_frr = cfg.target_frr;
  Rng unused(0);
  std::vector<PosteriorTrack<float>> tracks(examples.size());
  std::vector<bool> usable(examples.size(), false);
  std::vector<double> pos, neg;
  double offset_sum = 0.0;
  int offset_n = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    if (ex.frames() < params.arch.input_frames) {
      ++report.skipped;
      continue;
    }
    tracks[i] = posterior_track(params, ex.features, cfg.stride, Mode::eval, unused);
    usable[i] = true;
    Index peak_row;
    const double peak = double(tracks[i].probs.col(1).maxCoeff(&peak_row));
    if (ex.label == Label::keyword) {
      pos.push_back(peak);
      offset_sum += double(tracks[i].frame_times_ms[std::size_t(peak_row)] -
                           std::int64_t(ex.endpoint_frame) * ex.features.frame_shift_ms);
      ++offset_n;
    } else {
      neg.push_back(peak);
    }
  }
  report.mean_peak_offset_ms = offset_n ? offset_sum / offset_n : 0.0;
  report.curve = compute_det(pos, neg);
  report.op = operating_point(report.curve, cfg.target_frr);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!usable[i]) continue;
    const auto scores = keyword_scores(tracks[i]);
    auto d = detect(scores, tracks[i].frame_times_ms, report.op.threshold, cfg.debounce_ms, examples[i].id);
    report.detections.insert(report.detections.end(), d.begin(), d.end());
  }
  report.latency = latency_stats(report.detections, examples);
  return report;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  const auto& c = report.curve;
  auto det = open_csv(dir / "det_curve.csv");
  det << "threshold,false_accepts,false_rejects,fa_rate,fr_rate\n";
  for (const auto& p : c.points)
    det << num(p.threshold) << ',' << p.false_accepts << ',' << p.false_rejects << ','
        << num(double(p.false_accepts) / double(c.n_neg)) << ',' << num(double(p.false_rejects) / double(c.n_pos))
        << '\n';

  auto lat = open_csv(dir / "latency.csv");
  lat << "utterance_id,endpoint_ms,trigger_ms,peak_ms,peak_score,latency_ms\n";
  for (const auto& r : report.latency.records)
    lat << r.utterance_id << ',' << r.endpoint_ms << ',' << r.trigger_ms << ',' << r.peak_ms << ','
        << num(r.peak_score) << ',' << r.latency_ms << '\n';

  const auto& op = report.op;
  const auto& ls = report.latency;
  auto ops = open_csv(dir / "operating_points.csv");
  ops << "target_frr,threshold,fa_count,fa_rate,fr_count,achieved_frr,n_pos,n_neg,detected,mean_latency_ms,"
         "median_latency_ms,p95_latency_ms,mean_peak_offset_ms\n";
  ops << num(report.target_frr) << ',' << num(op.threshold) << ',' << op.fa_count << ',' << num(op.fa_rate) << ','
      << op.fr_count << ',' << num(op.achieved_frr) << ',' << c.n_pos << ',' << c.n_neg << ',' << ls.records.size()
      << ',' << num(ls.mean) << ',' << num(ls.median) << ',' << num(ls.p95) << ',' << num(report.mean_peak_offset_ms)
      << '\n';
  if (!det || !lat || !ops) throw DataError("failed writing report in " + dir.string());
}

}  // namespace kws
