#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "io.hpp"
#include "types.hpp"

namespace plumekit {

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  long positives = 0;
  long negatives = 0;
};

struct Confusion {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
};

// A pixel counts as predicted-positive when its score is >= the threshold.
// Boundary-labeled pixels are excluded from every count.
inline Confusion confusion_at(const DetectionMap& map, const GroundTruthMask& mask,
                              double threshold) {
  const std::string context = "confusion_at";
  validate(map, context);
  validate(mask, context);
  require_same_shape(map, mask, context);
  Confusion c;
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    auto label = static_cast<Label>(mask.labels[i]);
    if (label == Label::boundary) continue;
    bool predicted = map.scores[i] >= threshold;
    bool actual = label == Label::plume;
    if (predicted && actual)
      ++c.tp;
    else if (predicted && !actual)
      ++c.fp;
    else if (!predicted && actual)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

inline double auc_of(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  return area;
}

// Sweeps thresholds over the descending unique scores, preceded by an
// exclusive bound of 1 + max score so the curve starts at (0, 0). Score ties
// move along the curve together; the final point is always (1, 1).
inline RocCurve compute_roc(const DetectionMap& map, const GroundTruthMask& mask) {
  const std::string context = "compute_roc";
  validate(map, context);
  validate(mask, context);
  require_same_shape(map, mask, context);

  std::vector<std::pair<double, bool>> scored;  // (score, is_plume)
  scored.reserve(map.scores.size());
  long pos = 0, neg = 0;
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    auto label = static_cast<Label>(mask.labels[i]);
    if (label == Label::boundary) continue;
    bool is_plume = label == Label::plume;
    scored.emplace_back(map.scores[i], is_plume);
    (is_plume ? pos : neg)++;
  }
  if (pos == 0) fail(ErrorCode::no_positives, context + ": mask has no plume pixels");
  if (neg == 0) fail(ErrorCode::no_negatives, context + ": mask has no background pixels");

  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.positives = pos;
  curve.negatives = neg;
  curve.points.push_back({1.0 + scored.front().first, 0.0, 0.0});
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < scored.size()) {
    double value = scored[i].first;
    while (i < scored.size() && scored[i].first == value) {
      (scored[i].second ? tp : fp)++;
      ++i;
    }
    curve.points.push_back({value, static_cast<double>(fp) / neg,
                            static_cast<double>(tp) / pos});
  }
  curve.auc = auc_of(curve.points);
  return curve;
}

// CSV layout: optional "# xscale=log" directive, one "threshold,fpr,tpr" row
// per point, and a trailing "# auc=" comment. Full double precision so the
// curve can be reloaded losslessly.
inline void roc_to_csv(const RocCurve& curve, const std::string& path,
                       bool log_x = false) {
  std::string bytes;
  if (log_x) bytes += "# xscale=log\n";
  char buf[160];
  for (const RocPoint& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    bytes += buf;
  }
  std::snprintf(buf, sizeof buf, "# auc=%.17g\n", curve.auc);
  bytes += buf;
  detail::write_all_bytes(path, bytes, "roc_to_csv");
}

}  // namespace plumekit
