#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"
#include "ctpoir/mask_ops.hpp"

namespace ctpoir {

// 2|A n B| / (|A| + |B|). Two empty masks agree perfectly (1.0).
inline double dice(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_same_dims(a, b, "masks");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
    both += a[i] & b[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * double(both) / double(na + nb);
}

inline double mean_of(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyList, "cannot average an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / double(values.size());
}

// Unweighted mean of per-case Dice.
inline double mean_dice(std::span<const std::pair<const BinaryMask3D*, const BinaryMask3D*>> cases) {
  if (cases.empty()) throw Error(ErrorKind::EmptyList, "mean_dice needs at least one case");
  std::vector<double> per_case;
  per_case.reserve(cases.size());
  for (const auto& [pred, gt] : cases) per_case.push_back(dice(*pred, *gt));
  return mean_of(per_case);
}

// Infected volume over lung volume, as a fraction.
inline double poir(const BinaryMask3D& infected, const BinaryMask3D& lung) {
  const double lung_mm3 = volume_mm3(lung);
  if (lung_mm3 <= 0.0) throw Error(ErrorKind::EmptyLung, "lung mask is empty");
  return volume_mm3(infected) / lung_mm3;
}

struct PairedSeries {
  std::vector<double> x;
  std::vector<double> y;

  std::size_t n() const { return x.size(); }
  void add(double xi, double yi) {
    x.push_back(xi);
    y.push_back(yi);
  }
};

// Pearson's r, computed from centred sums.
inline double pearson(const PairedSeries& s) {
  if (s.x.size() != s.y.size()) throw Error(ErrorKind::InvalidArgument, "series lengths differ");
  const std::size_t n = s.n();
  if (n < 2) throw Error(ErrorKind::ZeroVariance, "Pearson needs at least two pairs");
  const double mx = std::accumulate(s.x.begin(), s.x.end(), 0.0) / double(n);
  const double my = std::accumulate(s.y.begin(), s.y.end(), 0.0) / double(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = s.x[i] - mx, dy = s.y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ZeroVariance, "a series is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Mean absolute percent error of x (predicted) against y (ground truth),
// in percent.
inline double mape(const PairedSeries& s) {
  if (s.x.size() != s.y.size()) throw Error(ErrorKind::InvalidArgument, "series lengths differ");
  if (s.n() == 0) throw Error(ErrorKind::EmptyList, "mAPE needs at least one pair");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    if (s.y[i] == 0.0) throw Error(ErrorKind::ZeroGroundTruth, "ground truth is zero at index " + std::to_string(i));
    sum += std::abs((s.x[i] - s.y[i]) / s.y[i]);
  }
  return sum / double(s.n()) * 100.0;
}

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), descending threshold
  double auc = 0.0;
};

// ROC over every distinct score, AUC by the trapezoid rule. Tied scores of
// opposite classes form a diagonal step, which credits them one half.
inline RocCurve roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::InvalidArgument, "scores and labels differ in length");
  const auto n_pos = std::size_t(std::count(labels.begin(), labels.end(), true));
  const auto n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::SingleClass, "ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  double area2 = 0.0;  // twice the area in units of (1/n_neg) x (1/n_pos)
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] ? tp : fp)++;
    area2 += double(fp - fp0) * double(tp + tp0);
    curve.points.push_back({double(fp) / double(n_neg), double(tp) / double(n_pos), t});
  }
  curve.auc = area2 / (2.0 * double(n_pos) * double(n_neg));
  return curve;
}

}  // namespace ctpoir
