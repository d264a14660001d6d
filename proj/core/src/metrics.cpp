#include "ibmvs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "ibmvs/error.hpp"
#include "ibmvs/parallel.hpp"

namespace ibmvs {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

SoftMask gt_mask(const ScalarMap& d_gt, const ScalarMap& H) { return ground_truth_oracle(d_gt, H); }

double bce(double b, double b_gt) {
  const double c = std::clamp(b, kBceClamp, 1.0 - kBceClamp);
  return -(b_gt * std::log(c) + (1.0 - b_gt) * std::log(1.0 - c));
}

LossValue masked_bce_loss(const ScalarMap& B, const ScalarMap& B_gt, const MaskMap& valid) {
  require_same_shape(B, B_gt, "masked_bce_loss");
  require_same_shape(B, valid, "masked_bce_loss");
  LossValue out;
  double sum = 0.0;
  for (std::size_t i = 0; i < B.size(); ++i) {
    if (!valid[i]) continue;
    sum += bce(B[i], B_gt[i]);
    ++out.valid;
  }
  if (out.valid == 0) {
    out.no_valid_pixels = true;
    return out;
  }
  out.value = sum / static_cast<double>(out.valid);
  return out;
}

void LossWeights::validate() const {
  for (double l : lambda)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("loss weights must be non-negative");
}

double multiscale_loss(const std::array<double, 3>& level_losses, const LossWeights& w) {
  w.validate();
  double total = 0.0;
  for (int k = 0; k < 3; ++k) total += w.lambda[k] * level_losses[k];
  return total;
}

DepthErrorStats depth_error_stats(const ScalarMap& d, const ScalarMap& d_gt, const MaskMap& valid,
                                  const std::vector<double>& thresholds) {
  require_same_shape(d, d_gt, "depth_error_stats");
  require_same_shape(d, valid, "depth_error_stats");
  std::vector<double> err, inv;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!valid[i] || !positive_finite(d[i]) || !positive_finite(d_gt[i])) continue;
    err.push_back(std::abs(d[i] - d_gt[i]));
    inv.push_back(std::abs(1.0 / d[i] - 1.0 / d_gt[i]));
  }
  DepthErrorStats s;
  s.count = static_cast<long long>(err.size());
  for (double t : thresholds) {
    const auto n = std::count_if(err.begin(), err.end(), [t](double e) { return e <= t; });
    s.within.emplace_back(t, err.empty() ? 0.0 : static_cast<double>(n) / err.size());
  }
  if (err.empty()) return s;
  s.mean_abs = std::accumulate(err.begin(), err.end(), 0.0) / err.size();
  s.mean_abs_inverse = std::accumulate(inv.begin(), inv.end(), 0.0) / inv.size();
  s.median_abs = median(err);
  s.median_abs_inverse = median(inv);
  return s;
}

double masked_median_error(const ScalarMap& d, const ScalarMap& d_gt, const MaskMap& mask) {
  return depth_error_stats(d, d_gt, mask).median_abs;
}

double squared_distance(const Eigen::Vector3f& a, const Eigen::Vector3f& b) {
  const double dx = double(a.x()) - b.x(), dy = double(a.y()) - b.y(), dz = double(a.z()) - b.z();
  return dx * dx + dy * dy + dz * dz;
}

KdTree::KdTree(std::vector<Eigen::Vector3f> points) : points_(std::move(points)) {
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) { return points_[a](axis) < points_[b](axis); });
  const int node = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{idx[mid], axis, -1, -1});
  const int left = build(idx, lo, mid, depth + 1);
  const int right = build(idx, mid + 1, hi, depth + 1);
  nodes_[node].left = left;
  nodes_[node].right = right;
  return node;
}

void KdTree::search(int node, const Eigen::Vector3f& q, double& best) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const Eigen::Vector3f& p = points_[n.point];
  best = std::min(best, squared_distance(p, q));
  const double diff = double(q(n.axis)) - p(n.axis);
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff <= best) search(far, q, best);
}

double KdTree::nearest_squared(const Eigen::Vector3f& q) const {
  if (root_ < 0) throw InvariantError("KdTree: nearest query on an empty tree");
  double best = std::numeric_limits<double>::infinity();
  search(root_, q, best);
  return best;
}

std::vector<double> nearest_distances(const std::vector<Eigen::Vector3f>& queries,
                                      const std::vector<Eigen::Vector3f>& target, int workers) {
  std::vector<double> out(queries.size(), std::numeric_limits<double>::infinity());
  if (target.empty()) return out;
  const KdTree tree(target);
  parallel_for(0, static_cast<int>(queries.size()), workers,
               [&](int i) { out[i] = std::sqrt(tree.nearest_squared(queries[i])); });
  return out;
}

double harmonic_mean(double a, double b) { return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }

CloudMetrics cloud_accuracy_completeness(const PointCloud& pred, const PointCloud& gt, double tau,
                                         CloudUnits units, int workers) {
  if (!(tau > 0.0)) throw ConfigError("cloud metrics: tau must be > 0");
  if (gt.empty()) throw ConfigError("cloud metrics: ground-truth cloud is empty");
  CloudMetrics m;
  m.units = units;
  m.tau = tau;
  m.pred_points = pred.size();
  m.gt_points = gt.size();
  const auto acc_d = nearest_distances(pred.points, gt.points, workers);
  const auto cmp_d = nearest_distances(gt.points, pred.points, workers);
  const auto pct = [tau](const std::vector<double>& d) {
    const auto n = std::count_if(d.begin(), d.end(), [tau](double v) { return v <= tau; });
    return 100.0 * static_cast<double>(n) / static_cast<double>(d.size());
  };
  const auto mean = [](const std::vector<double>& d) {
    return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  };
  if (pred.empty()) {
    m.accuracy_defined = false;
    m.accuracy = std::numeric_limits<double>::quiet_NaN();
    m.completeness = units == CloudUnits::kPercentage ? 0.0 : std::numeric_limits<double>::infinity();
    m.aggregate = units == CloudUnits::kPercentage ? 0.0 : std::numeric_limits<double>::infinity();
    return m;
  }
  if (units == CloudUnits::kPercentage) {
    m.accuracy = pct(acc_d);
    m.completeness = pct(cmp_d);
    m.aggregate = harmonic_mean(m.accuracy, m.completeness);
  } else {
    m.accuracy = mean(acc_d);
    m.completeness = mean(cmp_d);
    m.aggregate = 0.5 * (m.accuracy + m.completeness);
  }
  return m;
}

void write_report(std::ostream& out, const CloudMetrics& m) {
  out << "units=" << (m.units == CloudUnits::kPercentage ? "percentage" : "distance") << '\n'
      << fmt::format("tau={:.9g}\n", m.tau)
      << "accuracy_defined=" << (m.accuracy_defined ? 1 : 0) << '\n'
      << fmt::format("accuracy={:.9g}\ncompleteness={:.9g}\n", m.accuracy, m.completeness)
      << (m.units == CloudUnits::kPercentage ? "fscore=" : "mean=")
      << fmt::format("{:.9g}\n", m.aggregate) << "pred_points=" << m.pred_points << '\n'
      << "gt_points=" << m.gt_points << '\n';
}

std::string csv_header() { return "label,units,tau,accuracy,completeness,aggregate,pred_points,gt_points"; }

std::string csv_row(const std::string& label, const CloudMetrics& m) {
  return fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{},{}", label,
                     m.units == CloudUnits::kPercentage ? "percentage" : "distance", m.tau,
                     m.accuracy, m.completeness, m.aggregate, m.pred_points, m.gt_points);
}

}  // namespace ibmvs
