#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ibmvs/cloud.hpp"
#include "ibmvs/decision.hpp"
#include "ibmvs/grid.hpp"

namespace ibmvs {

/// Ground-truth decision mask; same implementation as the ground-truth oracle.
SoftMask gt_mask(const ScalarMap& d_gt, const ScalarMap& H);

inline constexpr double kBceClamp = 1e-7;

/// Binary cross entropy, natural log, with b clamped to [1e-7, 1 - 1e-7].
double bce(double b, double b_gt);

struct LossValue {
  double value = 0.0;
  long long valid = 0;
  bool no_valid_pixels = false;
};

/// Mean BCE over pixels where valid != 0.
LossValue masked_bce_loss(const ScalarMap& B, const ScalarMap& B_gt, const MaskMap& valid);

struct LossWeights {
  std::array<double, 3> lambda{0.25, 0.5, 1.0};
  void validate() const;
};

double multiscale_loss(const std::array<double, 3>& level_losses, const LossWeights& w = {});

struct DepthErrorStats {
  long long count = 0;
  double mean_abs = 0.0;
  double median_abs = 0.0;
  double mean_abs_inverse = 0.0;
  double median_abs_inverse = 0.0;
  /// (threshold, fraction of valid pixels with |d - d_gt| <= threshold)
  std::vector<std::pair<double, double>> within;
};

/// Statistics over pixels where valid != 0 and both depths are finite and
/// positive.
DepthErrorStats depth_error_stats(const ScalarMap& d, const ScalarMap& d_gt, const MaskMap& valid,
                                  const std::vector<double>& thresholds = {});

/// Median absolute depth error over pixels where mask != 0.
double masked_median_error(const ScalarMap& d, const ScalarMap& d_gt, const MaskMap& mask);

enum class CloudUnits { kPercentage, kDistance };

struct CloudMetrics {
  CloudUnits units = CloudUnits::kPercentage;
  double tau = 0.0;
  double accuracy = 0.0;
  double completeness = 0.0;
  /// F-score (percentage) or arithmetic mean (distance).
  double aggregate = 0.0;
  bool accuracy_defined = true;
  std::size_t pred_points = 0;
  std::size_t gt_points = 0;
};

/// Exact nearest-neighbour index over a fixed point set.
class KdTree {
 public:
  explicit KdTree(std::vector<Eigen::Vector3f> points);
  /// Squared distance (in double) to the nearest point; the tree must be
  /// non-empty.
  double nearest_squared(const Eigen::Vector3f& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };
  int build(std::vector<int>& idx, int lo, int hi, int depth);
  void search(int node, const Eigen::Vector3f& q, double& best) const;

  std::vector<Eigen::Vector3f> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

double squared_distance(const Eigen::Vector3f& a, const Eigen::Vector3f& b);

/// Nearest-neighbour distances from each query point to `target`.
std::vector<double> nearest_distances(const std::vector<Eigen::Vector3f>& queries,
                                      const std::vector<Eigen::Vector3f>& target, int workers = 1);

/// Accuracy (pred -> gt) and completeness (gt -> pred). Percentage mode counts
/// distances <= tau.
CloudMetrics cloud_accuracy_completeness(const PointCloud& pred, const PointCloud& gt, double tau,
                                         CloudUnits units = CloudUnits::kPercentage,
                                         int workers = 1);

double harmonic_mean(double a, double b);

void write_report(std::ostream& out, const CloudMetrics& m);
std::string csv_header();
std::string csv_row(const std::string& label, const CloudMetrics& m);

}  // namespace ibmvs
