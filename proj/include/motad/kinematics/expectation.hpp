#pragma once
// Expected image motion from known camera motion and rendered robot-body
// silhouettes, and the errors against what the camera actually observed.

#include <Eigen/Core>
#include <span>
#include <vector>

#include "motad/imaging/types.hpp"

namespace motad::kinematics {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const;  // fx, fy > 0
  Eigen::Matrix3d matrix() const;
};

/// Maps points from the first camera frame into the second: X' = R X + t.
struct RelativeCameraMotion {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // metres

  static RelativeCameraMotion identity() { return {}; }
  /// R orthonormal with det 1, within 1e-9.
  void validate() const;
  bool is_pure_translation() const;
};

class DepthModel {
 public:
  static DepthModel uniform(double z);
  static DepthModel per_point(std::vector<double> depths);

  bool is_uniform() const { return per_point_.empty(); }
  double depth_at(std::size_t i) const;
  std::size_t point_count() const { return per_point_.size(); }

 private:
  double z_ = 1.0;
  std::vector<double> per_point_;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Correspondence {
  Point2 from;
  Point2 to;
};

/// Projects each point through x' ~ K R K^-1 x + K t / Z. With R exactly the
/// identity the translation-only form x' ~ x + K t / Z is used. Requires at
/// least two points and positive depths.
std::vector<Correspondence> expected_correspondences(const CameraIntrinsics& k,
                                                     const RelativeCameraMotion& motion,
                                                     const DepthModel& depth,
                                                     std::span<const Point2> points);

/// n x n grid of interior sample points (cell centres) over the image.
std::vector<Point2> interior_grid(int width, int height, int n = 8);

/// Least-squares similarity between point sets (closed form, centred
/// cross-covariance). Exact on noiseless data.
SimilarityTransform fit_similarity(std::span<const Correspondence> pairs);

/// Convenience: grid -> correspondences -> fitted similarity.
SimilarityTransform expected_transform(const CameraIntrinsics& k, const RelativeCameraMotion& motion,
                                       const DepthModel& depth, int width, int height,
                                       int grid = 8);

struct CameraErrorWeights {
  double translation = 1.0;
  double scale = 0.0;
  double rotation = 0.0;
};

/// w_t (|dtx| + |dty|) + w_s |dsigma| + w_r |dtheta|, angle difference wrapped.
double camera_error(const SimilarityTransform& expected, const SimilarityTransform& observed,
                    const CameraErrorWeights& w = {});

/// Pixels >= threshold, enclosed background filled, then dilated by a disk of
/// the given radius.
Mask body_mask(const Image& rendered, float threshold, int dilation_radius = 2);

/// |med(Jx) - med(Ox)| + |med(Jy) - med(Oy)| over the mask; 0 when the mask
/// is empty (body not visible).
double body_error(const FlowField& observed, const FlowField& rendered_flow, const Mask& mask);

}  // namespace motad::kinematics
