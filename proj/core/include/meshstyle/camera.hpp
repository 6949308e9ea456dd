#pragma once

#include "meshstyle/mesh.hpp"

#include <random>

namespace meshstyle {

/// Perspective camera orbiting the origin, looking at it with +y up.
///
/// The eye sits at distance * (cos(el) sin(az), sin(el), cos(el) cos(az)).
/// View space has +x right, +y up and depth measured along the forward
/// direction (positive in front of the camera).
class Camera {
 public:
  Camera(double fov_deg, double distance, double elevation_deg, double azimuth_deg, int resolution);

  double fov_deg() const noexcept { return fov_deg_; }
  double distance() const noexcept { return distance_; }
  double elevation_deg() const noexcept { return elevation_deg_; }
  double azimuth_deg() const noexcept { return azimuth_deg_; }
  int resolution() const noexcept { return resolution_; }

  const Vec3& eye() const noexcept { return eye_; }
  // Rows: right, up, forward.
  const Mat3& view_rotation() const noexcept { return view_; }
  double tan_half_fov() const noexcept { return tan_half_fov_; }
  // Unit vector from the origin toward the eye.
  Vec3 headlight() const { return eye_.normalized(); }

  Vec3 to_view(const Vec3& p) const { return view_ * (p - eye_); }

 private:
  double fov_deg_, distance_, elevation_deg_, azimuth_deg_;
  int resolution_;
  Vec3 eye_;
  Mat3 view_;
  double tan_half_fov_;
};

struct CameraSamplingConfig {
  double fov_deg = 30.0;
  double distance = 5.0;
  double elevation_min_deg = 10.0;
  double elevation_max_deg = 30.0;
  double azimuth_min_deg = 0.0;
  double azimuth_max_deg = 360.0;
  int resolution = 128;
};

/// Elevation ~ U[min, max], azimuth ~ U[min, max).
Camera sample_camera(std::mt19937_64& rng, const CameraSamplingConfig& config = {});

}  // namespace meshstyle
