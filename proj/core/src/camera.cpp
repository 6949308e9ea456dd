#include "meshstyle/camera.hpp"

#include "meshstyle/error.hpp"

#include <cmath>
#include <numbers>

namespace meshstyle {

namespace {
constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
}  // namespace

Camera::Camera(double fov_deg, double distance, double elevation_deg, double azimuth_deg, int resolution)
    : fov_deg_(fov_deg),
      distance_(distance),
      elevation_deg_(elevation_deg),
      azimuth_deg_(azimuth_deg),
      resolution_(resolution) {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ValidationError("camera FOV must lie in (0, 180) degrees");
  if (!(distance > 0.0)) throw ValidationError("camera distance must be positive");
  if (resolution < 16) throw ValidationError("camera resolution must be at least 16");
  if (std::abs(elevation_deg) >= 90.0) throw ValidationError("camera elevation must lie in (-90, 90) degrees");

  const double el = deg2rad(elevation_deg), az = deg2rad(azimuth_deg);
  eye_ = distance * Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
  const Vec3 forward = -eye_.normalized();
  const Vec3 right = forward.cross(Vec3::UnitY()).normalized();
  const Vec3 up = right.cross(forward);
  view_.row(0) = right.transpose();
  view_.row(1) = up.transpose();
  view_.row(2) = forward.transpose();
  tan_half_fov_ = std::tan(deg2rad(fov_deg) / 2.0);
}

Camera sample_camera(std::mt19937_64& rng, const CameraSamplingConfig& config) {
  std::uniform_real_distribution<double> elevation(config.elevation_min_deg, config.elevation_max_deg);
  std::uniform_real_distribution<double> azimuth(config.azimuth_min_deg, config.azimuth_max_deg);
  const double el = elevation(rng);
  const double az = azimuth(rng);
  return Camera(config.fov_deg, config.distance, el, az, config.resolution);
}

}  // namespace meshstyle
