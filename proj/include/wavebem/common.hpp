#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace wavebem {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Eigen::VectorXd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double gravity = 9.81;

enum class Region : std::uint8_t { free_surface = 0, hull = 1, bottom = 2, far_field = 3 };

std::string_view to_string(Region r);
Region region_from_string(std::string_view s);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what, long panel = -1)
      : Error(what), panel_(panel) {}
  long panel() const { return panel_; }

 private:
  long panel_;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace wavebem
