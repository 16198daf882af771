#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "wavebem/adaptivity.hpp"
#include "wavebem/bdf.hpp"
#include "wavebem/surface_mesh.hpp"

namespace wavebem {

struct NamedField {
  std::string name;
  VectorXd values;
};

// Unstructured quad grid with point and cell scalars.
struct VtkData {
  std::vector<Vec3> points;
  std::vector<std::array<std::size_t, 4>> cells;  // panel corner order
  std::vector<NamedField> point_fields;
  std::vector<NamedField> cell_fields;
  double time = 0.0;
};

// Legacy ASCII VTK, 17 significant digits. Cells are written in VTK quad
// order and region tags as the cell scalar "region". Throws IoError when
// there are no point fields or sizes disagree.
void write_fields_vtk(std::ostream& os, const std::vector<Vec3>& points,
                      const std::vector<std::array<std::size_t, 4>>& cells, const std::vector<Region>& region,
                      const std::vector<NamedField>& fields, double t);
void write_fields_vtk(const std::string& path, const std::vector<Vec3>& points,
                      const std::vector<std::array<std::size_t, 4>>& cells, const std::vector<Region>& region,
                      const std::vector<NamedField>& fields, double t);
// Reads files written by write_fields_vtk.
VtkData read_fields_vtk(std::istream& is);
VtkData read_fields_vtk(const std::string& path);
// dir/fields_%06d.vtk
std::string vtk_filename(const std::string& dir, std::size_t index);

struct ProfileSample {
  double x_over_l = 0.0;
  double eta_prime = 0.0;
};
// eta' = 2 g eta / V^2 ordered by increasing x (bow to stern). Throws
// ConfigError for V = 0.
std::vector<ProfileSample> wave_profile(const std::vector<double>& x, const std::vector<double>& eta,
                                        double speed, double length);
void write_wave_profile(std::ostream& os, const std::vector<ProfileSample>& port,
                        const std::vector<ProfileSample>& starboard);

// Run state for bitwise restarts.
struct Checkpoint {
  std::string config;  // effective INI text
  AdaptiveMesh forest;
  BdfHistory history;
  std::size_t accepted_steps = 0;
  std::size_t last_adapt_step = 0;
  bool ramp_adapt_done = false;
  std::size_t vtk_index = 0;
  std::vector<std::pair<double, double>> steady_samples;  // (t, max |d eta / dt|)
};

inline constexpr const char* checkpoint_version = "wavebem-checkpoint-1";

// Header, version string, payload and CRC-32 of the payload.
void save_checkpoint(std::ostream& os, const Checkpoint& c);
void save_checkpoint(const std::string& path, const Checkpoint& c);
// Throws IoError on a version mismatch, a checksum failure or truncation.
Checkpoint load_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace wavebem
