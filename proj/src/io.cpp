#include "wavebem/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <boost/crc.hpp>

namespace wavebem {

void write_fields_vtk(std::ostream& os, const std::vector<Vec3>& points,
                      const std::vector<std::array<std::size_t, 4>>& cells, const std::vector<Region>& region,
                      const std::vector<NamedField>& fields, double t) {
  if (fields.empty()) throw IoError("no point fields to write");
  if (region.size() != cells.size()) throw IoError("region tags do not match the cells");
  for (const auto& f : fields)
    if (std::size_t(f.values.size()) != points.size()) throw IoError("field " + f.name + " has the wrong size");
  os << std::setprecision(17);
  os << "# vtk DataFile Version 3.0\nwavebem fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "FIELD FieldData 1\nTIME 1 1 double\n" << t << '\n';
  os << "POINTS " << points.size() << " double\n";
  for (const auto& p : points) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  os << "CELLS " << cells.size() << ' ' << 5 * cells.size() << '\n';
  for (const auto& c : cells) os << "4 " << c[0] << ' ' << c[1] << ' ' << c[3] << ' ' << c[2] << '\n';
  os << "CELL_TYPES " << cells.size() << '\n';
  for (std::size_t k = 0; k < cells.size(); ++k) os << "9\n";
  os << "CELL_DATA " << cells.size() << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (auto r : region) os << int(r) << '\n';
  os << "POINT_DATA " << points.size() << '\n';
  for (const auto& f : fields) {
    os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < f.values.size(); ++i) os << f.values[i] << '\n';
  }
  if (!os) throw IoError("VTK write failed");
}

void write_fields_vtk(const std::string& path, const std::vector<Vec3>& points,
                      const std::vector<std::array<std::size_t, 4>>& cells, const std::vector<Region>& region,
                      const std::vector<NamedField>& fields, double t) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path);
  write_fields_vtk(os, points, cells, region, fields, t);
}

namespace {

std::string expect_word(std::istream& is, const std::string& word) {
  std::string w;
  if (!(is >> w) || w != word) throw IoError("VTK parse error: expected " + word + ", got '" + w + "'");
  return w;
}

void read_scalars(std::istream& is, std::size_t n, std::vector<NamedField>& out) {
  NamedField f;
  std::string type, lookup, table;
  int comps = 0;
  if (!(is >> f.name >> type >> comps >> lookup >> table) || comps != 1 || lookup != "LOOKUP_TABLE")
    throw IoError("VTK parse error in SCALARS header");
  f.values.resize(Eigen::Index(n));
  for (std::size_t i = 0; i < n; ++i)
    if (!(is >> f.values[Eigen::Index(i)])) throw IoError("VTK parse error in " + f.name);
  out.push_back(std::move(f));
}

}  // namespace

VtkData read_fields_vtk(std::istream& is) {
  VtkData d;
  std::string line;
  std::getline(is, line);
  if (line.rfind("# vtk DataFile", 0) != 0) throw IoError("not a legacy VTK file");
  std::getline(is, line);
  expect_word(is, "ASCII");
  expect_word(is, "DATASET");
  expect_word(is, "UNSTRUCTURED_GRID");
  std::string w;
  std::size_t section = 0;  // 1 cell data, 2 point data
  std::size_t n_cells = 0;
  while (is >> w) {
    if (w == "FIELD") {
      std::string name, arr;
      int n_arrays = 0, comps = 0, tuples = 0;
      is >> name >> n_arrays >> arr >> comps >> tuples >> w >> d.time;
    } else if (w == "POINTS") {
      std::size_t n;
      is >> n >> w;
      d.points.resize(n);
      for (auto& p : d.points) is >> p.x() >> p.y() >> p.z();
    } else if (w == "CELLS") {
      std::size_t size;
      is >> n_cells >> size;
      d.cells.resize(n_cells);
      for (auto& c : d.cells) {
        int k;
        is >> k >> c[0] >> c[1] >> c[3] >> c[2];
        if (k != 4) throw IoError("only quads are supported");
      }
    } else if (w == "CELL_TYPES") {
      std::size_t n;
      is >> n;
      for (std::size_t k = 0; k < n; ++k) is >> w;
    } else if (w == "CELL_DATA") {
      is >> n_cells;
      section = 1;
    } else if (w == "POINT_DATA") {
      std::size_t n;
      is >> n;
      section = 2;
    } else if (w == "SCALARS") {
      if (section == 1)
        read_scalars(is, n_cells, d.cell_fields);
      else if (section == 2)
        read_scalars(is, d.points.size(), d.point_fields);
      else
        throw IoError("VTK scalars outside a data section");
    } else {
      throw IoError("VTK parse error at '" + w + "'");
    }
    if (!is) throw IoError("VTK parse error after " + w);
  }
  return d;
}

VtkData read_fields_vtk(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_fields_vtk(is);
}

std::string vtk_filename(const std::string& dir, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fields_%06zu.vtk", index);
  return dir + "/" + buf;
}

std::vector<ProfileSample> wave_profile(const std::vector<double>& x, const std::vector<double>& eta,
                                        double speed, double length) {
  if (speed == 0.0) throw ConfigError("wave profile undefined for zero speed");
  if (x.size() != eta.size()) throw IoError("profile sizes disagree");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<ProfileSample> out;
  for (auto i : order) out.push_back({x[i] / length, 2.0 * gravity * eta[i] / (speed * speed)});
  return out;
}

void write_wave_profile(std::ostream& os, const std::vector<ProfileSample>& port,
                        const std::vector<ProfileSample>& starboard) {
  os << std::setprecision(17) << "side,x_over_L,eta_prime\n";
  for (const auto& s : port) os << "port," << s.x_over_l << ',' << s.eta_prime << '\n';
  for (const auto& s : starboard) os << "starboard," << s.x_over_l << ',' << s.eta_prime << '\n';
}

namespace {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated checkpoint");
  return v;
}
void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}
std::string get_string(std::istream& is, std::size_t max_size) {
  const auto n = get<std::uint64_t>(is);
  if (n > max_size) throw IoError("corrupt checkpoint string");
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  if (!is) throw IoError("truncated checkpoint");
  return s;
}
void put_vector(std::ostream& os, const VectorXd& v) {
  put<std::uint64_t>(os, std::uint64_t(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(sizeof(double) * std::size_t(v.size())));
}
VectorXd get_vector(std::istream& is) {
  VectorXd v(Eigen::Index(get<std::uint64_t>(is)));
  is.read(reinterpret_cast<char*>(v.data()), std::streamsize(sizeof(double) * std::size_t(v.size())));
  if (!is) throw IoError("truncated checkpoint");
  return v;
}

std::uint32_t crc32(const std::string& s) {
  boost::crc_32_type crc;
  crc.process_bytes(s.data(), s.size());
  return crc.checksum();
}

}  // namespace

void save_checkpoint(std::ostream& os, const Checkpoint& c) {
  std::ostringstream p;
  put_string(p, c.config);
  c.forest.save(p);
  const auto& h = c.history;
  put<std::uint64_t>(p, h.t.size());
  for (double t : h.t) put(p, t);
  put<std::uint64_t>(p, h.y.size());
  for (const auto& y : h.y) put_vector(p, y);
  put_vector(p, h.yp0);
  put<std::int32_t>(p, h.order);
  put(p, h.h);
  put<std::int32_t>(p, h.equal_steps);
  put<std::uint64_t>(p, h.accepted_steps);
  put<std::uint64_t>(p, h.rejected_steps);
  put<std::uint64_t>(p, c.accepted_steps);
  put<std::uint64_t>(p, c.last_adapt_step);
  put<std::uint8_t>(p, c.ramp_adapt_done);
  put<std::uint64_t>(p, c.vtk_index);
  put<std::uint64_t>(p, c.steady_samples.size());
  for (const auto& [t, v] : c.steady_samples) {
    put(p, t);
    put(p, v);
  }
  const std::string payload = p.str();
  put_string(os, checkpoint_version);
  put_string(os, payload);
  put<std::uint32_t>(os, crc32(payload));
  if (!os) throw IoError("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  // Written aside first so an interrupted write keeps the old file.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot open " + tmp);
    save_checkpoint(os, c);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename " + tmp);
}

Checkpoint load_checkpoint(std::istream& is) {
  const std::string version = get_string(is, 256);
  if (version != checkpoint_version)
    throw IoError("checkpoint version mismatch: file has '" + version + "', expected '" +
                  checkpoint_version + "'");
  const std::string payload = get_string(is, std::size_t(1) << 40);
  if (get<std::uint32_t>(is) != crc32(payload)) throw IoError("checkpoint checksum mismatch");
  std::istringstream p(payload);
  Checkpoint c;
  c.config = get_string(p, payload.size());
  c.forest = AdaptiveMesh::load(p);
  auto& h = c.history;
  for (auto n = get<std::uint64_t>(p); n > 0; --n) h.t.push_back(get<double>(p));
  for (auto n = get<std::uint64_t>(p); n > 0; --n) h.y.push_back(get_vector(p));
  h.yp0 = get_vector(p);
  h.order = get<std::int32_t>(p);
  h.h = get<double>(p);
  h.equal_steps = get<std::int32_t>(p);
  h.accepted_steps = get<std::uint64_t>(p);
  h.rejected_steps = get<std::uint64_t>(p);
  c.accepted_steps = get<std::uint64_t>(p);
  c.last_adapt_step = get<std::uint64_t>(p);
  c.ramp_adapt_done = get<std::uint8_t>(p) != 0;
  c.vtk_index = get<std::uint64_t>(p);
  for (auto n = get<std::uint64_t>(p); n > 0; --n) {
    const double t = get<double>(p);
    c.steady_samples.emplace_back(t, get<double>(p));
  }
  return c;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace wavebem
