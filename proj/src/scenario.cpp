#include "wavebem/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace wavebem {

double WigleyHull::half_beam(double x, double z) const {
  const double a = 2.0 * x / L, b = z / T;
  return 0.5 * B * (1.0 - a * a) * (1.0 - b * b);
}

Vec2 WigleyHull::half_beam_gradient(double x, double z) const {
  const double a = 2.0 * x / L, b = z / T;
  return Vec2(0.5 * B * (-2.0 * a * 2.0 / L) * (1.0 - b * b),
              0.5 * B * (1.0 - a * a) * (-2.0 * b / T));
}

double WigleyHull::residual(const Vec3& p, double side) const {
  return side * p.y() - half_beam(p.x(), p.z());
}

Vec3 WigleyHull::water_normal(const Vec3& p, double side) const {
  const Vec2 g = half_beam_gradient(p.x(), p.z());
  return Vec3(-g.x(), side, -g.y()).normalized();
}

Vec3 WigleyHull::project(const Vec3& p, double side, double tol) const {
  Vec3 q = p;
  for (int it = 0; it < 50; ++it) {
    const double r = residual(q, side);
    if (std::abs(r) <= tol) return q;
    const Vec2 g = half_beam_gradient(q.x(), q.z());
    const Vec3 grad(-g.x(), side, -g.y());
    q -= (r / grad.squaredNorm()) * grad;
  }
  if (std::abs(residual(q, side)) <= tol) return q;
  throw GeometryError("hull projection did not converge in 50 iterations");
}

double wigley_surface(double x, double z, const WigleyHull& hull) {
  if (!(std::abs(x) <= 0.5 * hull.L && z >= -hull.T && z <= 0.0))
    throw std::out_of_range("Wigley hull evaluated outside |x| <= L/2, -T <= z <= 0");
  return hull.half_beam(x, z);
}

double froude_to_speed(double fr, double L) { return fr * std::sqrt(gravity * L); }
double speed_to_froude(double v, double L) { return v / std::sqrt(gravity * L); }

FrameMotion velocity_ramp(double t, double v_target, double t_ramp) {
  if (!(t_ramp > 0.0)) throw ConfigError("ramp duration must be positive");
  if (t < t_ramp) return {v_target * std::max(0.0, t) / t_ramp, v_target / t_ramp};
  return {v_target, 0.0};
}

double Scenario::target_speed() const {
  return speed > 0.0 ? speed : froude_to_speed(froude, hull.L);
}

void Scenario::finalize() {
  const double L = hull.L;
  if (!(L > 0 && hull.B > 0 && hull.T > 0)) throw ConfigError("hull L, B, T must be positive");
  if (speed > 0.0) froude = speed_to_froude(speed, L);
  if (std::isnan(basin.inflow)) basin.inflow = L;
  if (std::isnan(basin.outflow)) basin.outflow = 3 * L;
  if (std::isnan(basin.half_width)) basin.half_width = 1.5 * L;
  if (std::isnan(basin.depth)) basin.depth = L;
  if (std::isnan(beach.length)) beach.length = 0.5 * basin.outflow;
  if (std::isnan(beach.x_d)) beach.x_d = 0.5 * L + basin.outflow - beach.length;
  if (std::isnan(beach.nu)) beach.nu = target_speed();
  if (std::isnan(adapt.h_min)) adapt.h_min = L / 200;
  if (!(beach.length > 0)) throw ConfigError("beach length must be positive");
  if (!(ramp_time > 0)) throw ConfigError("ramp_time must be positive");
  if (solver.max_order < 1 || solver.max_order > 5) throw ConfigError("max_order must be in 1..5");
  if (!(solver.rtol > 0 && solver.atol > 0)) throw ConfigError("tolerances must be positive");
  if (solver.bem.regular_order < 1 || solver.bem.near_order < 1 || solver.bem.singular_order < 1 ||
      !(solver.bem.near_factor >= 0) || !(solver.bem.split_factor >= 0))
    throw ConfigError("BEM quadrature orders must be positive");
  if (!(adapt.f_refine >= 0 && adapt.f_coarsen >= 0 && adapt.f_refine + adapt.f_coarsen <= 1))
    throw ConfigError("adapt fractions must satisfy 0 <= f_r + f_c <= 1");
  if (basin.nx_hull < 2 || basin.nz_hull < 1 || basin.nx_inflow < 1 || basin.nx_outflow < 1 ||
      basin.ny < 1 || basin.nz_wall < 1)
    throw ConfigError("mesh resolution counts must be positive");
}

Scenario default_scenario() {
  Scenario s;
  s.finalize();
  return s;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("invalid number '" + s + "' for " + key);
  }
  if (pos != s.size()) throw ConfigError("invalid number '" + s + "' for " + key);
  return v;
}

long parse_int(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw ConfigError("invalid integer '" + s + "' for " + key);
  }
  if (pos != s.size()) throw ConfigError("invalid integer '" + s + "' for " + key);
  return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean '" + s + "' for " + key);
}

struct Field {
  std::string section, key;
  std::function<std::string(const Scenario&)> get;
  std::function<void(Scenario&, const std::string&, const std::string&)> set;
};


template <class Getter>
Field real(std::string sec, std::string key, Getter ref) {
  return {sec, key, [ref](const Scenario& s) { return format_double(ref(const_cast<Scenario&>(s))); },
          [ref](Scenario& s, const std::string& v, const std::string& k) {
            ref(s) = parse_double(v, k);
          }};
}

template <class Getter>
Field integer(std::string sec, std::string key, Getter ref) {
  return {sec, key,
          [ref](const Scenario& s) { return std::to_string(ref(const_cast<Scenario&>(s))); },
          [ref](Scenario& s, const std::string& v, const std::string& k) {
            ref(s) = static_cast<std::remove_reference_t<decltype(ref(s))>>(parse_int(v, k));
          }};
}

template <class Getter>
Field boolean(std::string sec, std::string key, Getter ref) {
  return {sec, key,
          [ref](const Scenario& s) { return std::string(ref(const_cast<Scenario&>(s)) ? "true" : "false"); },
          [ref](Scenario& s, const std::string& v, const std::string& k) { ref(s) = parse_bool(v, k); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      real("hull", "length", [](Scenario& s) -> double& { return s.hull.L; }),
      real("hull", "beam", [](Scenario& s) -> double& { return s.hull.B; }),
      real("hull", "draft", [](Scenario& s) -> double& { return s.hull.T; }),
      real("hull", "froude", [](Scenario& s) -> double& { return s.froude; }),
      real("hull", "speed", [](Scenario& s) -> double& { return s.speed; }),
      real("hull", "ramp_time", [](Scenario& s) -> double& { return s.ramp_time; }),
      real("basin", "inflow", [](Scenario& s) -> double& { return s.basin.inflow; }),
      real("basin", "outflow", [](Scenario& s) -> double& { return s.basin.outflow; }),
      real("basin", "half_width", [](Scenario& s) -> double& { return s.basin.half_width; }),
      real("basin", "depth", [](Scenario& s) -> double& { return s.basin.depth; }),
      integer("basin", "nx_hull", [](Scenario& s) -> int& { return s.basin.nx_hull; }),
      integer("basin", "nz_hull", [](Scenario& s) -> int& { return s.basin.nz_hull; }),
      integer("basin", "nx_inflow", [](Scenario& s) -> int& { return s.basin.nx_inflow; }),
      integer("basin", "nx_outflow", [](Scenario& s) -> int& { return s.basin.nx_outflow; }),
      integer("basin", "ny", [](Scenario& s) -> int& { return s.basin.ny; }),
      integer("basin", "nz_wall", [](Scenario& s) -> int& { return s.basin.nz_wall; }),
      real("basin", "y_growth", [](Scenario& s) -> double& { return s.basin.y_growth; }),
      real("basin", "cosine_clustering",
           [](Scenario& s) -> double& { return s.basin.cosine_clustering; }),
      real("beach", "start", [](Scenario& s) -> double& { return s.beach.x_d; }),
      real("beach", "length", [](Scenario& s) -> double& { return s.beach.length; }),
      real("beach", "nu", [](Scenario& s) -> double& { return s.beach.nu; }),
      real("solver", "rtol", [](Scenario& s) -> double& { return s.solver.rtol; }),
      real("solver", "atol", [](Scenario& s) -> double& { return s.solver.atol; }),
      integer("solver", "max_order", [](Scenario& s) -> int& { return s.solver.max_order; }),
      real("solver", "h_init", [](Scenario& s) -> double& { return s.solver.h_init; }),
      real("solver", "h_min", [](Scenario& s) -> double& { return s.solver.h_min; }),
      real("solver", "h_max", [](Scenario& s) -> double& { return s.solver.h_max; }),
      integer("solver", "newton_max_iterations",
              [](Scenario& s) -> int& { return s.solver.newton_max_iterations; }),
      integer("solver", "gmres_restart", [](Scenario& s) -> int& { return s.solver.gmres_restart; }),
      real("solver", "gmres_tol", [](Scenario& s) -> double& { return s.solver.gmres_tol; }),
      real("solver", "t_end", [](Scenario& s) -> double& { return s.solver.t_end; }),
      real("solver", "steady_threshold",
           [](Scenario& s) -> double& { return s.solver.steady_threshold; }),
      real("solver", "steady_window", [](Scenario& s) -> double& { return s.solver.steady_window; }),
      real("solver", "wall_clock_limit",
           [](Scenario& s) -> double& { return s.solver.wall_clock_limit; }),
      real("solver", "rho", [](Scenario& s) -> double& { return s.solver.rho; }),
      real("solver", "supg_c", [](Scenario& s) -> double& { return s.supg.c; }),
      real("solver", "supg_cutoff", [](Scenario& s) -> double& { return s.supg.cutoff; }),
      boolean("solver", "supg", [](Scenario& s) -> bool& { return s.supg.enabled; }),
      integer("solver", "bem_regular_order", [](Scenario& s) -> int& { return s.solver.bem.regular_order; }),
      integer("solver", "bem_near_order", [](Scenario& s) -> int& { return s.solver.bem.near_order; }),
      integer("solver", "bem_singular_order",
              [](Scenario& s) -> int& { return s.solver.bem.singular_order; }),
      real("solver", "bem_near_factor", [](Scenario& s) -> double& { return s.solver.bem.near_factor; }),
      real("solver", "bem_split_factor", [](Scenario& s) -> double& { return s.solver.bem.split_factor; }),
      boolean("adapt", "enabled", [](Scenario& s) -> bool& { return s.adapt.enabled; }),
      integer("adapt", "interval", [](Scenario& s) -> int& { return s.adapt.interval; }),
      real("adapt", "f_refine", [](Scenario& s) -> double& { return s.adapt.f_refine; }),
      real("adapt", "f_coarsen", [](Scenario& s) -> double& { return s.adapt.f_coarsen; }),
      real("adapt", "h_min", [](Scenario& s) -> double& { return s.adapt.h_min; }),
      integer("adapt", "max_dofs", [](Scenario& s) -> std::size_t& { return s.adapt.max_dofs; }),
      {"output", "dir", [](const Scenario& s) { return s.output.dir; },
       [](Scenario& s, const std::string& v, const std::string&) { s.output.dir = v; }},
      integer("output", "vtk_interval", [](Scenario& s) -> int& { return s.output.vtk_interval; }),
      integer("output", "checkpoint_interval",
              [](Scenario& s) -> int& { return s.output.checkpoint_interval; }),
  };
  return f;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::vector<ConfigOverride>& overrides) {
  boost::property_tree::ptree tree;
  std::istringstream is(text);
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  std::map<std::pair<std::string, std::string>, const Field*> index;
  for (const auto& f : fields()) index[{f.section, f.key}] = &f;
  Scenario s;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("key '" + section + "' outside of a section");
    for (const auto& [key, value] : body) {
      auto it = index.find({section, key});
      if (it == index.end()) throw ConfigError("unknown config key [" + section + "] " + key);
      it->second->set(s, value.data(), section + "." + key);
    }
  }
  for (const auto& o : overrides) {
    auto it = index.find({o.section, o.key});
    if (it == index.end()) throw ConfigError("unknown config key [" + o.section + "] " + o.key);
    it->second->set(s, o.value, o.section + "." + o.key);
  }
  s.finalize();
  return s;
}

Scenario load_scenario(const std::string& path, const std::vector<ConfigOverride>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), overrides);
}

std::string effective_config(const Scenario& s) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(s) << '\n';
  }
  return os.str();
}

namespace {

// Spacings h0 r^k, k < n, summing to `length`.
std::vector<double> graded(double length, int n, double h0) {
  auto total = [&](double r) {
    return std::abs(r - 1.0) < 1e-12 ? n * h0 : h0 * (std::pow(r, n) - 1.0) / (r - 1.0);
  };
  double lo = 1e-3, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) < length ? lo : hi) = mid;
  }
  const double r = 0.5 * (lo + hi);
  std::vector<double> h(n);
  double sum = 0;
  for (int k = 0; k < n; ++k) sum += (h[k] = h0 * std::pow(r, k));
  for (auto& v : h) v *= length / sum;
  return h;
}

}  // namespace

InitialDomain build_initial_domain(const WigleyHull& hull, const Scenario& s) {
  const auto& b = s.basin;
  const double L = hull.L, W = b.half_width, D = b.depth;
  if (!(b.inflow > 0 && b.outflow > 0 && W > 0.5 * hull.B * 1.05 && D > hull.T * 1.05))
    throw GeometryError("basin walls intersect or touch the hull");

  // Waterline abscissae along the hull, blended uniform/cosine.
  std::vector<double> xs;
  for (int i = 0; i <= b.nx_hull; ++i) {
    const double t = double(i) / b.nx_hull;
    const double c = b.cosine_clustering;
    xs.push_back(-0.5 * L + L * ((1 - c) * t + c * 0.5 * (1 - std::cos(pi * t))));
  }
  xs.front() = -0.5 * L;
  xs.back() = 0.5 * L;
  const double h_bow = xs[1] - xs[0], h_stern = xs[b.nx_hull] - xs[b.nx_hull - 1];
  std::vector<double> x_all;
  {
    const auto hin = graded(b.inflow, b.nx_inflow, h_bow);
    double x = -0.5 * L - b.inflow;
    x_all.push_back(x);
    for (int k = b.nx_inflow - 1; k >= 0; --k) x_all.push_back(x += hin[k]);
    x_all.back() = -0.5 * L;
    for (int i = 1; i <= b.nx_hull; ++i) x_all.push_back(xs[i]);
    const auto hout = graded(b.outflow, b.nx_outflow, h_stern);
    x = 0.5 * L;
    for (int k = 0; k < b.nx_outflow; ++k) x_all.push_back(x += hout[k]);
    x_all.back() = 0.5 * L + b.outflow;
  }
  const int nx = int(x_all.size()) - 1;
  const int hull_first = b.nx_inflow, hull_last = b.nx_inflow + b.nx_hull;

  std::vector<double> ts(b.ny + 1);
  for (int j = 0; j <= b.ny; ++j)
    ts[j] = std::abs(b.y_growth - 1) < 1e-12
                ? double(j) / b.ny
                : (std::pow(b.y_growth, j) - 1) / (std::pow(b.y_growth, b.ny) - 1);
  std::vector<double> zs(b.nz_wall + 1);
  {
    const double g = 1.5;
    for (int k = 0; k <= b.nz_wall; ++k)
      zs[k] = -D * (b.nz_wall == 1 ? double(k) : (std::pow(g, k) - 1) / (std::pow(g, b.nz_wall) - 1));
  }
  auto y_inner = [&](int i) {
    return (i >= hull_first && i <= hull_last) ? hull.half_beam(x_all[i], 0.0) : 0.0;
  };

  InitialDomain dom;
  auto& mesh = dom.mesh;
  NodeRegistry reg(mesh.nodes, L);
  for (double side : {1.0, -1.0}) {
    auto fs = [&](int i, int j) {
      const double y0 = y_inner(i);
      return reg.add(Vec3(x_all[i], side * (y0 + (W - y0) * ts[j]), 0.0));
    };
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < b.ny; ++j)
        add_oriented_panel(mesh, {fs(i, j), fs(i + 1, j), fs(i, j + 1), fs(i + 1, j + 1)},
                           Region::free_surface, patch_free_surface, Vec3(0, 0, 1));
    auto hl = [&](int i, int k) {
      const double z = -hull.T * double(k) / b.nz_hull;
      const double y = k == b.nz_hull ? 0.0 : hull.half_beam(x_all[i], z);
      return reg.add(Vec3(x_all[i], side * y, z));
    };
    const int hp = side > 0 ? patch_hull_port : patch_hull_starboard;
    for (int i = hull_first; i < hull_last; ++i)
      for (int k = 0; k < b.nz_hull; ++k)
        add_oriented_panel(mesh, {hl(i, k), hl(i + 1, k), hl(i, k + 1), hl(i + 1, k + 1)},
                           Region::hull, hp, Vec3(0, -side, 0));
    auto bt = [&](int i, int j) { return reg.add(Vec3(x_all[i], side * W * ts[j], -D)); };
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < b.ny; ++j)
        add_oriented_panel(mesh, {bt(i, j), bt(i + 1, j), bt(i, j + 1), bt(i + 1, j + 1)},
                           Region::bottom, patch_bottom, Vec3(0, 0, -1));
    for (int end = 0; end < 2; ++end) {
      const int i = end == 0 ? 0 : nx;
      auto wl = [&](int j, int k) { return reg.add(Vec3(x_all[i], side * W * ts[j], zs[k])); };
      for (int j = 0; j < b.ny; ++j)
        for (int k = 0; k < b.nz_wall; ++k)
          add_oriented_panel(mesh, {wl(j, k), wl(j + 1, k), wl(j, k + 1), wl(j + 1, k + 1)},
                             Region::far_field, end == 0 ? patch_inflow : patch_outflow,
                             Vec3(end == 0 ? -1 : 1, 0, 0));
    }
    auto sw = [&](int i, int k) { return reg.add(Vec3(x_all[i], side * W, zs[k])); };
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < b.nz_wall; ++k)
        add_oriented_panel(mesh, {sw(i, k), sw(i + 1, k), sw(i, k + 1), sw(i + 1, k + 1)},
                           Region::far_field, side > 0 ? patch_side_port : patch_side_starboard,
                           Vec3(0, side, 0));
    auto& wl = side > 0 ? dom.waterline_port : dom.waterline_starboard;
    for (int i = hull_first; i <= hull_last; ++i) wl.push_back(fs(i, 0));
  }
  mesh.validate();
  return dom;
}

}  // namespace wavebem
