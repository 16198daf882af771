#include "wavebem/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <ostream>

namespace wavebem {

bool legal_transition(RunPhase from, RunPhase to) {
  switch (from) {
    case RunPhase::initialize:
      return to == RunPhase::integrate;
    case RunPhase::integrate:
      return to == RunPhase::adapt || to == RunPhase::finalize;
    case RunPhase::adapt:
      return to == RunPhase::integrate;
    case RunPhase::finalize:
      return false;
  }
  return false;
}

void SteadyDetector::add(double t, double value) {
  samples_.emplace_back(t, value);
  // Keep one sample at or before t - window to show coverage.
  while (samples_.size() > 1 && samples_[1].first <= t - window_) samples_.pop_front();
}

bool SteadyDetector::steady(double t_min) const {
  if (samples_.empty()) return false;
  const double t = samples_.back().first;
  if (samples_.front().first > t - window_ || samples_.front().first < t_min) return false;
  double m = 0.0;
  for (const auto& s : samples_) m = std::max(m, s.second);
  return m < threshold_;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const SolverError*>(&e) || dynamic_cast<const RecoverableError*>(&e)) return 3;
  if (dynamic_cast<const GeometryError*>(&e)) return 4;
  return 1;
}

namespace {

double steady_threshold(const Scenario& s) { return s.solver.steady_threshold * s.target_speed(); }

}  // namespace

Simulation::Simulation(const Scenario& scenario, RunOptions options)
    : scenario_(scenario),
      options_(std::move(options)),
      steady_(scenario.solver.steady_window, 0.0),
      start_(std::chrono::steady_clock::now()) {
  if (std::isnan(scenario_.beach.nu)) scenario_.finalize();
  steady_ = SteadyDetector(scenario_.solver.steady_window, steady_threshold(scenario_));
  out_dir_ = options_.out_dir.empty() ? scenario_.output.dir : options_.out_dir;
  const auto domain = build_initial_domain(scenario_.hull, scenario_);
  forest_ = AdaptiveMesh(domain.mesh);
  build_system(true);
  open_outputs(false);
  set_phase(RunPhase::integrate);
}

Simulation::Simulation(const Checkpoint& c, const std::vector<ConfigOverride>& overrides, RunOptions options)
    : scenario_(parse_scenario(c.config, overrides)),
      options_(std::move(options)),
      forest_(c.forest),
      steady_(scenario_.solver.steady_window, steady_threshold(scenario_)),
      accepted_(c.accepted_steps),
      last_adapt_(c.last_adapt_step),
      vtk_index_(c.vtk_index),
      ramp_adapt_done_(c.ramp_adapt_done),
      start_(std::chrono::steady_clock::now()) {
  out_dir_ = options_.out_dir.empty() ? scenario_.output.dir : options_.out_dir;
  steady_.set_samples(c.steady_samples);
  leaf_ = forest_.leaf_mesh();
  dae_ = std::make_unique<ShipWaveDae>(leaf_.mesh, scenario_);
  if (c.history.y.empty() || std::size_t(c.history.y.front().size()) != dae_->size())
    throw IoError("checkpoint state does not match its mesh");
  bdf_ = std::make_unique<BdfIntegrator>(*dae_, bdf_params());
  bdf_->restore(c.history);
  open_outputs(true);
  set_phase(RunPhase::integrate);
}

Simulation::~Simulation() = default;

void Simulation::set_phase(RunPhase p) {
  if (!legal_transition(phase_, p)) throw SolverError("illegal run-loop transition");
  phase_ = p;
}

BdfParams Simulation::bdf_params() const {
  const auto& s = scenario_.solver;
  BdfParams p;
  p.rtol = s.rtol;
  p.atol = s.atol;
  p.max_order = s.max_order;
  p.h_init = s.h_init;
  p.h_min = s.h_min;
  p.h_max = s.h_max;
  p.newton_max_iterations = s.newton_max_iterations;
  p.gmres.restart = s.gmres_restart;
  p.gmres.rel_tol = s.gmres_tol;
  return p;
}

void Simulation::build_system(bool consistent) {
  leaf_ = forest_.leaf_mesh();
  dae_ = std::make_unique<ShipWaveDae>(leaf_.mesh, scenario_);
  bdf_ = std::make_unique<BdfIntegrator>(*dae_, bdf_params());
  if (!consistent) return;
  VectorXd y = dae_->initial_state(), yp = VectorXd::Zero(y.size());
  bdf_->consistent_initial_conditions(0.0, y, yp);
  bdf_->initialize(0.0, y, yp);
}

void Simulation::open_outputs(bool append) {
  if (!options_.write_outputs) return;
  std::filesystem::create_directories(out_dir_);
  {
    std::ofstream os(out_dir_ + "/config.ini");
    os << effective_config(scenario_);
  }
  const auto mode = append ? std::ios::app : std::ios::trunc;
  auto open = [&](std::ofstream& f, const std::string& name, const std::string& header) {
    f.open(out_dir_ + "/" + name, std::ios::out | mode);
    if (!f) throw IoError("cannot open " + out_dir_ + "/" + name);
    f << std::setprecision(17);
    if (!append) f << header;
  };
  std::ostringstream steps;
  write_step_log_header(steps);
  std::ostringstream adapt;
  write_adapt_log_header(adapt);
  open(step_log_, "steps.csv", steps.str());
  open(diag_log_, "diagnostics.csv", "t,step,n_dofs,max_abs_eta,max_eta_rate,beach_absorption\n");
  open(force_log_, "force.csv", "t,fx,fy,fz\n");
  open(adapt_log_, "adapt.csv", adapt.str());
}

double Simulation::max_eta_rate() const {
  const VectorXd yp = bdf_->yp();
  double m = 0.0;
  for (std::size_t i = 0; i < dae_->dofs().n_dofs; ++i)
    if (dae_->dofs().dof_region[i] == Region::free_surface)
      m = std::max(m, std::abs(yp[Eigen::Index(dae_->x_slot(i, 2))]));
  return m;
}

void Simulation::record_step(const StepRecord& r) {
  const VectorXd& y = bdf_->y();
  const double beach = dae_->beach_absorption(y);
  min_beach_rate_ = accepted_ == 1 ? beach : std::min(min_beach_rate_, beach);
  const double rate = max_eta_rate();
  steady_.add(r.t, rate);
  if (!options_.write_outputs) return;
  write_step_log(step_log_, r);
  diag_log_ << r.t << ',' << accepted_ << ',' << dae_->dofs().n_dofs << ','
            << dae_->eta(y).cwiseAbs().maxCoeff() << ',' << rate << ',' << beach << '\n';
  const Vec3 f = dae_->hull_force(r.t, y, bdf_->yp());
  force_log_ << r.t << ',' << f.x() << ',' << f.y() << ',' << f.z() << '\n';
}

void Simulation::write_vtk() {
  if (!options_.write_outputs) return;
  const VectorXd& y = bdf_->y();
  const auto& dofs = dae_->dofs();
  std::vector<Region> region;
  for (const auto& p : leaf_.mesh.panels) region.push_back(p.region);
  write_fields_vtk(vtk_filename(out_dir_, vtk_index_++), dae_->positions(y), dofs.panel_dofs, region,
                   {{"phi", dae_->phi(y)},
                    {"phin", dae_->phin(y)},
                    {"eta", dae_->eta(y)},
                    {"p", dae_->pressure(bdf_->t(), y, bdf_->yp())}},
                   bdf_->t());
}

void Simulation::adapt() {
  set_phase(RunPhase::adapt);
  const VectorXd& y = bdf_->y();
  const auto& dofs = dae_->dofs();
  const auto x = dae_->positions(y);
  const auto tau = kelly_estimate(dofs, x, dae_->phi(y), leaf_.mesh.constraints);
  const auto flags = flag_fixed_fraction(tau, scenario_.adapt.f_refine, scenario_.adapt.f_coarsen);
  // The current geometry becomes the reference of the new mesh.
  for (std::size_t n = 0; n < leaf_.node.size(); ++n) forest_.nodes()[leaf_.node[n]] = x[dofs.node_dofs[n][0]];
  const LeafMesh old_leaf = leaf_;
  const DofHandler old_dofs = dofs;
  const VectorXd phi = dae_->phi(y), phin = dae_->phin(y);
  const double t = bdf_->t();
  RefinementLimits lim{scenario_.adapt.h_min, scenario_.adapt.max_dofs};
  const auto rep = execute_refinement(forest_, flags, &scenario_.hull, lim);
  build_system(false);
  VectorXd yn = dae_->initial_state();
  const auto& nd = dae_->dofs();
  yn.segment(Eigen::Index(3 * nd.n_dofs), Eigen::Index(nd.n_dofs)) =
      transfer_solution(forest_, old_leaf, old_dofs, leaf_, nd, phi);
  yn.segment(Eigen::Index(4 * nd.n_dofs), Eigen::Index(nd.n_dofs)) =
      transfer_solution(forest_, old_leaf, old_dofs, leaf_, nd, phin);
  VectorXd ypn = VectorXd::Zero(yn.size());
  bdf_->consistent_initial_conditions(t, yn, ypn);
  bdf_->initialize(t, yn, ypn);
  last_adapt_ = accepted_;
  ++adapt_cycles_;
  if (options_.write_outputs) {
    write_adapt_log(adapt_log_, accepted_, leaf_.mesh.panels.size(), nd.n_dofs,
                    *std::max_element(tau.begin(), tau.end()), *std::min_element(tau.begin(), tau.end()));
    adapt_log_.flush();
  }
  if (options_.log) {
    *options_.log << "adapt at t " << t << ": refined " << rep.refined << " (closure " << rep.closure
                  << "), coarsened " << rep.coarsened << ", " << nd.n_dofs << " dofs\n";
    for (const auto& l : rep.log) *options_.log << "  " << l << '\n';
  }
  set_phase(RunPhase::integrate);
}

Checkpoint Simulation::checkpoint() const {
  Checkpoint c;
  c.config = effective_config(scenario_);
  c.forest = forest_;
  c.history = bdf_->history();
  c.accepted_steps = accepted_;
  c.last_adapt_step = last_adapt_;
  c.ramp_adapt_done = ramp_adapt_done_;
  c.vtk_index = vtk_index_;
  c.steady_samples.assign(steady_.samples().begin(), steady_.samples().end());
  return c;
}

void Simulation::write_checkpoint(const std::string& path) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path().empty()
                                          ? std::filesystem::path(".")
                                          : std::filesystem::path(path).parent_path());
  save_checkpoint(path, checkpoint());
  // A resumed run starts with a fresh Jacobian; match it here.
  bdf_->reset_jacobian();
}

std::pair<std::vector<ProfileSample>, std::vector<ProfileSample>> Simulation::waterline_profiles() const {
  const auto x = dae_->positions(bdf_->y());
  const auto& wire = dae_->wireframe();
  std::vector<double> xp, ep, xs, es;
  for (auto n : wire.waterline) {
    const std::size_t d = wire.fs_dof[n];
    if (d >= dae_->dofs().n_dofs) continue;
    const Vec3& p = x[d];
    if (p.y() >= -1e-12) {
      xp.push_back(p.x());
      ep.push_back(p.z());
    }
    if (p.y() <= 1e-12) {
      xs.push_back(p.x());
      es.push_back(p.z());
    }
  }
  const double v = scenario_.target_speed(), L = scenario_.hull.L;
  return {wave_profile(xp, ep, v, L), wave_profile(xs, es, v, L)};
}

void Simulation::finalize(RunSummary& s) {
  set_phase(RunPhase::finalize);
  s.t = bdf_->t();
  s.accepted_steps = accepted_;
  s.rejected_steps = bdf_->history().rejected_steps;
  s.adapt_cycles = adapt_cycles_;
  s.n_dofs = dae_->dofs().n_dofs;
  s.max_abs_eta = dae_->eta(bdf_->y()).cwiseAbs().maxCoeff();
  s.min_beach_rate = min_beach_rate_;
  if (!options_.write_outputs) return;
  write_vtk();
  if (scenario_.target_speed() > 0.0) {
    const auto [port, starboard] = waterline_profiles();
    std::ofstream os(out_dir_ + "/profile.csv");
    write_wave_profile(os, port, starboard);
  }
  write_checkpoint(out_dir_ + "/checkpoint.bin");
  for (auto* f : {&step_log_, &diag_log_, &force_log_, &adapt_log_}) f->flush();
}

StepRecord Simulation::step() {
  if (phase_ != RunPhase::integrate) throw SolverError("simulation is not integrating");
  const double t_end = scenario_.solver.t_end, ramp = scenario_.ramp_time;
  const double eps = 1e-12 * std::max(1.0, t_end);
  const double t_stop = bdf_->t() < ramp - eps ? std::min(ramp, t_end) : t_end;
  bdf_->on_step = [&](const StepRecord& r) {
    if (options_.write_outputs && !r.accepted) write_step_log(step_log_, r);
  };
  const StepRecord r = bdf_->step(t_stop);
  bdf_->on_step = nullptr;
  ++accepted_;
  record_step(r);
  if (options_.log && accepted_ % 10 == 0)
    *options_.log << "step " << accepted_ << " t " << r.t << " h " << r.h << " q " << r.order << '\n';

  const bool ramp_done = !ramp_adapt_done_ && bdf_->t() >= ramp - eps;
  if (ramp_done) ramp_adapt_done_ = true;
  if (scenario_.adapt.enabled &&
      (ramp_done || accepted_ - last_adapt_ >= std::size_t(scenario_.adapt.interval)))
    adapt();
  if (options_.write_outputs && scenario_.output.vtk_interval > 0 &&
      accepted_ % std::size_t(scenario_.output.vtk_interval) == 0)
    write_vtk();
  if (options_.write_outputs && scenario_.output.checkpoint_interval > 0 &&
      accepted_ % std::size_t(scenario_.output.checkpoint_interval) == 0)
    write_checkpoint(out_dir_ + "/checkpoint.bin");
  return r;
}

RunSummary Simulation::run() {
  RunSummary s;
  const double t_end = scenario_.solver.t_end;
  const double eps = 1e-12 * std::max(1.0, t_end);
  std::size_t steps = 0;
  if (accepted_ == 0 && options_.write_outputs && scenario_.output.vtk_interval > 0) write_vtk();
  while (true) {
    if (bdf_->t() >= t_end - eps) {
      s.reason = "t_end";
      break;
    }
    if (steady_.steady(scenario_.ramp_time)) {
      s.reason = "steady";
      break;
    }
    if (options_.max_steps > 0 && steps >= options_.max_steps) {
      s.reason = "step_limit";
      break;
    }
    step();
    ++steps;
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (elapsed > scenario_.solver.wall_clock_limit) {
      s.reason = "wall_clock";
      s.exit_code = 5;
      break;
    }
  }
  finalize(s);
  return s;
}

}  // namespace wavebem
