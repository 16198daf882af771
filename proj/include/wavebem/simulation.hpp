#pragma once

#include <chrono>
#include <deque>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "wavebem/adaptivity.hpp"
#include "wavebem/bdf.hpp"
#include "wavebem/io.hpp"
#include "wavebem/scenario.hpp"
#include "wavebem/ship_wave_dae.hpp"

namespace wavebem {

enum class RunPhase : std::uint8_t { initialize, integrate, adapt, finalize };

// initialize -> integrate, integrate <-> adapt, integrate -> finalize.
bool legal_transition(RunPhase from, RunPhase to);

// Steady once the samples cover `window` seconds after t_min and their
// maximum is below the threshold.
class SteadyDetector {
 public:
  SteadyDetector(double window, double threshold) : window_(window), threshold_(threshold) {}
  void add(double t, double value);
  bool steady(double t_min) const;
  const std::deque<std::pair<double, double>>& samples() const { return samples_; }
  void set_samples(const std::vector<std::pair<double, double>>& s) { samples_.assign(s.begin(), s.end()); }

 private:
  double window_, threshold_;
  std::deque<std::pair<double, double>> samples_;
};

struct RunOptions {
  std::string out_dir;          // empty: scenario.output.dir
  bool write_outputs = true;
  std::ostream* log = nullptr;  // progress lines
  std::size_t max_steps = 0;    // accepted steps per run() call, 0 unlimited
};

struct RunSummary {
  int exit_code = 0;  // 0 done, 5 wall clock exceeded
  std::string reason;  // t_end, steady, step_limit, wall_clock
  double t = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
  std::size_t adapt_cycles = 0;
  std::size_t n_dofs = 0;
  double max_abs_eta = 0.0;
  double min_beach_rate = 0.0;
};

// Process exit code for an exception thrown by a run: 2 config, 3 solver,
// 4 geometry, 1 otherwise.
int exit_code_for(const std::exception& e);

class Simulation {
 public:
  // Builds the domain and solves for consistent initial values.
  Simulation(const Scenario& scenario, RunOptions options);
  // Continues from a checkpoint; overrides apply to its embedded config.
  Simulation(const Checkpoint& checkpoint, const std::vector<ConfigOverride>& overrides, RunOptions options);
  ~Simulation();

  // Integrates until t_end, steady state, the step limit or the wall clock,
  // then finalizes (profiles, fields, checkpoint).
  RunSummary run();
  // One accepted step followed by the cadence work (adapt, VTK, checkpoint).
  StepRecord step();

  Checkpoint checkpoint() const;
  void write_checkpoint(const std::string& path);

  double t() const { return bdf_->t(); }
  const VectorXd& y() const { return bdf_->y(); }
  VectorXd yp() const { return bdf_->yp(); }
  ShipWaveDae& dae() { return *dae_; }
  const BdfIntegrator& integrator() const { return *bdf_; }
  const AdaptiveMesh& forest() const { return forest_; }
  const Scenario& scenario() const { return scenario_; }
  RunPhase phase() const { return phase_; }
  std::size_t accepted_steps() const { return accepted_; }
  const std::string& out_dir() const { return out_dir_; }

  // One adaptation cycle at the current state.
  void adapt();
  // Port and starboard waterline profiles, bow to stern.
  std::pair<std::vector<ProfileSample>, std::vector<ProfileSample>> waterline_profiles() const;
  // max |d eta / dt| over the free surface at the current step.
  double max_eta_rate() const;

 private:
  void set_phase(RunPhase p);
  void build_system(bool consistent);
  BdfParams bdf_params() const;
  void open_outputs(bool append);
  void record_step(const StepRecord& r);
  void write_vtk();
  void finalize(RunSummary& s);

  Scenario scenario_;
  RunOptions options_;
  std::string out_dir_;
  RunPhase phase_ = RunPhase::initialize;
  AdaptiveMesh forest_;
  LeafMesh leaf_;
  std::unique_ptr<ShipWaveDae> dae_;
  std::unique_ptr<BdfIntegrator> bdf_;
  SteadyDetector steady_;
  std::size_t accepted_ = 0, last_adapt_ = 0, vtk_index_ = 0, adapt_cycles_ = 0;
  bool ramp_adapt_done_ = false;
  double min_beach_rate_ = 0.0;
  std::chrono::steady_clock::time_point start_;
  std::ofstream step_log_, diag_log_, force_log_, adapt_log_;
};

}  // namespace wavebem
