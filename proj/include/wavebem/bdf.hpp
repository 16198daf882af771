#pragma once

#include <deque>
#include <functional>
#include <iosfwd>
#include <vector>

#include "wavebem/common.hpp"
#include "wavebem/krylov.hpp"

namespace wavebem {

// Residual failure the integrator may recover from by shrinking the step
// (tangled geometry, projection divergence).
class RecoverableError : public Error {
 public:
  using Error::Error;
};

// Implicit system F(t, y, y') = 0.
class DaeSystem {
 public:
  virtual ~DaeSystem() = default;
  virtual std::size_t size() const = 0;
  // 1 for differential components, 0 for algebraic ones.
  virtual std::vector<char> differential() const = 0;
  virtual void residual(double t, const VectorXd& y, const VectorXd& yp, VectorXd& r) = 0;
  // Called before a Newton solve with J = dF/dy + alpha dF/dy'.
  virtual void setup_jacobian(double /*t*/, const VectorXd& /*y*/, const VectorXd& /*yp*/,
                              double /*alpha*/) {}
  // out = dF/dy dy + dF/dy' dyp. The default uses a one-sided difference of
  // residual() with increment sqrt(eps) (1 + |y|) / |(dy, dyp)|; `r` is F(t, y, y').
  virtual void directional_derivative(double t, const VectorXd& y, const VectorXd& yp,
                                      const VectorXd& r, const VectorXd& dy, const VectorXd& dyp,
                                      VectorXd& out);
  // out = J v = directional_derivative(v, alpha v).
  virtual void jacobian_times(double t, const VectorXd& y, const VectorXd& yp, double alpha,
                              const VectorXd& r, const VectorXd& v, VectorXd& out);
  // out ≈ J^-1 v.
  virtual void precondition(const VectorXd& v, VectorXd& out) { out = v; }
};

// Weighted RMS norm with weights 1 / (rtol |y_i| + atol_i); entries with
// mask 0 are skipped when a mask is given.
struct ErrorWeights {
  VectorXd w;
  double norm(const VectorXd& v, const std::vector<char>* mask = nullptr) const;
};
ErrorWeights error_weights(const VectorXd& y, double rtol, const VectorXd& atol);

// Coefficients alpha_i with y'(t_0) ≈ (1/h) sum_i alpha_i y(t_i), h = t_0 - t_1,
// exact for polynomials of degree q = times.size() - 1. times[0] is the new time.
std::vector<double> bdf_coefficients(const std::vector<double>& times);

// Past states, newest first.
struct BdfHistory {
  std::deque<double> t;
  std::deque<VectorXd> y;
  VectorXd yp0;  // derivative at the oldest state when only one is stored
  int order = 1;
  double h = 0.0;
  int equal_steps = 0;  // consecutive accepted steps with this h and order
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

// y'_n = h_n^-1 sum_{i=0}^{q} alpha_{n,i} y_{n-i} from the q newest history
// entries. Throws SolverError when fewer than q are stored.
VectorXd bdf_derivative(const BdfHistory& history, double t_n, const VectorXd& y_n, int q);

struct NewtonParams {
  double tol = 1e-8;  // on the weighted norm of the residual (residual mode)
  int max_iterations = 10;
  GmresParams gmres;
};
struct NewtonResult {
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  int linear_iterations = 0;
};
using ResidualFunction = std::function<void(const VectorXd& y, VectorXd& r)>;
using PreconditionerFunction = std::function<void(const VectorXd& v, VectorXd& out)>;
// Newton iteration with matrix-free difference Jacobians and preconditioned
// GMRES; stops when the weighted residual norm (unit weights by default)
// drops to tol.
NewtonResult newton_solve(const ResidualFunction& f, VectorXd& y, const NewtonParams& params,
                          const PreconditionerFunction& prec = {}, const VectorXd& weights = {});

struct StepDecision {
  bool accept = false;
  double h = 0.0;
  int order = 1;
};
// factor = 0.9 err^(-1/(q+1)). Accepted steps grow by min(2, factor) when
// factor >= 1.5, keep h for 1 <= factor < 1.5 and shrink by max(1/4, factor)
// below; rejections use a factor clamped to [1/4, 0.9].
StepDecision step_controller(double err, int q, double h);

struct BdfParams {
  double rtol = 1e-6;
  double atol = 1e-8;
  VectorXd atol_vector;  // per component, overrides atol when sized
  int max_order = 5;
  double h_init = 1e-3;
  double h_min = 1e-10;
  double h_max = 1e30;
  int newton_max_iterations = 4;
  GmresParams gmres{100, 1e-10, 0.0, 500};
  bool fixed_step = false;  // no error control, h = h_init, order ramps to max_order
  bool error_on_algebraic = false;
  int max_rejections = 30;  // consecutive failures before SolverError
};

struct StepRecord {
  double t = 0.0;
  double h = 0.0;
  int order = 1;
  int newton_iterations = 0;
  int linear_iterations = 0;
  double residual_norm = 0.0;
  double error_norm = 0.0;
  bool accepted = false;
};

class BdfIntegrator {
 public:
  BdfIntegrator(DaeSystem& system, BdfParams params);

  // Clears the history; yp0 is the derivative at t0 used by the first predictor.
  void initialize(double t0, const VectorXd& y0, const VectorXd& yp0);
  // Replaces the history with exact past values (newest first) and the order.
  void seed_history(const std::vector<double>& t, const std::vector<VectorXd>& y, int order,
                    double h);
  // Newton solve at t for the algebraic components of y and the derivatives
  // of the differential ones, differential y frozen. Returns the iteration count.
  int consistent_initial_conditions(double t, VectorXd& y, VectorXd& yp, double tol = 1e-10);

  // One accepted step not beyond t_stop. Throws SolverError on h < h_min or
  // too many rejections.
  StepRecord step(double t_stop);
  void integrate_to(double t_end);

  double t() const { return hist_.t.front(); }
  const VectorXd& y() const { return hist_.y.front(); }
  VectorXd yp() const;
  int order() const { return hist_.order; }
  double h() const { return hist_.h; }
  const BdfHistory& history() const { return hist_; }
  void restore(const BdfHistory& h) {
    hist_ = h;
    reset_jacobian();
  }
  // Forces a fresh setup_jacobian() at the next Newton solve.
  void reset_jacobian() {
    need_setup_ = true;
    last_alpha_ = 0.0;
  }
  const BdfParams& params() const { return params_; }

  std::function<void(const StepRecord&)> on_step;

 private:
  VectorXd predict(double t_n, int q) const;
  double error_estimate(int k, double t_n, const VectorXd& y_n) const;
  bool newton(double t_n, double h, int q, VectorXd& y, StepRecord& rec);

  DaeSystem& sys_;
  BdfParams params_;
  BdfHistory hist_;
  std::vector<char> diff_;
  double last_alpha_ = 0.0;
  bool need_setup_ = true;
};

void write_step_log_header(std::ostream& os);
void write_step_log(std::ostream& os, const StepRecord& r);

}  // namespace wavebem
