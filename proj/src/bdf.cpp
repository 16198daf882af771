#include "wavebem/bdf.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace wavebem {

namespace {

constexpr double newton_conv = 0.33;  // Newton update tolerance in weighted norm
constexpr double lin_conv = 0.05;     // GMRES tolerance relative to newton_conv

double sqrt_eps() { return std::sqrt(std::numeric_limits<double>::epsilon()); }

// Lagrange extrapolation of (t_i, y_i) to t.
VectorXd lagrange(const std::vector<double>& ts, const std::vector<const VectorXd*>& ys, double t) {
  VectorXd out = VectorXd::Zero(ys[0]->size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    double l = 1.0;
    for (std::size_t j = 0; j < ts.size(); ++j)
      if (j != i) l *= (t - ts[j]) / (ts[i] - ts[j]);
    out += l * *ys[i];
  }
  return out;
}

// (k)-th order divided difference of the given points.
VectorXd divided_difference(std::vector<double> ts, std::vector<VectorXd> ys) {
  for (std::size_t level = 1; level < ts.size(); ++level)
    for (std::size_t i = 0; i + level < ts.size(); ++i)
      ys[i] = (ys[i] - ys[i + 1]) / (ts[i] - ts[i + level]);
  return ys[0];
}

}  // namespace

void DaeSystem::directional_derivative(double t, const VectorXd& y, const VectorXd& yp,
                                       const VectorXd& r, const VectorXd& dy, const VectorXd& dyp,
                                       VectorXd& out) {
  const double vn = std::sqrt(dy.squaredNorm() + dyp.squaredNorm());
  if (vn == 0.0) {
    out = VectorXd::Zero(r.size());
    return;
  }
  const double sigma = sqrt_eps() * (1.0 + y.norm()) / vn;
  VectorXd r1(r.size());
  residual(t, y + sigma * dy, yp + sigma * dyp, r1);
  out = (r1 - r) / sigma;
}

void DaeSystem::jacobian_times(double t, const VectorXd& y, const VectorXd& yp, double alpha,
                               const VectorXd& r, const VectorXd& v, VectorXd& out) {
  directional_derivative(t, y, yp, r, v, VectorXd(alpha * v), out);
}

double ErrorWeights::norm(const VectorXd& v, const std::vector<char>* mask) const {
  double s = 0.0;
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (mask && !(*mask)[std::size_t(i)]) continue;
    const double e = v[i] * w[i];
    s += e * e;
    ++n;
  }
  return n ? std::sqrt(s / double(n)) : 0.0;
}

ErrorWeights error_weights(const VectorXd& y, double rtol, const VectorXd& atol) {
  ErrorWeights e;
  e.w.resize(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) e.w[i] = 1.0 / (rtol * std::abs(y[i]) + atol[i]);
  return e;
}

std::vector<double> bdf_coefficients(const std::vector<double>& times) {
  const std::size_t m = times.size();
  if (m < 2) throw SolverError("BDF coefficients need at least two time points");
  const double h = times[0] - times[1];
  std::vector<double> a(m, 0.0);
  for (std::size_t j = 1; j < m; ++j) a[0] += 1.0 / (times[0] - times[j]);
  for (std::size_t i = 1; i < m; ++i) {
    double num = 1.0, den = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      if (j != 0) num *= times[0] - times[j];
      den *= times[i] - times[j];
    }
    a[i] = num / den;
  }
  for (auto& v : a) v *= h;
  return a;
}

VectorXd bdf_derivative(const BdfHistory& history, double t_n, const VectorXd& y_n, int q) {
  if (q < 1 || std::size_t(q) > history.t.size())
    throw SolverError("BDF history too short for order " + std::to_string(q));
  std::vector<double> ts{t_n};
  for (int i = 0; i < q; ++i) ts.push_back(history.t[std::size_t(i)]);
  const auto a = bdf_coefficients(ts);
  VectorXd d = a[0] * y_n;
  for (int i = 1; i <= q; ++i) d += a[std::size_t(i)] * history.y[std::size_t(i - 1)];
  return d / (t_n - ts[1]);
}

NewtonResult newton_solve(const ResidualFunction& f, VectorXd& y, const NewtonParams& params,
                          const PreconditionerFunction& prec, const VectorXd& weights) {
  const Eigen::Index n = y.size();
  const VectorXd w = weights.size() == n ? weights : VectorXd::Ones(n);
  auto wnorm = [&](const VectorXd& v) { return std::sqrt((v.cwiseProduct(w)).squaredNorm() / double(n)); };
  NewtonResult res;
  VectorXd r(n);
  f(y, r);
  res.residual_norm = wnorm(r);
  while (res.residual_norm > params.tol && res.iterations < params.max_iterations) {
    const VectorXd r0 = r;
    const VectorXd y0 = y;
    auto op = [&](const VectorXd& v, VectorXd& out) {
      const double vn = v.norm();
      if (vn == 0.0) {
        out = VectorXd::Zero(n);
        return;
      }
      const double sigma = sqrt_eps() * (1.0 + y0.norm()) / vn;
      VectorXd r1(n);
      f(y0 + sigma * v, r1);
      out = (r1 - r0) / sigma;
    };
    auto pc = [&](const VectorXd& v, VectorXd& out) {
      if (prec)
        prec(v, out);
      else
        out = v;
    };
    VectorXd delta = VectorXd::Zero(n);
    const auto g = gmres(op, pc, VectorXd(-r0), delta, params.gmres);
    res.linear_iterations += g.iterations;
    y = y0 + delta;
    f(y, r);
    res.residual_norm = wnorm(r);
    ++res.iterations;
  }
  res.converged = res.residual_norm <= params.tol;
  return res;
}

StepDecision step_controller(double err, int q, double h) {
  StepDecision d;
  d.order = q;
  const double factor = err > 0 ? 0.9 * std::pow(err, -1.0 / (q + 1)) : 1e30;
  d.accept = err <= 1.0;
  if (d.accept) {
    if (factor >= 1.5)
      d.h = h * std::min(2.0, factor);
    else if (factor >= 1.0)
      d.h = h;
    else
      d.h = h * std::max(0.25, factor);
  } else {
    d.h = h * std::clamp(factor, 0.25, 0.9);
  }
  return d;
}

BdfIntegrator::BdfIntegrator(DaeSystem& system, BdfParams params)
    : sys_(system), params_(std::move(params)), diff_(system.differential()) {
  if (params_.max_order < 1 || params_.max_order > 5) throw SolverError("BDF order must be in 1..5");
  if (params_.atol_vector.size() != Eigen::Index(sys_.size()))
    params_.atol_vector = VectorXd::Constant(Eigen::Index(sys_.size()), params_.atol);
}

void BdfIntegrator::initialize(double t0, const VectorXd& y0, const VectorXd& yp0) {
  hist_ = BdfHistory{};
  hist_.t.push_back(t0);
  hist_.y.push_back(y0);
  hist_.yp0 = yp0;
  hist_.order = 1;
  hist_.h = std::min(params_.h_init, params_.h_max);
  need_setup_ = true;
}

void BdfIntegrator::seed_history(const std::vector<double>& t, const std::vector<VectorXd>& y,
                                 int order, double h) {
  if (t.size() != y.size() || t.empty()) throw SolverError("seed history size mismatch");
  hist_ = BdfHistory{};
  hist_.t.assign(t.begin(), t.end());
  hist_.y.assign(y.begin(), y.end());
  hist_.yp0 = VectorXd::Zero(y[0].size());
  hist_.order = std::min(order, int(t.size()));
  hist_.h = h;
  hist_.equal_steps = 0;
  need_setup_ = true;
}

VectorXd BdfIntegrator::yp() const {
  if (hist_.t.size() < 2) return hist_.yp0;
  const int q = std::min<int>(hist_.order, int(hist_.t.size()) - 1);
  BdfHistory past = hist_;
  past.t.pop_front();
  past.y.pop_front();
  return bdf_derivative(past, hist_.t.front(), hist_.y.front(), q);
}

VectorXd BdfIntegrator::predict(double t_n, int q) const {
  const std::size_t m = std::min<std::size_t>(std::size_t(q) + 1, hist_.t.size());
  if (m == 1) return hist_.y[0] + (t_n - hist_.t[0]) * hist_.yp0;
  std::vector<double> ts;
  std::vector<const VectorXd*> ys;
  for (std::size_t i = 0; i < m; ++i) {
    ts.push_back(hist_.t[i]);
    ys.push_back(&hist_.y[i]);
  }
  return lagrange(ts, ys, t_n);
}

// Local error estimate for order k at the new point: (1/(k+1)) (k+1)! h^(k+1)
// times the (k+1)-th divided difference through y_n and k+1 past values.
double BdfIntegrator::error_estimate(int k, double t_n, const VectorXd& y_n) const {
  std::vector<double> ts{t_n};
  std::vector<VectorXd> ys{y_n};
  for (int i = 0; i <= k; ++i) {
    ts.push_back(hist_.t[std::size_t(i)]);
    ys.push_back(hist_.y[std::size_t(i)]);
  }
  const double h = t_n - hist_.t[0];
  double fact = 1.0;
  for (int i = 2; i <= k + 1; ++i) fact *= i;
  const VectorXd dd = divided_difference(ts, ys) * (fact * std::pow(h, k + 1) / (k + 1));
  const auto w = error_weights(y_n, params_.rtol, params_.atol_vector);
  return w.norm(dd, params_.error_on_algebraic ? nullptr : &diff_);
}

bool BdfIntegrator::newton(double t_n, double h, int q, VectorXd& y, StepRecord& rec) {
  const Eigen::Index n = y.size();
  std::vector<double> ts{t_n};
  for (int i = 0; i < q; ++i) ts.push_back(hist_.t[std::size_t(i)]);
  const auto a = bdf_coefficients(ts);
  VectorXd tail = VectorXd::Zero(n);
  for (int i = 1; i <= q; ++i) tail += a[std::size_t(i)] * hist_.y[std::size_t(i - 1)];
  const double alpha = a[0] / h;
  auto ypof = [&](const VectorXd& v) -> VectorXd { return alpha * v + tail / h; };
  const auto ew = error_weights(y, params_.rtol, params_.atol_vector);
  const VectorXd W = ew.w / std::sqrt(double(n));
  try {
    if (need_setup_ || last_alpha_ == 0.0 || std::abs(alpha / last_alpha_ - 1.0) > 0.3) {
      sys_.setup_jacobian(t_n, y, ypof(y), alpha);
      last_alpha_ = alpha;
      need_setup_ = false;
    }
    VectorXd r(n);
    double old = 0.0;
    for (int m = 0; m < params_.newton_max_iterations; ++m) {
      const VectorXd yp = ypof(y);
      sys_.residual(t_n, y, yp, r);
      rec.residual_norm = ew.norm(r);
      if (!r.allFinite()) return false;
      auto op = [&](const VectorXd& s, VectorXd& out) {
        VectorXd jv;
        sys_.jacobian_times(t_n, y, yp, alpha, r, s.cwiseQuotient(W), jv);
        out = jv.cwiseProduct(W);
      };
      auto pc = [&](const VectorXd& s, VectorXd& out) {
        VectorXd z;
        sys_.precondition(s.cwiseQuotient(W), z);
        out = z.cwiseProduct(W);
      };
      GmresParams gp = params_.gmres;
      gp.abs_tol = lin_conv * newton_conv;
      VectorXd s = VectorXd::Zero(n);
      const auto g = gmres(op, pc, VectorXd(-r.cwiseProduct(W)), s, gp);
      rec.linear_iterations += g.iterations;
      const VectorXd delta = s.cwiseQuotient(W);
      if (!delta.allFinite()) return false;
      y += delta;
      rec.newton_iterations = m + 1;
      const double dn = ew.norm(delta);
      if (m == 0) {
        old = dn;
        if (dn <= 1e-4 * newton_conv) return true;
        continue;
      }
      const double rate = std::pow(dn / old, 1.0 / m);
      if (rate > 0.9) return false;
      if (rate / (1.0 - rate) * dn <= newton_conv) return true;
    }
  } catch (const RecoverableError&) {
    return false;
  } catch (const GeometryError&) {
    return false;
  }
  return false;
}

StepRecord BdfIntegrator::step(double t_stop) {
  int failures = 0;
  for (;;) {
    const double t0 = hist_.t.front();
    double h = std::min(hist_.h, params_.h_max);
    bool clipped = false;
    if (t0 + h >= t_stop - 1e-12 * std::max(1.0, std::abs(t_stop))) {
      h = t_stop - t0;
      clipped = true;
    }
    if (!params_.fixed_step && h < params_.h_min)
      throw SolverError("step size " + std::to_string(h) + " below h_min at t = " + std::to_string(t0));
    int q = std::min<int>(hist_.order, int(hist_.t.size()));
    if (params_.fixed_step) q = std::min<int>(params_.max_order, int(hist_.t.size()));
    const double t_n = t0 + h;
    StepRecord rec;
    rec.t = t_n;
    rec.h = h;
    rec.order = q;
    VectorXd y = predict(t_n, q);
    const VectorXd y_pred = y;
    const bool ok = newton(t_n, h, q, y, rec);
    if (!ok) {
      ++failures;
      ++hist_.rejected_steps;
      if (on_step) on_step(rec);
      if (params_.fixed_step || failures > params_.max_rejections)
        throw SolverError("Newton iteration failed at t = " + std::to_string(t_n));
      hist_.h = 0.25 * h;
      hist_.equal_steps = 0;
      need_setup_ = true;
      continue;
    }
    double err = 0.0;
    if (!params_.fixed_step) {
      const auto w = error_weights(y, params_.rtol, params_.atol_vector);
      const auto* mask = params_.error_on_algebraic ? nullptr : &diff_;
      if (hist_.t.size() >= std::size_t(q) + 1)
        err = error_estimate(q, t_n, y);
      else
        err = w.norm(VectorXd(y - y_pred), mask);
    }
    rec.error_norm = err;
    if (err > 1.0) {
      ++failures;
      ++hist_.rejected_steps;
      if (on_step) on_step(rec);
      if (failures > params_.max_rejections)
        throw SolverError("error test failed repeatedly at t = " + std::to_string(t_n));
      const auto d = step_controller(err, q, h);
      hist_.h = d.h;
      if (failures >= 3) {
        hist_.order = 1;
        hist_.h = 0.25 * h;
      }
      hist_.equal_steps = 0;
      continue;
    }
    // Accepted.
    rec.accepted = true;
    int new_q = q;
    double new_h = h;
    if (!params_.fixed_step) {
      double best = err;
      int best_k = q;
      auto factor = [](double e, int k) { return e > 0 ? std::pow(e, -1.0 / (k + 1)) : 1e30; };
      if (q > 1) {
        const double e = error_estimate(q - 1, t_n, y);
        if (factor(e, q - 1) > factor(best, best_k)) {
          best = e;
          best_k = q - 1;
        }
      }
      if (best_k == q && q < params_.max_order && hist_.equal_steps >= q + 1 &&
          hist_.t.size() >= std::size_t(q) + 2) {
        const double e = error_estimate(q + 1, t_n, y);
        if (factor(e, q + 1) > factor(best, best_k)) {
          best = e;
          best_k = q + 1;
        }
      }
      const auto d = step_controller(best, best_k, h);
      new_q = best_k;
      new_h = std::min(d.h, params_.h_max);
    }
    hist_.t.push_front(t_n);
    hist_.y.push_front(y);
    while (hist_.t.size() > 6) {
      hist_.t.pop_back();
      hist_.y.pop_back();
    }
    ++hist_.accepted_steps;
    const bool same = new_q == q && new_h == h && !clipped;
    hist_.equal_steps = same ? hist_.equal_steps + 1 : 0;
    hist_.order = params_.fixed_step ? std::min<int>(params_.max_order, int(hist_.t.size())) : new_q;
    // A step shortened to hit t_stop does not shrink the next one.
    hist_.h = clipped && !params_.fixed_step ? std::max(new_h, std::min(hist_.h, params_.h_max)) : new_h;
    if (clipped && params_.fixed_step) hist_.h = params_.h_init;
    if (on_step) on_step(rec);
    return rec;
  }
}

void BdfIntegrator::integrate_to(double t_end) {
  while (t() < t_end - 1e-12 * std::max(1.0, std::abs(t_end))) step(t_end);
}

int BdfIntegrator::consistent_initial_conditions(double t, VectorXd& y, VectorXd& yp, double tol) {
  const Eigen::Index n = y.size();
  const double alpha = 1.0 / params_.h_init;
  sys_.setup_jacobian(t, y, yp, alpha);
  need_setup_ = true;
  // Unknowns: algebraic y and differential y' / alpha.
  VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = diff_[std::size_t(i)] ? yp[i] / alpha : y[i];
  const VectorXd y0 = y;
  auto unpack = [&](const VectorXd& v, VectorXd& yy, VectorXd& pp) {
    yy = y0;
    pp = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (diff_[std::size_t(i)])
        pp[i] = alpha * v[i];
      else
        yy[i] = v[i];
    }
  };
  VectorXd yy, pp, r(n);
  NewtonResult res;
  for (int m = 0; m < 10; ++m) {
    unpack(z, yy, pp);
    sys_.residual(t, yy, pp, r);
    res.residual_norm = r.norm() / std::sqrt(double(std::max<Eigen::Index>(n, 1)));
    res.iterations = m;
    if (!r.allFinite()) break;
    if (res.residual_norm <= tol) {
      res.converged = true;
      break;
    }
    auto op = [&](const VectorXd& s, VectorXd& out) {
      VectorXd dy = VectorXd::Zero(n), dyp = VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (diff_[std::size_t(i)])
          dyp[i] = alpha * s[i];
        else
          dy[i] = s[i];
      }
      sys_.directional_derivative(t, yy, pp, r, dy, dyp, out);
    };
    auto pc = [&](const VectorXd& v, VectorXd& out) { sys_.precondition(v, out); };
    GmresParams gp = params_.gmres;
    gp.abs_tol = 1e-3 * tol;
    VectorXd s = VectorXd::Zero(n);
    gmres(op, pc, VectorXd(-r), s, gp);
    z += s;
  }
  if (!res.converged)
    throw SolverError("consistent initialization failed (residual " + std::to_string(res.residual_norm) + ")");
  unpack(z, y, yp);
  return res.iterations;
}

void write_step_log_header(std::ostream& os) {
  os << "t,h,q,newton_iterations,residual_norm,error_norm,accepted\n";
}

void write_step_log(std::ostream& os, const StepRecord& r) {
  os << std::setprecision(17) << r.t << ',' << r.h << ',' << r.order << ',' << r.newton_iterations
     << ',' << r.residual_norm << ',' << r.error_norm << ',' << (r.accepted ? 1 : 0) << '\n';
}

}  // namespace wavebem
