#pragma once

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fluxlab/domain_fields.hpp"

namespace fluxlab {

struct DiscretePath {
  std::vector<Vec2> knots;  // cover points
  std::vector<double> times;

  void validate(const Torus& T) const {
    if (knots.size() < 2 || knots.size() != times.size())
      fail(ErrorCode::InvalidInput, "path needs >= 2 knots with matching times");
    for (size_t k = 1; k < knots.size(); ++k) {
      if (!(times[k] > times[k - 1])) fail(ErrorCode::InvalidInput, "path times must increase strictly");
      for (int i = 0; i < T.dim; ++i)
        if (std::abs(knots[k][i] - knots[k - 1][i]) >= 0.5 * T.periods[i])
          fail(ErrorCode::AmbiguousWinding, "consecutive knots more than half a period apart");
    }
  }

  static DiscretePath uniform(std::vector<Vec2> knots, double T) {
    DiscretePath p;
    const size_t n = knots.size();
    p.knots = std::move(knots);
    for (size_t k = 0; k < n; ++k) p.times.push_back(T * k / (n - 1));
    return p;
  }
};

/// Quadrature pieces shared by the action and its companion identities.
struct ActionTerms {
  double action = 0;       // 1/4 sum dt |phidot - v|^2
  double plus_form = 0;    // 1/4 sum dt |phidot + v|^2
  double cross = 0;        // sum dt <phidot, v>
  double speed_sq = 0;     // sum dt |phidot|^2
  double drift_sq = 0;     // sum dt |v|^2
};

inline ActionTerms action_terms(const TiltedDrift& drift, const DiscretePath& p) {
  ActionTerms t;
  for (size_t k = 0; k + 1 < p.knots.size(); ++k) {
    const double dt = p.times[k + 1] - p.times[k];
    const Vec2 vel = (p.knots[k + 1] - p.knots[k]) / dt;
    const Vec2 v = drift(0.5 * (p.knots[k] + p.knots[k + 1]));
    t.action += 0.25 * dt * (vel - v).squaredNorm();
    t.plus_form += 0.25 * dt * (vel + v).squaredNorm();
    t.cross += dt * vel.dot(v);
    t.speed_sq += dt * vel.squaredNorm();
    t.drift_sq += dt * v.squaredNorm();
  }
  return t;
}

inline double action(const TiltedDrift& drift, const DiscretePath& p) {
  p.validate(drift.torus());
  return action_terms(drift, p).action;
}

/// Lower bound (|phidot|_2 - |v|_2)^2 / 4 under the same quadrature.
inline double action_l2_bound(const TiltedDrift& drift, const DiscretePath& p) {
  const auto t = action_terms(drift, p);
  const double d = std::sqrt(t.speed_sq) - std::sqrt(t.drift_sq);
  return 0.25 * d * d;
}

struct ActionMinOptions {
  std::vector<double> horizons{5, 10, 20, 40};
  int knots_n = 200;
  int max_iterations = 10000;
  std::vector<Vec2> avoid;      // index-0 zeros that interior knots must not visit
  double avoid_radius = -1;     // default 1e-3 * min period
};

struct ActionMinResult {
  DiscretePath path;
  double value = std::numeric_limits<double>::infinity();  // upper bound on the quasipotential
  double horizon = 0;
  bool converged = false;
  int rejected = 0;
};

namespace detail {

class DiscreteAction final : public ceres::FirstOrderFunction {
 public:
  DiscreteAction(const TiltedDrift& d, Vec2 a, Vec2 b, int n, double T)
      : d_(d), a_(std::move(a)), b_(std::move(b)), n_(n), dt_(T / (n - 1)) {}

  int NumParameters() const override { return 2 * (n_ - 2); }

  bool Evaluate(const double* x, double* f, double* grad) const override {
    auto knot = [&](int k) -> Vec2 {
      if (k == 0) return a_;
      if (k == n_ - 1) return b_;
      return Vec2(x[2 * (k - 1)], x[2 * (k - 1) + 1]);
    };
    *f = 0;
    if (grad) std::fill(grad, grad + NumParameters(), 0.0);
    for (int k = 0; k + 1 < n_; ++k) {
      const Vec2 p0 = knot(k), p1 = knot(k + 1);
      const Vec2 m = 0.5 * (p0 + p1);
      const Vec2 r = (p1 - p0) / dt_ - d_(m);
      *f += 0.25 * dt_ * r.squaredNorm();
      if (grad) {
        const Vec2 jr = d_.jacobian(m).transpose() * r;
        // dS/dp0 = 1/2 (-r - dt/2 J^T r), dS/dp1 = 1/2 (r - dt/2 J^T r)
        const Vec2 g0 = 0.5 * (-r - 0.5 * dt_ * jr), g1 = 0.5 * (r - 0.5 * dt_ * jr);
        if (k > 0) grad[2 * (k - 1)] += g0[0], grad[2 * (k - 1) + 1] += g0[1];
        if (k + 1 < n_ - 1) grad[2 * k] += g1[0], grad[2 * k + 1] += g1[1];
      }
    }
    if (d_.dim() == 1 && grad)
      for (int i = 1; i < NumParameters(); i += 2) grad[i] = 0;
    return std::isfinite(*f);
  }

 private:
  const TiltedDrift& d_;
  Vec2 a_, b_;
  int n_;
  double dt_;
};

}  // namespace detail

namespace detail {

/// Forward integral curves from `from` (pushed off along unstable directions when it is a zero).
/// Returns the reversed curve from `to` to `from` resampled to n knots when one passes near `to`.
inline std::vector<std::vector<Vec2>> descent_guesses(const TiltedDrift& d, const Vec2& from, const Vec2& to, int n) {
  const Torus& T = d.torus();
  std::vector<Vec2> pushes;
  if (d(from).norm() < 1e-8) {
    const double delta = 1e-4 * T.min_period();
    if (d.dim() == 1) {
      pushes = {Vec2(delta, 0), Vec2(-delta, 0)};
    } else {
      Eigen::SelfAdjointEigenSolver<Mat2> es(-d.jacobian(from));
      for (int i = 0; i < 2; ++i)
        if (es.eigenvalues()[i] < 0) {
          pushes.push_back(delta * es.eigenvectors().col(i));
          pushes.push_back(-delta * es.eigenvectors().col(i));
        }
    }
  } else {
    pushes.push_back(Vec2::Zero());
  }
  std::vector<std::vector<Vec2>> out;
  const double h = 1e-3 * T.min_period(), reach = 0.02 * T.min_period();
  for (const Vec2& push : pushes) {
    std::vector<Vec2> traj{from, from + push};
    Vec2 x = traj.back();
    int best = -1;
    double best_dist = reach;
    for (int s = 0; s < 400000; ++s) {
      const Vec2 v = d(x);
      x = x + h * v;  // explicit Euler is enough for an initial guess
      traj.push_back(x);
      const double dist = (x - to).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = static_cast<int>(traj.size()) - 1;
      }
      if (best >= 0 && dist > 4 * reach) break;
      if (v.norm() < 1e-10) break;
    }
    if (best < 0) continue;
    traj.resize(best + 1);
    std::vector<Vec2> knots(n);
    for (int k = 0; k < n; ++k) {
      const double pos = static_cast<double>(k) / (n - 1) * best;
      const int i = std::min(static_cast<int>(pos), best - 1);
      const double f = pos - i;
      knots[k] = (1 - f) * traj[i] + f * traj[i + 1];
    }
    knots.front() = from;
    knots.back() = to;
    out.push_back(std::move(knots));
  }
  return out;
}

}  // namespace detail

/// Minimizes the discrete action between fixed cover endpoints over a sweep of horizons.
/// Starts: straight and bent chords, reversed or forward integral curves joining the endpoints,
/// and the best path from the previous horizon.
inline ActionMinResult minimize_action(const TiltedDrift& drift, const Vec2& start, const Vec2& end,
                                       const ActionMinOptions& opt = {}) {
  if (opt.knots_n < 3) fail(ErrorCode::InvalidInput, "knots_n must be at least 3");
  const Torus& Tor = drift.torus();
  const double radius = opt.avoid_radius > 0 ? opt.avoid_radius : 1e-3 * Tor.min_period();
  const int n = opt.knots_n;
  ActionMinResult best;

  if ((end - start).norm() == 0) {
    // the infimum over horizons is attained as T -> 0
    best.path.knots = {start, end};
    best.path.times = {0.0, 1e-300};
    best.value = 0;
    best.converged = true;
    return best;
  }

  const Vec2 chord = end - start;
  Vec2 normal(-chord[1], chord[0]);
  std::vector<std::vector<Vec2>> guesses;
  for (double bend : {0.0, 0.25, -0.25, 0.5, -0.5}) {
    if (drift.dim() == 1 && bend != 0) continue;
    std::vector<Vec2> k(n);
    for (int i = 0; i < n; ++i) {
      const double s = static_cast<double>(i) / (n - 1);
      k[i] = start + s * chord + bend * 4 * s * (1 - s) * normal;
    }
    guesses.push_back(std::move(k));
  }
  for (auto& g : detail::descent_guesses(drift, end, start, n)) {
    std::reverse(g.begin(), g.end());
    guesses.push_back(std::move(g));
  }
  for (auto& g : detail::descent_guesses(drift, start, end, n)) guesses.push_back(std::move(g));

  std::vector<Vec2> carried;
  for (double T : opt.horizons) {
    if (!(T > 0)) fail(ErrorCode::InvalidInput, "horizon must be positive");
    auto starts = guesses;
    if (!carried.empty()) starts.push_back(carried);
    double horizon_best = std::numeric_limits<double>::infinity();
    for (const auto& init : starts) {
      std::vector<double> x(2 * (n - 2));
      for (int k = 1; k < n - 1; ++k) {
        x[2 * (k - 1)] = init[k][0];
        x[2 * (k - 1) + 1] = init[k][1];
      }
      ceres::GradientProblem problem(new detail::DiscreteAction(drift, start, end, n, T));
      ceres::GradientProblemSolver::Options o;
      o.max_num_iterations = opt.max_iterations;
      o.function_tolerance = 1e-14;
      o.gradient_tolerance = 1e-12;
      o.parameter_tolerance = 1e-14;
      o.logging_type = ceres::SILENT;
      ceres::GradientProblemSolver::Summary sum;
      ceres::Solve(o, problem, x.data(), &sum);

      std::vector<Vec2> knots(n);
      knots[0] = start;
      knots[n - 1] = end;
      for (int k = 1; k < n - 1; ++k) knots[k] = Vec2(x[2 * (k - 1)], drift.dim() == 1 ? 0.0 : x[2 * (k - 1) + 1]);
      bool rejected = false;
      for (int k = 1; k < n - 1 && !rejected; ++k)
        for (const auto& z : opt.avoid)
          if (Tor.distance(knots[k], z) < radius && Tor.distance(start, z) > radius && Tor.distance(end, z) > radius)
            rejected = true;
      if (rejected) {
        ++best.rejected;
        continue;
      }
      DiscretePath path = DiscretePath::uniform(knots, T);
      const double val = action_terms(drift, path).action;
      if (val < horizon_best) {
        horizon_best = val;
        carried = knots;
      }
      if (val < best.value) {
        best.value = val;
        best.path = std::move(path);
        best.horizon = T;
        best.converged = sum.termination_type == ceres::CONVERGENCE;
      }
    }
  }
  return best;
}

}  // namespace fluxlab
