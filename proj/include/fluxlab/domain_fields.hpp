#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fluxlab/error.hpp"

namespace fluxlab {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec2i = Eigen::Vector2i;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Flat torus of dimension 1 or 2. In 1D the y coordinate is carried but ignored.
struct Torus {
  int dim = 2;
  Vec2 periods{kTwoPi, kTwoPi};

  Torus() = default;
  Torus(int d, Vec2 p) : dim(d), periods(std::move(p)) {
    if (dim != 1 && dim != 2) fail(ErrorCode::InvalidInput, "torus dimension must be 1 or 2");
    if (periods[0] <= 0 || (dim == 2 && periods[1] <= 0))
      fail(ErrorCode::InvalidInput, "torus periods must be positive");
    if (dim == 1) periods[1] = 1.0;
  }
  static Torus circle(double L = kTwoPi) { return Torus(1, Vec2(L, 1.0)); }
  static Torus square(double L = kTwoPi) { return Torus(2, Vec2(L, L)); }

  double min_period() const { return dim == 1 ? periods[0] : periods.minCoeff(); }

  Vec2 wrap(const Vec2& x) const {
    Vec2 w = x;
    for (int i = 0; i < dim; ++i) {
      w[i] = x[i] - periods[i] * std::floor(x[i] / periods[i]);
      if (w[i] >= periods[i]) w[i] -= periods[i];
    }
    if (dim == 1) w[1] = 0.0;
    return w;
  }

  /// Integer cell of the fundamental domain containing a cover point.
  Vec2i cell(const Vec2& x) const {
    Vec2i k(0, 0);
    for (int i = 0; i < dim; ++i) k[i] = static_cast<int>(std::floor(x[i] / periods[i]));
    return k;
  }

  Vec2 deck(const Vec2i& k) const {
    return Vec2(k[0] * periods[0], dim == 2 ? k[1] * periods[1] : 0.0);
  }

  /// Minimal-image displacement between two torus points.
  Vec2 displacement(const Vec2& a, const Vec2& b) const {
    Vec2 d = b - a;
    for (int i = 0; i < dim; ++i) d[i] -= periods[i] * std::round(d[i] / periods[i]);
    if (dim == 1) d[1] = 0.0;
    return d;
  }

  double distance(const Vec2& a, const Vec2& b) const { return displacement(a, b).norm(); }
};

// ---------------------------------------------------------------- potentials

struct TrigTerm {
  double kx = 0, ky = 0, amp = 0, phase = 0;
};

namespace detail {

struct Nr2006Potential {
  double a = std::acos(0.25);

  double value(const Vec2& p) const {
    const double w = p[0] - p[1] - 4.0 * std::cos(p[1] - a);
    return 3.0 - std::sin(p[1]) - 2.0 * std::cos(w);
  }
  Vec2 gradient(const Vec2& p) const {
    const double w = p[0] - p[1] - 4.0 * std::cos(p[1] - a);
    const double dw = -1.0 + 4.0 * std::sin(p[1] - a);
    const double sw = 2.0 * std::sin(w);
    return Vec2(sw, sw * dw - std::cos(p[1]));
  }
  Mat2 hessian(const Vec2& p) const {
    const double w = p[0] - p[1] - 4.0 * std::cos(p[1] - a);
    const double dw = -1.0 + 4.0 * std::sin(p[1] - a);
    const double cw = 2.0 * std::cos(w), sw = 2.0 * std::sin(w);
    Mat2 h;
    h(0, 0) = cw;
    h(0, 1) = h(1, 0) = cw * dw;
    h(1, 1) = std::sin(p[1]) + cw * dw * dw + sw * 4.0 * std::cos(p[1] - a);
    return h;
  }
};

struct TrigPotential {
  std::vector<TrigTerm> terms;
  Vec2 periods;
  double offset = 0;

  Vec2 wave(const TrigTerm& t) const { return Vec2(kTwoPi * t.kx / periods[0], kTwoPi * t.ky / periods[1]); }

  double value(const Vec2& p) const {
    double s = offset;
    for (const auto& t : terms) s += t.amp * std::cos(wave(t).dot(p) + t.phase);
    return s;
  }
  Vec2 gradient(const Vec2& p) const {
    Vec2 g = Vec2::Zero();
    for (const auto& t : terms) {
      const Vec2 k = wave(t);
      g -= t.amp * std::sin(k.dot(p) + t.phase) * k;
    }
    return g;
  }
  Mat2 hessian(const Vec2& p) const {
    Mat2 h = Mat2::Zero();
    for (const auto& t : terms) {
      const Vec2 k = wave(t);
      h -= t.amp * std::cos(k.dot(p) + t.phase) * (k * k.transpose());
    }
    return h;
  }
};

/// Periodic Catmull-Rom (bi)cubic interpolation of node samples, x fastest.
struct GridPotential {
  int nx = 0, ny = 1;
  Vec2 periods;
  int dim = 2;
  std::vector<double> samples;

  static void weights(double t, double w[4], double d1[4], double d2[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t + 2 * t2 - t3);
    w[1] = 0.5 * (2 - 5 * t2 + 3 * t3);
    w[2] = 0.5 * (t + 4 * t2 - 3 * t3);
    w[3] = 0.5 * (-t2 + t3);
    d1[0] = 0.5 * (-1 + 4 * t - 3 * t2);
    d1[1] = 0.5 * (-10 * t + 9 * t2);
    d1[2] = 0.5 * (1 + 8 * t - 9 * t2);
    d1[3] = 0.5 * (-2 * t + 3 * t2);
    d2[0] = 0.5 * (4 - 6 * t);
    d2[1] = 0.5 * (-10 + 18 * t);
    d2[2] = 0.5 * (8 - 18 * t);
    d2[3] = 0.5 * (-2 + 6 * t);
  }

  double at(int i, int j) const {
    i = ((i % nx) + nx) % nx;
    j = ny > 1 ? ((j % ny) + ny) % ny : 0;
    return samples[static_cast<size_t>(j) * nx + i];
  }

  // Returns value, gradient, Hessian at p.
  void eval(const Vec2& p, double& v, Vec2& g, Mat2& h) const {
    const double hx = periods[0] / nx;
    const double sx = p[0] / hx;
    const int ix = static_cast<int>(std::floor(sx));
    double wx[4], dx[4], ddx[4];
    weights(sx - ix, wx, dx, ddx);
    if (dim == 1 || ny == 1) {
      v = 0;
      double gx = 0, hxx = 0;
      for (int a = 0; a < 4; ++a) {
        const double f = at(ix - 1 + a, 0);
        v += wx[a] * f;
        gx += dx[a] * f;
        hxx += ddx[a] * f;
      }
      g = Vec2(gx / hx, 0);
      h << hxx / (hx * hx), 0, 0, 0;
      return;
    }
    const double hy = periods[1] / ny;
    const double sy = p[1] / hy;
    const int iy = static_cast<int>(std::floor(sy));
    double wy[4], dy[4], ddy[4];
    weights(sy - iy, wy, dy, ddy);
    v = 0;
    double gx = 0, gy = 0, hxx = 0, hxy = 0, hyy = 0;
    for (int b = 0; b < 4; ++b) {
      for (int a = 0; a < 4; ++a) {
        const double f = at(ix - 1 + a, iy - 1 + b);
        v += wx[a] * wy[b] * f;
        gx += dx[a] * wy[b] * f;
        gy += wx[a] * dy[b] * f;
        hxx += ddx[a] * wy[b] * f;
        hxy += dx[a] * dy[b] * f;
        hyy += wx[a] * ddy[b] * f;
      }
    }
    g = Vec2(gx / hx, gy / hy);
    h << hxx / (hx * hx), hxy / (hx * hy), hxy / (hx * hy), hyy / (hy * hy);
  }
};

}  // namespace detail

/// Smooth periodic potential U on a flat torus.
class PeriodicPotential {
 public:
  enum class Kind { Analytic, Trig, Grid };

  static PeriodicPotential nr2006() {
    PeriodicPotential p;
    p.kind_ = Kind::Analytic;
    p.name_ = "nr2006";
    p.torus_ = Torus::square(kTwoPi);
    p.nr_ = detail::Nr2006Potential{};
    return p;
  }

  /// Sum of amp*cos(2*pi*(kx*x/L1 + ky*y/L2) + phase).
  static PeriodicPotential trig(const Torus& torus, std::vector<TrigTerm> terms, double offset = 0,
                                std::string name = "trig") {
    PeriodicPotential p;
    p.kind_ = Kind::Trig;
    p.name_ = std::move(name);
    p.torus_ = torus;
    p.trig_ = detail::TrigPotential{std::move(terms), torus.periods, offset};
    if (torus.dim == 1)
      for (auto& t : p.trig_.terms)
        if (t.ky != 0) fail(ErrorCode::InvalidInput, "1D trig term with nonzero ky");
    return p;
  }

  static PeriodicPotential grid(const Torus& torus, int nx, int ny, std::vector<double> samples) {
    if (nx < 4 || (torus.dim == 2 && ny < 4))
      fail(ErrorCode::InvalidInput, "grid potential needs at least 4 samples per axis");
    if (torus.dim == 1) ny = 1;
    if (samples.size() != static_cast<size_t>(nx) * ny)
      fail(ErrorCode::InvalidInput, "grid sample count does not match nx*ny");
    PeriodicPotential p;
    p.kind_ = Kind::Grid;
    p.name_ = "grid";
    p.torus_ = torus;
    p.grid_ = detail::GridPotential{nx, ny, torus.periods, torus.dim, std::move(samples)};
    return p;
  }

  /// cos x + cos y on the 2*pi torus.
  static PeriodicPotential cos2d() {
    return trig(Torus::square(), {{1, 0, 1, 0}, {0, 1, 1, 0}}, 0, "cos2d");
  }
  /// cos x on the 2*pi circle.
  static PeriodicPotential cos1d() { return trig(Torus::circle(), {{1, 0, 1, 0}}, 0, "cos1d"); }
  /// -2cos 2x - cos x - 2cos y: two minima at (0,0) and (pi,0).
  static PeriodicPotential twowell() {
    return trig(Torus::square(), {{2, 0, -2, 0}, {1, 0, -1, 0}, {0, 1, -2, 0}}, 0, "twowell");
  }
  static PeriodicPotential zero(int dim = 2) {
    return trig(dim == 1 ? Torus::circle() : Torus::square(), {}, 0, dim == 1 ? "zero1d" : "zero");
  }

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const Torus& torus() const { return torus_; }
  int dim() const { return torus_.dim; }

  double value(const Vec2& x) const {
    switch (kind_) {
      case Kind::Analytic: return nr_.value(x);
      case Kind::Trig: return trig_.value(flat(x));
      case Kind::Grid: {
        double v; Vec2 g; Mat2 h;
        grid_.eval(torus_.wrap(x), v, g, h);
        return v;
      }
    }
    return 0;
  }

  Vec2 gradient(const Vec2& x) const {
    Vec2 g;
    switch (kind_) {
      case Kind::Analytic: g = nr_.gradient(x); break;
      case Kind::Trig: g = trig_.gradient(flat(x)); break;
      case Kind::Grid: {
        double v; Mat2 h;
        grid_.eval(torus_.wrap(x), v, g, h);
        break;
      }
    }
    if (dim() == 1) g[1] = 0;
    return g;
  }

  Mat2 hessian(const Vec2& x) const {
    Mat2 h;
    switch (kind_) {
      case Kind::Analytic: h = nr_.hessian(x); break;
      case Kind::Trig: h = trig_.hessian(flat(x)); break;
      case Kind::Grid: {
        double v; Vec2 g;
        grid_.eval(torus_.wrap(x), v, g, h);
        break;
      }
    }
    if (dim() == 1) h(0, 1) = h(1, 0) = h(1, 1) = 0;
    return h;
  }

  const std::vector<TrigTerm>& trig_terms() const { return trig_.terms; }

 private:
  Vec2 flat(const Vec2& x) const { return dim() == 1 ? Vec2(x[0], 0) : x; }

  Kind kind_ = Kind::Trig;
  std::string name_;
  Torus torus_;
  detail::Nr2006Potential nr_;
  detail::TrigPotential trig_;
  detail::GridPotential grid_;
};

// ------------------------------------------------------------- forms, drifts

/// Closed one-form alpha = -dP + h, with P periodic and h a constant covector.
class ClosedOneForm {
 public:
  ClosedOneForm(Torus torus, Vec2 harmonic, std::optional<PeriodicPotential> primitive = std::nullopt)
      : torus_(std::move(torus)), harmonic_(std::move(harmonic)), primitive_(std::move(primitive)) {
    if (torus_.dim == 1) harmonic_[1] = 0;
  }

  static ClosedOneForm dx(const Torus& t) { return ClosedOneForm(t, Vec2(1, 0)); }
  static ClosedOneForm dy(const Torus& t) { return ClosedOneForm(t, Vec2(0, 1)); }

  const Torus& torus() const { return torus_; }
  const Vec2& harmonic() const { return harmonic_; }
  const std::optional<PeriodicPotential>& primitive() const { return primitive_; }
  bool exact() const { return harmonic_.isZero(0.0); }

  /// Covector field at x.
  Vec2 at(const Vec2& x) const {
    Vec2 a = harmonic_;
    if (primitive_) a -= primitive_->gradient(x);
    return a;
  }

  /// Integral along any path in the cover from a to b.
  double integral(const Vec2& a, const Vec2& b) const {
    double s = harmonic_.dot(b - a);
    if (primitive_) s -= primitive_->value(b) - primitive_->value(a);
    return s;
  }

  /// Same form with a periodic exact part added: alpha + d(phi).
  ClosedOneForm plus_exact(const PeriodicPotential& phi) const;

 private:
  Torus torus_;
  Vec2 harmonic_;
  std::optional<PeriodicPotential> primitive_;
};

namespace detail {
inline PeriodicPotential combine_trig(const PeriodicPotential& a, const PeriodicPotential& b, double sb) {
  if (a.kind() != PeriodicPotential::Kind::Trig || b.kind() != PeriodicPotential::Kind::Trig)
    fail(ErrorCode::InvalidInput, "only trig primitives can be combined");
  auto terms = a.trig_terms();
  for (auto t : b.trig_terms()) {
    t.amp *= sb;
    terms.push_back(t);
  }
  return PeriodicPotential::trig(a.torus(), terms);
}
}  // namespace detail

inline ClosedOneForm ClosedOneForm::plus_exact(const PeriodicPotential& phi) const {
  // alpha + d(phi) = -d(P - phi) + h
  PeriodicPotential p = primitive_ ? detail::combine_trig(*primitive_, phi, -1.0)
                                   : detail::combine_trig(PeriodicPotential::zero(torus_.dim), phi, -1.0);
  return ClosedOneForm(torus_, harmonic_, std::move(p));
}

/// Drift v = -grad U + tilt, tilt = c * beta.
class TiltedDrift {
 public:
  TiltedDrift(PeriodicPotential potential, double c, Vec2 beta = Vec2(1, 0))
      : potential_(std::move(potential)), c_(c) {
    if (c < 0) fail(ErrorCode::InvalidInput, "tilt magnitude must be nonnegative");
    if (potential_.dim() == 1) beta[1] = 0;
    if (beta.norm() == 0) fail(ErrorCode::InvalidInput, "tilt direction must be nonzero");
    beta_ = beta.normalized();
  }

  const PeriodicPotential& potential() const { return potential_; }
  const Torus& torus() const { return potential_.torus(); }
  int dim() const { return potential_.dim(); }
  double c() const { return c_; }
  const Vec2& direction() const { return beta_; }
  Vec2 tilt() const { return c_ * beta_; }

  Vec2 operator()(const Vec2& x) const { return -potential_.gradient(x) + tilt(); }
  /// Jacobian of the drift, -Hess U.
  Mat2 jacobian(const Vec2& x) const { return -potential_.hessian(x); }

  /// Lifted primitive U(x) - tilt.x on the cover.
  double lifted(const Vec2& x) const { return potential_.value(x) - tilt().dot(x); }

  /// The form alpha with drift = alpha#.
  ClosedOneForm form() const { return ClosedOneForm(torus(), tilt(), potential_); }

  /// Tilt direction as a form (beta).
  ClosedOneForm direction_form() const { return ClosedOneForm(torus(), beta_); }

 private:
  PeriodicPotential potential_;
  double c_;
  Vec2 beta_;
};

inline Vec2 eval_drift(const TiltedDrift& d, const Vec2& x) { return d(d.torus().wrap(x)); }

/// Polyline in the universal cover.
struct LiftedPath {
  std::vector<Vec2> points;
};

/// Lifts a polyline given on the torus. With offsets, point i lies in deck cell offsets[i];
/// without them every raw step must be shorter than half a period.
inline LiftedPath lift_path(const Torus& torus, const std::vector<Vec2>& pts,
                            const std::vector<Vec2i>* offsets = nullptr) {
  if (pts.size() < 2) fail(ErrorCode::InvalidInput, "path needs at least 2 points");
  if (offsets && offsets->size() != pts.size()) fail(ErrorCode::InvalidInput, "offset count mismatch");
  LiftedPath out;
  out.points.reserve(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    Vec2 p = pts[i];
    if (offsets) p += torus.deck((*offsets)[i]);
    if (i > 0 && !offsets) {
      const Vec2 d = p - pts[i - 1];
      for (int k = 0; k < torus.dim; ++k)
        if (std::abs(d[k]) >= 0.5 * torus.periods[k])
          fail(ErrorCode::AmbiguousWinding, "segment " + std::to_string(i) + " exceeds half a period");
    }
    out.points.push_back(p);
  }
  return out;
}

inline double line_integral(const ClosedOneForm& form, const LiftedPath& path) {
  if (path.points.size() < 2) fail(ErrorCode::InvalidInput, "path needs at least 2 points");
  return form.integral(path.points.front(), path.points.back());
}

}  // namespace fluxlab
