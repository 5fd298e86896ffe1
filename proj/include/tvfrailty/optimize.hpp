#pragma once

// Unconstrained minimisation: a Nelder-Mead simplex stage followed by BFGS
// with central-difference gradients, plus numeric Hessians and profile
// intervals.
//
// Objectives evaluated by adaptive quadrature are only piecewise smooth in
// their arguments, which ruins finite differences. Such objectives expose
//   value(x)   - accurate value
//   anchor(x)  - freeze the numerical scheme at x
//   smooth(x)  - value with the frozen scheme (smooth in x)
// and BFGS differentiates smooth() around an anchor that it moves with each
// accepted step. Plain callables are wrapped by PlainObjective.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tvfrailty/errors.hpp"
#include "tvfrailty/special_functions.hpp"

namespace tvf {

using Vector = std::vector<double>;

template <class F>
concept AnchoredObjective = requires(F& f, std::span<const double> x) {
  { f.value(x) } -> std::convertible_to<double>;
  { f.smooth(x) } -> std::convertible_to<double>;
  f.anchor(x);
};

template <class F>
struct PlainObjective {
  F f;
  double value(std::span<const double> x) { return f(x); }
  double smooth(std::span<const double> x) { return f(x); }
  void anchor(std::span<const double>) {}
};
template <class F>
PlainObjective(F) -> PlainObjective<F>;

struct OptimizerOptions {
  bool use_simplex = true;
  int simplex_max_evals = 0;  // 0: 200 per dimension
  double simplex_step = 0.3;
  double simplex_ftol = 1e-7;  // relative spread of simplex values
  int bfgs_max_iter = 200;
  // Convergence when max |gradient| <= max(gradient_tol, gradient_rel_tol |f|).
  double gradient_tol = 1e-3;
  double gradient_rel_tol = 1e-7;
  double fd_step = 1e-4;
  double max_step = 2.0;  // cap on a line-search step (sup norm)
};

struct OptimizeResult {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  Vector gradient;
  double gradient_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool max_iter = false;
  int iterations = 0;
  int evaluations = 0;
  std::string message;
};

namespace detail {

inline double sup_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

template <class Obj>
Vector fd_gradient(Obj& obj, const Vector& x, double f0, double step, int& evals) {
  Vector g(x.size(), 0.0);
  Vector xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::fabs(x[i]));
    xp[i] = x[i] + h;
    const double fp = obj.smooth(xp);
    xp[i] = x[i] - h;
    const double fm = obj.smooth(xp);
    xp[i] = x[i];
    evals += 2;
    if (std::isfinite(fp) && std::isfinite(fm))
      g[i] = (fp - fm) / (2.0 * h);
    else if (std::isfinite(fp))
      g[i] = (fp - f0) / h;
    else if (std::isfinite(fm))
      g[i] = (f0 - fm) / h;
    else
      g[i] = 0.0;
  }
  return g;
}

}  // namespace detail

// Nelder-Mead on value(); returns the best vertex.
template <class Obj>
OptimizeResult nelder_mead(Obj& obj, Vector x0, const OptimizerOptions& opts = {}) {
  const std::size_t n = x0.size();
  OptimizeResult res;
  const int max_evals = opts.simplex_max_evals > 0 ? opts.simplex_max_evals : 200 * static_cast<int>(std::max<std::size_t>(n, 1));
  std::vector<Vector> simplex(n + 1, x0);
  Vector fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += opts.simplex_step;
  int evals = 0;
  auto eval = [&](const Vector& x) {
    ++evals;
    const double v = obj.value(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);
  if (!std::isfinite(fv[0])) throw NumericError("objective is not finite at the starting point");

  std::vector<std::size_t> order(n + 1);
  int iter = 0;
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = n > 0 ? order[n - 1] : order[0];
    const double spread = fv[worst] - fv[best];
    if (n == 0 || (std::isfinite(spread) && spread <= opts.simplex_ftol * (1.0 + std::fabs(fv[best])))) {
      res.converged = true;
      break;
    }
    ++iter;
    Vector centroid(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / static_cast<double>(n);
    auto along = [&](double t) {
      Vector p(n);
      for (std::size_t j = 0; j < n; ++j) p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
      return p;
    };
    const Vector xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < fv[best]) {
      const Vector xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const Vector xc = along(outside ? -0.5 : 0.5);
    const double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) simplex[i][j] = simplex[best][j] + 0.5 * (simplex[i][j] - simplex[best][j]);
      fv[i] = eval(simplex[i]);
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = simplex[best];
  res.f = fv[best];
  res.iterations = iter;
  res.evaluations = evals;
  res.max_iter = !res.converged;
  res.message = res.converged ? "simplex converged" : "simplex evaluation limit reached";
  return res;
}

// BFGS with backtracking line search on the anchored objective.
template <class Obj>
OptimizeResult bfgs(Obj& obj, Vector x, const OptimizerOptions& opts = {}) {
  const std::size_t n = x.size();
  OptimizeResult res;
  int evals = 0;
  obj.anchor(x);
  double f = obj.smooth(x);
  ++evals;
  if (!std::isfinite(f)) throw NumericError("objective is not finite at the starting point");
  Vector g = detail::fd_gradient(obj, x, f, opts.fd_step, evals);
  std::vector<Vector> H(n, Vector(n, 0.0));
  auto reset = [&](double scale) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) H[i][j] = i == j ? scale : 0.0;
  };
  reset(1.0 / std::max(1.0, detail::sup_norm(g)));
  bool fresh = true;
  int iter = 0;
  auto tol = [&] { return std::max(opts.gradient_tol, opts.gradient_rel_tol * std::fabs(f)); };
  while (true) {
    if (detail::sup_norm(g) <= tol()) {
      res.converged = true;
      res.message = "gradient below tolerance";
      break;
    }
    if (iter >= opts.bfgs_max_iter) {
      res.max_iter = true;
      res.message = "iteration limit reached";
      break;
    }
    ++iter;
    Vector p(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) p[i] -= H[i][j] * g[j];
    double slope = std::inner_product(p.begin(), p.end(), g.begin(), 0.0);
    if (!(slope < 0.0)) {
      reset(1.0 / std::max(1.0, detail::sup_norm(g)));
      fresh = true;
      for (std::size_t i = 0; i < n; ++i) p[i] = -H[i][i] * g[i];
      slope = std::inner_product(p.begin(), p.end(), g.begin(), 0.0);
    }
    const double pn = detail::sup_norm(p);
    double alpha = pn > opts.max_step ? opts.max_step / pn : 1.0;
    Vector xn(n);
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + alpha * p[i];
      fn = obj.smooth(xn);
      ++evals;
      if (std::isfinite(fn) && fn <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        reset(1.0 / std::max(1.0, detail::sup_norm(g)));
        fresh = true;
        continue;
      }
      res.message = "line search failed";
      break;
    }
    obj.anchor(xn);
    fn = obj.smooth(xn);
    ++evals;
    const Vector gn = detail::fd_gradient(obj, xn, fn, opts.fd_step, evals);
    Vector s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
    }
    const double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
    const double yy = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
    if (sy > 1e-12 * std::sqrt(yy * std::inner_product(s.begin(), s.end(), s.begin(), 0.0))) {
      if (fresh) reset(sy / yy);
      Vector Hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) Hy[i] += H[i][j] * y[j];
      const double yHy = std::inner_product(y.begin(), y.end(), Hy.begin(), 0.0);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          H[i][j] += rho * ((1.0 + rho * yHy) * s[i] * s[j] - Hy[i] * s[j] - s[i] * Hy[j]);
      fresh = false;
    }
    x = xn;
    f = fn;
    g = gn;
  }
  res.x = x;
  res.f = f;
  res.gradient = g;
  res.gradient_norm = detail::sup_norm(g);
  res.iterations = iter;
  res.evaluations = evals;
  return res;
}

// Simplex stage (optional) then BFGS.
template <class Obj>
OptimizeResult minimize(Obj& obj, Vector x0, const OptimizerOptions& opts = {}) {
  int evals = 0, iters = 0;
  if (opts.use_simplex && !x0.empty()) {
    const auto nm = nelder_mead(obj, std::move(x0), opts);
    evals += nm.evaluations;
    iters += nm.iterations;
    x0 = nm.x;
  }
  if (x0.empty()) {
    OptimizeResult r;
    r.f = obj.value(x0);
    r.converged = true;
    r.gradient_norm = 0.0;
    r.message = "no free parameters";
    return r;
  }
  auto res = bfgs(obj, std::move(x0), opts);
  res.evaluations += evals;
  res.iterations += iters;
  return res;
}

// Central-difference Hessian of smooth() at x, anchored at x.
template <class Obj>
std::vector<Vector> numeric_hessian(Obj& obj, const Vector& x, double step = 2e-3) {
  const std::size_t n = x.size();
  obj.anchor(x);
  const double f0 = obj.smooth(x);
  std::vector<Vector> H(n, Vector(n, 0.0));
  Vector xp = x;
  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    xp = x;
    xp[i] += di;
    xp[j] += dj;
    return obj.smooth(xp);
  };
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = step * std::max(1.0, std::fabs(x[i]));
    H[i][i] = (at(i, hi, i, 0.0) - 2.0 * f0 + at(i, -hi, i, 0.0)) / (hi * hi);
    for (std::size_t j = 0; j < i; ++j) {
      const double hj = step * std::max(1.0, std::fabs(x[j]));
      H[i][j] = H[j][i] =
          (at(i, hi, j, hj) - at(i, hi, j, -hj) - at(i, -hi, j, hj) + at(i, -hi, j, -hj)) / (4.0 * hi * hj);
    }
  }
  return H;
}

// Inverse of a symmetric positive definite matrix by Cholesky; nullopt when
// the matrix is not positive definite.
inline std::optional<std::vector<Vector>> spd_inverse(const std::vector<Vector>& A) {
  const std::size_t n = A.size();
  std::vector<Vector> L(n, Vector(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double d = A[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= L[j][k] * L[j][k];
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    L[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = A[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= L[i][k] * L[j][k];
      L[i][j] = s / L[j][j];
    }
  }
  std::vector<Vector> inv(n, Vector(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    Vector z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = i == c ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= L[i][k] * z[k];
      z[i] = s / L[i][i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = z[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= L[k][ii] * inv[k][c];
      inv[ii][c] = s / L[ii][ii];
    }
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Profile intervals

struct ProfileOptions {
  double initial_step = 0.0;  // 0: derived from the standard error, else 0.25
  double max_distance = 25.0;  // furthest probe from the optimum, link scale
  double tolerance = 1e-4;     // bisection width, link scale
  int max_expansions = 40;
};

struct ProfileEnd {
  double x = 0.0;   // link-scale endpoint (last probe when open)
  bool open = false;
  int probes = 0;
};

struct ProfileEnds {
  ProfileEnd lower, upper;
  std::string warning;
};

namespace detail {

// The objective restricted to all coordinates but `index`, which is held at
// `fixed`.
template <class Obj>
struct Restricted {
  Obj* obj;
  std::size_t index;
  double fixed;

  Vector full(std::span<const double> y) const {
    Vector x(y.size() + 1);
    for (std::size_t i = 0, j = 0; i < x.size(); ++i) x[i] = i == index ? fixed : y[j++];
    return x;
  }
  double value(std::span<const double> y) { return obj->value(full(y)); }
  double smooth(std::span<const double> y) { return obj->smooth(full(y)); }
  void anchor(std::span<const double> y) { obj->anchor(full(y)); }
};

}  // namespace detail

// Endpoints where the profile of the minimised objective rises by
// chi2_1(level) / 2 above f_hat, searching outward from x_hat along
// coordinate `index` and re-minimising the other coordinates at each probe.
template <class Obj>
ProfileEnds profile_endpoints(Obj& obj, const Vector& x_hat, double f_hat, std::size_t index, double level,
                              double se = 0.0, const OptimizerOptions& optim = {},
                              const ProfileOptions& popts = {}) {
  if (!(level >= 0.0 && level < 1.0)) throw DomainError("profile level must lie in [0, 1)");
  ProfileEnds ends;
  ends.lower.x = ends.upper.x = x_hat[index];
  const double target = 0.5 * chi_square1_quantile(level);
  if (target == 0.0) return ends;

  OptimizerOptions sub = optim;
  sub.use_simplex = false;
  Vector others;
  for (std::size_t i = 0; i < x_hat.size(); ++i)
    if (i != index) others.push_back(x_hat[i]);

  auto profile = [&](double value, Vector& warm) {
    detail::Restricted<Obj> r{&obj, index, value};
    if (warm.empty()) {
      const double v = r.value(warm);
      return std::isfinite(v) ? v - f_hat : std::numeric_limits<double>::infinity();
    }
    try {
      auto res = bfgs(r, warm, sub);
      if (std::isfinite(res.f)) warm = res.x;
      return res.f - f_hat;
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double step = popts.initial_step > 0.0 ? popts.initial_step
                : se > 0.0 && std::isfinite(se) ? std::clamp(se, 0.02, 1.0)
                                                 : 0.25;
  for (int dir : {-1, 1}) {
    ProfileEnd& end = dir < 0 ? ends.lower : ends.upper;
    Vector warm = others;
    double inside = x_hat[index];
    Vector warm_inside = warm;
    double d = step;
    double outside = inside;
    bool bracketed = false;
    for (int e = 0; e < popts.max_expansions && d <= popts.max_distance; ++e) {
      const double probe = x_hat[index] + dir * d;
      Vector w = warm_inside;
      const double drop = profile(probe, w);
      ++end.probes;
      if (drop >= target) {
        outside = probe;
        bracketed = true;
        break;
      }
      inside = probe;
      warm_inside = w;
      d *= 2.0;
    }
    if (!bracketed) {
      end.open = true;
      end.x = inside;
      ends.warning += std::string(dir < 0 ? "lower" : "upper") + " end not reached; ";
      continue;
    }
    while (std::fabs(outside - inside) > popts.tolerance) {
      const double mid = 0.5 * (inside + outside);
      Vector w = warm_inside;
      const double drop = profile(mid, w);
      ++end.probes;
      if (drop >= target) {
        outside = mid;
      } else {
        inside = mid;
        warm_inside = w;
      }
    }
    end.x = 0.5 * (inside + outside);
  }
  return ends;
}

}  // namespace tvf
