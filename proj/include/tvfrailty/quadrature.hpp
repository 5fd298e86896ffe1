#pragma once

// Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.
//
// Every integrand evaluation fills a block of `n` values, so a family of
// related integrals (one per observation age, say) shares a single set of
// abscissae. Refinement is global: the interval whose worst component has the
// largest error relative to its own target is bisected next, until every
// component satisfies |err| <= max(abs_tol, rel_tol * |value|).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "tvfrailty/errors.hpp"

namespace tvf {

struct Interval {
  double a;
  double b;
};

using Partition = std::vector<Interval>;

struct QuadratureOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-15;
  std::size_t max_intervals = 5000;
};

struct QuadratureResult {
  std::vector<double> value;
  std::vector<double> error;
  Partition partition;
  std::size_t evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the nodes kronrod_nodes[1], [3], [5] and the centre.
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

// Kronrod estimate in `kronrod`, |Kronrod - Gauss| in `error`.
template <class F>
void gauss_kronrod_15(F& f, std::size_t n, Interval iv, std::span<double> kronrod,
                      std::span<double> error, std::vector<double>& scratch) {
  const double centre = 0.5 * (iv.a + iv.b);
  const double half = 0.5 * (iv.b - iv.a);
  std::vector<double> gauss(n, 0.0);
  std::fill(kronrod.begin(), kronrod.end(), 0.0);
  scratch.resize(n);

  f(centre, std::span<double>(scratch));
  for (std::size_t c = 0; c < n; ++c) {
    kronrod[c] += kronrod_weights[7] * scratch[c];
    gauss[c] += gauss_weights[3] * scratch[c];
  }
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kronrod_nodes[j];
    for (double x : {centre - dx, centre + dx}) {
      f(x, std::span<double>(scratch));
      for (std::size_t c = 0; c < n; ++c) {
        kronrod[c] += kronrod_weights[j] * scratch[c];
        if (j % 2 == 1) gauss[c] += gauss_weights[j / 2] * scratch[c];
      }
    }
  }
  for (std::size_t c = 0; c < n; ++c) {
    kronrod[c] *= half;
    error[c] = std::fabs(kronrod[c] - gauss[c] * half);
  }
}

}  // namespace detail

// Evaluates the 15-point Kronrod rule on each interval of a fixed partition,
// without refinement. The result is a smooth function of any parameters the
// integrand depends on, which matters for finite-difference derivatives.
template <class F>
QuadratureResult integrate_fixed(F&& f, std::size_t n, const Partition& partition) {
  QuadratureResult out;
  out.value.assign(n, 0.0);
  out.error.assign(n, 0.0);
  out.partition = partition;
  std::vector<double> k(n), e(n), scratch;
  for (const auto& iv : partition) {
    detail::gauss_kronrod_15(f, n, iv, k, e, scratch);
    for (std::size_t c = 0; c < n; ++c) {
      out.value[c] += k[c];
      out.error[c] += e[c];
    }
  }
  out.evaluations = 15 * partition.size();
  return out;
}

template <class F>
QuadratureResult integrate_adaptive(F&& f, std::size_t n, const Partition& initial,
                                    const QuadratureOptions& opts = {}) {
  struct Piece {
    Interval iv;
    std::vector<double> value;
    std::vector<double> error;
    double priority;
  };
  std::vector<Piece> pieces;
  pieces.reserve(initial.size() * 4);
  std::vector<double> total(n, 0.0), total_err(n, 0.0), scratch;

  auto evaluate = [&](Interval iv) {
    Piece p{iv, std::vector<double>(n), std::vector<double>(n), 0.0};
    detail::gauss_kronrod_15(f, n, iv, p.value, p.error, scratch);
    return p;
  };
  auto target = [&](std::size_t c) {
    return std::max(opts.abs_tol, opts.rel_tol * std::fabs(total[c]));
  };
  auto priority = [&](const Piece& p) {
    double worst = 0.0;
    for (std::size_t c = 0; c < n; ++c) worst = std::max(worst, p.error[c] / target(c));
    // intervals at the resolution limit can no longer be split
    if (p.iv.b - p.iv.a <= 1e-14 * std::max(1.0, std::fabs(p.iv.a))) return -1.0;
    return worst;
  };

  for (const auto& iv : initial) {
    pieces.push_back(evaluate(iv));
    for (std::size_t c = 0; c < n; ++c) {
      total[c] += pieces.back().value[c];
      total_err[c] += pieces.back().error[c];
    }
  }
  std::size_t evaluations = 15 * initial.size();

  auto converged = [&] {
    for (std::size_t c = 0; c < n; ++c)
      if (!(total_err[c] <= target(c))) return false;
    return true;
  };

  while (!converged()) {
    if (pieces.size() >= opts.max_intervals) {
      double worst = 0.0;
      for (std::size_t c = 0; c < n; ++c)
        worst = std::max(worst, total_err[c] / std::max(std::fabs(total[c]), opts.abs_tol));
      throw NumericError("adaptive quadrature: interval budget exhausted, achieved relative error " +
                             std::to_string(worst),
                         worst);
    }
    // Targets move as totals change, so priorities are recomputed each pass.
    std::size_t best = pieces.size();
    double best_priority = 0.0;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const double pr = priority(pieces[i]);
      if (pr > best_priority) {
        best_priority = pr;
        best = i;
      }
    }
    if (best == pieces.size()) {
      double worst = 0.0;
      for (std::size_t c = 0; c < n; ++c)
        worst = std::max(worst, total_err[c] / std::max(std::fabs(total[c]), opts.abs_tol));
      throw NumericError("adaptive quadrature: cannot refine further, achieved relative error " +
                             std::to_string(worst),
                         worst);
    }
    Piece old = std::move(pieces[best]);
    const double mid = 0.5 * (old.iv.a + old.iv.b);
    Piece left = evaluate({old.iv.a, mid});
    Piece right = evaluate({mid, old.iv.b});
    evaluations += 30;
    for (std::size_t c = 0; c < n; ++c) {
      total[c] += left.value[c] + right.value[c] - old.value[c];
      total_err[c] += left.error[c] + right.error[c] - old.error[c];
    }
    pieces[best] = std::move(left);
    pieces.push_back(std::move(right));
  }

  // Re-sum in interval order so the result does not depend on refinement history.
  std::sort(pieces.begin(), pieces.end(),
            [](const Piece& x, const Piece& y) { return x.iv.a < y.iv.a; });
  QuadratureResult out;
  out.value.assign(n, 0.0);
  out.error.assign(n, 0.0);
  for (const auto& p : pieces) {
    out.partition.push_back(p.iv);
    for (std::size_t c = 0; c < n; ++c) {
      out.value[c] += p.value[c];
      out.error[c] += p.error[c];
    }
  }
  out.evaluations = evaluations;
  return out;
}

// Scalar convenience over [a, b].
template <class F>
double integrate(F&& f, double a, double b, const QuadratureOptions& opts = {},
                 int initial_pieces = 4) {
  Partition initial;
  for (int i = 0; i < initial_pieces; ++i)
    initial.push_back({a + (b - a) * i / initial_pieces, a + (b - a) * (i + 1) / initial_pieces});
  auto vf = [&](double x, std::span<double> out) { out[0] = f(x); };
  return integrate_adaptive(vf, 1, initial, opts).value[0];
}

// Maps tau in (-1, 1) onto the real line, y = centre + s * tau / (1 - |tau|)
// with scale s = left_scale for tau < 0 and right_scale otherwise. tau = 0
// lands on `centre`, so the initial partition splits there.
struct RealLineMap {
  double centre;
  double left_scale;
  double right_scale;

  double point(double tau) const {
    const double s = tau < 0.0 ? left_scale : right_scale;
    return centre + s * tau / (1.0 - std::fabs(tau));
  }
  double jacobian(double tau) const {
    const double s = tau < 0.0 ? left_scale : right_scale;
    const double d = 1.0 - std::fabs(tau);
    return s / (d * d);
  }
  static Partition initial_partition(int pieces_per_side = 4) {
    Partition p;
    for (int i = 0; i < 2 * pieces_per_side; ++i) {
      const double a = -1.0 + static_cast<double>(i) / pieces_per_side;
      p.push_back({a, a + 1.0 / pieces_per_side});
    }
    return p;
  }
};

}  // namespace tvf
