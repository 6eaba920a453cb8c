#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "arseq/tensor.hpp"

namespace arseq {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;  // flat index over all checked coordinates
  std::size_t coordinates = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Central: (f(x+h) - f(x-h)) / 2h. FivePoint: the fourth-order stencil
/// (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h, for coordinates whose
/// gradient is small relative to the function value.
/// Ridders: Richardson extrapolation of central differences from `step`
/// downwards, keeping the estimate with the smallest error; the step should
/// be large (around 0.1) and it resolves near-zero coordinates that the fixed
/// stencils lose to roundoff.
enum class Stencil { central, five_point, ridders };

namespace detail {
template <typename Scalar>
void update_report(GradCheckReport& r, std::size_t idx, Scalar analytic, Scalar numeric) {
  if (!std::isfinite(static_cast<double>(analytic)) || !std::isfinite(static_cast<double>(numeric)))
    throw NumericError("grad_check: non-finite gradient at coordinate " + std::to_string(idx));
  const double a = static_cast<double>(analytic);
  const double n = static_cast<double>(numeric);
  const double denom = std::max({std::abs(a), std::abs(n), 1e-12});
  const double err = std::abs(a - n) / denom;
  if (r.coordinates == 0 || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_coordinate = idx;
    r.analytic_at_worst = a;
    r.numeric_at_worst = n;
  }
  ++r.coordinates;
}

template <typename Scalar>
Scalar checked_value(const Var<Scalar>& out, std::size_t coordinate) {
  const Scalar v = out.scalar();
  if (!std::isfinite(static_cast<double>(v)))
    throw NumericError("grad_check: non-finite function value when perturbing coordinate " +
                       std::to_string(coordinate));
  return v;
}
template <typename Scalar, typename F>
Scalar ridders(F& eval, Scalar h) {
  constexpr int kTable = 10;
  constexpr Scalar kShrink = Scalar(1.4);
  constexpr Scalar kShrink2 = kShrink * kShrink;
  Scalar a[kTable][kTable];
  a[0][0] = (eval(h) - eval(-h)) / (2 * h);
  Scalar best = a[0][0];
  Scalar err = std::numeric_limits<Scalar>::max();
  for (int i = 1; i < kTable; ++i) {
    h /= kShrink;
    a[0][i] = (eval(h) - eval(-h)) / (2 * h);
    Scalar fac = kShrink2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1);
      fac *= kShrink2;
      const Scalar e = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    // higher order got worse: roundoff has taken over
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= 2 * err) break;
  }
  return best;
}

template <typename Scalar, typename F>
Scalar derivative(F& eval, Scalar h, Stencil stencil) {
  if (stencil == Stencil::central) return (eval(h) - eval(-h)) / (2 * h);
  if (stencil == Stencil::ridders) return ridders(eval, h);
  const Scalar near = eval(h) - eval(-h);
  const Scalar far = eval(-2 * h) - eval(2 * h);
  return (far + 8 * near) / (12 * h);
}
}  // namespace detail

/// Compares the tape gradient of a scalar function of one leaf against
/// central differences. `fn` must build the same graph on every call.
template <typename Scalar>
GradCheckReport grad_check(const std::function<Var<Scalar>(Tape<Scalar>&, Var<Scalar>)>& fn,
                           const Matrix<Scalar>& point, Scalar step = Scalar(1e-6),
                           Stencil stencil = Stencil::central) {
  Matrix<Scalar> analytic;
  {
    Tape<Scalar> tape;
    auto x = tape.variable(point);
    auto y = fn(tape, x);
    detail::checked_value(y, 0);
    tape.backward(y);
    analytic = tape.grad(x);
  }
  GradCheckReport report;
  Matrix<Scalar> probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const Scalar orig = probe(i);
    auto eval = [&](Scalar offset) {
      probe(i) = orig + offset;
      Tape<Scalar> t;
      return detail::checked_value(fn(t, t.constant(probe)), static_cast<std::size_t>(i));
    };
    const Scalar numeric = detail::derivative(eval, step, stencil);
    probe(i) = orig;
    detail::update_report(report, static_cast<std::size_t>(i), analytic(i), numeric);
  }
  return report;
}

/// Same check over every coordinate of a set of parameters. `fn` binds the
/// parameters to the tape it is given; values are restored afterwards.
template <typename Scalar>
GradCheckReport grad_check(const std::function<Var<Scalar>(Tape<Scalar>&)>& fn,
                           const std::vector<Parameter<Scalar>*>& params, Scalar step = Scalar(1e-6),
                           Stencil stencil = Stencil::central) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<Scalar> tape;
    auto y = fn(tape);
    detail::checked_value(y, 0);
    tape.backward(y);
  }
  std::vector<Matrix<Scalar>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  std::size_t flat = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix<Scalar>& v = params[k]->value;
    for (Eigen::Index i = 0; i < v.size(); ++i, ++flat) {
      const Scalar orig = v(i);
      auto eval = [&](Scalar offset) {
        v(i) = orig + offset;
        Tape<Scalar> t;
        return detail::checked_value(fn(t), flat);
      };
      const Scalar numeric = detail::derivative(eval, step, stencil);
      v(i) = orig;
      detail::update_report(report, flat, analytic[k](i), numeric);
    }
  }
  for (auto* p : params) p->zero_grad();
  return report;
}

}  // namespace arseq
