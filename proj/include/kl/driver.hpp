#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kl/common.hpp"

namespace kl {

/// Continuous driving function xi(t) on [0, inf): a closed form or a
/// piecewise-linear table. Closed forms expose an exact derivative, used by the
/// transform module's advection term; tables clamp beyond their range.
class Driver {
 public:
  static Driver constant(double v) {
    Driver d;
    d.f_ = [v](double) { return v; };
    d.df_ = [](double) { return 0.0; };
    return d;
  }

  static Driver linear(double a, double b) {
    Driver d;
    d.f_ = [a, b](double t) { return a + b * t; };
    d.df_ = [b](double) { return b; };
    return d;
  }

  static Driver sine(double offset, double amp, double omega, double phase = 0.0) {
    Driver d;
    d.f_ = [=](double t) { return offset + amp * std::sin(omega * t + phase); };
    d.df_ = [=](double t) { return amp * omega * std::cos(omega * t + phase); };
    return d;
  }

  static Driver table(std::vector<double> t, std::vector<double> xi) {
    if (t.size() != xi.size() || t.size() < 2)
      throw Error(ErrorCode::ConfigInvalid, "driver table needs matching arrays, >= 2 rows");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1]))
        throw Error(ErrorCode::ConfigInvalid, "driver table times must strictly increase");
    Driver d;
    auto tt = std::make_shared<std::vector<double>>(std::move(t));
    auto xx = std::make_shared<std::vector<double>>(std::move(xi));
    d.f_ = [tt, xx](double s) {
      const auto& t = *tt;
      const auto& x = *xx;
      if (s <= t.front()) return x.front();
      if (s >= t.back()) return x.back();
      const auto it = std::upper_bound(t.begin(), t.end(), s);
      const std::size_t i = it - t.begin();
      const double th = (s - t[i - 1]) / (t[i] - t[i - 1]);
      return x[i - 1] + th * (x[i] - x[i - 1]);
    };
    d.df_ = [tt, xx](double s) {
      const auto& t = *tt;
      const auto& x = *xx;
      if (s < t.front() || s >= t.back()) return 0.0;
      const auto it = std::upper_bound(t.begin(), t.end(), s);
      const std::size_t i = it - t.begin();
      return (x[i] - x[i - 1]) / (t[i] - t[i - 1]);
    };
    return d;
  }

  static Driver from_function(std::function<double(double)> f,
                              std::function<double(double)> df = {}) {
    Driver d;
    d.f_ = std::move(f);
    d.df_ = std::move(df);
    return d;
  }

  double xi(double t) const { return f_(t); }

  bool has_derivative() const { return static_cast<bool>(df_); }
  double xi_dot(double t) const { return df_(t); }

 private:
  std::function<double(double)> f_;
  std::function<double(double)> df_;
};

}  // namespace kl
