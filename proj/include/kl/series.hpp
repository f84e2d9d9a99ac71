#pragma once

#include <vector>

#include "kl/common.hpp"

namespace kl::series {

// Truncated power-series arithmetic on coefficient vectors a[0..K]. All
// operations truncate at the common order. Used by the transform module's jets.

template <class T>
std::vector<T> mul(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t n = a.size();
  std::vector<T> out(n, T{});
  for (std::size_t i = 0; i < n; ++i) {
    T acc{};
    for (std::size_t k = 0; k <= i; ++k) acc += a[k] * b[i - k];
    out[i] = acc;
  }
  return out;
}

/// Reciprocal of a series with a[0] != 0.
template <class T>
std::vector<T> inv(const std::vector<T>& a) {
  const std::size_t n = a.size();
  std::vector<T> out(n, T{});
  out[0] = T{1} / a[0];
  for (std::size_t i = 1; i < n; ++i) {
    T acc{};
    for (std::size_t k = 1; k <= i; ++k) acc += a[k] * out[i - k];
    out[i] = -acc / a[0];
  }
  return out;
}

/// Termwise derivative series of sum a_n u^n, same truncation order (top padded).
template <class T>
std::vector<T> derivative(const std::vector<T>& a) {
  std::vector<T> out(a.size(), T{});
  for (std::size_t i = 1; i < a.size(); ++i) out[i - 1] = double(i) * a[i];
  return out;
}

/// Coefficients of 1/(d + u) = sum (-1)^m u^m / d^{m+1}, |u| < |d|.
template <class T>
std::vector<T> geometric(T d, std::size_t order) {
  std::vector<T> out(order + 1);
  T p = T{1} / d;
  for (std::size_t m = 0; m <= order; ++m) {
    out[m] = (m % 2 == 0) ? p : -p;
    p /= d;
  }
  return out;
}

/// Re-expands the polynomial sum a_n u^n about u = d: returns b with
/// sum a_n u^n = sum b_n (u - d)^n. Exact on the truncated polynomial.
template <class T, class S>
std::vector<T> shift(std::vector<T> a, S d) {
  const int n = static_cast<int>(a.size());
  for (int i = 0; i < n - 1; ++i)
    for (int j = n - 2; j >= i; --j) a[j] += d * a[j + 1];
  return a;
}

template <class T, class S>
auto eval(const std::vector<T>& a, S u) -> decltype(a[0] * u) {
  using R = decltype(a[0] * u);
  R acc{};
  for (std::size_t i = a.size(); i-- > 0;) acc = acc * u + a[i];
  return acc;
}

/// Evaluates the derivative of the series at u.
template <class T, class S>
auto eval_derivative(const std::vector<T>& a, S u) -> decltype(a[0] * u) {
  using R = decltype(a[0] * u);
  R acc{};
  for (std::size_t i = a.size(); i-- > 1;) acc = acc * u + double(i) * a[i];
  return acc;
}

}  // namespace kl::series
