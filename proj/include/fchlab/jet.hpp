#pragma once

// Truncated Taylor series c_k = f^{(k)}(z)/k! for exact high-order derivatives
// of compositions (the pulse ODE, the well polynomials, the residual).

#include <array>
#include <cmath>

namespace fchlab {

template <int K>
struct Jet {
  std::array<double, K + 1> c{};

  static Jet constant(double v) {
    Jet j;
    j.c[0] = v;
    return j;
  }
  /// From derivatives d[m] = f^{(m)}, m = 0..K.
  template <typename D>
  static Jet from_derivatives(const D& d) {
    Jet j;
    double fact = 1.0;
    for (int k = 0; k <= K; ++k) {
      if (k > 0) fact *= k;
      j.c[k] = d[k] / fact;
    }
    return j;
  }
  double derivative(int m) const {
    double fact = 1.0;
    for (int k = 2; k <= m; ++k) fact *= k;
    return c[m] * fact;
  }

  Jet& operator+=(const Jet& o) {
    for (int k = 0; k <= K; ++k) c[k] += o.c[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int k = 0; k <= K; ++k) c[k] -= o.c[k];
    return *this;
  }
  Jet& operator*=(double s) {
    for (auto& v : c) v *= s;
    return *this;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) {
    a.c[0] += s;
    return a;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    for (int i = 0; i <= K; ++i)
      for (int j = 0; i + j <= K; ++j) r.c[i + j] += a.c[i] * b.c[j];
    return r;
  }
};

/// Jet of D²f, two orders shorter.
template <int K>
Jet<K - 2> second_derivative(const Jet<K>& f) {
  Jet<K - 2> r;
  for (int k = 0; k <= K - 2; ++k) r.c[k] = (k + 1) * (k + 2) * f.c[k + 2];
  return r;
}

template <int K, int J>
Jet<J> truncate(const Jet<K>& f) {
  static_assert(J <= K);
  Jet<J> r;
  for (int k = 0; k <= J; ++k) r.c[k] = f.c[k];
  return r;
}

}  // namespace fchlab
