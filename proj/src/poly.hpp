#pragma once

// Polynomial helpers on ascending coefficient vectors (constant term first).

#include <vector>

#include "phasesync/types.hpp"

namespace phasesync::poly {

inline std::vector<double> trim(std::vector<double> p, double tol = 0.0) {
  while (p.size() > 1 && std::abs(p.back()) <= tol) p.pop_back();
  return p;
}

inline std::vector<double> mul(const std::vector<double>& a,
                               const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline std::vector<double> add(std::vector<double> a,
                               const std::vector<double>& b) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (size_t i = 0; i < b.size(); ++i) a[i] += b[i];
  return a;
}

inline std::vector<double> scale(std::vector<double> a, double s) {
  for (double& c : a) c *= s;
  return a;
}

inline Complex eval(const std::vector<double>& p, Complex s) {
  Complex acc = 0.0;
  for (size_t i = p.size(); i-- > 0;) acc = acc * s + p[i];
  return acc;
}

template <typename T>
inline Complex eval_c(const std::vector<T>& p, Complex s) {
  Complex acc = 0.0;
  for (size_t i = p.size(); i-- > 0;) acc = acc * s + Complex(p[i]);
  return acc;
}

/// (1 + c s)^k style binomial powers, via repeated multiplication.
inline std::vector<double> power(const std::vector<double>& base, int k) {
  std::vector<double> out{1.0};
  for (int i = 0; i < k; ++i) out = mul(out, base);
  return out;
}

/// Roots via the companion matrix of the monic normalization.
inline std::vector<Complex> roots(const std::vector<double>& p_in) {
  auto p = trim(p_in, 0.0);
  int deg = static_cast<int>(p.size()) - 1;
  if (deg < 1) return {};
  RMat comp = RMat::Zero(deg, deg);
  for (int i = 0; i < deg - 1; ++i) comp(i + 1, i) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -p[i] / p[deg];
  Eigen::EigenSolver<RMat> es(comp, false);
  std::vector<Complex> out(deg);
  for (int i = 0; i < deg; ++i) out[i] = es.eigenvalues()(i);
  return out;
}

}  // namespace phasesync::poly
