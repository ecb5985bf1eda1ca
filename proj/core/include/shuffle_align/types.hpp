#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <numeric>
#include <string>

namespace shuffle_align {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Symmetric degrees of freedom d/r as an exact rational.
/// r == 0 marks the not-applicable case (nothing to deliver).
struct Dof {
  long long num = 0;
  long long den = 0;

  static Dof of(long long d, long long rank) { return Dof{d, rank}; }

  bool not_applicable() const { return den == 0; }

  double decimal() const {
    if (den == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(num) / static_cast<double>(den);
  }

  /// Reduced form: "1/2", "1", or "na".
  std::string str() const {
    if (den == 0) return "na";
    long long g = std::gcd(num, den);
    long long n = num / g, d = den / g;
    if (d == 1) return std::to_string(n);
    return std::to_string(n) + "/" + std::to_string(d);
  }
};

}  // namespace shuffle_align
