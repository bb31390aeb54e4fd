#pragma once

#include <cstdint>
#include <string>

#include "c3mod/domain.hpp"

namespace c3mod::eval {

/// Regularized lower and upper incomplete gamma functions for a > 0, x >= 0,
/// good to about 1e-14 absolute.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_sf(double chi2, int df);

/// Rows: native annotators agree / disagree. Columns: decision correct /
/// incorrect.
struct ContingencyTable2x2 {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t c = 0;
  std::uint64_t d = 0;

  std::uint64_t total() const { return a + b + c + d; }
  friend bool operator==(const ContingencyTable2x2&, const ContingencyTable2x2&) = default;
};

struct StatTestResult {
  double chi2 = 0.0;
  double p_value = 1.0;
  int df = 1;
};

class DegenerateTable : public Error {
 public:
  using Error::Error;
};

/// Pearson's statistic without continuity correction. Throws DegenerateTable
/// when a row or column sums to zero.
StatTestResult chi_square_2x2(const ContingencyTable2x2& t);

/// Nonnegative rational with an exact 4-decimal rendering.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// "0.7778" for 133/171: rounded half away from zero in integer arithmetic.
/// Throws ValidationError when den is 0.
std::string format4(const Ratio& r);
/// Same rule applied to a double (std::round semantics); "-0.0000" never
/// appears.
std::string format4(double x);
/// Fixed `decimals` places, half away from zero.
std::string format_fixed(double x, int decimals);

}  // namespace c3mod::eval
