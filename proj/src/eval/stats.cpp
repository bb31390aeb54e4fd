#include "c3mod/eval/stats.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace c3mod::eval {
namespace {

constexpr int kMaxIterations = 10000;
constexpr double kEpsilon = 1e-16;

// Series for P(a, x), converges quickly for x < a + 1.
double lower_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIterations; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEpsilon) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) by the modified Lentz method, for x >= a + 1.
double upper_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEpsilon;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEpsilon) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_gamma_args(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw ValidationError("incomplete gamma needs a > 0 and x >= 0");
}

}  // namespace

double gamma_p(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? lower_series(a, x) : 1.0 - upper_fraction(a, x);
}

double gamma_q(double a, double x) {
  check_gamma_args(a, x);
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - lower_series(a, x) : upper_fraction(a, x);
}

double chi_square_sf(double chi2, int df) {
  if (df < 1) throw ValidationError("degrees of freedom must be positive");
  if (!(chi2 >= 0.0)) throw ValidationError("chi-square statistic must be nonnegative");
  return gamma_q(0.5 * df, 0.5 * chi2);
}

StatTestResult chi_square_2x2(const ContingencyTable2x2& t) {
  const double obs[2][2] = {{static_cast<double>(t.a), static_cast<double>(t.b)},
                            {static_cast<double>(t.c), static_cast<double>(t.d)}};
  const double rows[2] = {obs[0][0] + obs[0][1], obs[1][0] + obs[1][1]};
  const double cols[2] = {obs[0][0] + obs[1][0], obs[0][1] + obs[1][1]};
  if (rows[0] == 0 || rows[1] == 0 || cols[0] == 0 || cols[1] == 0) {
    throw DegenerateTable("contingency table (" + std::to_string(t.a) + "," + std::to_string(t.b) +
                          "," + std::to_string(t.c) + "," + std::to_string(t.d) +
                          ") has a zero marginal");
  }
  const double n = rows[0] + rows[1];
  double chi2 = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = rows[i] * cols[j] / n;
      const double diff = obs[i][j] - expected;
      chi2 += diff * diff / expected;
    }
  }
  return {chi2, chi_square_sf(chi2, 1), 1};
}

std::string format4(const Ratio& r) {
  if (r.den == 0) throw ValidationError("ratio with zero denominator");
  // round(num / den * 10^4) half away from zero; all quantities nonnegative.
  const unsigned __int128 scaled = static_cast<unsigned __int128>(r.num) * 20000u + r.den;
  const auto q = static_cast<std::uint64_t>(scaled / (2u * static_cast<unsigned __int128>(r.den)));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%llu.%04llu", static_cast<unsigned long long>(q / 10000),
                static_cast<unsigned long long>(q % 10000));
  return buf;
}

std::string format_fixed(double x, int decimals) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  const double scale = std::pow(10.0, decimals);
  double rounded = std::round(x * scale) / scale;
  if (rounded == 0.0) rounded = 0.0;  // drops the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

std::string format4(double x) { return format_fixed(x, 4); }

}  // namespace c3mod::eval
