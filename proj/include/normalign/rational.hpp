#pragma once

// Exact score arithmetic. Every metric is a ratio of counts, so scores are
// kept as unbounded rationals and only turned into decimals when rendered.

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace normalign {

using Rational = boost::multiprecision::cpp_rational;

/// A metric value that may be undefined (rendered as JSON null, never 0).
using MaybeRational = std::optional<Rational>;

Rational make_rational(long long num, long long den);

/// "3/4", or "2" for integers.
std::string to_exact_string(const Rational& value);

Rational parse_exact(std::string_view text);

/// Parses a decimal literal ("0.25", "-1.5e-3") without going through a double.
Rational parse_decimal(std::string_view text);

double to_double(const Rational& value);

/// Rounds half away from zero to `decimals` places: 0.965 -> "0.97".
std::string render_fixed(const Rational& value, int decimals);

/// render_fixed of 100*value followed by '%'.
std::string render_percent(const Rational& value, int decimals);

/// Value rounded half-up to `decimals` places, as a double (for JSON numbers).
double rounded_double(const Rational& value, int decimals);

}  // namespace normalign
