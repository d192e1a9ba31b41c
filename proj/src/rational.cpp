#include "normalign/rational.hpp"

#include "normalign/errors.hpp"

#include <cctype>
#include <cstdlib>

namespace normalign {

namespace {

using boost::multiprecision::cpp_int;

cpp_int pow10(int exponent) {
  cpp_int result = 1;
  for (int i = 0; i < exponent; ++i) result *= 10;
  return result;
}

// floor(|value| * 10^decimals + 1/2) with the sign reapplied.
cpp_int scaled_half_up(const Rational& value, int decimals) {
  const Rational scaled = abs(value) * Rational(pow10(decimals)) + Rational(1, 2);
  cpp_int rounded = numerator(scaled) / denominator(scaled);
  return value < 0 ? cpp_int(-rounded) : rounded;
}

}  // namespace

Rational make_rational(long long num, long long den) {
  if (den == 0) throw InvalidInput("rational with zero denominator");
  return Rational(cpp_int(num), cpp_int(den));
}

std::string to_exact_string(const Rational& value) {
  if (denominator(value) == 1) return numerator(value).str();
  return numerator(value).str() + "/" + denominator(value).str();
}

Rational parse_exact(std::string_view text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string_view::npos) return Rational(cpp_int(std::string(text)));
    const cpp_int den(std::string(text.substr(slash + 1)));
    if (den == 0) throw InvalidInput("zero denominator in '" + std::string(text) + "'");
    return Rational(cpp_int(std::string(text.substr(0, slash))), den);
  } catch (const std::runtime_error&) {
    throw InvalidInput("not an exact rational: '" + std::string(text) + "'");
  }
}

Rational parse_decimal(std::string_view text) {
  std::size_t pos = 0;
  const auto fail = [&] { return InvalidInput("not a decimal number: '" + std::string(text) + "'"); };
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  bool negative = false;
  if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    negative = text[pos] == '-';
    ++pos;
  }
  cpp_int digits = 0;
  int fraction_digits = 0;
  bool any_digit = false;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits = digits * 10 + (c - '0');
      any_digit = true;
      if (seen_point) ++fraction_digits;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (!any_digit) throw fail();
  int exponent = 0;
  if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
    ++pos;
    const std::string rest(text.substr(pos));
    char* end = nullptr;
    const long parsed = std::strtol(rest.c_str(), &end, 10);
    if (end == rest.c_str()) throw fail();
    exponent = static_cast<int>(parsed);
    pos += static_cast<std::size_t>(end - rest.c_str());
  }
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  if (pos != text.size()) throw fail();

  const int shift = exponent - fraction_digits;
  Rational value = shift >= 0 ? Rational(digits * pow10(shift)) : Rational(digits, pow10(-shift));
  return negative ? Rational(-value) : value;
}

double to_double(const Rational& value) { return value.convert_to<double>(); }

std::string render_fixed(const Rational& value, int decimals) {
  const cpp_int scaled = scaled_half_up(value, decimals);
  std::string digits = (scaled < 0 ? cpp_int(-scaled) : scaled).str();
  if (decimals > 0) {
    if (digits.size() <= static_cast<std::size_t>(decimals)) {
      digits.insert(0, static_cast<std::size_t>(decimals) + 1 - digits.size(), '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(decimals), ".");
  }
  return scaled < 0 ? "-" + digits : digits;
}

std::string render_percent(const Rational& value, int decimals) {
  return render_fixed(value * 100, decimals) + "%";
}

double rounded_double(const Rational& value, int decimals) {
  return std::strtod(render_fixed(value, decimals).c_str(), nullptr);
}

}  // namespace normalign
