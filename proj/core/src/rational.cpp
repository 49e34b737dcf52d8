#include "fibrelab/rational.hpp"

#include <cctype>
#include <ostream>

#include "fibrelab/errors.hpp"

namespace fibrelab {

namespace {

bool is_integer_literal(std::string_view s, bool allow_sign) {
  std::size_t i = 0;
  if (allow_sign && !s.empty() && (s[0] == '-' || s[0] == '+')) i = 1;
  if (i >= s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

}  // namespace

Rational::Rational(long numerator, long denominator) : value_(numerator, denominator) {
  if (denominator == 0) throw DimensionError("rational with zero denominator");
  value_.canonicalize();
}

Rational::Rational(mpq_class value) : value_(std::move(value)) { value_.canonicalize(); }

Rational Rational::parse(std::string_view text) {
  const auto slash = text.find('/');
  const std::string_view num = text.substr(0, slash);
  if (!is_integer_literal(num, true)) throw ParseError("bad rational numerator '" + std::string(text) + "'", 0);
  std::string num_str(num);
  if (num_str[0] == '+') num_str.erase(0, 1);
  mpz_class p(num_str, 10);
  mpz_class q(1);
  if (slash != std::string_view::npos) {
    const std::string_view den = text.substr(slash + 1);
    // Signs on the denominator are rejected outright: q must be a positive literal.
    if (!is_integer_literal(den, false)) {
      throw ParseError("bad rational denominator '" + std::string(text) + "'", slash + 1);
    }
    q = mpz_class(std::string(den), 10);
    if (q <= 0) throw ParseError("rational denominator must be positive in '" + std::string(text) + "'", slash + 1);
  }
  mpq_class v(p, q);
  v.canonicalize();
  return Rational(std::move(v));
}

std::string Rational::str() const {
  if (value_.get_den() == 1) return value_.get_num().get_str();
  return value_.get_num().get_str() + "/" + value_.get_den().get_str();
}

bool Rational::is_integer() const { return value_.get_den() == 1; }

Rational& Rational::operator+=(const Rational& o) {
  value_ += o.value_;
  return *this;
}

Rational& Rational::operator-=(const Rational& o) {
  value_ -= o.value_;
  return *this;
}

Rational& Rational::operator*=(const Rational& o) {
  value_ *= o.value_;
  return *this;
}

Rational& Rational::operator/=(const Rational& o) {
  if (o.is_zero()) throw DimensionError("division by zero rational");
  value_ /= o.value_;
  return *this;
}

std::size_t Rational::hash() const {
  // Limb-level hash of numerator and denominator.
  std::size_t h = 1469598103934665603ull;
  auto mix = [&h](const mpz_class& z) {
    const std::size_t n = mpz_size(z.get_mpz_t());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<std::size_t>(mpz_getlimbn(z.get_mpz_t(), i));
      h *= 1099511628211ull;
    }
    h ^= static_cast<std::size_t>(sgn(z) + 2);
    h *= 1099511628211ull;
  };
  mix(value_.get_num());
  mix(value_.get_den());
  return h;
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

}  // namespace fibrelab
