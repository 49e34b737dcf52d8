#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fibrelab/rational.hpp"

namespace fibrelab {

/// Dense vector of exact rationals.
class RVector {
 public:
  RVector() = default;
  explicit RVector(std::size_t dim) : entries_(dim) {}
  explicit RVector(std::vector<Rational> entries) : entries_(std::move(entries)) {}
  RVector(std::initializer_list<Rational> entries) : entries_(entries) {}

  static RVector zeros(std::size_t dim) { return RVector(dim); }
  static RVector constant(std::size_t dim, const Rational& value);
  /// Boolean vector of the low `dim` bits of `bits` (bit i -> entry i).
  static RVector from_bits(std::uint64_t bits, std::size_t dim);

  /// Parses "(a,b,c)" or "a,b,c"; whitespace is ignored.
  static RVector parse(std::string_view text);

  std::size_t dim() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const Rational& operator[](std::size_t i) const { return entries_[i]; }
  Rational& operator[](std::size_t i) { return entries_[i]; }

  std::span<const Rational> entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  RVector slice(std::size_t offset, std::size_t length) const;
  RVector concat(const RVector& other) const;

  /// Canonical serialization "(a,b,c)"; equal vectors have equal keys.
  std::string key() const;

  friend bool operator==(const RVector&, const RVector&) = default;

 private:
  std::vector<Rational> entries_;
};

RVector operator+(const RVector& a, const RVector& b);
RVector operator-(const RVector& a, const RVector& b);
RVector operator*(const Rational& s, const RVector& v);
Rational dot(const RVector& a, const RVector& b);

std::ostream& operator<<(std::ostream& os, const RVector& v);

/// Dense row-major matrix of exact rationals.
class RMatrix {
 public:
  RMatrix() = default;
  RMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), entries_(rows * cols) {}
  RMatrix(std::size_t rows, std::size_t cols, std::vector<Rational> entries);
  /// Builds from nested rows; every row must have the same length.
  static RMatrix from_rows(const std::vector<std::vector<Rational>>& rows);

  static RMatrix identity(std::size_t n);
  static RMatrix zero(std::size_t rows, std::size_t cols) { return RMatrix(rows, cols); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  const Rational& at(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }
  Rational& at(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }

  std::span<const Rational> entries() const { return entries_; }

  /// Stacks `below` under this matrix; column counts must agree.
  RMatrix vstack(const RMatrix& below) const;
  /// Places `right` beside this matrix; row counts must agree.
  RMatrix hstack(const RMatrix& right) const;
  /// Writes `block` with its top-left corner at (row, col).
  void set_block(std::size_t row, std::size_t col, const RMatrix& block);

  friend bool operator==(const RMatrix&, const RMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Rational> entries_;
};

/// W * x + b, exactly.
RVector mat_vec_mul_add(const RMatrix& w, const RVector& x, const RVector& b);

/// Componentwise min(1, max(0, v_i)).
RVector truncated_relu(const RVector& v);

/// Every occurrence of max(v) becomes 1/k (k = multiplicity), everything else 0.
RVector hardmax(const RVector& v);

}  // namespace fibrelab
