#include "fibrelab/linalg.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>

#include "fibrelab/errors.hpp"

namespace fibrelab {

RVector RVector::constant(std::size_t dim, const Rational& value) {
  return RVector(std::vector<Rational>(dim, value));
}

RVector RVector::from_bits(std::uint64_t bits, std::size_t dim) {
  RVector v(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if ((bits >> i) & 1u) v[i] = Rational(1);
  }
  return v;
}

RVector RVector::parse(std::string_view text) {
  std::string cleaned;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) cleaned.push_back(c);
  }
  std::string_view body = cleaned;
  if (!body.empty() && body.front() == '(') {
    if (body.back() != ')') throw ParseError("unbalanced vector parentheses", cleaned.size());
    body = body.substr(1, body.size() - 2);
  }
  std::vector<Rational> out;
  if (body.empty()) return RVector(std::move(out));
  std::size_t start = 0;
  while (true) {
    const auto comma = body.find(',', start);
    out.push_back(Rational::parse(body.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return RVector(std::move(out));
}

RVector RVector::slice(std::size_t offset, std::size_t length) const {
  if (offset + length > dim()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                         ") out of range for vector of dim " + std::to_string(dim()));
  }
  return RVector(std::vector<Rational>(entries_.begin() + static_cast<std::ptrdiff_t>(offset),
                                       entries_.begin() + static_cast<std::ptrdiff_t>(offset + length)));
}

RVector RVector::concat(const RVector& other) const {
  std::vector<Rational> out = entries_;
  out.insert(out.end(), other.entries_.begin(), other.entries_.end());
  return RVector(std::move(out));
}

std::string RVector::key() const {
  std::string s = "(";
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) s += ',';
    s += entries_[i].str();
  }
  s += ')';
  return s;
}

RVector operator+(const RVector& a, const RVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("vector sum: lhs dim " + std::to_string(a.dim()) + " != rhs dim " + std::to_string(b.dim()));
  }
  RVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] + b[i];
  return out;
}

RVector operator-(const RVector& a, const RVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("vector difference: lhs dim " + std::to_string(a.dim()) + " != rhs dim " +
                         std::to_string(b.dim()));
  }
  RVector out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) out[i] = a[i] - b[i];
  return out;
}

RVector operator*(const Rational& s, const RVector& v) {
  RVector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = s * v[i];
  return out;
}

Rational dot(const RVector& a, const RVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("dot product: lhs dim " + std::to_string(a.dim()) + " != rhs dim " + std::to_string(b.dim()));
  }
  mpq_class acc;
  for (std::size_t i = 0; i < a.dim(); ++i) acc += a[i].raw() * b[i].raw();
  return Rational(std::move(acc));
}

std::ostream& operator<<(std::ostream& os, const RVector& v) { return os << v.key(); }

RMatrix::RMatrix(std::size_t rows, std::size_t cols, std::vector<Rational> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (entries_.size() != rows_ * cols_) {
    throw DimensionError("matrix of shape " + std::to_string(rows_) + "x" + std::to_string(cols_) + " given " +
                         std::to_string(entries_.size()) + " entries");
  }
}

RMatrix RMatrix::from_rows(const std::vector<std::vector<Rational>>& rows) {
  if (rows.empty()) return RMatrix();
  const std::size_t cols = rows.front().size();
  std::vector<Rational> entries;
  entries.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw DimensionError("ragged matrix rows");
    entries.insert(entries.end(), row.begin(), row.end());
  }
  return RMatrix(rows.size(), cols, std::move(entries));
}

RMatrix RMatrix::identity(std::size_t n) {
  RMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = Rational(1);
  return m;
}

RMatrix RMatrix::vstack(const RMatrix& below) const {
  if (cols_ != below.cols_) {
    throw DimensionError("vstack: column counts " + std::to_string(cols_) + " and " + std::to_string(below.cols_));
  }
  std::vector<Rational> entries = entries_;
  entries.insert(entries.end(), below.entries_.begin(), below.entries_.end());
  return RMatrix(rows_ + below.rows_, cols_, std::move(entries));
}

RMatrix RMatrix::hstack(const RMatrix& right) const {
  if (rows_ != right.rows_) {
    throw DimensionError("hstack: row counts " + std::to_string(rows_) + " and " + std::to_string(right.rows_));
  }
  RMatrix out(rows_, cols_ + right.cols_);
  out.set_block(0, 0, *this);
  out.set_block(0, cols_, right);
  return out;
}

void RMatrix::set_block(std::size_t row, std::size_t col, const RMatrix& block) {
  if (row + block.rows_ > rows_ || col + block.cols_ > cols_) throw DimensionError("set_block out of range");
  for (std::size_t r = 0; r < block.rows_; ++r) {
    for (std::size_t c = 0; c < block.cols_; ++c) at(row + r, col + c) = block.at(r, c);
  }
}

RVector mat_vec_mul_add(const RMatrix& w, const RVector& x, const RVector& b) {
  if (w.cols() != x.dim()) {
    throw DimensionError("W*x+b: W has " + std::to_string(w.cols()) + " columns but x has dim " +
                         std::to_string(x.dim()));
  }
  if (w.rows() != b.dim()) {
    throw DimensionError("W*x+b: W has " + std::to_string(w.rows()) + " rows but b has dim " +
                         std::to_string(b.dim()));
  }
  RVector out(w.rows());
  mpq_class acc;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    acc = b[r].raw();
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const auto& wij = w.at(r, c);
      if (!wij.is_zero() && !x[c].is_zero()) acc += wij.raw() * x[c].raw();
    }
    out[r] = Rational(acc);
  }
  return out;
}

RVector truncated_relu(const RVector& v) {
  RVector out(v.dim());
  const Rational one(1);
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v[i].sign() <= 0) {
      out[i] = Rational(0);
    } else if (v[i] >= one) {
      out[i] = one;
    } else {
      out[i] = v[i];
    }
  }
  return out;
}

RVector hardmax(const RVector& v) {
  if (v.empty()) throw DimensionError("hardmax of an empty vector");
  const Rational& top = *std::max_element(v.begin(), v.end());
  const auto k = std::count(v.begin(), v.end(), top);
  const Rational share(1, static_cast<long>(k));
  RVector out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (v[i] == top) out[i] = share;
  }
  return out;
}

}  // namespace fibrelab
