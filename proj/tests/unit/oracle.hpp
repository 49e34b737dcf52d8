#pragma once

// Independent reference arithmetic for tests: int64 fractions and naive
// re-implementations that share no code with the library.

#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibrelab/graph_nets.hpp"
#include "fibrelab/linalg.hpp"

namespace oracle {

struct Frac {
  std::int64_t n = 0;
  std::int64_t d = 1;

  Frac() = default;
  Frac(std::int64_t num, std::int64_t den = 1) : n(num), d(den) {  // NOLINT
    if (d == 0) throw std::domain_error("zero denominator");
    if (d < 0) n = -n, d = -d;
    const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
    if (g > 1) n /= g, d /= g;
  }
  friend Frac operator+(Frac a, Frac b) { return Frac(a.n * b.d + b.n * a.d, a.d * b.d); }
  friend Frac operator-(Frac a, Frac b) { return Frac(a.n * b.d - b.n * a.d, a.d * b.d); }
  friend Frac operator*(Frac a, Frac b) { return Frac(a.n * b.n, a.d * b.d); }
  friend Frac operator/(Frac a, Frac b) { return Frac(a.n * b.d, a.d * b.n); }
  friend bool operator==(Frac a, Frac b) { return a.n == b.n && a.d == b.d; }
  friend bool operator<(Frac a, Frac b) { return a.n * b.d < b.n * a.d; }
  std::string str() const { return d == 1 ? std::to_string(n) : std::to_string(n) + "/" + std::to_string(d); }
};

using Vec = std::vector<Frac>;
using Mat = std::vector<Vec>;

inline Frac of(const fibrelab::Rational& r) {
  return Frac(std::stoll(r.numerator_str()), std::stoll(r.denominator_str()));
}

inline Vec of(const fibrelab::RVector& v) {
  Vec out;
  for (const auto& r : v) out.push_back(of(r));
  return out;
}

inline Mat of(const fibrelab::RMatrix& m) {
  Mat out(m.rows(), Vec(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = of(m.at(r, c));
  }
  return out;
}

inline bool same(const fibrelab::RVector& a, const Vec& b) { return of(a) == b; }

inline Vec affine(const Mat& w, const Vec& x, const Vec& b) {
  Vec out = b;
  for (std::size_t r = 0; r < w.size(); ++r) {
    for (std::size_t c = 0; c < x.size(); ++c) out[r] = out[r] + w[r][c] * x[c];
  }
  return out;
}

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] + b[i];
  return a;
}

inline Vec scale(Frac s, Vec v) {
  for (auto& e : v) e = s * e;
  return v;
}

inline Vec clip(Vec v) {
  for (auto& e : v) {
    if (e < Frac(0)) e = Frac(0);
    if (Frac(1) < e) e = Frac(1);
  }
  return v;
}

inline Vec hardmax(const Vec& v) {
  Frac best = v.at(0);
  for (const auto& e : v) {
    if (best < e) best = e;
  }
  std::int64_t k = 0;
  for (const auto& e : v) k += e == best ? 1 : 0;
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] == best ? Frac(1, k) : Frac(0);
  return out;
}

inline Frac dot(const Vec& a, const Vec& b) {
  Frac s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s = s + a[i] * b[i];
  return s;
}

inline Vec concat(Vec a, const Vec& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Final-layer h vectors of a GNN (attention == nullptr) or hard-attention GAT.
inline std::vector<Vec> graph_net(const fibrelab::GnnInstance& inst, const std::vector<fibrelab::RVector>* attention,
                                  const fibrelab::Graph& g, const std::vector<fibrelab::RVector>& features) {
  std::vector<Vec> x;
  for (const auto& f : features) x.push_back(of(f));
  std::vector<Vec> h = x;
  for (std::size_t l = 1; l <= inst.depth(); ++l) {
    const Mat A = of(inst.layer(l).A), B = of(inst.layer(l).B);
    const Vec b = of(inst.layer(l).b);
    const Vec zero(b.size(), Frac(0));
    std::vector<Vec> next(x.size());
    for (std::size_t u = 0; u < x.size(); ++u) {
      const Vec self = affine(B, x[u], zero);
      if (attention == nullptr) {
        Vec acc = add(self, b);
        for (auto w : g.neighbours(u)) acc = add(acc, affine(A, x[w], zero));
        next[u] = acc;
      } else {
        const Vec a = of(attention->at(l - 1));
        std::vector<std::size_t> cand{u};
        for (auto w : g.neighbours(u)) cand.push_back(w);
        Vec scores;
        for (auto w : cand) scores.push_back(dot(a, concat(affine(A, x[w], zero), self)));
        const Vec alpha = hardmax(scores);
        Vec acc = b;
        for (std::size_t j = 0; j < cand.size(); ++j) {
          acc = add(acc, scale(alpha[j], j == 0 ? self : affine(A, x[cand[j]], zero)));
        }
        next[u] = acc;
      }
    }
    h = next;
    for (auto& v : next) v = clip(v);
    x = next;
  }
  return h;
}

}  // namespace oracle
