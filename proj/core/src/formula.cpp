#include "fibrelab/formula.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

namespace fibrelab {

std::string ComponentId::str() const { return node + "," + (layer ? std::to_string(*layer) : std::string("in")); }

std::strong_ordering operator<=>(const ComponentId& a, const ComponentId& b) {
  if (auto c = a.node <=> b.node; c != 0) return c;
  // The input component sorts before every layer component.
  if (a.layer.has_value() != b.layer.has_value()) {
    return a.layer.has_value() ? std::strong_ordering::greater : std::strong_ordering::less;
  }
  if (!a.layer) return std::strong_ordering::equal;
  return *a.layer <=> *b.layer;
}

Formula Formula::prop(std::size_t index) {
  if (index == 0) throw ParseError("proposition indices start at 1", 0);
  return Formula(std::make_shared<const Node>(Node{FormulaKind::Prop, index, {}, nullptr, nullptr}));
}

Formula Formula::top() { return Formula(std::make_shared<const Node>(Node{FormulaKind::Top, 0, {}, nullptr, nullptr})); }

Formula Formula::conj(Formula a, Formula b) {
  return Formula(std::make_shared<const Node>(Node{FormulaKind::And, 0, {}, std::make_shared<const Formula>(std::move(a)),
                                                   std::make_shared<const Formula>(std::move(b))}));
}

Formula Formula::neg(Formula a) {
  return Formula(
      std::make_shared<const Node>(Node{FormulaKind::Not, 0, {}, std::make_shared<const Formula>(std::move(a)), nullptr}));
}

Formula Formula::box(ComponentId component, Formula body) {
  return Formula(std::make_shared<const Node>(
      Node{FormulaKind::Box, 0, std::move(component), std::make_shared<const Formula>(std::move(body)), nullptr}));
}

Formula Formula::disj(Formula a, Formula b) { return neg(conj(neg(std::move(a)), neg(std::move(b)))); }

namespace {

Formula balanced(std::vector<Formula>& parts, std::size_t lo, std::size_t hi,
                 const std::function<Formula(Formula, Formula)>& join) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return join(balanced(parts, lo, mid, join), balanced(parts, mid, hi, join));
}

}  // namespace

Formula Formula::big_conj(std::vector<Formula> parts) {
  if (parts.empty()) return top();
  return balanced(parts, 0, parts.size(), &Formula::conj);
}

Formula Formula::big_disj(std::vector<Formula> parts) {
  if (parts.empty()) return neg(top());
  return balanced(parts, 0, parts.size(), &Formula::disj);
}

std::size_t Formula::modal_depth() const {
  switch (kind()) {
    case FormulaKind::Prop:
    case FormulaKind::Top: return 0;
    case FormulaKind::And: return std::max(lhs().modal_depth(), rhs().modal_depth());
    case FormulaKind::Not: return body().modal_depth();
    case FormulaKind::Box: return 1 + body().modal_depth();
  }
  return 0;
}

std::size_t Formula::size() const {
  switch (kind()) {
    case FormulaKind::Prop:
    case FormulaKind::Top: return 1;
    case FormulaKind::And: return 1 + lhs().size() + rhs().size();
    default: return 1 + body().size();
  }
}

std::size_t Formula::max_prop() const {
  switch (kind()) {
    case FormulaKind::Prop: return prop_index();
    case FormulaKind::Top: return 0;
    case FormulaKind::And: return std::max(lhs().max_prop(), rhs().max_prop());
    default: return body().max_prop();
  }
}

bool operator==(const Formula& a, const Formula& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case FormulaKind::Prop: return a.prop_index() == b.prop_index();
    case FormulaKind::Top: return true;
    case FormulaKind::And: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
    case FormulaKind::Not: return a.body() == b.body();
    case FormulaKind::Box: return a.component() == b.component() && a.body() == b.body();
  }
  return false;
}

namespace {

void print_into(const Formula& f, std::string& out) {
  switch (f.kind()) {
    case FormulaKind::Prop:
      out += 'p';
      out += std::to_string(f.prop_index());
      break;
    case FormulaKind::Top: out += 'T'; break;
    case FormulaKind::And:
      out += '(';
      print_into(f.lhs(), out);
      out += " & ";
      print_into(f.rhs(), out);
      out += ')';
      break;
    case FormulaKind::Not:
      out += '~';
      print_into(f.body(), out);
      break;
    case FormulaKind::Box:
      out += '[';
      out += f.component().str();
      out += ']';
      print_into(f.body(), out);
      break;
  }
}

bool is_node_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ':';
}

class Parser {
 public:
  Parser(std::string_view text, std::optional<std::size_t> num_props) : text_(text), num_props_(num_props) {}

  Formula parse() {
    Formula f = formula();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::size_t number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a number");
    if (pos_ - start > 9) fail("number too large");
    return static_cast<std::size_t>(std::stoul(std::string(text_.substr(start, pos_ - start))));
  }

  Formula formula() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of formula");
    const char c = text_[pos_];
    if (c == 'T') {
      ++pos_;
      return Formula::top();
    }
    if (c == 'p') {
      const std::size_t at = pos_;
      ++pos_;
      const std::size_t k = number();
      if (k == 0) throw ParseError("proposition indices start at 1", at);
      if (num_props_ && k > *num_props_) {
        throw ParseError("unknown proposition p" + std::to_string(k) + " (only " + std::to_string(*num_props_) + ")",
                         at);
      }
      return Formula::prop(k);
    }
    if (c == '~') {
      ++pos_;
      return Formula::neg(formula());
    }
    if (c == '(') {
      ++pos_;
      Formula a = formula();
      expect('&');
      Formula b = formula();
      expect(')');
      return Formula::conj(std::move(a), std::move(b));
    }
    if (c == '[') {
      ++pos_;
      skip_ws();
      const std::size_t start = pos_;
      while (pos_ < text_.size() && is_node_char(text_[pos_])) ++pos_;
      if (start == pos_) fail("expected a node id");
      NodeId node(text_.substr(start, pos_ - start));
      expect(',');
      skip_ws();
      std::optional<std::size_t> layer;
      if (text_.substr(pos_, 2) == "in") {
        pos_ += 2;
      } else {
        layer = number();
        if (*layer == 0) fail("layer indices start at 1");
      }
      expect(']');
      return Formula::box(ComponentId{std::move(node), layer}, formula());
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  std::optional<std::size_t> num_props_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string print_formula(const Formula& f) {
  std::string out;
  print_into(f, out);
  return out;
}

Formula parse_formula(std::string_view text, std::optional<std::size_t> num_props) {
  return Parser(text, num_props).parse();
}

}  // namespace fibrelab
