#include "mjw/field.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "mjw/errors.hpp"

namespace mjw {

class FieldNode {
 public:
  virtual ~FieldNode() = default;
  virtual Jet2 eval(const Vec2& x) const = 0;
  virtual bool is_constant() const { return false; }
  virtual std::string to_string() const = 0;
};

namespace {

std::string num(double v) { return fmt::format("{}", v); }

Jet2 coords(const Vec2& x, int axis) { return Jet2::variable(x[axis], axis); }

class ConstantNode final : public FieldNode {
 public:
  explicit ConstantNode(double v) : v_(v) {}
  Jet2 eval(const Vec2&) const override { return Jet2(v_); }
  bool is_constant() const override { return true; }
  std::string to_string() const override { return fmt::format("const({})", num(v_)); }

 private:
  double v_;
};

class GaussianNode final : public FieldNode {
 public:
  GaussianNode(Vec2 c, Vec2 s, double amp) : c_(c), s_(s), amp_(amp) {
    if (!(s.x() > 0 && s.y() > 0)) throw ConfigError("gaussian widths must be positive");
  }
  Jet2 eval(const Vec2& x) const override {
    const Jet2 u = (coords(x, 0) - c_.x()) / s_.x();
    const Jet2 w = (coords(x, 1) - c_.y()) / s_.y();
    return amp_ * exp(-(square(u) + square(w)));
  }
  bool is_constant() const override { return amp_ == 0.0; }
  std::string to_string() const override {
    return fmt::format("gaussian({}, {}, {}, {}, {})", num(c_.x()), num(c_.y()), num(s_.x()), num(s_.y()),
                       num(amp_));
  }

 private:
  Vec2 c_, s_;
  double amp_;
};

class SmoothstepNode final : public FieldNode {
 public:
  SmoothstepNode(int axis, double lo, double hi) : axis_(axis), lo_(lo), hi_(hi) {
    if (!(hi > lo)) throw ConfigError("smoothstep requires hi > lo");
    if (axis != 0 && axis != 1) throw ConfigError("smoothstep axis must be x1 or x2");
  }
  Jet2 eval(const Vec2& x) const override {
    const double t = (x[axis_] - lo_) / (hi_ - lo_);
    if (t <= 0.0) return Jet2(0.0);
    if (t >= 1.0) return Jet2(1.0);
    const Jet2 tj = (coords(x, axis_) - lo_) / (hi_ - lo_);
    return square(tj) * (3.0 - 2.0 * tj);
  }
  std::string to_string() const override {
    return fmt::format("smoothstep(x{}, {}, {})", axis_ + 1, num(lo_), num(hi_));
  }

 private:
  int axis_;
  double lo_, hi_;
};

class QuadraticNode final : public FieldNode {
 public:
  QuadraticNode(Vec2 c, double a) : c_(c), a_(a) {}
  Jet2 eval(const Vec2& x) const override {
    return a_ * (square(coords(x, 0) - c_.x()) + square(coords(x, 1) - c_.y()));
  }
  bool is_constant() const override { return a_ == 0.0; }
  std::string to_string() const override {
    return fmt::format("quadratic({}, {}, {})", num(c_.x()), num(c_.y()), num(a_));
  }

 private:
  Vec2 c_;
  double a_;
};

class LorentzianNode final : public FieldNode {
 public:
  LorentzianNode(Vec2 c, double amp, double w) : c_(c), amp_(amp), w_(w) {
    if (!(w > 0)) throw ConfigError("lorentzian width must be positive");
  }
  Jet2 eval(const Vec2& x) const override {
    const Jet2 r2 = square(coords(x, 0) - c_.x()) + square(coords(x, 1) - c_.y());
    return amp_ / (1.0 + r2 / (w_ * w_));
  }
  bool is_constant() const override { return amp_ == 0.0; }
  std::string to_string() const override {
    return fmt::format("lorentzian({}, {}, {}, {})", num(c_.x()), num(c_.y()), num(amp_), num(w_));
  }

 private:
  Vec2 c_;
  double amp_, w_;
};

class SumNode final : public FieldNode {
 public:
  explicit SumNode(std::vector<ScalarField2D> terms) : terms_(std::move(terms)) {}
  Jet2 eval(const Vec2& x) const override {
    Jet2 r(0.0);
    for (const auto& t : terms_) r = r + t.jet(x);
    return r;
  }
  bool is_constant() const override {
    for (const auto& t : terms_)
      if (!t.is_constant()) return false;
    return true;
  }
  std::string to_string() const override {
    std::string s = "sum(";
    for (size_t i = 0; i < terms_.size(); ++i) {
      if (i) s += ", ";
      s += terms_[i].to_string();
    }
    return s + ")";
  }

 private:
  std::vector<ScalarField2D> terms_;
};

class ProductNode final : public FieldNode {
 public:
  explicit ProductNode(std::vector<ScalarField2D> factors) : factors_(std::move(factors)) {}
  Jet2 eval(const Vec2& x) const override {
    Jet2 r(1.0);
    for (const auto& f : factors_) r = r * f.jet(x);
    return r;
  }
  bool is_constant() const override {
    for (const auto& f : factors_)
      if (!f.is_constant()) return false;
    return true;
  }
  std::string to_string() const override {
    std::string s = "product(";
    for (size_t i = 0; i < factors_.size(); ++i) {
      if (i) s += ", ";
      s += factors_[i].to_string();
    }
    return s + ")";
  }

 private:
  std::vector<ScalarField2D> factors_;
};

// Recursive-descent parser for the field grammar.
class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  ScalarField2D parse_all() {
    ScalarField2D f = parse_expr();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("field expression '{}': {} at offset {}", s_, what, pos_));
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(fmt::format("expected '{}'", c));
    ++pos_;
  }

  std::string ident() {
    skip_ws();
    size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    return s_.substr(start, pos_ - start);
  }

  double number() {
    skip_ws();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("expected number");
    if (!std::isfinite(v)) fail("non-finite number");
    pos_ += static_cast<size_t>(end - begin);
    return v;
  }

  int axis() {
    std::string id = ident();
    if (id == "x1") return 0;
    if (id == "x2") return 1;
    fail("expected axis x1 or x2");
  }

  std::vector<double> numbers(size_t count) {
    std::vector<double> out;
    for (size_t i = 0; i < count; ++i) {
      if (i) expect(',');
      out.push_back(number());
    }
    return out;
  }

  ScalarField2D parse_expr() {
    skip_ws();
    if (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '-' ||
                             s_[pos_] == '+' || s_[pos_] == '.'))
      return ScalarField2D::constant(number());
    std::string name = ident();
    if (name.empty()) fail("expected expression");
    expect('(');
    ScalarField2D out;
    if (name == "const") {
      out = ScalarField2D::constant(number());
    } else if (name == "gaussian") {
      auto a = numbers(5);
      out = ScalarField2D::gaussian({a[0], a[1]}, {a[2], a[3]}, a[4]);
    } else if (name == "smoothstep") {
      int ax = axis();
      expect(',');
      auto a = numbers(2);
      out = ScalarField2D::smoothstep(ax, a[0], a[1]);
    } else if (name == "quadratic") {
      auto a = numbers(3);
      out = ScalarField2D::quadratic({a[0], a[1]}, a[2]);
    } else if (name == "lorentzian") {
      auto a = numbers(4);
      out = ScalarField2D::lorentzian({a[0], a[1]}, a[2], a[3]);
    } else if (name == "sum" || name == "product") {
      std::vector<ScalarField2D> args{parse_expr()};
      while (peek(',')) {
        ++pos_;
        args.push_back(parse_expr());
      }
      out = name == "sum" ? ScalarField2D::sum(std::move(args)) : ScalarField2D::product(std::move(args));
    } else {
      fail("unknown primitive '" + name + "'");
    }
    expect(')');
    return out;
  }

  const std::string& s_;
  size_t pos_ = 0;
};

}  // namespace

ScalarField2D::ScalarField2D() : node_(std::make_shared<ConstantNode>(0.0)) {}
ScalarField2D::ScalarField2D(std::shared_ptr<const FieldNode> node) : node_(std::move(node)) {}

ScalarField2D ScalarField2D::constant(double v) { return ScalarField2D(std::make_shared<ConstantNode>(v)); }
ScalarField2D ScalarField2D::gaussian(Vec2 center, Vec2 widths, double amplitude) {
  return ScalarField2D(std::make_shared<GaussianNode>(center, widths, amplitude));
}
ScalarField2D ScalarField2D::smoothstep(int axis, double lo, double hi) {
  return ScalarField2D(std::make_shared<SmoothstepNode>(axis, lo, hi));
}
ScalarField2D ScalarField2D::quadratic(Vec2 center, double a) {
  return ScalarField2D(std::make_shared<QuadraticNode>(center, a));
}
ScalarField2D ScalarField2D::lorentzian(Vec2 center, double amplitude, double width) {
  return ScalarField2D(std::make_shared<LorentzianNode>(center, amplitude, width));
}
ScalarField2D ScalarField2D::sum(std::vector<ScalarField2D> terms) {
  if (terms.empty()) throw ConfigError("sum() needs at least one term");
  return ScalarField2D(std::make_shared<SumNode>(std::move(terms)));
}
ScalarField2D ScalarField2D::product(std::vector<ScalarField2D> factors) {
  if (factors.empty()) throw ConfigError("product() needs at least one factor");
  return ScalarField2D(std::make_shared<ProductNode>(std::move(factors)));
}

ScalarField2D ScalarField2D::parse(const std::string& text) { return Parser(text).parse_all(); }

double ScalarField2D::value(const Vec2& x) const { return node_->eval(x).v; }

Vec2 ScalarField2D::gradient(const Vec2& x) const {
  const Jet2 j = node_->eval(x);
  return {j.g[0], j.g[1]};
}

Jet2 ScalarField2D::jet(const Vec2& x) const { return node_->eval(x); }

bool ScalarField2D::is_constant() const { return node_->is_constant(); }

std::string ScalarField2D::to_string() const { return node_->to_string(); }

ScalarField2D operator+(const ScalarField2D& a, const ScalarField2D& b) { return ScalarField2D::sum({a, b}); }
ScalarField2D operator*(const ScalarField2D& a, const ScalarField2D& b) { return ScalarField2D::product({a, b}); }

}  // namespace mjw
