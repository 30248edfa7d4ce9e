#pragma once

// Scalar media fields on the plane: potentials U, masses m, depths D and
// surface tensions mu. A field is an immutable expression tree over a small
// set of primitives; evaluation returns value, gradient and Hessian.
//
// Textual grammar (used by the run configuration):
//
//   expr  := number
//          | const(v)
//          | gaussian(cx, cy, sx, sy, amp)     amp*exp(-((x1-cx)/sx)^2-((x2-cy)/sy)^2)
//          | smoothstep(x1|x2, lo, hi)         0 below lo, 1 above hi, 3t^2-2t^3 between
//          | quadratic(cx, cy, a)              a*|x-c|^2
//          | lorentzian(cx, cy, amp, w)        amp/(1+|x-c|^2/w^2)
//          | sum(expr, expr, ...)
//          | product(expr, expr, ...)

#include <memory>
#include <string>
#include <vector>

#include "mjw/jet.hpp"
#include "mjw/types.hpp"

namespace mjw {

using Jet2 = Jet<2>;

class FieldNode;

class ScalarField2D {
 public:
  ScalarField2D();  // identically zero
  explicit ScalarField2D(std::shared_ptr<const FieldNode> node);

  static ScalarField2D constant(double v);
  static ScalarField2D gaussian(Vec2 center, Vec2 widths, double amplitude);
  static ScalarField2D smoothstep(int axis, double lo, double hi);
  static ScalarField2D quadratic(Vec2 center, double a);
  static ScalarField2D lorentzian(Vec2 center, double amplitude, double width);
  static ScalarField2D sum(std::vector<ScalarField2D> terms);
  static ScalarField2D product(std::vector<ScalarField2D> factors);

  /// Parses the textual grammar above. Throws ConfigError on malformed input.
  static ScalarField2D parse(const std::string& text);

  double value(const Vec2& x) const;
  Vec2 gradient(const Vec2& x) const;
  Jet2 jet(const Vec2& x) const;

  /// True when the field is a constant everywhere (gradient identically 0).
  bool is_constant() const;

  /// Canonical textual form; parse(to_string()) reproduces the field.
  std::string to_string() const;

 private:
  std::shared_ptr<const FieldNode> node_;
};

ScalarField2D operator+(const ScalarField2D& a, const ScalarField2D& b);
ScalarField2D operator*(const ScalarField2D& a, const ScalarField2D& b);

}  // namespace mjw
