#pragma once

// Symbol models F(x, z), z = |p| >= 0, for the isotropic Hamiltonians
// calH(x, p) = F(x, |p|) - E together with the Finsler companion
// H(x, p) = C(x, E)|p| - 1, where z = 1/C solves F(x, z) = E, and the
// reparametrization factor R = z dF/dz at z = 1/C.

#include <string>

#include "mjw/field.hpp"
#include "mjw/jet.hpp"
#include "mjw/types.hpp"

namespace mjw {

using Jet4 = Jet<4>;  // variables (x1, x2, p1, p2)

enum class ModelKind { schrodinger, helmholtz, graphene, waterwave, waterwave_tension };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Root data of the water-wave dispersion relation at one point.
struct DispersionScratch {
  double y = 0.0;        // positive root Y
  double energy = 0.0;   // calE = E sqrt(D)
  double nu = 0.0;       // E mu^(1/4), zero without surface tension
};

// --- Water-wave dispersion roots -------------------------------------------

/// Positive root of y tanh(y) = calE^2.
double solve_Y(double calE);
/// dY/dcalE from the closed form 2 Y calE / (Y^2 + calE^2 - calE^4).
double dY(double calE);
/// Positive root of f(y, calE, nu) = y tanh y - calE^2 / (1 + y^2 nu^4 / calE^4).
double solve_Y_tension(double calE, double nu);
/// Gradient of Y(calE(x), nu(x)) by implicit differentiation of f.
Vec2 dY_tension(double calE, double nu, const Vec2& dcalE_dx, const Vec2& dnu_dx);

/// Partial derivatives of f(y, calE, nu).
struct TensionPartials {
  double f = 0.0, fy = 0.0, fE = 0.0, fnu = 0.0;
};
TensionPartials tension_partials(double y, double calE, double nu);

// --- Symbol models -----------------------------------------------------------

class SymbolModel {
 public:
  static SymbolModel schrodinger(double E, ScalarField2D U);
  /// F = z + U, i.e. the optical Hamiltonian |p|/(E - U) after normalization.
  static SymbolModel helmholtz(double E, ScalarField2D U);
  /// F = U + branch * sqrt(z^2 + m^2), branch = +1 or -1.
  static SymbolModel graphene(double E, ScalarField2D U, ScalarField2D m, int branch);
  static SymbolModel waterwave(double E, ScalarField2D D);
  static SymbolModel waterwave_tension(double E, ScalarField2D D, ScalarField2D mu);

  ModelKind kind() const { return kind_; }
  double energy() const { return E_; }
  int branch() const { return branch_; }
  const ScalarField2D& U() const { return U_; }
  const ScalarField2D& m() const { return m_; }
  const ScalarField2D& D() const { return D_; }
  const ScalarField2D& mu() const { return mu_; }

  /// Strict-inequality guard for admissibility checks (E - U > eps, ...).
  double eps_dom() const { return eps_dom_; }
  void set_eps_dom(double eps) { eps_dom_ = eps; }

  double eval_F(const Vec2& x, double z) const;
  double dF_dz(const Vec2& x, double z) const;

  /// C(x, E) > 0 with F(x, 1/C) = E. Throws DomainViolation outside the
  /// admissible set.
  double dispersion_C(const Vec2& x) const;
  Jet2 dispersion_C_jet(const Vec2& x) const;
  Vec2 grad_C(const Vec2& x) const;

  /// R(x) = z dF/dz at z = 1/C(x, E).
  double factor_R(const Vec2& x) const;
  /// R evaluated algebraically from (x, p) on the shell C|p| = 1; avoids the
  /// dispersion root for water waves. Throws ShellViolation off the shell.
  double factor_R_onshell(const Vec2& x, const Vec2& p) const;
  /// Same as factor_R_onshell without the shell check.
  double factor_R_onshell_unchecked(const Vec2& x, const Vec2& p) const;

  /// Water-wave root data at x (waterwave and waterwave_tension only).
  DispersionScratch dispersion(const Vec2& x) const;

  /// calH(x, p) = F(x, |p|) - E as a jet in (x1, x2, p1, p2).
  Jet4 physical_hamiltonian(const Vec2& x, const Vec2& p) const;
  /// H(x, p) = C(x)|p| - 1 as a jet in (x1, x2, p1, p2).
  Jet4 finsler_hamiltonian(const Vec2& x, const Vec2& p) const;

  /// |C(x)|p| - 1|.
  double shell_residual(const Vec2& x, const Vec2& p) const;

 private:
  SymbolModel(ModelKind kind, double E) : kind_(kind), E_(E) {}
  void check_fields_at(const Vec2& x) const;

  ModelKind kind_;
  double E_;
  int branch_ = 1;
  double eps_dom_ = 1e-8;
  ScalarField2D U_, m_, D_, mu_;
};

}  // namespace mjw
