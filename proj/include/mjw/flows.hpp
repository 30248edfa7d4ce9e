#pragma once

// Hamiltonian flows of calH (physical time t) and of the Finsler companion
// H = C|p| - 1 (proper time tau), integrated together with their linearization
// along the initial-curve parameter phi, the eikonal s = int p dx and the
// other time variable.

#include <string>
#include <vector>

#include "mjw/ode.hpp"
#include "mjw/symbols.hpp"

namespace mjw {

enum class FlowKind { physical, finsler, reduced };

std::string to_string(FlowKind kind);

struct PhasePoint {
  Vec2 x = Vec2::Zero();
  Vec2 p = Vec2::Zero();
};

/// phi-derivatives (X_phi, P_phi) of a phase point.
struct Variation {
  Vec2 Xphi = Vec2::Zero();
  Vec2 Pphi = Vec2::Zero();
};

struct PhaseVelocity {
  Vec2 dx = Vec2::Zero();
  Vec2 dp = Vec2::Zero();
};

struct TrajectorySample {
  double tau = 0.0;
  double t = 0.0;
  PhasePoint point;
  Variation var;
  double s = 0.0;
  double J = 0.0;       // det(X_tau, X_phi)
  double J_phys = 0.0;  // det(X_t, X_phi) = R J
  int morse = 0;        // zeros of J passed so far
  // Derivatives along the flow parameter (tau, or t for the physical flow).
  PhaseVelocity velocity;
  Variation var_velocity;
};

PhaseVelocity rhs_physical(const SymbolModel& model, const PhasePoint& pt);
PhaseVelocity rhs_finsler(const SymbolModel& model, const PhasePoint& pt);
/// Water-wave Finsler flow written without the dispersion root.
/// Throws ShellViolation off the energy shell.
PhaseVelocity rhs_waterwave_reduced(const ScalarField2D& D, double E, const PhasePoint& pt);
PhaseVelocity rhs_tension_reduced(const ScalarField2D& D, const ScalarField2D& mu, double E,
                                  const PhasePoint& pt);

/// Root-free gradient of Y(x) for the tension model, evaluated with the
/// on-shell substitution y = D|p|.
Vec2 tension_grad_Y_onshell(const ScalarField2D& D, const ScalarField2D& mu, double E, const PhasePoint& pt);

// Augmented state: x(2), p(2), X_phi(2), P_phi(2), s, and the other time
// (t for tau-parametrized flows, tau for the physical flow).
constexpr int kFlowDim = 10;
using FlowState = Eigen::Matrix<double, kFlowDim, 1>;

/// Right-hand side of the augmented system. Throws DomainViolation outside
/// the admissible set.
class AugmentedFlow {
 public:
  AugmentedFlow(const SymbolModel& model, FlowKind kind);
  FlowState operator()(const FlowState& y) const;
  FlowKind kind() const { return kind_; }
  const SymbolModel& model() const { return model_; }

  /// R at the state (on-shell form for the reduced flow).
  double factor_R(const FlowState& y) const;
  TrajectorySample sample(double param, const FlowState& y, int morse) const;
  double jacobian(const FlowState& y, const FlowState& dy) const;

 private:
  SymbolModel model_;
  FlowKind kind_;
};

FlowState pack_state(const PhasePoint& pt, const Variation& var, double s, double other_time);

struct CausticEvent {
  double tau = 0.0;
  double t = 0.0;
  Vec2 x = Vec2::Zero();
  int multiplicity = 1;  // 2 for a confirmed tangential zero
  double J_min = 0.0;    // smallest |J| seen, for grazing events
};

struct IntegrateOptions {
  /// Flow-parameter values at which to sample; empty samples every accepted step.
  std::vector<double> sample_at;
  bool keep_dense = false;
  /// Stop at the edge of the admissible set instead of throwing DomainViolation.
  bool truncate_at_exit = false;
  /// Zeros of J at parameter <= this value are not counted.
  double morse_start = 0.0;
  double s0 = 0.0;
  /// |J| minima below this without a sign change are reported as grazing.
  double grazing_abs = 0.0;
};

struct Trajectory {
  FlowKind kind = FlowKind::finsler;
  std::vector<TrajectorySample> samples;
  std::vector<CausticEvent> caustics;
  std::vector<CausticEvent> grazing;
  std::vector<DenseStep<kFlowDim>> dense;
  bool truncated = false;
  double end = 0.0;  // last parameter value reached
  std::string exit_reason;

  /// Augmented state at a flow parameter value; needs keep_dense.
  FlowState state_at(double param) const;
};

Trajectory integrate(const SymbolModel& model, FlowKind kind, const PhasePoint& ic, const Variation& ic_var,
                     double span_end, const ODESettings& cfg, const IntegrateOptions& opts = {});

/// Monotone map between physical time t and Finsler time tau along one
/// physical trajectory, with its inverse.
class TimeMap {
 public:
  double tau_of_t(double t) const;
  double t_of_tau(double tau) const;
  double t_end() const { return steps_.empty() ? 0.0 : steps_.back().t1(); }
  double tau_end() const { return tau_end_; }

 private:
  friend TimeMap reparametrize(const Trajectory&);
  struct Piece {
    double t0, h, r1, r2, r3, r4, r5, R0, R1;
    double t1() const { return t0 + h; }
    double eval(double t) const;
    double slope(double t) const;
  };
  std::vector<Piece> steps_;
  double tau_end_ = 0.0;
};

/// Builds the map from a physical-time trajectory integrated with keep_dense.
/// Throws DomainViolation if R is not positive along it.
TimeMap reparametrize(const Trajectory& physical);

/// sup over sample times of |(calP, calX)(t) - (P, X)(tau(t))| for the two
/// independently integrated flows over Finsler time [0, tau_horizon].
double verify_correspondence(const SymbolModel& model, const PhasePoint& ic, const Variation& ic_var,
                             double tau_horizon, const ODESettings& cfg);

/// sup_tau |(P, X)_a(tau) - (P, X)_b(tau)| for two tau-parametrized flows.
double compare_tau_flows(const SymbolModel& model, FlowKind a, FlowKind b, const PhasePoint& ic,
                         const Variation& ic_var, double tau_horizon, const ODESettings& cfg);

}  // namespace mjw
