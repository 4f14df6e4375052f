// =============================================================================
// states.hpp - market-state objects built on the operator algebra
// =============================================================================
// A "state" is a unit-norm Q-coefficient vector psi; psi^2(x) w(t) dt is an
// averaging weight. This module provides:
//   * psi0, the reproducing-kernel state localized at x0 ("now");
//   * the execution-flow spectrum summary (sL/s0/sH and projections on psi0);
//   * interpolation of flow and prices to an arbitrary abscissa y;
//   * state prices (volume-, time-, and aggregated-weighted);
//   * the aggregated V/t flow state;
//   * the three constrained "maximize I subject to C" solvers.
// =============================================================================
#pragma once

#include "tickscalp/moments.hpp"
#include "tickscalp/operators.hpp"

namespace tickscalp {

// ---------------------------------------------------------------------------
// Execution-flow summary in the psi0 frame.
// ---------------------------------------------------------------------------
struct ExecutionFlowSummary {
    double sL = 0.0;      // lambda_min of the (I, G) pencil
    double sH = 0.0;      // lambda_max
    double s0 = 0.0;      // <psi0|I|psi0>
    double wL = 0.0;      // <psi_min|psi0>  (signed)
    double wH = 0.0;      // <psi_max|psi0>  (signed)
    double Gamma0 = 0.0;  // (2 s0 - sL - sH)/(sL - sH), 0 when flat
    bool flat = false;    // degenerate spectrum; then wH = 1, wL = 0
};

struct StatePrices {
    double p_v, p_t, p_V, p_T;  // NaN marks an undefined (zero-denominator) price
};

struct RnInterpolation {
    double I_y;        // execution flow interpolated at y
    double pt_y;       // time-averaged price at y
    double pv_y;       // volume-averaged price at y (NaN when I_y vanishes)
    Vec projections;   // <psi_y|psi_I^[i]>^2 per eigenstate
    Vec psi_y;
};

struct AggregatedFlowState {
    Spectrum spec;      // of the (V0, T0) pencil
    Vec lambda_local;   // <psi_i|I|psi_i>/<psi_i|psi_i> per eigenstate
};

struct ConstrainedSolution {
    Vec psi_M;                // zero vector when no solution exists
    double mu = 0.0;          // Lagrange multiplier (eigenvalue for eigenselect)
    double i_M = 0.0;         // <psi_M|I|psi_M>
    double wr0_M = 0.0;       // <psi_M|psi0>^2
    bool flag_solution_exists = false;
    double y_M = 0.0;         // localized variant: selected abscissa
    int n_roots = 0;          // localized variant: real roots found
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------
// psi0 = G^-1 q(x0) normalized; uses the same scaled shrink guard as the
// eigensolver when G is near-singular. Throws when G is unusable.
Vec psi_now(const Basis& b, const Mat& G);

// Spectrum summary; spec must come from solve_gev(I, G) and psi0 from
// psi_now(G) on the same anchor.
ExecutionFlowSummary flow_summary(const Spectrum& spec, const Vec& psi0,
                                  const Mat& G, const Mat& I);

// The maximal-flow state under the degeneracy convention: psi0 when the
// spectrum is flat, else the top eigenvector.
Vec max_flow_state(const Spectrum& spec, const Vec& psi0);

// Radon-Nikodym interpolation at abscissa y (must lie in the basis domain).
RnInterpolation interpolate_rn(const Basis& b, double y, const Mat& G,
                               const Mat& I, const Mat& pI, const Mat& p,
                               const Spectrum& spec);

// The four state prices of psi; prices are in offset space (caller restores
// p_offset). Zero denominators yield NaN, never a throw.
StatePrices state_prices(const Vec& psi, const Mat& G, const Mat& p,
                         const Mat& I, const Mat& pI, const Mat& V0,
                         const Mat& V1, const Mat& T0, const Mat& T1);

// Aggregated V/t flow pencil with the per-state local-flow quotients that the
// aggregated/local equality ties to the eigenvalues.
AggregatedFlowState aggregated_flow_state(const Basis& b, const Mat& V0,
                                          const Mat& T0, const Mat& I,
                                          const Mat& G);

// ---------------------------------------------------------------------------
// Constrained maximal-flow solvers.
// ---------------------------------------------------------------------------
// The five supported constraint operators C (p_last_off = P_last - p_offset):
//   PriceFlow          (p - P_last) I        "trade at the last price"
//   MovingAverage      V1 - P_last V0        "aggregated average = last price"
//   PriceFlowDerivative d/dt[(p - P_last) I] (zero boundary at t_now)
//   PriceExtremum      dp/dt
//   DpdtExtremum       d/dt[dp/dt]           (zero boundary at t_now)
enum class ConstraintKind {
    PriceFlow,
    MovingAverage,
    PriceFlowDerivative,
    PriceExtremum,
    DpdtExtremum
};

Mat constraint_matrix(const Basis& b, ConstraintKind kind, const Mat& I,
                      const Mat& pI, const Mat& V0, const Mat& V1,
                      const Mat& dpdt, double p_last_off);

// Lagrange-multiplier iteration maximizing <psi|I|psi> subject to
// <psi|C|psi> = 0. Requires C indefinite; at most 10 iterations; on failure
// flag_solution_exists = false and psi_M = 0.
ConstrainedSolution constrained_global(const Basis& b, const Mat& G,
                                       const Mat& I, const Mat& C,
                                       const Vec& psi0);

// Localized variant: restrict psi to the Radon-Nikodym family psi_y, solve
// the constraint polynomial P(y) = 0, take the root with maximal flow. A
// degenerate (identically small) polynomial falls back to a 512-point grid.
ConstrainedSolution constrained_localized(const Basis& b, const Mat& G,
                                          const Mat& I, const Mat& C,
                                          const Vec& psi0);

// Eigenvector-constrained variant: psi must be an eigenvector of the chosen
// pencil; the flow-maximal one is returned (ties -> larger eigenvalue index).
enum class EigenselectPencil { pI_vs_I, V1_vs_V0 };

ConstrainedSolution constrained_eigenselect(const Basis& b,
                                            EigenselectPencil which,
                                            const Mat& G, const Mat& I,
                                            const Mat& pI, const Mat& V0,
                                            const Mat& V1, const Vec& psi0);

}  // namespace tickscalp
