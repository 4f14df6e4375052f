// =============================================================================
// moments.hpp - streaming exponentially-weighted generalized moments
// =============================================================================
// MomentSet maintains, tick by tick, the moment vectors <x^m f> under the
// decaying measure w(t) = exp(-(t_now - t)/tau) for the observables
//
//   1      unit observable (the measure itself)
//   p      execution price minus p_offset, right-continuous step function
//   I      execution flow dV/dt  (sum of shares * delta at tick times)
//   pI, p^2I, p^3I   price powers times execution flow
//   dp/dt  price increment flow (sum of (p_l - p_{l-1}) * delta at tick times)
//
// Quadrature convention (chosen so the by-parts identities downstream hold
// exactly in the algebra, not only in the dt -> 0 limit):
//   * the {1} and {p} families integrate the measure exactly over every
//     inter-tick interval, with the analytic full-measure tail behind the
//     first tick (price before the first tick is the first price);
//   * the flow families are pure event sums with weight Q_m(x0) at the tick;
//   * re-anchoring is the exact measure-consistent shift from basis.hpp.
// =============================================================================
#pragma once

#include "tickscalp/basis.hpp"

#include <cstdint>
#include <memory>

namespace tickscalp {

// One market observation: (time, execution price, shares traded).
struct TickRecord {
    std::int64_t t_ns = 0;  // nanoseconds since midnight
    double price = 0.0;     // currency units, > 0
    double shares = 0.0;    // non-negative
};

// Tracked observable families.
enum class Obs { One, Price, I, PI, P2I, P3I, DpDt };
inline constexpr int kObsCount = 7;

// Aggregated (volume, time) moment vectors, monomial representation:
//   V0(t) = V(t_now) - V(t)            T0(t) = t_now - t
//   V1(t) = capital traded on (t, now] T1(t) = integral of p over (t, now]
struct AggregatedMoments {
    Vec V0, T0, V1, T1;
};

class MomentSet {
  public:
    explicit MomentSet(std::shared_ptr<const Basis> basis);

    // Ingest one tick: exact re-anchor of every family to tick.t_ns, then the
    // tick's interval and event contributions. Throws std::invalid_argument
    // on time going backwards or non-positive price / negative shares.
    void ingest_tick(const TickRecord& tick);

    const Basis& basis() const { return *basis_; }
    const std::shared_ptr<const Basis>& basis_ptr() const { return basis_; }

    std::int64_t anchor_ns() const { return anchor_ns_; }
    std::size_t tick_count() const { return count_; }
    double p_offset() const { return p_offset_; }
    double last_price() const { return last_price_; }    // raw, un-offset
    double prev_price() const { return prev_price_; }    // price before last tick
    double first_price() const { return first_price_; }
    double total_volume() const { return v_now_; }
    double last_shares() const { return last_shares_; }

    // Moment vector <x^m f>, m = 0 .. 2n-2, monomial representation.
    const Vec& mono_moments(Obs f) const { return fam_[static_cast<int>(f)]; }
    // Same data as <Q_m f>.
    Vec q_moments(Obs f) const;

    // V/T family moments by integration by parts through J (exact).
    AggregatedMoments aggregated_moments() const;

    // If an inter-tick gap exceeds this multiple of tau the decayed history
    // is numerically zero; the set re-initializes from the analytic tail.
    static constexpr double kGapResetRatio = 40.0;

  private:
    void init_at(const TickRecord& tick);

    std::shared_ptr<const Basis> basis_;
    Vec fam_[kObsCount];
    std::int64_t anchor_ns_ = 0;
    std::size_t count_ = 0;
    double p_offset_ = 0.0;
    double first_price_ = 0.0;
    double last_price_ = 0.0;
    double prev_price_ = 0.0;
    double last_shares_ = 0.0;
    double v_now_ = 0.0;
};

// ---------------------------------------------------------------------------
// d/dt of a flow operator matrix by integration by parts.
// ---------------------------------------------------------------------------
// <Q_j|dI/dt|Q_k> = If * Q_j(x0) Q_k(x0) - <D(Q_j)|I|Q_k> - <Q_j|I|D(Q_k)>
// where D is the measure-weighted time shift (decay_weighted_D) and If is the
// boundary flow value at t_now, selected by option:
//   LambdaIH    If = lambda_IH                     (needs lambda_IH argument)
//   ZeroDIPsi0  If = 2<psi0|I|D(psi0)> / psi0(x0)^2   (needs psi0 argument)
//   I0          If = <psi0|I|psi0>                     (needs psi0 argument)
//   Zero        If = 0
enum class DidtBoundary { LambdaIH, ZeroDIPsi0, I0, Zero };

Mat didt_operator(const Basis& b, const Mat& I_matrix, DidtBoundary boundary,
                  const Vec* psi0 = nullptr, double lambda_IH = 0.0);

// n x n matrix of the measure-weighted time-shift operator on Q_0..Q_{n-1}
// (column k holds the Q-coefficients of decay_weighted_D(Q_k)).
Mat dmu_matrix(const Basis& b);

}  // namespace tickscalp
