// =============================================================================
// scalp.hpp - scalp-function, directional attributes, scalp-price, DIR/aDIR
// =============================================================================
// The scalp-function S in [0,1] weighs how much "now" overlaps the maximal
// execution-flow state. A directional attribute F_l is computed per tick from
// one of the variants below; the running sum of F_l * dt is the scalp-price
// (getSumFdt), and the exponentially-weighted F moments give the DIR/aDIR
// averages against the maximal-flow state.
//
// Tick-difference variants (price or volume increments) are handled through
// the product F_l * dt directly, so same-timestamp ticks never divide by
// zero.
// =============================================================================
#pragma once

#include "tickscalp/moments.hpp"
#include "tickscalp/operators.hpp"
#include "tickscalp/states.hpp"

#include <algorithm>

namespace tickscalp {

// Scalp-function: squared projection of the maximal-flow state onto "now".
// A flat spectrum means the whole measure trades like "now": S = 1.
inline double scalp_function(const ExecutionFlowSummary& s) {
    double S = s.flat ? 1.0 : s.wH * s.wH;
    return std::clamp(S, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Variant selection (one active per run).
// ---------------------------------------------------------------------------
enum class FlKind {
    SAMPLE_DP_NOSCALP,   // raw price increment
    SAMPLE_DP_SCALP,     // price increment * S
    DPDT0_SCALP,         // <psi0|dp/dt|psi0> * S
    PIPT0_SCALP,         // psi0^2(x0) (pv0 - pt0) * S
    DPDT_IH_SCALP,       // <psiIH|dp/dt|psiIH> * S
    VAR_PI_IH,           // first variation of |pI| in the IH state
    VAR_PI_IH_DPI,       // experimental P_last-mixed variation
    VAR_PI_IH_00,        // |pI| variation through the psi0 projection
    P0_PIH_SCALP,        // psi0^2(x0) (pv0 - pIH) * S
    SKEWNESS_SCALP,      // (pmax - pmin) Gamma~ * S from the I-quadrature
    SKEWNESS_PL_2D,      // two-state position of p_l, -z D_p * S
    PROBCORR_2D_SCALP,   // two-state probability correlation, +z D_p * S
    NONLOCAL_PIH         // z * (pIH change) gated by rising lambda_IH
};

enum class ZKind { unit, abs_dp_dt, dV_dt, eigen_gap, scalp_dV, scalp_dLambda };

struct FlVariant {
    FlKind kind = FlKind::PROBCORR_2D_SCALP;  // reference default
    ZKind z = ZKind::eigen_gap;               // used by 2D and NONLOCAL kinds
};

const char* fl_kind_token(FlKind k);       // the CLI token of each variant
bool parse_fl_kind(const std::string& token, FlKind& out);
const char* z_kind_token(ZKind z);
bool parse_z_kind(const std::string& token, ZKind& out);

// ---------------------------------------------------------------------------
// Two-state price pencil in the {psi0, psiIH} span.
// ---------------------------------------------------------------------------
struct TwoStateSolution {
    double lambda0 = 0.0, lambda1 = 0.0;  // ascending; price-like (offset space)
    // phi columns in the {psi0, psiIH} coordinates, normalized phi^T I2 phi = 1
    double phi0[2] = {0, 0}, phi1[2] = {0, 0};
    bool degenerate = true;  // colinear states or non-PD I2: no information
};

// A = 2x2 of <.|pI|.>, B = 2x2 of <.|I|.> over {psi0, psiIH}; wH2 is the
// squared projection of the two states (colinearity test).
TwoStateSolution two_state_pencil(const Mat& A2, const Mat& B2, double wH2);

// ---------------------------------------------------------------------------
// Two-point quadrature from power moments pi0..pi3.
// ---------------------------------------------------------------------------
struct SkewnessQuadrature {
    double p_min = 0.0, p_max = 0.0;
    double gamma = 0.0;  // (2 pbar - pmin - pmax)/(pmin - pmax)
    bool degenerate = false;
};
SkewnessQuadrature skewness_quadrature(double pi0, double pi1, double pi2,
                                       double pi3);

// ---------------------------------------------------------------------------
// Per-tick evaluation context; the pipeline fills it from the current
// snapshot. All prices are in offset space.
// ---------------------------------------------------------------------------
struct FlContext {
    const Basis* basis = nullptr;
    double S = 0.0;           // scalp-function
    double dt = 0.0;          // t_l - t_{l-1}, seconds
    double dp = 0.0;          // p_l - p_{l-1}
    double dV = 0.0;          // shares of this tick
    double p_last_off = 0.0;  // p_l - p_offset

    Vec psi0, psiIH;
    const Mat* G = nullptr;
    const Mat* I = nullptr;
    const Mat* pI = nullptr;
    const Mat* dpdt = nullptr;
    const Mat* Dmu = nullptr;  // decay-weighted shift matrix

    double psi0_x0 = 0.0;  // psi0(x0)
    double wH = 0.0;       // signed <psiIH|psi0>
    double pv0 = 0.0, pt0 = 0.0, p_IH = 0.0;  // state prices, offset space
    double lambda_IH = 0.0;

    TwoStateSolution two;      // with phi values at x0 below
    double phi0_x0 = 0.0, phi1_x0 = 0.0;
    SkewnessQuadrature skew;

    bool has_prev = false;     // non-local memory valid
    double dIH = 0.0;          // lambda_IH(t_l) - lambda_IH(t_{l-1})
    double dp_IH = 0.0;        // p_IH(t_l) - p_IH(t_{l-1})
};

struct FlResult {
    double Fl = 0.0;       // instantaneous attribute (NaN if only F*dt exists)
    double Fdt = 0.0;      // the accumulated increment F_l * dt
    double getFl = 0.0;    // moments-only value; NaN for tick-difference kinds
};

FlResult compute_Fl(const FlVariant& variant, const FlContext& ctx);

// theta gate of the non-local variant: 1 iff lambda_IH did not fall.
inline double theta_plus(double dIH) { return dIH >= 0.0 ? 1.0 : 0.0; }

// ---------------------------------------------------------------------------
// ScalpAccumulator - scalp moments, |F| moments, running scalp-price.
// ---------------------------------------------------------------------------
class ScalpAccumulator {
  public:
    explicit ScalpAccumulator(std::shared_ptr<const Basis> basis);

    // Re-anchor to t_ns (exact shift; monotone time enforced), then record
    // the tick's increment F_l * dt.
    void accumulate(std::int64_t t_ns, double Fdt);

    const Vec& f_moments() const { return f_; }     // <x^m F>
    const Vec& af_moments() const { return af_; }   // <x^m |F|>
    double sum_Fdt() const { return sum_; }         // scalp-price, offset-free
    std::int64_t anchor_ns() const { return anchor_ns_; }
    std::size_t count() const { return count_; }

    // Previous-tick spectral memory for the non-local series.
    struct PrevMemory {
        bool valid = false;
        double lambda_IH = 0.0;
        double p_IH = 0.0;  // offset space
    };
    PrevMemory prev;

  private:
    std::shared_ptr<const Basis> basis_;
    Vec f_, af_;
    double sum_ = 0.0;
    std::int64_t anchor_ns_ = 0;
    std::size_t count_ = 0;
};

// DIR = P_last - <psiIH|P|psiIH> via integration by parts on the F moments
// (boundary F(t_now) = 0); aDIR identical with the |F| moments.
struct Directional {
    double DIR = 0.0, aDIR = 0.0;
};
Directional directional(const Basis& b, const ScalpAccumulator& acc,
                        const Vec& psiIH);

// Local P&L of trading around the IH-state price:
// <psiIH|(p - p_IH)^2 I|psiIH> >= 0, prices in offset space.
double pnl_local(const Vec& psiIH, double p_IH, const Mat& pI, const Mat& p2I,
                 const Mat& I);

}  // namespace tickscalp
