// =============================================================================
// scalp.cpp - scalp-function attributes, accumulator, DIR/aDIR
// =============================================================================
#include "tickscalp/scalp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tickscalp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double quad(const Vec& a, const Mat& M, const Vec& b) {
    return a.dot(M * b);
}
}  // namespace

// ---------------------------------------------------------------------------
// Token tables (CLI vocabulary)
// ---------------------------------------------------------------------------
namespace {
struct FlToken {
    FlKind kind;
    const char* token;
};
const FlToken kFlTokens[] = {
    {FlKind::SAMPLE_DP_NOSCALP, "F_SAMPLE_DP_NOSCALP"},
    {FlKind::SAMPLE_DP_SCALP, "F_SAMPLE_DP_SCALP"},
    {FlKind::DPDT0_SCALP, "F_dpdt0_SCALP"},
    {FlKind::PIPT0_SCALP, "F_pipt0_SCALP"},
    {FlKind::DPDT_IH_SCALP, "F_dpdtIH_SCALP"},
    {FlKind::VAR_PI_IH, "F_var1pI_IH"},
    {FlKind::VAR_PI_IH_DPI, "F_var1pI_IH_dPi"},
    {FlKind::VAR_PI_IH_00, "F_varpIH_0_divI_SCALP"},
    {FlKind::P0_PIH_SCALP, "F_p0_pIH_SCALP"},
    {FlKind::SKEWNESS_SCALP, "F_SKEWNESS_SCALP"},
    {FlKind::SKEWNESS_PL_2D, "F_SKEWNESS_at_Pl_SCALP"},
    {FlKind::PROBCORR_2D_SCALP, "F_PROBABILITYCORRELATION_SCALP"},
    {FlKind::NONLOCAL_PIH, "F_dpIH_NONLOCAL"},
};
struct ZToken {
    ZKind kind;
    const char* token;
};
const ZToken kZTokens[] = {
    {ZKind::unit, "unit"},           {ZKind::abs_dp_dt, "abs_dp_dt"},
    {ZKind::dV_dt, "dV_dt"},         {ZKind::eigen_gap, "eigen_gap"},
    {ZKind::scalp_dV, "scalp_dV"},   {ZKind::scalp_dLambda, "scalp_dLambda"},
};
}  // namespace

const char* fl_kind_token(FlKind k) {
    for (const auto& t : kFlTokens)
        if (t.kind == k) return t.token;
    return "?";
}

bool parse_fl_kind(const std::string& token, FlKind& out) {
    for (const auto& t : kFlTokens)
        if (token == t.token) {
            out = t.kind;
            return true;
        }
    return false;
}

const char* z_kind_token(ZKind z) {
    for (const auto& t : kZTokens)
        if (t.kind == z) return t.token;
    return "?";
}

bool parse_z_kind(const std::string& token, ZKind& out) {
    for (const auto& t : kZTokens)
        if (token == t.token) {
            out = t.kind;
            return true;
        }
    return false;
}

// ---------------------------------------------------------------------------
// Two-state price pencil
// ---------------------------------------------------------------------------
TwoStateSolution two_state_pencil(const Mat& A2, const Mat& B2, double wH2) {
    TwoStateSolution s;
    if (A2.rows() != 2 || A2.cols() != 2 || B2.rows() != 2 || B2.cols() != 2)
        throw std::invalid_argument("two_state_pencil: 2x2 matrices required");
    // Colinear span (psiIH ~ psi0) or non-PD execution flow: no two-state
    // information. The eigenvalue error grows like 1/(1 - wH2), so below a
    // 1e-3 complement the pair is numerically one state and the secondary
    // eigenvalue is noise.
    const double detB = B2(0, 0) * B2(1, 1) - B2(0, 1) * B2(1, 0);
    if (wH2 > 1.0 - 1e-3 || B2(0, 0) <= 0.0 || B2(1, 1) <= 0.0 ||
        detB <= 1e-14 * B2(0, 0) * B2(1, 1))
        return s;

    // det(A - lambda B) = 0: a l^2 + b l + c = 0 with a = det(B).
    const double a = detB;
    const double b = -(A2(0, 0) * B2(1, 1) + A2(1, 1) * B2(0, 0)
                       - A2(0, 1) * B2(1, 0) - A2(1, 0) * B2(0, 1));
    const double c = A2(0, 0) * A2(1, 1) - A2(0, 1) * A2(1, 0);
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) disc = 0.0;  // symmetric-definite pencil: roundoff only
    const double sq = std::sqrt(disc);
    // Stable quadratic roots.
    const double q = -0.5 * (b + (b >= 0.0 ? sq : -sq));
    double l0 = q / a;
    double l1 = (q != 0.0) ? c / q : -b / a - l0;
    if (l0 > l1) std::swap(l0, l1);
    s.lambda0 = l0;
    s.lambda1 = l1;

    auto solve_phi = [&](double lam, double* phi) {
        // (A - lam B) phi = 0; pick the better-conditioned row.
        const double r00 = A2(0, 0) - lam * B2(0, 0);
        const double r01 = A2(0, 1) - lam * B2(0, 1);
        const double r10 = A2(1, 0) - lam * B2(1, 0);
        const double r11 = A2(1, 1) - lam * B2(1, 1);
        double v0, v1;
        if (std::hypot(r00, r01) >= std::hypot(r10, r11)) {
            v0 = -r01;
            v1 = r00;
        } else {
            v0 = -r11;
            v1 = r10;
        }
        if (std::abs(v0) < 1e-300 && std::abs(v1) < 1e-300) {
            v0 = 1.0;
            v1 = 0.0;
        }
        const double nrm2 = v0 * (B2(0, 0) * v0 + B2(0, 1) * v1) +
                            v1 * (B2(1, 0) * v0 + B2(1, 1) * v1);
        if (nrm2 <= 0.0) return false;
        const double inv = 1.0 / std::sqrt(nrm2);
        phi[0] = v0 * inv;
        phi[1] = v1 * inv;
        return true;
    };
    if (!solve_phi(l0, s.phi0) || !solve_phi(l1, s.phi1)) return s;
    s.degenerate = false;
    return s;
}

// ---------------------------------------------------------------------------
// Two-point quadrature from pi0..pi3
// ---------------------------------------------------------------------------
SkewnessQuadrature skewness_quadrature(double pi0, double pi1, double pi2,
                                       double pi3) {
    SkewnessQuadrature s;
    if (pi0 <= 0.0) {
        s.degenerate = true;
        return s;
    }
    const double pbar = pi1 / pi0;
    // Hankel determinant = pi0*pi2 - pi1^2 = pi0 * spread variance.
    const double hank = pi0 * pi2 - pi1 * pi1;
    const double scale = pi0 * pi2 + pi1 * pi1 + pi0 * pi0;
    if (hank <= 1e-13 * scale) {
        s.degenerate = true;
        s.p_min = s.p_max = pbar;
        s.gamma = 0.0;
        return s;
    }
    // Orthogonality of p^2 - b p - c against {1, p}:
    //   pi2 = b pi1 + c pi0,  pi3 = b pi2 + c pi1.
    const double det = pi1 * pi1 - pi0 * pi2;  // = -hank, nonzero here
    const double bq = (pi2 * pi1 - pi3 * pi0) / det;
    const double cq = (pi1 * pi3 - pi2 * pi2) / det;
    double disc = bq * bq + 4.0 * cq;
    if (disc < 0.0) disc = 0.0;
    const double sq = std::sqrt(disc);
    s.p_min = 0.5 * (bq - sq);
    s.p_max = 0.5 * (bq + sq);
    if (s.p_max - s.p_min <= 0.0) {
        s.degenerate = true;
        s.p_min = s.p_max = pbar;
        s.gamma = 0.0;
        return s;
    }
    s.gamma = (2.0 * pbar - s.p_min - s.p_max) / (s.p_min - s.p_max);
    return s;
}

// ---------------------------------------------------------------------------
// Per-tick attribute
// ---------------------------------------------------------------------------
namespace {
// z * dt for the 2D variants (tick-difference z folds the dt in, so
// same-timestamp ticks stay finite).
double z_times_dt(ZKind z, const FlContext& c, bool& tick_difference) {
    tick_difference = false;
    switch (z) {
        case ZKind::unit:
            return c.dt;
        case ZKind::abs_dp_dt:
            tick_difference = true;
            return std::abs(c.dp);
        case ZKind::dV_dt:
            tick_difference = true;
            return c.dV;
        case ZKind::eigen_gap:
            return c.two.degenerate ? 0.0
                                    : (c.two.lambda1 - c.two.lambda0) * c.dt;
        default:
            throw std::invalid_argument(
                "z kind not supported by a 2D variant");
    }
}

// Plain z for the non-local variant (multiplies the pIH increment directly).
double z_nonlocal(ZKind z, const FlContext& c) {
    switch (z) {
        case ZKind::unit:
            return 1.0;
        case ZKind::scalp_dV:
            return c.S * c.dV;
        case ZKind::scalp_dLambda:
            return c.dt * c.S * c.dIH;
        default:
            throw std::invalid_argument(
                "z kind not supported by the non-local variant");
    }
}
}  // namespace

FlResult compute_Fl(const FlVariant& variant, const FlContext& ctx) {
    FlResult r;
    const double S = ctx.S;
    auto from_rate = [&](double Fl) {  // spectral (moments-only) attributes
        r.Fl = Fl;
        r.Fdt = Fl * ctx.dt;
        r.getFl = Fl;
    };
    switch (variant.kind) {
        case FlKind::SAMPLE_DP_NOSCALP:
            r.Fdt = ctx.dp;
            r.Fl = ctx.dt > 0.0 ? ctx.dp / ctx.dt : kNaN;
            r.getFl = kNaN;
            break;
        case FlKind::SAMPLE_DP_SCALP:
            r.Fdt = ctx.dp * S;
            r.Fl = ctx.dt > 0.0 ? r.Fdt / ctx.dt : kNaN;
            r.getFl = kNaN;
            break;
        case FlKind::DPDT0_SCALP:
            from_rate(quad(ctx.psi0, *ctx.dpdt, ctx.psi0) * S);
            break;
        case FlKind::PIPT0_SCALP:
            from_rate(ctx.psi0_x0 * ctx.psi0_x0 * (ctx.pv0 - ctx.pt0) * S);
            break;
        case FlKind::DPDT_IH_SCALP:
            from_rate(quad(ctx.psiIH, *ctx.dpdt, ctx.psiIH) * S);
            break;
        case FlKind::VAR_PI_IH: {
            const Vec dpsi = (*ctx.Dmu) * ctx.psiIH;
            const double a = quad(ctx.psiIH, *ctx.pI, dpsi);
            const double pval = quad(ctx.psiIH, *ctx.pI, ctx.psiIH);
            const double gd = quad(ctx.psiIH, *ctx.G, dpsi);
            from_rate(2.0 * (a - pval * gd));
            break;
        }
        case FlKind::VAR_PI_IH_DPI: {
            const Vec dpsi = (*ctx.Dmu) * ctx.psiIH;
            const double a = quad(ctx.psiIH, *ctx.pI, dpsi);
            const double gd = quad(ctx.psiIH, *ctx.G, dpsi);
            from_rate(2.0 * (ctx.p_last_off * ctx.lambda_IH * gd - a));
            break;
        }
        case FlKind::VAR_PI_IH_00: {
            const double a0 = quad(ctx.psiIH, *ctx.pI, ctx.psi0);
            const double pval = quad(ctx.psiIH, *ctx.pI, ctx.psiIH);
            from_rate(2.0 * (a0 - pval * ctx.wH) * ctx.wH);
            break;
        }
        case FlKind::P0_PIH_SCALP:
            from_rate(ctx.psi0_x0 * ctx.psi0_x0 * (ctx.pv0 - ctx.p_IH) * S);
            break;
        case FlKind::SKEWNESS_SCALP:
            from_rate(ctx.skew.degenerate
                          ? 0.0
                          : (ctx.skew.p_max - ctx.skew.p_min) * ctx.skew.gamma *
                                S);
            break;
        case FlKind::SKEWNESS_PL_2D:
        case FlKind::PROBCORR_2D_SCALP: {
            bool tick_diff = false;
            const double zdt = z_times_dt(variant.z, ctx, tick_diff);
            double Dp = 0.0;
            if (!ctx.two.degenerate) {
                if (variant.kind == FlKind::SKEWNESS_PL_2D) {
                    // Position of the last price inside the two-state price
                    // band, oriented so "now trades at the high state" is
                    // positive (matches the probability-correlation sign).
                    const double gap = ctx.two.lambda1 - ctx.two.lambda0;
                    Dp = gap > 0.0 ? (2.0 * ctx.p_last_off - ctx.two.lambda0 -
                                      ctx.two.lambda1) /
                                         gap
                                   : 0.0;
                } else {
                    const double w0 = ctx.phi0_x0 * ctx.phi0_x0;
                    const double w1 = ctx.phi1_x0 * ctx.phi1_x0;
                    Dp = (w0 + w1) > 0.0 ? (w1 - w0) / (w1 + w0) : 0.0;
                }
            }
            r.Fdt = zdt * Dp * S;
            r.Fl = ctx.dt > 0.0 ? r.Fdt / ctx.dt : (tick_diff ? kNaN : 0.0);
            r.getFl = tick_diff ? kNaN : r.Fl;
            break;
        }
        case FlKind::NONLOCAL_PIH: {
            const double z = z_nonlocal(variant.z, ctx);
            r.Fdt = ctx.has_prev ? z * ctx.dp_IH * theta_plus(ctx.dIH) : 0.0;
            r.Fl = ctx.dt > 0.0 ? r.Fdt / ctx.dt : kNaN;
            r.getFl = kNaN;
            break;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// ScalpAccumulator
// ---------------------------------------------------------------------------
ScalpAccumulator::ScalpAccumulator(std::shared_ptr<const Basis> basis)
    : basis_(std::move(basis)) {
    const int m = basis_->moment_count();
    f_ = Vec::Zero(m);
    af_ = Vec::Zero(m);
}

void ScalpAccumulator::accumulate(std::int64_t t_ns, double Fdt) {
    if (count_ > 0) {
        if (t_ns < anchor_ns_)
            throw std::invalid_argument("scalp accumulator: time moved back");
        const double dt = static_cast<double>(t_ns - anchor_ns_) * 1e-9;
        if (dt > 0.0) {
            basis_->shift_moments(f_, dt);
            basis_->shift_moments(af_, dt);
        }
    }
    anchor_ns_ = t_ns;
    const Vec& ev = basis_->event_weights();
    f_ += Fdt * ev;
    af_ += std::abs(Fdt) * ev;
    sum_ += Fdt;
    ++count_;
}

// ---------------------------------------------------------------------------
// DIR / aDIR
// ---------------------------------------------------------------------------
Directional directional(const Basis& b, const ScalpAccumulator& acc,
                        const Vec& psiIH) {
    // P_last - <psi|P|psi> = sum_l Fdt_l J(psi^2)(x_l) w(t_l)
    //                      = jc . <x^m F>,  jc = monomial J(psi^2).
    const int n = b.config().n;
    Vec mono = Vec::Zero(n);
    const Mat& q2m = b.q_to_mono();
    for (int k = 0; k < n; ++k)
        mono += psiIH(k) * q2m.row(k).head(n).transpose();
    Vec sq = mono_convolve(mono, mono);      // degree 2n-2
    Vec jc = b.mono_integrate_J(sq);         // same length, 2n-1
    Directional d;
    d.DIR = jc.dot(acc.f_moments());
    d.aDIR = jc.dot(acc.af_moments());
    return d;
}

double pnl_local(const Vec& psiIH, double p_IH, const Mat& pI, const Mat& p2I,
                 const Mat& I) {
    return quad(psiIH, p2I, psiIH) - 2.0 * p_IH * quad(psiIH, pI, psiIH) +
           p_IH * p_IH * quad(psiIH, I, psiIH);
}

}  // namespace tickscalp
