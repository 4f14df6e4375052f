// =============================================================================
// basis.hpp - measure-weighted polynomial basis algebra
// =============================================================================
// Everything downstream runs on polynomials over one of three bases under the
// exponential-decay averaging measure  w(t) = exp(-(t_now - t)/tau):
//
//   ShiftedLegendre : abscissa x = exp(-(t_now - t)/tau), domain [0,1], x0 = 1
//   Laguerre        : abscissa x = (t - t_now)/tau,       domain x<=0, x0 = 0
//   Monomials       : abscissa x = (t - t_now)/tau,       domain x<=0, x0 = 0
//
// In the abscissa variable the measure becomes tau*dx on [0,1] for
// ShiftedLegendre and tau*exp(x)*dx on (-inf,0] for the two linear maps, which
// is what makes every operator below (multiplication, time shift D,
// integration map J, anchor shift, interval weights) available in closed form.
//
// The canonical internal representation is the monomial coefficient vector in
// x; Q-basis coefficient views are produced through the triangular conversion
// matrices kept by Basis. All functions are pure; a Basis instance is
// immutable after construction and freely shareable across threads.
// =============================================================================
#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <vector>

namespace tickscalp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class BasisKind { ShiftedLegendre, Laguerre, Monomials };

const char* basis_kind_name(BasisKind k);

// ---------------------------------------------------------------------------
// MeasureConfig - basis kind, dimension and decay time of the measure.
// ---------------------------------------------------------------------------
struct MeasureConfig {
    BasisKind kind = BasisKind::ShiftedLegendre;
    int n = 12;          // basis dimension; matrices are n x n
    double tau = 128.0;  // decay time, seconds

    static constexpr int kMinN = 2;
    static constexpr int kMaxN = 24;

    // Throws std::invalid_argument outside 2 <= n <= 24 or tau <= 0.
    void validate() const;

    int moment_count() const { return 2 * n - 1; }  // m = 0 .. 2n-2
    int max_degree() const { return 2 * n - 2; }
};

// ---------------------------------------------------------------------------
// BasisPoly - coefficients over Q_0..Q_deg of one basis kind.
// ---------------------------------------------------------------------------
struct BasisPoly {
    BasisKind kind = BasisKind::ShiftedLegendre;
    Vec coef;  // coef[k] multiplies Q_k(x)

    int degree() const;  // index of last non-zero coefficient, -1 if zero
};

// ---------------------------------------------------------------------------
// Basis - precomputed tables + the full operator set for one MeasureConfig.
// ---------------------------------------------------------------------------
class Basis {
  public:
    explicit Basis(const MeasureConfig& cfg);

    const MeasureConfig& config() const { return cfg_; }
    int n() const { return cfg_.n; }
    int moment_count() const { return m_; }
    double tau() const { return cfg_.tau; }

    // Abscissa map. dt_back = t_now - t >= 0.
    double x_of(double dt_back) const;
    double x0() const { return exponential_map_ ? 1.0 : 0.0; }
    bool in_domain(double x) const;

    // Q_k(x0) for k = 0..2n-2 (all ones except Monomials: e_0).
    const Vec& q_at_x0() const { return q_at_x0_; }
    // Leading n entries of q_at_x0, used for the "now" state.
    Vec q_at_x0_n() const { return q_at_x0_.head(cfg_.n); }
    // Q_k(y) for k = 0..kmax at an arbitrary abscissa, by stable recurrence.
    Vec eval_all(double x, int kmax) const;

    // --- spec operation set (Q-basis level) --------------------------------
    double eval_basis(int k, double x) const;          // Q_k(x)
    double eval_poly(const BasisPoly& p, double x) const;
    BasisPoly multiply_in_basis(const BasisPoly& a, const BasisPoly& b) const;
    BasisPoly timeshift_D(const BasisPoly& p) const;   // d/dt [p(x(t))]
    BasisPoly decay_weighted_D(const BasisPoly& p) const;  // D + 1/(2 tau)
    BasisPoly integrate_J(const BasisPoly& p) const;
    // Real roots inside the basis domain, ascending, Newton-polished.
    std::vector<double> find_real_roots(const BasisPoly& p) const;

    // --- monomial-representation workhorses --------------------------------
    Vec to_monomial(const BasisPoly& p) const;
    BasisPoly from_monomial(const Vec& mono) const;
    // Monomial images of the operators (degree bookkeeping is the caller's).
    Vec mono_timeshift_D(const Vec& mono) const;
    Vec mono_decay_weighted_D(const Vec& mono) const;
    Vec mono_integrate_J(const Vec& mono) const;
    double mono_eval(const Vec& mono, double x) const;  // Horner

    // Full-measure analytic moments of the observable "1": <x^m * 1>.
    const Vec& unit_moments() const { return unit_moments_; }

    // Re-anchor a monomial moment vector by dt >= 0 (new anchor dt later).
    // Exact: diagonal rescale for the exponential map, binomial shift plus
    // the measure decay factor for the linear maps.
    void shift_moments(Vec& mono_moments, double dt) const;

    // Integral of x^m * w over the inter-tick interval (t_now - dt, t_now],
    // evaluated at the new anchor; exact closed form per basis.
    Vec interval_weights(double dt) const;

    // x0^m vector (tick-event contribution weights at the anchor).
    const Vec& event_weights() const { return event_weights_; }

    // Product table: monomial coefficients of Q_j * Q_k for j,k < n.
    const Vec& product_mono(int j, int k) const { return prod_[j * cfg_.n + k]; }

    // Conversion matrices (rows of q2m are monomial coefficients of Q_k).
    const Mat& q_to_mono() const { return q2m_; }

  private:
    MeasureConfig cfg_;
    int m_;                   // 2n-1
    bool exponential_map_;    // ShiftedLegendre abscissa
    Mat q2m_, m2q_;           // (2n-1)x(2n-1) triangular conversions
    Vec q_at_x0_;
    Vec unit_moments_;
    Vec event_weights_;
    std::vector<Vec> prod_;   // n*n entries, each length 2n-1
};

// Convolution of two monomial coefficient vectors (plain polynomial product).
Vec mono_convolve(const Vec& a, const Vec& b);

// Lower regularized-style incomplete integral int_0^d u^m e^-u du (exact to
// double precision via a stable positive series); exposed for tests.
double lower_gamma_int(int m, double d);

}  // namespace tickscalp
