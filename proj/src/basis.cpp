#include "tickscalp/basis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace tickscalp {

const char* basis_kind_name(BasisKind k) {
    switch (k) {
        case BasisKind::ShiftedLegendre: return "ShiftedLegendre";
        case BasisKind::Laguerre: return "Laguerre";
        case BasisKind::Monomials: return "Monomials";
    }
    return "?";
}

void MeasureConfig::validate() const {
    if (n < kMinN || n > kMaxN)
        throw std::invalid_argument("MeasureConfig: n must be in [2,24], got " +
                                    std::to_string(n));
    if (!(tau > 0.0) || !std::isfinite(tau))
        throw std::invalid_argument("MeasureConfig: tau must be positive");
}

int BasisPoly::degree() const {
    for (int k = static_cast<int>(coef.size()) - 1; k >= 0; --k)
        if (coef[k] != 0.0) return k;
    return -1;
}

// ---------------------------------------------------------------------------
// Construction of the per-config tables.
// ---------------------------------------------------------------------------
Basis::Basis(const MeasureConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    m_ = cfg_.moment_count();
    exponential_map_ = (cfg_.kind == BasisKind::ShiftedLegendre);

    // Monomial coefficient rows of Q_k via the classical three-term
    // recurrences, run directly on coefficient vectors.
    q2m_ = Mat::Zero(m_, m_);
    q2m_(0, 0) = 1.0;
    if (m_ > 1) {
        switch (cfg_.kind) {
            case BasisKind::ShiftedLegendre:
                // P*_1 = 2x - 1; (k+1)P*_{k+1} = (2k+1)(2x-1)P*_k - k P*_{k-1}
                q2m_(1, 0) = -1.0;
                q2m_(1, 1) = 2.0;
                for (int k = 1; k + 1 < m_; ++k) {
                    for (int i = 0; i <= k; ++i) {
                        q2m_(k + 1, i + 1) += (2.0 * k + 1.0) * 2.0 * q2m_(k, i);
                        q2m_(k + 1, i) -= (2.0 * k + 1.0) * q2m_(k, i);
                        q2m_(k + 1, i) -= k * q2m_(k - 1, i);
                    }
                    q2m_.row(k + 1) /= (k + 1.0);
                }
                break;
            case BasisKind::Laguerre:
                // Q_k(x) = L_k(-x): (k+1)Q_{k+1} = (2k+1+x)Q_k - k Q_{k-1}
                q2m_(1, 0) = 1.0;
                q2m_(1, 1) = 1.0;
                for (int k = 1; k + 1 < m_; ++k) {
                    for (int i = 0; i <= k; ++i) {
                        q2m_(k + 1, i) += (2.0 * k + 1.0) * q2m_(k, i);
                        q2m_(k + 1, i + 1) += q2m_(k, i);
                        q2m_(k + 1, i) -= k * q2m_(k - 1, i);
                    }
                    q2m_.row(k + 1) /= (k + 1.0);
                }
                break;
            case BasisKind::Monomials:
                q2m_.setIdentity();
                break;
        }
    }
    // Inverse conversion by forward substitution on the lower-triangular q2m.
    m2q_ = q2m_.triangularView<Eigen::Lower>().solve(Mat::Identity(m_, m_));

    q_at_x0_.resize(m_);
    if (cfg_.kind == BasisKind::Monomials) {
        q_at_x0_.setZero();
        q_at_x0_[0] = 1.0;
    } else {
        q_at_x0_.setOnes();  // P*_k(1) = 1, L_k(0) = 1
    }

    unit_moments_.resize(m_);
    for (int m = 0; m < m_; ++m) {
        if (exponential_map_) {
            unit_moments_[m] = cfg_.tau / (m + 1.0);  // tau*int_0^1 x^m dx
        } else {
            // tau*int_{-inf}^0 x^m e^x dx = tau*(-1)^m m!
            double f = cfg_.tau;
            for (int i = 2; i <= m; ++i) f *= i;
            unit_moments_[m] = (m % 2 == 0) ? f : -f;
        }
    }

    event_weights_.resize(m_);
    if (exponential_map_) {
        event_weights_.setOnes();  // x0 = 1
    } else {
        event_weights_.setZero();  // x0 = 0
        event_weights_[0] = 1.0;
    }

    prod_.resize(static_cast<size_t>(cfg_.n) * cfg_.n);
    for (int j = 0; j < cfg_.n; ++j)
        for (int k = 0; k < cfg_.n; ++k) {
            Vec a = q2m_.row(j).head(j + 1).transpose();
            Vec b = q2m_.row(k).head(k + 1).transpose();
            Vec c = mono_convolve(a, b);
            Vec full = Vec::Zero(m_);
            full.head(c.size()) = c;
            prod_[static_cast<size_t>(j) * cfg_.n + k] = std::move(full);
        }
}

double Basis::x_of(double dt_back) const {
    return exponential_map_ ? std::exp(-dt_back / cfg_.tau) : -dt_back / cfg_.tau;
}

bool Basis::in_domain(double x) const {
    switch (cfg_.kind) {
        case BasisKind::ShiftedLegendre: return x >= 0.0 && x <= 1.0;
        case BasisKind::Laguerre: return x <= 0.0;
        case BasisKind::Monomials: return true;
    }
    return false;
}

Vec Basis::eval_all(double x, int kmax) const {
    Vec q(kmax + 1);
    q[0] = 1.0;
    if (kmax == 0) return q;
    switch (cfg_.kind) {
        case BasisKind::ShiftedLegendre:
            q[1] = 2.0 * x - 1.0;
            for (int k = 1; k < kmax; ++k)
                q[k + 1] = ((2.0 * k + 1.0) * (2.0 * x - 1.0) * q[k] - k * q[k - 1]) /
                           (k + 1.0);
            break;
        case BasisKind::Laguerre:
            q[1] = 1.0 + x;
            for (int k = 1; k < kmax; ++k)
                q[k + 1] = ((2.0 * k + 1.0 + x) * q[k] - k * q[k - 1]) / (k + 1.0);
            break;
        case BasisKind::Monomials:
            for (int k = 1; k <= kmax; ++k) q[k] = q[k - 1] * x;
            break;
    }
    return q;
}

double Basis::eval_basis(int k, double x) const {
    if (k < 0 || k > cfg_.max_degree())
        throw std::out_of_range("eval_basis: index out of range");
    if (!in_domain(x)) throw std::domain_error("eval_basis: x outside basis domain");
    return eval_all(x, k)[k];
}

double Basis::eval_poly(const BasisPoly& p, double x) const {
    int deg = static_cast<int>(p.coef.size()) - 1;
    if (deg < 0) return 0.0;
    Vec q = eval_all(x, deg);
    return q.dot(p.coef);
}

Vec Basis::to_monomial(const BasisPoly& p) const {
    if (p.kind != cfg_.kind)
        throw std::invalid_argument("to_monomial: basis kind mismatch");
    Vec mono = Vec::Zero(m_);
    int kmax = std::min<int>(static_cast<int>(p.coef.size()), m_);
    for (int k = 0; k < kmax; ++k)
        if (p.coef[k] != 0.0) mono.head(k + 1) += p.coef[k] * q2m_.row(k).head(k + 1).transpose();
    return mono;
}

BasisPoly Basis::from_monomial(const Vec& mono) const {
    if (mono.size() > m_)
        throw std::invalid_argument("from_monomial: degree overflow");
    Vec full = Vec::Zero(m_);
    full.head(mono.size()) = mono;
    BasisPoly p;
    p.kind = cfg_.kind;
    p.coef = m2q_.transpose() * full;
    return p;
}

Vec mono_convolve(const Vec& a, const Vec& b) {
    if (a.size() == 0 || b.size() == 0) return Vec();
    Vec c = Vec::Zero(a.size() + b.size() - 1);
    for (int i = 0; i < a.size(); ++i)
        if (a[i] != 0.0)
            for (int j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

BasisPoly Basis::multiply_in_basis(const BasisPoly& a, const BasisPoly& b) const {
    int da = a.degree(), db = b.degree();
    if (da < 0 || db < 0) {
        BasisPoly z;
        z.kind = cfg_.kind;
        z.coef = Vec::Zero(1);
        return z;
    }
    if (da + db > cfg_.max_degree())
        throw std::invalid_argument("multiply_in_basis: degree overflow (" +
                                    std::to_string(da) + "+" + std::to_string(db) +
                                    " > " + std::to_string(cfg_.max_degree()) + ")");
    Vec ma = to_monomial(a), mb = to_monomial(b);
    Vec c = mono_convolve(ma.head(da + 1), mb.head(db + 1));
    return from_monomial(c);
}

Vec Basis::mono_timeshift_D(const Vec& mono) const {
    Vec out = Vec::Zero(mono.size());
    if (exponential_map_) {
        for (int i = 0; i < mono.size(); ++i) out[i] = i * mono[i] / cfg_.tau;
    } else {
        for (int i = 0; i + 1 < mono.size(); ++i) out[i] = (i + 1) * mono[i + 1] / cfg_.tau;
    }
    return out;
}

Vec Basis::mono_decay_weighted_D(const Vec& mono) const {
    Vec out = mono_timeshift_D(mono);
    out += mono / (2.0 * cfg_.tau);
    return out;
}

Vec Basis::mono_integrate_J(const Vec& mono) const {
    Vec out = Vec::Zero(mono.size());
    if (exponential_map_) {
        // w(t) = x; tau*int_0^x x'^i dx' = x * tau*x^i/(i+1)
        for (int i = 0; i < mono.size(); ++i) out[i] = cfg_.tau * mono[i] / (i + 1.0);
    } else {
        // tau*int_{-inf}^x u^i e^u du = e^x * tau*sum_{s<=i} (-1)^{i-s} (i!/s!) x^s
        for (int i = 0; i < mono.size(); ++i) {
            if (mono[i] == 0.0) continue;
            double f = 1.0;  // i!/s! built downward from s=i
            for (int s = i; s >= 0; --s) {
                double sign = ((i - s) % 2 == 0) ? 1.0 : -1.0;
                out[s] += cfg_.tau * sign * f * mono[i];
                f *= s;  // i!/ (s-1)! = (i!/s!) * s
            }
        }
    }
    return out;
}

double Basis::mono_eval(const Vec& mono, double x) const {
    double v = 0.0;
    for (int i = static_cast<int>(mono.size()) - 1; i >= 0; --i) v = v * x + mono[i];
    return v;
}

BasisPoly Basis::timeshift_D(const BasisPoly& p) const {
    return from_monomial(mono_timeshift_D(to_monomial(p)));
}

BasisPoly Basis::decay_weighted_D(const BasisPoly& p) const {
    return from_monomial(mono_decay_weighted_D(to_monomial(p)));
}

BasisPoly Basis::integrate_J(const BasisPoly& p) const {
    return from_monomial(mono_integrate_J(to_monomial(p)));
}

// ---------------------------------------------------------------------------
// Moment-vector plumbing.
// ---------------------------------------------------------------------------
void Basis::shift_moments(Vec& mono_moments, double dt) const {
    if (dt < 0.0) throw std::invalid_argument("shift_moments: negative dt");
    if (dt == 0.0) return;
    double d = dt / cfg_.tau;
    double c = std::exp(-d);
    if (c == 0.0) {  // gap far beyond the memory horizon: weight underflows
        mono_moments.setZero();
        return;
    }
    if (exponential_map_) {
        // x -> c*x and w -> c*w: <x^m f> picks up c^{m+1}.
        double f = c;
        for (int m = 0; m < mono_moments.size(); ++m) {
            mono_moments[m] *= f;
            f *= c;
        }
    } else {
        // x -> x - d, w -> c*w: binomial lower-triangular map.
        Vec out = Vec::Zero(mono_moments.size());
        for (int m = 0; m < mono_moments.size(); ++m) {
            double binom = 1.0, pw = 1.0;  // C(m,m-j)*(-d)^{m-j}, j downward
            for (int j = m; j >= 0; --j) {
                out[m] += binom * pw * mono_moments[j];
                pw *= -d;
                binom *= static_cast<double>(j) / static_cast<double>(m - j + 1);
            }
            out[m] *= c;
        }
        mono_moments = out;
    }
}

double lower_gamma_int(int m, double d) {
    // int_0^d u^m e^-u du = m! e^-d sum_{k>m} d^k/k!, computed by the
    // positive series (no cancellation for any d >= 0).
    if (d <= 0.0) return 0.0;
    double mfact = 1.0;
    for (int i = 2; i <= m; ++i) mfact *= i;
    if (d > 60.0 + 2.0 * m) return mfact;  // full integral to double precision
    // term_k = d^k/k!, starting at k = m+1
    double logt = (m + 1) * std::log(d) - std::lgamma(m + 2.0);
    double term = std::exp(logt);
    double sum = 0.0;
    for (int k = m + 1; k < m + 1 + 400; ++k) {
        sum += term;
        term *= d / (k + 1.0);
        if (term < sum * 1e-18 && k > d) break;
    }
    return mfact * std::exp(-d) * sum;
}

Vec Basis::interval_weights(double dt) const {
    Vec w = Vec::Zero(m_);
    if (dt <= 0.0) return w;
    double d = dt / cfg_.tau;
    if (exponential_map_) {
        // tau*int_c^1 x^m dx with c = e^-d: tau*(1 - c^{m+1})/(m+1)
        for (int m = 0; m < m_; ++m)
            w[m] = -cfg_.tau * std::expm1(-(m + 1.0) * d) / (m + 1.0);
    } else {
        // tau*int_{-d}^0 x^m e^x dx = tau*(-1)^m int_0^d u^m e^-u du
        for (int m = 0; m < m_; ++m) {
            double g = lower_gamma_int(m, d);
            w[m] = (m % 2 == 0) ? cfg_.tau * g : -cfg_.tau * g;
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// Root finding: balanced companion matrix + Newton polish.
// ---------------------------------------------------------------------------
namespace {

// One-pass row/column norm balancing of a square matrix (standard power-of-two
// scaling; keeps eigenvalues exact).
void balance(Mat& a) {
    const int n = static_cast<int>(a.rows());
    bool converged = false;
    while (!converged) {
        converged = true;
        for (int i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                r += std::abs(a(i, j));
                c += std::abs(a(j, i));
            }
            if (r == 0.0 || c == 0.0) continue;
            double f = 1.0;
            double s = c + r;
            while (c < r / 2.0) {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while (c >= r * 2.0) {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if (c + r < 0.95 * s) {
                converged = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
}

}  // namespace

std::vector<double> Basis::find_real_roots(const BasisPoly& p) const {
    Vec mono = to_monomial(p);
    int deg = -1;
    double maxc = 0.0;
    for (int i = 0; i < mono.size(); ++i) maxc = std::max(maxc, std::abs(mono[i]));
    if (maxc == 0.0) throw std::invalid_argument("find_real_roots: zero polynomial");
    for (int i = static_cast<int>(mono.size()) - 1; i >= 0; --i)
        if (std::abs(mono[i]) > 1e-14 * maxc) {
            deg = i;
            break;
        }
    std::vector<double> roots;
    if (deg <= 0) return roots;

    Mat comp = Mat::Zero(deg, deg);
    for (int i = 0; i + 1 < deg; ++i) comp(i + 1, i) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -mono[i] / mono[deg];
    balance(comp);
    Eigen::EigenSolver<Mat> es(comp, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("find_real_roots: companion eigensolve failed");

    for (int i = 0; i < deg; ++i) {
        std::complex<double> z = es.eigenvalues()[i];
        if (std::abs(z.imag()) > 1e-8 * (1.0 + std::abs(z.real()))) continue;
        double r = z.real();
        // Newton polish on the monomial form.
        for (int it = 0; it < 8; ++it) {
            double f = 0.0, df = 0.0;
            for (int k = deg; k >= 0; --k) {
                df = df * r + f;
                f = f * r + mono[k];
            }
            if (df == 0.0) break;
            double step = f / df;
            r -= step;
            if (std::abs(step) < 1e-15 * (1.0 + std::abs(r))) break;
        }
        if (!in_domain(r)) {
            // Clamp hairline excursions produced by rounding at the boundary.
            if (cfg_.kind == BasisKind::ShiftedLegendre &&
                r > -1e-9 && r < 1.0 + 1e-9) {
                r = std::clamp(r, 0.0, 1.0);
            } else if (cfg_.kind == BasisKind::Laguerre && r > 0.0 && r < 1e-9) {
                r = 0.0;
            } else {
                continue;
            }
        }
        roots.push_back(r);
    }
    std::sort(roots.begin(), roots.end());
    // Drop duplicates closer than the polish resolution.
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double a, double b) {
                                return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a));
                            }),
                roots.end());
    return roots;
}

}  // namespace tickscalp
