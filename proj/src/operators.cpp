#include "tickscalp/operators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace tickscalp {

bool spectrum_flat(const Spectrum& s) {
    double span = s.lambda_max() - s.lambda_min();
    return span < 1e-9 * (1.0 + std::abs(s.lambda_max()));
}

Mat build_operator(const Basis& b, const Vec& momvec) {
    int n = b.n();
    if (momvec.size() != b.moment_count())
        throw std::invalid_argument("build_operator: moment vector length must be 2n-1");
    Mat m(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k <= j; ++k) {
            double v = b.product_mono(j, k).dot(momvec);
            m(j, k) = v;
            m(k, j) = v;
        }
    return m;
}

Spectrum solve_gev(const Basis& b, const Mat& A, const Mat& B) {
    const int n = static_cast<int>(A.rows());
    if (B.rows() != n || A.cols() != n || B.cols() != n)
        throw std::invalid_argument("solve_gev: dimension mismatch");

    Mat As = 0.5 * (A + A.transpose());
    Mat Bs = 0.5 * (B + B.transpose());

    // Jacobi scaling: equalize the diagonal of B so the definiteness guard
    // measures conditioning, not units.
    Vec d(n);
    for (int i = 0; i < n; ++i) {
        double bii = Bs(i, i);
        d[i] = (bii > 0.0) ? 1.0 / std::sqrt(bii) : 1.0;
    }
    Mat Asc = d.asDiagonal() * As * d.asDiagonal();
    Mat Bsc = d.asDiagonal() * Bs * d.asDiagonal();

    // Shrink guard: drop the highest-order rows/columns while the scaled B
    // is numerically indefinite.
    int ne = n;
    double lmin = 0.0;
    while (ne >= 1) {
        Eigen::SelfAdjointEigenSolver<Mat> check(Bsc.topLeftCorner(ne, ne),
                                                 Eigen::EigenvaluesOnly);
        lmin = check.eigenvalues()[0];
        if (lmin > 1e-12) break;
        --ne;
    }
    if (ne < 1)
        throw std::runtime_error(
            "solve_gev: metric matrix indefinite (smallest scaled eigenvalue " +
            std::to_string(lmin) + ")");

    Mat Ar = Asc.topLeftCorner(ne, ne);
    Mat Br = Bsc.topLeftCorner(ne, ne);
    Eigen::LLT<Mat> llt(Br);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("solve_gev: Cholesky factorization failed");
    Mat L = llt.matrixL();
    // C = L^-1 A L^-T, then an ordinary symmetric eigensolve.
    Mat C = L.triangularView<Eigen::Lower>().solve(Ar);
    C = L.triangularView<Eigen::Lower>().solve(C.transpose()).transpose();
    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("solve_gev: eigensolver failed");

    Spectrum out;
    out.n_effective = ne;
    out.values = es.eigenvalues();  // ascending
    out.vectors = Mat::Zero(n, ne);
    Vec q0 = b.q_at_x0_n();
    for (int i = 0; i < ne; ++i) {
        Vec y = es.eigenvectors().col(i);
        Vec alpha = L.transpose().triangularView<Eigen::Upper>().solve(y);
        Vec full = Vec::Zero(n);
        full.head(ne) = d.head(ne).asDiagonal() * alpha;
        // Deterministic sign: psi(x0) >= 0, tie -> first nonzero coefficient.
        double px0 = q0.dot(full);
        double flip = 0.0;
        if (std::abs(px0) > 1e-12 * full.norm() * (1.0 + q0.norm())) {
            flip = px0;
        } else {
            for (int j = 0; j < n; ++j)
                if (std::abs(full[j]) > 1e-12 * full.norm()) {
                    flip = full[j];
                    break;
                }
        }
        if (flip < 0.0) full = -full;
        out.vectors.col(i) = full;
    }
    return out;
}

RayleighVariations rayleigh_variations(const Vec& psi, const Vec& dpsi,
                                       const Mat& A, const Mat& B) {
    double b = psi.dot(B * psi);
    if (!(b > 0.0))
        throw std::invalid_argument("rayleigh_variations: <psi|B|psi> must be positive");
    double a = psi.dot(A * psi);
    double av = dpsi.dot(A * psi);
    double bv = dpsi.dot(B * psi);
    double avv = dpsi.dot(A * dpsi);
    double bvv = dpsi.dot(B * dpsi);
    RayleighVariations r;
    r.D0 = a / b;
    r.D1 = 2.0 * (av - r.D0 * bv) / b;
    r.D2 = (avv - r.D0 * bvv) / b - (2.0 * bv / b) * r.D1;
    return r;
}

namespace {

// Attempt the exact polynomial square root of mono (degree 2d): returns true
// and fills s (degree d) when the residual is below tol * max|coef|.
bool poly_sqrt(const Vec& mono, int deg, Vec& s) {
    if (deg < 0 || deg % 2 != 0) return false;
    if (mono[deg] <= 0.0) return false;
    int d = deg / 2;
    double maxc = mono.cwiseAbs().maxCoeff();
    s = Vec::Zero(d + 1);
    s[d] = std::sqrt(mono[deg]);
    for (int k = d - 1; k >= 0; --k) {
        // coefficient of x^{k+d} in s^2 must match mono[k+d]
        double acc = 0.0;
        for (int i = k + 1; i <= d; ++i) {
            int j = k + d - i;
            if (j > d || j <= k) continue;
            acc += s[i] * s[j];
        }
        s[k] = (mono[k + d] - acc) / (2.0 * s[d]);
    }
    Vec sq = mono_convolve(s, s);
    double resid = 0.0;
    for (int i = 0; i <= deg; ++i) resid = std::max(resid, std::abs(sq[i] - mono[i]));
    for (int i = deg + 1; i < sq.size(); ++i) resid = std::max(resid, std::abs(sq[i]));
    return resid <= 1e-10 * std::max(1.0, maxc);
}

}  // namespace

DensityMatrix poly_to_density(const Basis& b, const BasisPoly& P, const Mat& G) {
    int n = b.n();
    Vec mono = b.to_monomial(P);  // throws on degree overflow past 2n-2
    int deg = -1;
    double maxc = mono.cwiseAbs().maxCoeff();
    for (int i = static_cast<int>(mono.size()) - 1; i >= 0; --i)
        if (std::abs(mono[i]) > 1e-13 * std::max(1.0, maxc)) {
            deg = i;
            break;
        }

    DensityMatrix rho;
    if (deg < 0) {
        rho.weights = Vec::Zero(0);
        rho.states = Mat::Zero(n, 0);
        return rho;
    }

    Vec s;
    if (deg <= 2 * (n - 1) && poly_sqrt(mono, deg, s)) {
        int sd = (static_cast<int>(s.size()) - 1);
        if (sd <= n - 1) {
            // Pure state: rho = |s><s| up to normalization in the G metric.
            Vec sq = b.from_monomial(s).coef.head(n);
            double w = sq.dot(G * sq);
            if (w > 0.0) {
                Vec unit = sq / std::sqrt(w);
                double px0 = b.q_at_x0_n().dot(unit);
                if (px0 < 0.0 || (px0 == 0.0 && unit[0] < 0.0)) unit = -unit;
                rho.weights = Vec::Constant(1, w);
                rho.states = unit;
                return rho;
            }
        }
    }

    // General representative: spread each monomial power evenly over its
    // anti-diagonal of the x^j x^k form, convert to the Q basis, and
    // eigen-decompose in the G metric. Any representative with
    // rho(x,x) = P(x) yields the same averages.
    Mat M = Mat::Zero(n, n);
    for (int dg = 0; dg <= std::min(deg, 2 * n - 2); ++dg) {
        int lo = std::max(0, dg - (n - 1));
        int hi = std::min(n - 1, dg);
        int cnt = hi - lo + 1;
        for (int j = lo; j <= hi; ++j) M(j, dg - j) = mono[dg] / cnt;
    }
    // Re-express over Q_j Q_k: mono form = T^T W T with T = q-to-mono rows.
    // mono form = T W T^T with T(i,j) the x^i coefficient of Q_j, so
    // W = T^-1 M T^-T where T^-1 acts as the upper-triangular solve below.
    Mat Tu = b.q_to_mono().topLeftCorner(n, n).transpose();  // = T, upper-tri
    Mat W = Tu.triangularView<Eigen::Upper>().solve(M);
    W = Tu.triangularView<Eigen::Upper>().solve(W.transpose()).transpose();
    W = 0.5 * (W + W.transpose());

    Spectrum sp = solve_gev(b, G * W * G, G);
    rho.weights = sp.values;
    rho.states = sp.vectors;
    return rho;
}

std::pair<DensityMatrix, DensityMatrix> split_density_sign(const DensityMatrix& rho) {
    int np = 0;
    for (int i = 0; i < rho.count(); ++i)
        if (rho.weights[i] >= 0.0) ++np;
    int nm = rho.count() - np;
    DensityMatrix plus, minus;
    plus.weights = Vec::Zero(np);
    plus.states = Mat::Zero(rho.states.rows(), np);
    minus.weights = Vec::Zero(nm);
    minus.states = Mat::Zero(rho.states.rows(), nm);
    int ip = 0, im = 0;
    for (int i = 0; i < rho.count(); ++i) {
        if (rho.weights[i] >= 0.0) {
            plus.weights[ip] = rho.weights[i];
            plus.states.col(ip++) = rho.states.col(i);
        } else {
            minus.weights[im] = rho.weights[i];
            minus.states.col(im++) = rho.states.col(i);
        }
    }
    return {plus, minus};
}

double density_average(const DensityMatrix& rho, const Mat& F) {
    double s = 0.0;
    for (int i = 0; i < rho.count(); ++i)
        s += rho.weights[i] * rho.states.col(i).dot(F * rho.states.col(i));
    return s;
}

}  // namespace tickscalp
