// =============================================================================
// test_operators.cpp - unit tests for operator matrices and the GEV solver
// =============================================================================
// Oracle policy: solve_gev is validated against a fully independent solver
// (hand-rolled Cholesky + cyclic Jacobi rotations, no Eigen eigenroutines);
// build_operator against direct quadrature on a synthetic stream; the
// Rayleigh variations against the Taylor remainder of the direct quotient;
// density matrices against the moment-pairing definition of the average.
// =============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tickscalp/moments.hpp"
#include "tickscalp/operators.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <vector>

using namespace tickscalp;

namespace {

// ---------------------------------------------------------------------------
// Independent GEV oracle: explicit Cholesky B = LL^T by hand, C = L^-1 A L^-T,
// then cyclic Jacobi rotations until off-diagonal exhaustion.
// ---------------------------------------------------------------------------
struct OracleResult {
    std::vector<double> values;  // ascending
    Mat vectors;                 // columns, B-orthonormal
};

OracleResult oracle_gev(const Mat& A, const Mat& B) {
    const int n = static_cast<int>(A.rows());
    // Hand-rolled Cholesky.
    Mat L = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = B(i, j);
            for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                REQUIRE(s > 0.0);
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    // Forward/backward substitution for C = L^-1 A L^-T.
    Mat C = A;
    for (int col = 0; col < n; ++col)
        for (int i = 0; i < n; ++i) {
            double s = C(i, col);
            for (int k = 0; k < i; ++k) s -= L(i, k) * C(k, col);
            C(i, col) = s / L(i, i);
        }
    C.transposeInPlace();
    for (int col = 0; col < n; ++col)
        for (int i = 0; i < n; ++i) {
            double s = C(i, col);
            for (int k = 0; k < i; ++k) s -= L(i, k) * C(k, col);
            C(i, col) = s / L(i, i);
        }
    C = 0.5 * (C + C.transpose()).eval();
    // Cyclic Jacobi.
    Mat V = Mat::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += C(p, q) * C(p, q);
        if (off < 1e-28 * (1.0 + C.diagonal().cwiseAbs2().sum())) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (C(p, q) == 0.0) continue;
                double theta = (C(q, q) - C(p, p)) / (2.0 * C(p, q));
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double cpk = C(p, k), cqk = C(q, k);
                    C(p, k) = c * cpk - s * cqk;
                    C(q, k) = s * cpk + c * cqk;
                }
                for (int k = 0; k < n; ++k) {
                    double ckp = C(k, p), ckq = C(k, q);
                    C(k, p) = c * ckp - s * ckq;
                    C(k, q) = s * ckp + c * ckq;
                    double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
    }
    // Back-substitute y -> alpha = L^-T y and sort ascending.
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b2) { return C(a, a) < C(b2, b2); });
    OracleResult r;
    r.vectors = Mat::Zero(n, n);
    for (int out = 0; out < n; ++out) {
        int i = idx[out];
        r.values.push_back(C(i, i));
        Vec y = V.col(i);
        for (int row = n - 1; row >= 0; --row) {
            double s = y[row];
            for (int k = row + 1; k < n; ++k) s -= L(k, row) * y[k];
            y[row] = s / L(row, row);
        }
        r.vectors.col(out) = y;
    }
    return r;
}

Mat random_spd(int n, std::mt19937& rng, double jitter = 1.0) {
    std::normal_distribution<double> N(0.0, 1.0);
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = N(rng);
    return m * m.transpose() + jitter * Mat::Identity(n, n);
}

Mat random_sym(int n, std::mt19937& rng) {
    std::normal_distribution<double> N(0.0, 1.0);
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = N(rng);
    return 0.5 * (m + m.transpose());
}

std::vector<TickRecord> random_stream(int m, unsigned seed) {
    std::mt19937 rng(seed);
    std::exponential_distribution<double> gap(1.0);
    std::normal_distribution<double> step(0.0, 0.02);
    std::poisson_distribution<int> vol(150);
    std::vector<TickRecord> s;
    double t = 3600.0, p = 80.0;
    for (int i = 0; i < m; ++i) {
        if (i) t += gap(rng);
        p = std::max(1.0, p + step(rng));
        s.push_back({static_cast<std::int64_t>(std::llround(t * 1e9)), p,
                     static_cast<double>(vol(rng))});
    }
    return s;
}

}  // namespace

TEST_CASE("build_operator: trivial shapes and the monomial product rule") {
    for (BasisKind kind : {BasisKind::ShiftedLegendre, BasisKind::Laguerre,
                           BasisKind::Monomials}) {
        Basis b({kind, 5, 20.0});
        CHECK(build_operator(b, Vec::Zero(9)).cwiseAbs().maxCoeff() == 0.0);
    }
    Basis bm({BasisKind::Monomials, 5, 20.0});
    std::mt19937 rng(1);
    std::normal_distribution<double> N(0.0, 1.0);
    Vec mom = Vec::NullaryExpr(9, [&](int) { return N(rng); });
    Mat m = build_operator(bm, mom);
    for (int j = 0; j < 5; ++j)
        for (int k = 0; k < 5; ++k) CHECK(m(j, k) == doctest::Approx(mom[j + k]));
    CHECK_THROWS_AS((void)build_operator(bm, Vec::Zero(4)), std::invalid_argument);
}

TEST_CASE("build_operator matches direct quadrature on a synthetic stream") {
    // <Q_j|I|Q_k> built from moments vs the direct event sum of
    // Q_j(x_l) Q_k(x_l) shares_l omega_l at the final anchor.
    for (BasisKind kind : {BasisKind::ShiftedLegendre, BasisKind::Laguerre}) {
        auto b = std::make_shared<Basis>(MeasureConfig{kind, 6, 30.0});
        auto stream = random_stream(500, 17);
        MomentSet ms(b);
        for (auto& t : stream) ms.ingest_tick(t);
        Mat M = build_operator(*b, ms.mono_moments(Obs::I));
        double T = static_cast<double>(stream.back().t_ns) * 1e-9;
        Mat direct = Mat::Zero(6, 6);
        for (auto& t : stream) {
            double back = T - static_cast<double>(t.t_ns) * 1e-9;
            double w = std::exp(-back / b->tau());
            Vec q = b->eval_all(b->x_of(back), 5);
            direct += t.shares * w * (q * q.transpose());
        }
        double scale = direct.cwiseAbs().maxCoeff();
        CHECK((M - direct).cwiseAbs().maxCoeff() / scale < 1e-8);
    }
}

TEST_CASE("solve_gev: trivial pencils and the sign convention") {
    Basis b({BasisKind::ShiftedLegendre, 6, 15.0});
    std::mt19937 rng(5);
    Mat B = random_spd(6, rng);
    Spectrum s1 = solve_gev(b, B, B);
    for (int i = 0; i < 6; ++i) CHECK(s1.values[i] == doctest::Approx(1.0).epsilon(1e-12));
    Spectrum s2 = solve_gev(b, Mat(2.0 * B), B);
    for (int i = 0; i < 6; ++i) CHECK(s2.values[i] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(spectrum_flat(s1));
    // Sign convention: psi(x0) >= 0 (all-ones q0 in this basis).
    Mat A = random_sym(6, rng);
    Spectrum s3 = solve_gev(b, A, B);
    CHECK_FALSE(spectrum_flat(s3));
    for (int i = 0; i < 6; ++i) CHECK(b.q_at_x0_n().dot(s3.vectors.col(i)) >= -1e-12);
}

TEST_CASE("solve_gev matches the independent Cholesky+Jacobi oracle") {
    Basis b({BasisKind::Laguerre, 6, 15.0});
    std::mt19937 rng(99);
    for (int rep = 0; rep < 200; ++rep) {
        int n = 2 + static_cast<int>(rng() % 5);
        Basis bn({BasisKind::Laguerre, n, 15.0});
        Mat A = random_sym(n, rng);
        Mat B = random_spd(n, rng, 0.5);
        Spectrum s = solve_gev(bn, A, B);
        OracleResult o = oracle_gev(A, B);
        REQUIRE(s.n_effective == n);
        for (int i = 0; i < n; ++i) {
            CHECK(s.values[i] ==
                  doctest::Approx(o.values[i]).epsilon(1e-9).scale(1.0));
            // Residual and B-orthonormality.
            Vec r = A * s.vectors.col(i) - s.values[i] * (B * s.vectors.col(i));
            CHECK(r.norm() <= 1e-9 * A.norm() * s.vectors.col(i).norm() + 1e-12);
            for (int j = 0; j <= i; ++j)
                CHECK(s.vectors.col(i).dot(B * s.vectors.col(j)) ==
                      doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("solve_gev conditioning guard shrinks and hard-errors correctly") {
    Basis b({BasisKind::ShiftedLegendre, 4, 9.0});
    std::mt19937 rng(3);
    // Rank-deficient metric: last row/column duplicated -> singular.
    Mat B = random_spd(3, rng);
    Mat B4 = Mat::Zero(4, 4);
    B4.topLeftCorner(3, 3) = B;
    B4.col(3) = B4.col(2);
    B4.row(3) = B4.row(2);
    Mat A = random_sym(4, rng);
    Spectrum s = solve_gev(b, A, B4);
    CHECK(s.n_effective == 3);
    CHECK(s.values.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(s.vectors(3, i) == 0.0);
    // Negative-definite metric is a hard error.
    Mat Bneg = -random_spd(4, rng);
    CHECK_THROWS_AS((void)solve_gev(b, A, Bneg), std::runtime_error);
}

TEST_CASE("Rayleigh bounds hold for random states") {
    Basis b({BasisKind::Monomials, 5, 5.0});
    std::mt19937 rng(8);
    Mat A = random_sym(5, rng);
    Mat B = random_spd(5, rng);
    Spectrum s = solve_gev(b, A, B);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int rep = 0; rep < 1000; ++rep) {
        Vec psi = Vec::NullaryExpr(5, [&](int) { return N(rng); });
        double q = psi.dot(A * psi) / psi.dot(B * psi);
        CHECK(q >= s.lambda_min() - 1e-10 * (1.0 + std::abs(s.lambda_min())));
        CHECK(q <= s.lambda_max() + 1e-10 * (1.0 + std::abs(s.lambda_max())));
    }
}

TEST_CASE("rayleigh_variations: stationarity and Taylor remainder") {
    Basis b({BasisKind::Laguerre, 6, 3.0});
    std::mt19937 rng(21);
    Mat A = random_sym(6, rng);
    Mat B = random_spd(6, rng);
    std::normal_distribution<double> N(0.0, 1.0);

    Vec psi = Vec::NullaryExpr(6, [&](int) { return N(rng); });
    RayleighVariations z = rayleigh_variations(psi, Vec::Zero(6), A, B);
    CHECK(z.D1 == 0.0);
    CHECK(z.D2 == 0.0);

    // D1 = 0 at eigenstates.
    Spectrum s = solve_gev(b, A, B);
    for (int i = 0; i < 6; ++i) {
        Vec dpsi = Vec::NullaryExpr(6, [&](int) { return N(rng); });
        RayleighVariations r = rayleigh_variations(s.vectors.col(i), dpsi, A, B);
        CHECK(std::abs(r.D1) < 1e-10 * (1.0 + std::abs(r.D0)));
    }

    // Taylor remainder scales as O(eps^3).
    Vec dir = Vec::NullaryExpr(6, [&](int) { return N(rng); });
    auto remainder = [&](double eps) {
        Vec d = eps * dir;
        RayleighVariations r = rayleigh_variations(psi, d, A, B);
        Vec pp = psi + d;
        double exact = pp.dot(A * pp) / pp.dot(B * pp);
        return std::abs(exact - (r.D0 + r.D1 + r.D2));
    };
    double r3 = remainder(1e-3), r4 = remainder(1e-4);
    CHECK(r3 < 1e-6);
    CHECK(r4 < 1e-9);
    CHECK_THROWS_AS((void)rayleigh_variations(Vec::Zero(6), dir, A, B),
                    std::invalid_argument);
}

TEST_CASE("poly_to_density: pointwise identity, pure states, averages") {
    for (BasisKind kind : {BasisKind::ShiftedLegendre, BasisKind::Laguerre,
                           BasisKind::Monomials}) {
        auto b = std::make_shared<Basis>(MeasureConfig{kind, 5, 12.0});
        auto stream = random_stream(300, 31);
        MomentSet ms(b);
        for (auto& t : stream) ms.ingest_tick(t);
        Mat G = build_operator(*b, ms.mono_moments(Obs::One));
        Mat F = build_operator(*b, ms.mono_moments(Obs::I));

        // Unit polynomial: rho(x,x) = 1 pointwise at 20 sample points.
        BasisPoly unitp{kind, Vec::Unit(9, 0)};
        DensityMatrix r1 = poly_to_density(*b, unitp, G);
        for (int s = 0; s < 20; ++s) {
            double back = 0.3 * s * b->tau() / 4.0;
            double x = b->x_of(back);
            double val = 0.0;
            for (int i = 0; i < r1.count(); ++i) {
                BasisPoly st{kind, r1.states.col(i)};
                double v = b->eval_poly(st, x);
                val += r1.weights[i] * v * v;
            }
            CHECK(val == doctest::Approx(1.0).epsilon(1e-8));
        }

        // Pure state: P = psi^2 -> single weight, the state itself.
        std::mt19937 rng(7);
        std::normal_distribution<double> N(0.0, 1.0);
        Vec psi = Vec::NullaryExpr(5, [&](int) { return N(rng); });
        psi /= std::sqrt(psi.dot(G * psi));
        Vec pm = b->to_monomial(BasisPoly{kind, psi});
        BasisPoly sq = b->from_monomial(mono_convolve(pm.head(5), pm.head(5)));
        DensityMatrix r2 = poly_to_density(*b, sq, G);
        REQUIRE(r2.count() == 1);
        CHECK(r2.weights[0] == doctest::Approx(1.0).epsilon(1e-8));
        double align = std::abs(r2.states.col(0).dot(G * psi));
        CHECK(align == doctest::Approx(1.0).epsilon(1e-8));

        // General polynomial (not a square): the density average equals the
        // moment pairing <P-as-weight, F> evaluated independently by direct
        // tick summation of P(x_l) * f_l * omega_l.
        Vec pc = Vec::NullaryExpr(9, [&](int) { return N(rng); });
        BasisPoly P{kind, pc};
        DensityMatrix r3 = poly_to_density(*b, P, G);
        double got = density_average(r3, F);
        double T = static_cast<double>(stream.back().t_ns) * 1e-9;
        double direct = 0.0;
        for (auto& t : stream) {
            double back = T - static_cast<double>(t.t_ns) * 1e-9;
            direct += t.shares * std::exp(-back / b->tau()) *
                      b->eval_poly(P, b->x_of(back));
        }
        CHECK(got == doctest::Approx(direct).epsilon(1e-8).scale(
                         std::abs(direct) + 1.0));

        // Sign split partitions and reassembles.
        auto [plus, minus] = split_density_sign(r3);
        CHECK(plus.count() + minus.count() == r3.count());
        for (int i = 0; i < plus.count(); ++i) CHECK(plus.weights[i] >= 0.0);
        for (int i = 0; i < minus.count(); ++i) CHECK(minus.weights[i] < 0.0);
        CHECK(density_average(plus, F) + density_average(minus, F) ==
              doctest::Approx(got).epsilon(1e-10).scale(std::abs(got) + 1.0));
    }
}

TEST_CASE("density_average: pure state and metric traces") {
    Basis b({BasisKind::ShiftedLegendre, 4, 6.0});
    std::mt19937 rng(77);
    Mat G = random_spd(4, rng);
    Mat F = random_sym(4, rng);
    std::normal_distribution<double> N(0.0, 1.0);
    Vec psi = Vec::NullaryExpr(4, [&](int) { return N(rng); });
    DensityMatrix pure;
    pure.weights = Vec::Constant(1, 1.0);
    pure.states = psi;
    CHECK(density_average(pure, F) == doctest::Approx(psi.dot(F * psi)));

    // G-orthonormal states, F = G -> sum of weights.
    Spectrum s = solve_gev(b, F, G);
    DensityMatrix mix;
    mix.weights = Vec::LinSpaced(4, -1.0, 2.0);
    mix.states = s.vectors;
    CHECK(density_average(mix, G) ==
          doctest::Approx(mix.weights.sum()).epsilon(1e-10));

    // Rotating a degenerate subspace leaves averages unchanged.
    DensityMatrix rot = mix;
    double c = std::cos(0.7), sn = std::sin(0.7);
    rot.weights[1] = rot.weights[2] = 1.5;  // make 1,2 degenerate
    mix.weights[1] = mix.weights[2] = 1.5;
    rot.states.col(1) = c * mix.states.col(1) + sn * mix.states.col(2);
    rot.states.col(2) = -sn * mix.states.col(1) + c * mix.states.col(2);
    CHECK(density_average(rot, F) ==
          doctest::Approx(density_average(mix, F)).epsilon(1e-11));
}

TEST_CASE("solve_gev is invariant under a consistent change of representation") {
    Basis b({BasisKind::Laguerre, 5, 4.0});
    std::mt19937 rng(15);
    Mat A = random_sym(5, rng);
    Mat B = random_spd(5, rng);
    Mat S = random_spd(5, rng);  // invertible change of representation
    Spectrum s1 = solve_gev(b, A, B);
    Spectrum s2 = solve_gev(b, Mat(S.transpose() * A * S), Mat(S.transpose() * B * S));
    for (int i = 0; i < 5; ++i)
        CHECK(s1.values[i] ==
              doctest::Approx(s2.values[i]).epsilon(1e-9).scale(1.0));
}
