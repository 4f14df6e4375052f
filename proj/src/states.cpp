#include "tickscalp/states.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tickscalp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Guarded G^-1 q: Jacobi-scaled, high-order rows dropped while the scaled
// metric is numerically indefinite (same guard policy as the eigensolver);
// dropped coefficients come back as zeros.
Vec kernel_solve(const Mat& G, const Vec& q) {
    const int n = static_cast<int>(G.rows());
    Mat Gs = 0.5 * (G + G.transpose());
    Vec d(n);
    for (int i = 0; i < n; ++i) {
        double gii = Gs(i, i);
        d[i] = (gii > 0.0) ? 1.0 / std::sqrt(gii) : 1.0;
    }
    Mat Gsc = d.asDiagonal() * Gs * d.asDiagonal();
    int ne = n;
    double lmin = 0.0;
    while (ne >= 1) {
        Eigen::SelfAdjointEigenSolver<Mat> check(Gsc.topLeftCorner(ne, ne),
                                                 Eigen::EigenvaluesOnly);
        lmin = check.eigenvalues()[0];
        if (lmin > 1e-12) break;
        --ne;
    }
    if (ne < 1)
        throw std::runtime_error("kernel_solve: metric matrix unusable (" +
                                 std::to_string(lmin) + ")");
    Vec qs = d.asDiagonal() * q;
    Vec ks = Gsc.topLeftCorner(ne, ne).llt().solve(qs.head(ne));
    Vec k = Vec::Zero(n);
    k.head(ne) = d.head(ne).asDiagonal() * ks;
    return k;
}

// Normalized reproducing-kernel state at the point with basis values q.
Vec kernel_state(const Mat& G, const Vec& q) {
    Vec k = kernel_solve(G, q);
    double norm = q.dot(k);
    if (!(norm > 0.0))
        throw std::runtime_error("kernel_state: non-positive kernel norm");
    return k / std::sqrt(norm);
}

}  // namespace

Vec psi_now(const Basis& b, const Mat& G) {
    return kernel_state(G, b.q_at_x0_n());
}

Vec max_flow_state(const Spectrum& spec, const Vec& psi0) {
    return spectrum_flat(spec) ? psi0 : spec.state_max();
}

ExecutionFlowSummary flow_summary(const Spectrum& spec, const Vec& psi0,
                                  const Mat& G, const Mat& I) {
    ExecutionFlowSummary s;
    s.sL = spec.lambda_min();
    s.sH = spec.lambda_max();
    s.s0 = psi0.dot(I * psi0);
    s.flat = spectrum_flat(spec);
    if (s.flat) {
        // "Huge volume traded now": the pencil carries no direction, the
        // maximal state degenerates onto psi0.
        s.wH = 1.0;
        s.wL = 0.0;
        s.Gamma0 = 0.0;
        return s;
    }
    s.wL = spec.state_min().dot(G * psi0);
    s.wH = spec.state_max().dot(G * psi0);
    s.Gamma0 = (2.0 * s.s0 - s.sL - s.sH) / (s.sL - s.sH);
    return s;
}

RnInterpolation interpolate_rn(const Basis& b, double y, const Mat& G,
                               const Mat& I, const Mat& pI, const Mat& p,
                               const Spectrum& spec) {
    if (!b.in_domain(y))
        throw std::domain_error("interpolate_rn: y outside the basis domain");
    Vec q = b.eval_all(y, b.n() - 1);
    RnInterpolation r;
    r.psi_y = kernel_state(G, q);
    r.I_y = r.psi_y.dot(I * r.psi_y);
    r.pt_y = r.psi_y.dot(p * r.psi_y);
    r.pv_y = (r.I_y > 0.0) ? r.psi_y.dot(pI * r.psi_y) / r.I_y : kNaN;
    r.projections = Vec::Zero(spec.size());
    for (int i = 0; i < spec.size(); ++i) {
        double w = r.psi_y.dot(G * spec.vectors.col(i));
        r.projections[i] = w * w;
    }
    return r;
}

StatePrices state_prices(const Vec& psi, const Mat& G, const Mat& p,
                         const Mat& I, const Mat& pI, const Mat& V0,
                         const Mat& V1, const Mat& T0, const Mat& T1) {
    auto ratio = [&](const Mat& num, const Mat& den) {
        double d = psi.dot(den * psi);
        return (d > 0.0) ? psi.dot(num * psi) / d : kNaN;
    };
    StatePrices s;
    s.p_v = ratio(pI, I);
    s.p_t = ratio(p, G);
    s.p_V = ratio(V1, V0);
    s.p_T = ratio(T1, T0);
    return s;
}

AggregatedFlowState aggregated_flow_state(const Basis& b, const Mat& V0,
                                          const Mat& T0, const Mat& I,
                                          const Mat& G) {
    AggregatedFlowState out;
    out.spec = solve_gev(b, V0, T0);
    out.lambda_local = Vec::Zero(out.spec.size());
    for (int i = 0; i < out.spec.size(); ++i) {
        Vec a = out.spec.vectors.col(i);
        double den = a.dot(G * a);
        out.lambda_local[i] = (den > 0.0) ? a.dot(I * a) / den : kNaN;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constrained solvers
// ---------------------------------------------------------------------------
Mat constraint_matrix(const Basis& b, ConstraintKind kind, const Mat& I,
                      const Mat& pI, const Mat& V0, const Mat& V1,
                      const Mat& dpdt, double p_last_off) {
    switch (kind) {
        case ConstraintKind::PriceFlow:
            return pI - p_last_off * I;
        case ConstraintKind::MovingAverage:
            return V1 - p_last_off * V0;
        case ConstraintKind::PriceFlowDerivative: {
            // (p - P_last) I vanishes at t_now, so the boundary term is zero.
            Mat M = pI - p_last_off * I;
            return didt_operator(b, M, DidtBoundary::Zero);
        }
        case ConstraintKind::PriceExtremum:
            return dpdt;
        case ConstraintKind::DpdtExtremum:
            return didt_operator(b, dpdt, DidtBoundary::Zero);
    }
    throw std::invalid_argument("constraint_matrix: unknown kind");
}

ConstrainedSolution constrained_global(const Basis& b, const Mat& G,
                                       const Mat& I, const Mat& C,
                                       const Vec& psi0) {
    ConstrainedSolution sol;
    sol.psi_M = Vec::Zero(G.rows());

    // The constraint <psi|C|psi> = 0 has unit-norm solutions only when the
    // (C, G) pencil is indefinite.
    Spectrum spC = solve_gev(b, C, G);
    double cmax = std::max(std::abs(spC.lambda_min()), std::abs(spC.lambda_max()));
    double eps = 1e-10 * (cmax + 1e-300);
    if (!(spC.lambda_min() < -eps && spC.lambda_max() > eps)) return sol;

    Spectrum spI = solve_gev(b, I, G);
    Vec psi = spI.state_max();

    auto normalize = [&](Vec v) {
        double nrm = v.dot(G * v);
        return (nrm > 0.0) ? Vec(v / std::sqrt(nrm)) : v;
    };
    auto finish = [&](const Vec& v, double mu_val) {
        Vec u = normalize(v);
        double px0 = b.q_at_x0_n().dot(u);
        if (px0 < 0.0) u = -u;
        sol.psi_M = u;
        sol.mu = mu_val;
        sol.i_M = u.dot(I * u);
        double w = u.dot(G * psi0);
        sol.wr0_M = w * w;
        sol.flag_solution_exists = true;
        return sol;
    };

    // Adjust psi along the constraint gradient b = G^-1 C psi so the
    // quadratic form vanishes exactly; of the two roots keep the one with
    // the larger flow quotient. Returns false when no real adjustment
    // exists (iteration failed).
    auto project = [&](const Vec& v, Vec& out) {
        Vec bvec = kernel_solve(G, C * v);
        double c0 = v.dot(C * v);
        double c1 = bvec.dot(C * v);
        double c2 = bvec.dot(C * bvec);
        if (std::abs(c2) > 1e-14 * cmax) {
            double disc = c1 * c1 - c0 * c2;
            if (disc < 0.0) return false;
            double rt = std::sqrt(disc);
            double sa = (-c1 + rt) / c2, sb = (-c1 - rt) / c2;
            Vec pa = normalize(v + sa * bvec);
            Vec pb = normalize(v + sb * bvec);
            out = (pa.dot(I * pa) >= pb.dot(I * pb)) ? pa : pb;
            return true;
        }
        if (std::abs(c1) > 1e-14 * cmax) {
            out = normalize(v - (c0 / (2.0 * c1)) * bvec);
            return true;
        }
        if (std::abs(c0) <= 1e-8 * cmax) {
            out = normalize(v);  // already on the constraint
            return true;
        }
        return false;  // gradient degenerate while off the constraint
    };

    double mu = 0.0;
    bool have_mu = false;
    int stall = 0;
    Vec adj;
    // Track the best on-constraint state seen across the iterations; the
    // multiplier sequence is not monotone in the objective.
    double best_i = -std::numeric_limits<double>::infinity();
    Vec best_psi;
    double best_mu = 0.0;
    auto consider = [&](const Vec& v, double mu_val) {
        double val = v.dot(I * v);
        if (val > best_i) {
            best_i = val;
            best_psi = v;
            best_mu = mu_val;
        }
    };
    for (int it = 0; it < 10; ++it) {
        if (!project(psi, adj)) break;
        consider(adj, mu);

        // Multiplier making the objective stationary along the gradient.
        Vec ca = C * adj;
        Vec gi = kernel_solve(G, I * adj);
        Vec gc = kernel_solve(G, ca);
        double den = ca.dot(gc);
        if (!(std::abs(den) > 0.0)) return sol;
        double mu_new = -ca.dot(gi) / den;
        if (have_mu &&
            std::abs(mu_new - mu) < 1e-12 * (1.0 + std::abs(mu_new))) {
            // Shared-eigenvector stall: the update cannot move the iterate.
            if (++stall >= 3) break;
        } else {
            stall = 0;
        }
        mu = mu_new;
        have_mu = true;

        // Select the next iterate among the adjusted-pencil eigenvectors by
        // the flow its on-constraint projection achieves.
        Spectrum sp = solve_gev(b, Mat(I + mu * C), G);
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < sp.size(); ++i) {
            Vec v = sp.vectors.col(i);
            Vec vp;
            if (!project(v, vp)) continue;
            consider(vp, mu);
            double val = vp.dot(I * vp);
            if (val >= best) {
                best = val;
                psi = v;
            }
        }
        if (!std::isfinite(best)) break;
    }
    // Dual refinement: lambda_max(mu) of the (I + mu C, G) pencil is convex
    // in mu with slope <psi_top|C|psi_top>; the constrained maximum is its
    // minimum. Bisect the slope sign change, then zero the constraint inside
    // the (possibly two-dimensional) top eigenspace. Guards against the
    // multiplier iteration settling on a secondary stationary point.
    auto top_pair = [&](double m, Vec& v1, Vec& v2, double& slope) {
        Spectrum sp = solve_gev(b, Mat(I + m * C), G);
        int last = sp.size() - 1;
        v1 = sp.vectors.col(last);
        v2 = (last > 0) ? Vec(sp.vectors.col(last - 1)) : v1;
        slope = v1.dot(C * v1);
    };
    Vec v1, v2;
    double slope;
    double iscale = std::max(std::abs(spI.lambda_min()),
                             std::abs(spI.lambda_max()));
    double step = (1.0 + iscale) / (cmax + 1e-300);
    double mu_lo = 0.0, mu_hi = 0.0;
    top_pair(0.0, v1, v2, slope);
    bool bracketed = false;
    if (slope > 0.0) {
        mu_hi = 0.0;
        for (int k = 0; k < 60 && !bracketed; ++k) {
            mu_lo = -step * std::pow(2.0, k);
            top_pair(mu_lo, v1, v2, slope);
            if (slope < 0.0) bracketed = true;
        }
    } else {
        mu_lo = 0.0;
        for (int k = 0; k < 60 && !bracketed; ++k) {
            mu_hi = step * std::pow(2.0, k);
            top_pair(mu_hi, v1, v2, slope);
            if (slope > 0.0) bracketed = true;
        }
    }
    if (bracketed) {
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (mu_lo + mu_hi);
            if (!(mid > mu_lo && mid < mu_hi)) break;
            top_pair(mid, v1, v2, slope);
            (slope > 0.0 ? mu_hi : mu_lo) = mid;
        }
        double mu_star = 0.5 * (mu_lo + mu_hi);
        top_pair(mu_star, v1, v2, slope);
        // Mix the top two states to land on the constraint: quadratic in the
        // mixing ratio; fall back to the plain projection when it has no
        // real root (single-vector kink).
        double c11 = v1.dot(C * v1), c12 = v1.dot(C * v2), c22 = v2.dot(C * v2);
        double disc = c12 * c12 - c11 * c22;
        if (disc >= 0.0 && std::abs(c22) > 1e-14 * cmax) {
            double rt = std::sqrt(disc);
            for (double r : {(-c12 + rt) / c22, (-c12 - rt) / c22}) {
                Vec u = normalize(v1 + r * v2);
                if (std::abs(u.dot(C * u)) <= 1e-8 * cmax) consider(u, mu_star);
            }
        }
        Vec vp;
        if (project(v1, vp)) consider(vp, mu_star);
    }

    if (!std::isfinite(best_i)) return sol;
    if (std::abs(best_psi.dot(C * best_psi)) > 1e-8 * cmax) return sol;
    return finish(best_psi, best_mu);
}

ConstrainedSolution constrained_localized(const Basis& b, const Mat& G,
                                          const Mat& I, const Mat& C,
                                          const Vec& psi0) {
    const int n = b.n();
    ConstrainedSolution sol;
    sol.psi_M = Vec::Zero(n);

    // Constraint value of the kernel family: <psi_y|C|psi_y> is proportional
    // to P(y) = q(y)^T G^-1 C G^-1 q(y), a polynomial of degree 2n-2.
    Mat W(n, n);
    for (int col = 0; col < n; ++col) W.col(col) = kernel_solve(G, C.col(col));
    Mat W2(n, n);
    for (int col = 0; col < n; ++col) W2.col(col) = kernel_solve(G, W.transpose().col(col));
    W2 = 0.5 * (W2 + W2.transpose()).eval();  // = G^-1 C G^-1

    // Monomial coefficients of P(y): collapse T W2 T^T over anti-diagonals.
    Mat T = b.q_to_mono().topLeftCorner(n, n).transpose();
    Mat Mxx = T * W2 * T.transpose();
    Vec poly = Vec::Zero(b.moment_count());
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) poly[j + k] += Mxx(j, k);

    double pscale = poly.cwiseAbs().maxCoeff();
    double wscale = W2.cwiseAbs().maxCoeff() * T.cwiseAbs().maxCoeff() *
                    T.cwiseAbs().maxCoeff() * n * n;

    auto eval_candidate = [&](double y, double& ival, Vec& state) {
        Vec q = b.eval_all(y, n - 1);
        Vec k = kernel_solve(G, q);
        double nrm = q.dot(k);
        if (!(nrm > 0.0)) return false;
        state = k / std::sqrt(nrm);
        ival = state.dot(I * state);
        return true;
    };

    double best = -std::numeric_limits<double>::infinity();
    if (pscale < 1e-12 * (wscale + 1e-300)) {
        // Degenerate constraint: every y is admissible; scan a fixed grid.
        const int kGrid = 512;
        for (int i = 0; i < kGrid; ++i) {
            double y;
            if (b.config().kind == BasisKind::ShiftedLegendre)
                y = static_cast<double>(i + 1) / kGrid;
            else
                y = -40.0 * static_cast<double>(i) / (kGrid - 1);
            double ival;
            Vec st;
            if (!eval_candidate(y, ival, st)) continue;
            if (ival > best) {
                best = ival;
                sol.psi_M = st;
                sol.y_M = y;
            }
        }
        sol.n_roots = 0;
        sol.flag_solution_exists = std::isfinite(best);
    } else {
        auto roots = b.find_real_roots(b.from_monomial(poly));
        sol.n_roots = static_cast<int>(roots.size());
        for (double y : roots) {
            double ival;
            Vec st;
            if (!eval_candidate(y, ival, st)) continue;
            if (ival > best) {
                best = ival;
                sol.psi_M = st;
                sol.y_M = y;
            }
        }
        sol.flag_solution_exists = std::isfinite(best);
        if (!sol.flag_solution_exists) sol.psi_M = Vec::Zero(n);
    }
    if (sol.flag_solution_exists) {
        sol.i_M = best;
        double w = sol.psi_M.dot(G * psi0);
        sol.wr0_M = w * w;
    }
    return sol;
}

ConstrainedSolution constrained_eigenselect(const Basis& b,
                                            EigenselectPencil which,
                                            const Mat& G, const Mat& I,
                                            const Mat& pI, const Mat& V0,
                                            const Mat& V1, const Vec& psi0) {
    const Mat& A = (which == EigenselectPencil::pI_vs_I) ? pI : V1;
    const Mat& B = (which == EigenselectPencil::pI_vs_I) ? I : V0;
    Spectrum sp = solve_gev(b, A, B);
    ConstrainedSolution sol;
    sol.psi_M = Vec::Zero(G.rows());
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < sp.size(); ++i) {
        Vec v = sp.vectors.col(i);
        double den = v.dot(G * v);
        if (!(den > 0.0)) continue;
        double val = v.dot(I * v) / den;
        // >= prefers the larger eigenvalue index on exact ties.
        if (val >= best - 1e-12 * (1.0 + std::abs(best))) {
            best = std::max(best, val);
            sol.psi_M = v / std::sqrt(den);
            sol.mu = sp.values[i];
        }
    }
    if (std::isfinite(best)) {
        sol.flag_solution_exists = true;
        sol.i_M = sol.psi_M.dot(I * sol.psi_M);
        double w = sol.psi_M.dot(G * psi0);
        sol.wr0_M = w * w;
    }
    return sol;
}

}  // namespace tickscalp
