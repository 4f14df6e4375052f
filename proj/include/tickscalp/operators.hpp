// =============================================================================
// operators.hpp - operator matrices, the symmetric-definite GEV solver,
//                 Rayleigh-quotient variations, and density matrices
// =============================================================================
// Every observable f with moment vector <x^m f> (m = 0..2n-2) induces the
// n x n symmetric matrix <Q_j|f|Q_k>; the Gram matrix G is the f = 1 case.
// All state vectors are Q-coefficient columns of length n.
// =============================================================================
#pragma once

#include "tickscalp/basis.hpp"

namespace tickscalp {

// ---------------------------------------------------------------------------
// Spectrum of a definite pencil (A, B).
// ---------------------------------------------------------------------------
struct Spectrum {
    Vec values;        // ascending
    Mat vectors;       // columns, B-orthonormal; rows beyond n_effective are 0
    int n_effective;   // dimension kept after the conditioning guard

    int size() const { return static_cast<int>(values.size()); }
    // Smallest / largest eigenpair accessors.
    double lambda_min() const { return values[0]; }
    double lambda_max() const { return values[values.size() - 1]; }
    Vec state_min() const { return vectors.col(0); }
    Vec state_max() const { return vectors.col(vectors.cols() - 1); }
};

// Flat-spectrum test: the whole spectrum collapses within tolerance (the
// "constant execution rate" degeneracy; downstream then uses psi0 as the
// maximal state and the scalp-function is 1 by convention).
bool spectrum_flat(const Spectrum& s);

// ---------------------------------------------------------------------------
// DensityMatrix - weighted mixture of G-orthonormal states (weights any sign).
// ---------------------------------------------------------------------------
struct DensityMatrix {
    Vec weights;  // lambda_rho[i]
    Mat states;   // column i is psi_rho[i]

    int count() const { return static_cast<int>(weights.size()); }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------
// entries[j][k] = sum_m c^{jk}_m <x^m f> where Q_j Q_k = sum_m c^{jk}_m x^m.
Mat build_operator(const Basis& b, const Vec& momvec);

// Generalized eigenvalue problem A psi = lambda B psi for symmetric A and
// positive-definite B. Conditioning guard: B is Jacobi-scaled and the highest
// basis rows are dropped while its smallest scaled eigenvalue is below 1e-12;
// the kept dimension is reported as n_effective and dropped coefficient rows
// come back as zeros. Eigenvector sign: psi(x0) >= 0, ties broken by the
// first nonzero coefficient. Throws std::runtime_error (with the offending
// eigenvalue in the message) if B is indefinite even at dimension 1.
Spectrum solve_gev(const Basis& b, const Mat& A, const Mat& B);

// Rayleigh quotient R(psi) = <psi|A|psi>/<psi|B|psi> expanded at psi with
// variation dpsi: R(psi + dpsi) = D0 + D1 + D2 + O(dpsi^3).
struct RayleighVariations {
    double D0, D1, D2;
};
RayleighVariations rayleigh_variations(const Vec& psi, const Vec& dpsi,
                                       const Mat& A, const Mat& B);

// Isomorphism: polynomial P of degree <= 2n-2 -> density matrix rho with
// rho(x, x) = P(x). An exact polynomial square P = s^2 yields the pure state
// s/|s| with weight <s|G|s>; otherwise the anti-diagonal-balanced operator
// is eigen-decomposed in the G metric. Any valid representative gives the
// same density_average against every operator matrix.
DensityMatrix poly_to_density(const Basis& b, const BasisPoly& P, const Mat& G);

// Split by weight sign; plus keeps weights >= 0. plus + minus = rho.
std::pair<DensityMatrix, DensityMatrix> split_density_sign(const DensityMatrix& rho);

// f_rho = sum_i weights[i] * <psi_i|F|psi_i>.
double density_average(const DensityMatrix& rho, const Mat& F);

}  // namespace tickscalp
