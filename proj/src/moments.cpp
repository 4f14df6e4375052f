#include "tickscalp/moments.hpp"

#include <cmath>
#include <stdexcept>

namespace tickscalp {

MomentSet::MomentSet(std::shared_ptr<const Basis> basis)
    : basis_(std::move(basis)) {
    if (!basis_) throw std::invalid_argument("MomentSet: null basis");
    for (auto& f : fam_) f = Vec::Zero(basis_->moment_count());
}

void MomentSet::init_at(const TickRecord& tick) {
    // History behind the anchor carries the analytic full measure with the
    // price frozen at the last known value and no execution events.
    anchor_ns_ = tick.t_ns;
    fam_[static_cast<int>(Obs::One)] = basis_->unit_moments();
    fam_[static_cast<int>(Obs::Price)] =
        (last_price_ - p_offset_) * basis_->unit_moments();
    fam_[static_cast<int>(Obs::I)].setZero();
    fam_[static_cast<int>(Obs::PI)].setZero();
    fam_[static_cast<int>(Obs::P2I)].setZero();
    fam_[static_cast<int>(Obs::P3I)].setZero();
    fam_[static_cast<int>(Obs::DpDt)].setZero();
}

void MomentSet::ingest_tick(const TickRecord& tick) {
    if (!(tick.price > 0.0) || !std::isfinite(tick.price))
        throw std::invalid_argument("ingest_tick: price must be positive");
    if (tick.shares < 0.0 || !std::isfinite(tick.shares))
        throw std::invalid_argument("ingest_tick: shares must be non-negative");

    bool first = (count_ == 0);
    double dp = 0.0;
    if (first) {
        p_offset_ = tick.price;
        first_price_ = tick.price;
        prev_price_ = tick.price;
        last_price_ = tick.price;  // init_at freezes history at this price
        init_at(tick);
    } else {
        if (tick.t_ns < anchor_ns_)
            throw std::invalid_argument("ingest_tick: time going backwards");
        double dt = static_cast<double>(tick.t_ns - anchor_ns_) * 1e-9;
        if (dt / basis_->tau() > kGapResetRatio) {
            init_at(tick);
        } else if (dt > 0.0) {
            for (auto& f : fam_) basis_->shift_moments(f, dt);
            Vec iw = basis_->interval_weights(dt);
            fam_[static_cast<int>(Obs::One)] += iw;
            // Price is right-continuous: the gap carries the previous price.
            fam_[static_cast<int>(Obs::Price)] += (last_price_ - p_offset_) * iw;
            anchor_ns_ = tick.t_ns;
        }
        dp = tick.price - last_price_;
    }

    const Vec& ev = basis_->event_weights();
    double po = tick.price - p_offset_;
    fam_[static_cast<int>(Obs::I)] += tick.shares * ev;
    fam_[static_cast<int>(Obs::PI)] += tick.shares * po * ev;
    fam_[static_cast<int>(Obs::P2I)] += tick.shares * po * po * ev;
    fam_[static_cast<int>(Obs::P3I)] += tick.shares * po * po * po * ev;
    if (!first) fam_[static_cast<int>(Obs::DpDt)] += dp * ev;

    prev_price_ = first ? tick.price : last_price_;
    last_price_ = tick.price;
    last_shares_ = tick.shares;
    v_now_ += tick.shares;
    ++count_;
}

Vec MomentSet::q_moments(Obs f) const {
    // <Q_m f> = sum_i q2m[m][i] <x^i f>
    return basis_->q_to_mono() * mono_moments(f);
}

AggregatedMoments MomentSet::aggregated_moments() const {
    const Basis& b = *basis_;
    int m = b.moment_count();
    AggregatedMoments out;
    out.V0 = Vec::Zero(m);
    out.T0 = Vec::Zero(m);
    out.V1 = Vec::Zero(m);
    out.T1 = Vec::Zero(m);
    const Vec& one = mono_moments(Obs::One);
    const Vec& p = mono_moments(Obs::Price);
    const Vec& I = mono_moments(Obs::I);
    const Vec& pI = mono_moments(Obs::PI);
    for (int k = 0; k < m; ++k) {
        // <x^k A0> = <J(x^k) dA/dt>: the boundary at t_now vanishes because
        // A0(t_now) = 0, and A0' = -a with a in {I, 1, pI, p}.
        Vec jk = b.mono_integrate_J(Vec::Unit(m, k));
        out.V0[k] = jk.dot(I);
        out.T0[k] = jk.dot(one);
        out.V1[k] = jk.dot(pI);
        out.T1[k] = jk.dot(p);
    }
    return out;
}

Mat dmu_matrix(const Basis& b) {
    int n = b.n();
    Mat dm = Mat::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        BasisPoly qk{b.config().kind, Vec::Unit(n, k)};
        BasisPoly d = b.decay_weighted_D(qk);
        dm.col(k) = d.coef.head(n);
    }
    return dm;
}

Mat didt_operator(const Basis& b, const Mat& I_matrix, DidtBoundary boundary,
                  const Vec* psi0, double lambda_IH) {
    int n = b.n();
    if (I_matrix.rows() != n || I_matrix.cols() != n)
        throw std::invalid_argument("didt_operator: matrix dimension mismatch");
    Mat dm = dmu_matrix(b);
    double If = 0.0;
    switch (boundary) {
        case DidtBoundary::LambdaIH:
            If = lambda_IH;
            break;
        case DidtBoundary::ZeroDIPsi0: {
            if (!psi0 || psi0->size() != n)
                throw std::invalid_argument("didt_operator: boundary needs psi0");
            double px0 = b.q_at_x0_n().dot(*psi0);
            if (px0 * px0 == 0.0)
                throw std::runtime_error("didt_operator: psi0 vanishes at x0");
            If = 2.0 * psi0->dot(I_matrix * (dm * (*psi0))) / (px0 * px0);
            break;
        }
        case DidtBoundary::I0:
            if (!psi0 || psi0->size() != n)
                throw std::invalid_argument("didt_operator: boundary needs psi0");
            If = psi0->dot(I_matrix * (*psi0));
            break;
        case DidtBoundary::Zero:
            break;
    }
    Vec q0 = b.q_at_x0_n();
    return If * (q0 * q0.transpose()) - dm.transpose() * I_matrix - I_matrix * dm;
}

}  // namespace tickscalp
