// =============================================================================
// pipeline.cpp - tick ingestion, per-tick indicator computation, table I/O
// =============================================================================
#include "tickscalp/pipeline.hpp"

#include <zlib.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace tickscalp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Record field table
// ---------------------------------------------------------------------------
const char* const kRecordFieldNames[kRecordFieldCount] = {
    "T",
    "shares",
    "P_last",
    "p_offset",
    "pi_average",
    "pt_average",
    "I.s0",
    "I.sL",
    "I.wL_squared",
    "I.sH",
    "I.wH_squared",
    "I.Gamma0",
    "p_0",
    "pt_0",
    "dpdt_0",
    "p_IH",
    "pt_IH",
    "pV_IH",
    "pT_IH",
    "var1pI_IH",
    "var1pI_IH_00",
    "pmin_0_IH",
    "pmax_0_IH",
    "Skewness_0_IH",
    "ProbabilityCorrelation_0_IH",
    "scalp",
    "getFlFromRegularMoments",
    "getSumFdt",
    "dIH",
    "dp_IH",
    "F_IH",
    "DIR",
    "aDIR",
};

int record_field_index(const std::string& name) {
    for (int i = 0; i < kRecordFieldCount; ++i)
        if (name == kRecordFieldNames[i]) return i;
    return -1;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------
bool PipelineConfig::parse_cols(const std::string& spec) {
    int vals[4];
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        std::size_t end = (i < 3) ? spec.find(':', pos) : spec.size();
        if (end == std::string::npos) return false;
        auto first = spec.data() + pos;
        auto last = spec.data() + end;
        auto [p, ec] = std::from_chars(first, last, vals[i]);
        if (ec != std::errc() || p != last || vals[i] < 0) return false;
        pos = end + 1;
    }
    col_total = vals[0];
    col_time = vals[1];
    col_price = vals[2];
    col_shares = vals[3];
    return true;
}

void PipelineConfig::validate() const {
    measure.validate();
    if (input_path.empty()) throw std::invalid_argument("no input file");
    if (output_path.empty()) throw std::invalid_argument("no output file");
    if (col_total < 1) throw std::invalid_argument("column total must be >= 1");
    if (col_time >= col_total || col_price >= col_total ||
        col_shares >= col_total)
        throw std::invalid_argument("column index beyond declared total");
    // z admissibility per attribute family.
    switch (variant.kind) {
        case FlKind::SKEWNESS_PL_2D:
        case FlKind::PROBCORR_2D_SCALP:
            if (variant.z != ZKind::unit && variant.z != ZKind::abs_dp_dt &&
                variant.z != ZKind::dV_dt && variant.z != ZKind::eigen_gap)
                throw std::invalid_argument(
                    "z weight not supported by the two-state attributes");
            break;
        case FlKind::NONLOCAL_PIH:
            if (variant.z != ZKind::unit && variant.z != ZKind::scalp_dV &&
                variant.z != ZKind::scalp_dLambda)
                throw std::invalid_argument(
                    "z weight not supported by the non-local attribute");
            break;
        default:
            if (z_given)
                throw std::invalid_argument(
                    "the selected attribute takes no z weight");
            break;
    }
}

namespace {
const struct {
    const char* token;
    BasisKind kind;
} kMeasureTokens[] = {
    {"ScalpedMaxIProjectionLegendreShifted", BasisKind::ShiftedLegendre},
    {"ScalpedMaxIProjectionLaguerre", BasisKind::Laguerre},
    {"ScalpedMaxIProjectionMonomials", BasisKind::Monomials},
};
}  // namespace

bool parse_measure_token(const std::string& token, BasisKind& out) {
    for (const auto& m : kMeasureTokens)
        if (token == m.token) {
            out = m.kind;
            return true;
        }
    return false;
}

const char* measure_token(BasisKind kind) {
    for (const auto& m : kMeasureTokens)
        if (m.kind == kind) return m.token;
    return "?";
}

ZKind default_z(FlKind kind) {
    switch (kind) {
        case FlKind::SKEWNESS_PL_2D:
        case FlKind::PROBCORR_2D_SCALP:
            return ZKind::eigen_gap;
        default:
            return ZKind::unit;
    }
}

// ---------------------------------------------------------------------------
// Input
// ---------------------------------------------------------------------------
namespace {

// Whole-file read through zlib; plain files pass through unchanged.
std::string slurp(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw FormatError("cannot open input file: " + path);
    std::string out;
    char buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, got);
    bool bad = got < 0;
    gzclose(f);
    if (bad) throw FormatError("decompression error in " + path);
    return out;
}

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
    throw FormatError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<TickRecord> read_ticks(const PipelineConfig& cfg) {
    const std::string data = slurp(cfg.input_path);
    std::vector<TickRecord> ticks;
    std::vector<std::string_view> cols;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < data.size()) {
        std::size_t eol = data.find('\n', pos);
        if (eol == std::string::npos) eol = data.size();
        std::string_view line(data.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        cols.clear();
        std::size_t c = 0;
        while (true) {
            std::size_t tab = line.find('\t', c);
            if (tab == std::string_view::npos) {
                cols.push_back(line.substr(c));
                break;
            }
            cols.push_back(line.substr(c, tab - c));
            c = tab + 1;
        }
        if (static_cast<int>(cols.size()) < cfg.col_total)
            line_error(line_no, "expected " + std::to_string(cfg.col_total) +
                                    " columns, got " +
                                    std::to_string(cols.size()));

        TickRecord tick;
        {
            auto sv = cols[cfg.col_time];
            auto [p, ec] =
                std::from_chars(sv.data(), sv.data() + sv.size(), tick.t_ns);
            if (ec != std::errc() || p != sv.data() + sv.size())
                line_error(line_no, "bad time field");
        }
        {
            auto sv = cols[cfg.col_price];
            auto [p, ec] =
                std::from_chars(sv.data(), sv.data() + sv.size(), tick.price);
            if (ec != std::errc() || p != sv.data() + sv.size() ||
                !std::isfinite(tick.price) || tick.price <= 0.0)
                line_error(line_no, "bad price field");
        }
        {
            auto sv = cols[cfg.col_shares];
            auto [p, ec] =
                std::from_chars(sv.data(), sv.data() + sv.size(), tick.shares);
            if (ec != std::errc() || p != sv.data() + sv.size() ||
                !std::isfinite(tick.shares) || tick.shares < 0.0)
                line_error(line_no, "bad shares field");
        }
        if (!ticks.empty() && tick.t_ns < ticks.back().t_ns)
            line_error(line_no, "time goes backwards");
        ticks.push_back(tick);
    }
    return ticks;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------
namespace {

void append_double(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "NaN";
        return;
    }
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p - buf);
}

void append_time(std::string& out, double v) {
    char buf[32];
    auto [p, ec] =
        std::to_chars(buf, buf + sizeof buf, static_cast<std::int64_t>(v));
    out.append(buf, p - buf);
}

}  // namespace

void write_output(const std::vector<IndicatorRecord>& records,
                  const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    std::string buf;
    for (int i = 0; i < kRecordFieldCount; ++i) {
        if (i) buf += '\t';
        buf += kRecordFieldNames[i];
    }
    buf += '\n';
    for (const auto& r : records) {
        append_time(buf, r.v[REC_T]);
        for (int i = 1; i < kRecordFieldCount; ++i) {
            buf += '\t';
            append_double(buf, r.v[i]);
        }
        buf += '\n';
        if (buf.size() > (1u << 20)) {
            f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write error on " + path);
}

std::vector<IndicatorRecord> read_records(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open file: " + path);
    std::string line;
    if (!std::getline(f, line)) throw FormatError("empty indicator file");
    {
        std::string expect;
        for (int i = 0; i < kRecordFieldCount; ++i) {
            if (i) expect += '\t';
            expect += kRecordFieldNames[i];
        }
        if (line != expect) throw FormatError("unexpected header line");
    }
    std::vector<IndicatorRecord> records;
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        IndicatorRecord r;
        std::size_t pos = 0;
        for (int i = 0; i < kRecordFieldCount; ++i) {
            std::size_t tab = line.find('\t', pos);
            std::size_t end = (tab == std::string::npos) ? line.size() : tab;
            std::string_view sv(line.data() + pos, end - pos);
            if (sv == "NaN") {
                r.v[i] = kNaN;
            } else {
                auto [p, ec] =
                    std::from_chars(sv.data(), sv.data() + sv.size(), r.v[i]);
                if (ec != std::errc() || p != sv.data() + sv.size())
                    line_error(line_no, "bad numeric field " +
                                            std::string(kRecordFieldNames[i]));
            }
            if (i + 1 < kRecordFieldCount) {
                if (tab == std::string::npos)
                    line_error(line_no, "too few columns");
                pos = tab + 1;
            } else if (tab != std::string::npos) {
                line_error(line_no, "too many columns");
            }
        }
        records.push_back(r);
    }
    return records;
}

void emit_plot_series(const std::vector<IndicatorRecord>& records,
                      const std::vector<PlotField>& selection,
                      const std::string& path) {
    std::vector<int> idx;
    for (const auto& s : selection) {
        int i = record_field_index(s.name);
        if (i < 0) throw std::invalid_argument("unknown field: " + s.name);
        idx.push_back(i);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    std::string buf = "# shifts:";
    for (std::size_t k = 0; k < selection.size(); ++k) {
        buf += ' ';
        buf += selection[k].name;
        buf += '=';
        append_double(buf, selection[k].shift);
    }
    buf += "\nT";
    for (const auto& s : selection) {
        buf += '\t';
        buf += s.name;
    }
    buf += '\n';
    for (const auto& r : records) {
        append_time(buf, r.v[REC_T]);
        for (std::size_t k = 0; k < selection.size(); ++k) {
            buf += '\t';
            append_double(buf, r.v[idx[k]] + selection[k].shift);
        }
        buf += '\n';
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write error on " + path);
}

// ---------------------------------------------------------------------------
// StreamProcessor
// ---------------------------------------------------------------------------
StreamProcessor::StreamProcessor(const PipelineConfig& cfg)
    : cfg_(cfg),
      basis_(std::make_shared<Basis>(cfg.measure)),
      ms_(basis_),
      acc_(basis_),
      dmu_(dmu_matrix(*basis_)) {}

IndicatorRecord StreamProcessor::process_tick(const TickRecord& tick) {
    const Basis& b = *basis_;
    IndicatorRecord rec;

    const double dt = first_ ? 0.0 : (tick.t_ns - prev_t_ns_) * 1e-9;
    const double dp = first_ ? 0.0 : tick.price - prev_price_;

    ms_.ingest_tick(tick);

    rec.v[REC_T] = static_cast<double>(tick.t_ns);
    rec.v[REC_shares] = tick.shares;
    rec.v[REC_P_last] = ms_.last_price();
    rec.v[REC_p_offset] = ms_.p_offset();

    const Vec& m1 = ms_.mono_moments(Obs::One);
    const Vec& mI = ms_.mono_moments(Obs::I);
    const Vec& mp = ms_.mono_moments(Obs::Price);
    const Vec& mpI = ms_.mono_moments(Obs::PI);
    rec.v[REC_pi_average] = (mI[0] > 0.0) ? mpI[0] / mI[0] : kNaN;
    rec.v[REC_pt_average] = (m1[0] > 0.0) ? mp[0] / m1[0] : kNaN;

    for (int i = REC_I_s0; i <= REC_aDIR; ++i) rec.v[i] = kNaN;

    try {
        const Mat G = build_operator(b, m1);
        const Mat I = build_operator(b, mI);
        const Mat p = build_operator(b, mp);
        const Mat pI = build_operator(b, mpI);
        const Mat p2I = build_operator(b, ms_.mono_moments(Obs::P2I));
        const Mat p3I = build_operator(b, ms_.mono_moments(Obs::P3I));
        const Mat dpdt = build_operator(b, ms_.mono_moments(Obs::DpDt));
        const AggregatedMoments am = ms_.aggregated_moments();
        const Mat V0 = build_operator(b, am.V0);
        const Mat T0 = build_operator(b, am.T0);
        const Mat V1 = build_operator(b, am.V1);
        const Mat T1 = build_operator(b, am.T1);

        const Vec psi0 = psi_now(b, G);
        const Spectrum spec = solve_gev(b, I, G);
        const ExecutionFlowSummary sum = flow_summary(spec, psi0, G, I);
        const Vec psiIH = max_flow_state(spec, psi0);
        const double S = scalp_function(sum);
        const double lambda_IH = psiIH.dot(I * psiIH);

        rec.v[REC_I_s0] = sum.s0;
        rec.v[REC_I_sL] = sum.sL;
        rec.v[REC_I_wL_squared] = sum.wL * sum.wL;
        rec.v[REC_I_sH] = sum.sH;
        rec.v[REC_I_wH_squared] = sum.flat ? 1.0 : sum.wH * sum.wH;
        rec.v[REC_I_Gamma0] = sum.Gamma0;
        rec.v[REC_scalp] = S;

        const StatePrices sp0 =
            state_prices(psi0, G, p, I, pI, V0, V1, T0, T1);
        rec.v[REC_p_0] = sp0.p_v;
        rec.v[REC_pt_0] = sp0.p_t;
        rec.v[REC_dpdt_0] = psi0.dot(dpdt * psi0);

        const StatePrices spIH =
            state_prices(psiIH, G, p, I, pI, V0, V1, T0, T1);
        rec.v[REC_p_IH] = spIH.p_v;
        rec.v[REC_pt_IH] = spIH.p_t;
        rec.v[REC_pV_IH] = spIH.p_V;
        rec.v[REC_pT_IH] = spIH.p_T;

        // Evaluation context for the attribute family.
        FlContext ctx;
        ctx.basis = &b;
        ctx.S = S;
        ctx.dt = dt;
        ctx.dp = dp;
        ctx.dV = tick.shares;
        ctx.p_last_off = ms_.last_price() - ms_.p_offset();
        ctx.psi0 = psi0;
        ctx.psiIH = psiIH;
        ctx.G = &G;
        ctx.I = &I;
        ctx.pI = &pI;
        ctx.dpdt = &dpdt;
        ctx.Dmu = &dmu_;
        ctx.psi0_x0 = b.q_at_x0_n().dot(psi0);
        ctx.wH = sum.flat ? 1.0 : sum.wH;
        ctx.pv0 = sp0.p_v;
        ctx.pt0 = sp0.p_t;
        ctx.p_IH = spIH.p_v;
        ctx.lambda_IH = lambda_IH;

        // Two-state price pencil over {psi0, psiIH}.
        {
            Mat A2(2, 2), B2(2, 2);
            const Vec ppsi0 = pI * psi0, ppsiIH = pI * psiIH;
            const Vec ipsi0 = I * psi0, ipsiIH = I * psiIH;
            A2 << psi0.dot(ppsi0), psi0.dot(ppsiIH), psiIH.dot(ppsi0),
                psiIH.dot(ppsiIH);
            B2 << psi0.dot(ipsi0), psi0.dot(ipsiIH), psiIH.dot(ipsi0),
                psiIH.dot(ipsiIH);
            ctx.two = two_state_pencil(A2, B2, ctx.wH * ctx.wH);
            const double psiIH_x0 = b.q_at_x0_n().dot(psiIH);
            ctx.phi0_x0 = ctx.two.phi0[0] * ctx.psi0_x0 +
                          ctx.two.phi0[1] * psiIH_x0;
            ctx.phi1_x0 = ctx.two.phi1[0] * ctx.psi0_x0 +
                          ctx.two.phi1[1] * psiIH_x0;
        }
        if (!ctx.two.degenerate) {
            rec.v[REC_pmin_0_IH] = ctx.two.lambda0;
            rec.v[REC_pmax_0_IH] = ctx.two.lambda1;
            rec.v[REC_Skewness_0_IH] =
                (2.0 * ctx.p_last_off - ctx.two.lambda0 - ctx.two.lambda1) /
                (ctx.two.lambda1 - ctx.two.lambda0);
            const double q0 = ctx.phi0_x0 * ctx.phi0_x0;
            const double q1 = ctx.phi1_x0 * ctx.phi1_x0;
            rec.v[REC_ProbabilityCorrelation_0_IH] =
                (q0 + q1 > 0.0) ? (q1 - q0) / (q1 + q0) : kNaN;
        }

        // Two-point flow quadrature of the price in the "now" state.
        ctx.skew = skewness_quadrature(psi0.dot(I * psi0), psi0.dot(pI * psi0),
                                       psi0.dot(p2I * psi0),
                                       psi0.dot(p3I * psi0));

        // Non-local memory.
        ctx.has_prev = acc_.prev.valid;
        ctx.dIH = ctx.has_prev ? lambda_IH - acc_.prev.lambda_IH : 0.0;
        ctx.dp_IH = ctx.has_prev ? ctx.p_IH - acc_.prev.p_IH : 0.0;
        rec.v[REC_dIH] = ctx.dIH;
        rec.v[REC_dp_IH] = ctx.dp_IH;

        rec.v[REC_var1pI_IH] =
            compute_Fl({FlKind::VAR_PI_IH, ZKind::unit}, ctx).Fl;
        rec.v[REC_var1pI_IH_00] =
            compute_Fl({FlKind::VAR_PI_IH_00, ZKind::unit}, ctx).Fl;

        const FlResult fl = compute_Fl(cfg_.variant, ctx);
        rec.v[REC_getFlFromRegularMoments] = fl.getFl;
        acc_.accumulate(tick.t_ns, fl.Fdt);
        rec.v[REC_getSumFdt] = acc_.sum_Fdt();

        const Directional dir = directional(b, acc_, psiIH);
        rec.v[REC_DIR] = dir.DIR;
        rec.v[REC_aDIR] = dir.aDIR;
        rec.v[REC_F_IH] =
            psiIH.dot(build_operator(b, acc_.f_moments()) * psiIH);

        acc_.prev.valid = true;
        acc_.prev.lambda_IH = lambda_IH;
        acc_.prev.p_IH = std::isfinite(ctx.p_IH) ? ctx.p_IH : 0.0;
    } catch (const std::runtime_error&) {
        // Numerical hard failure on this tick: keep the undefined markers,
        // carry the sums forward unchanged, drop the non-local memory.
        acc_.accumulate(tick.t_ns, 0.0);
        rec.v[REC_getSumFdt] = acc_.sum_Fdt();
        acc_.prev.valid = false;
    }

    first_ = false;
    prev_t_ns_ = tick.t_ns;
    prev_price_ = tick.price;
    return rec;
}

std::size_t run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    const std::vector<TickRecord> ticks = read_ticks(cfg);
    StreamProcessor proc(cfg);
    std::vector<IndicatorRecord> records;
    records.reserve(ticks.size());
    for (const auto& t : ticks) records.push_back(proc.process_tick(t));
    write_output(records, cfg.output_path);
    return records.size();
}

}  // namespace tickscalp
