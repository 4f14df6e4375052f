// =============================================================================
// pipeline.hpp - batch driver: tick file -> per-tick indicator table
// =============================================================================
// Reads (time, execution price, shares traded) triples from a TSV file
// (gzip transparent), runs the per-tick spectral computation, and writes the
// indicator table with a header line. Prices in the output are relative to
// p_offset (the first tick's price) except P_last, which is the raw tick
// price; readers restore any price by adding p_offset.
// =============================================================================
#pragma once

#include "tickscalp/moments.hpp"
#include "tickscalp/operators.hpp"
#include "tickscalp/scalp.hpp"
#include "tickscalp/states.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace tickscalp {

// ---------------------------------------------------------------------------
// Output record: 33 tab-separated columns, names fixed by kRecordFieldNames.
// ---------------------------------------------------------------------------
enum RecordField {
    REC_T = 0,           // integer nanoseconds since midnight
    REC_shares,
    REC_P_last,          // raw tick price
    REC_p_offset,
    REC_pi_average,      // <pI>/<I>, offset space
    REC_pt_average,      // <p>/<1>, offset space
    REC_I_s0,
    REC_I_sL,
    REC_I_wL_squared,
    REC_I_sH,
    REC_I_wH_squared,
    REC_I_Gamma0,
    REC_p_0,             // volume price in the "now" state
    REC_pt_0,            // time price in the "now" state
    REC_dpdt_0,
    REC_p_IH,
    REC_pt_IH,
    REC_pV_IH,
    REC_pT_IH,
    REC_var1pI_IH,
    REC_var1pI_IH_00,
    REC_pmin_0_IH,
    REC_pmax_0_IH,
    REC_Skewness_0_IH,
    REC_ProbabilityCorrelation_0_IH,
    REC_scalp,
    REC_getFlFromRegularMoments,
    REC_getSumFdt,
    REC_dIH,
    REC_dp_IH,
    REC_F_IH,
    REC_DIR,
    REC_aDIR,
    kRecordFieldCount
};

extern const char* const kRecordFieldNames[kRecordFieldCount];
int record_field_index(const std::string& name);  // -1 when unknown

struct IndicatorRecord {
    // All columns as doubles; REC_T is an exactly-representable integer.
    double v[kRecordFieldCount] = {};
};

// ---------------------------------------------------------------------------
// Configuration (mirrors the reference CLI vocabulary).
// ---------------------------------------------------------------------------
struct PipelineConfig {
    std::string input_path;
    std::string output_path;
    int col_total = 0, col_time = 0, col_price = 0, col_shares = 0;
    MeasureConfig measure;  // kind, n, tau
    FlVariant variant;      // attribute kind + z weight
    bool z_given = false;   // explicit --z (else per-kind default)

    // "TOTAL:T:P:V", base-0 column indices. False on malformed spec.
    bool parse_cols(const std::string& spec);
    void validate() const;  // throws std::invalid_argument
};

bool parse_measure_token(const std::string& token, BasisKind& out);
const char* measure_token(BasisKind kind);

// Default z weight of a variant kind (the 2D family scales by the two-state
// price gap; the non-local series is unweighted).
ZKind default_z(FlKind kind);

// ---------------------------------------------------------------------------
// I/O
// ---------------------------------------------------------------------------
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// TSV (gzip transparent) -> ticks in file order. Throws FormatError with the
// line number on malformed input.
std::vector<TickRecord> read_ticks(const PipelineConfig& cfg);

// Tab-separated output: header line, shortest round-trip decimals, NaN
// literal for undefined values, LF endings.
void write_output(const std::vector<IndicatorRecord>& records,
                  const std::string& path);

// Read-back of write_output (bit-identical round trip).
std::vector<IndicatorRecord> read_records(const std::string& path);

// Narrow TSV for plotting: time plus selected fields, each optionally
// shifted; the shifts are recorded in a leading comment line.
struct PlotField {
    std::string name;
    double shift = 0.0;
};
void emit_plot_series(const std::vector<IndicatorRecord>& records,
                      const std::vector<PlotField>& selection,
                      const std::string& path);

// ---------------------------------------------------------------------------
// Per-tick processor. Call process_tick in tick order; each call emits one
// record. Solver hard failures quarantine the tick (undefined markers in the
// spectral fields) and processing continues.
// ---------------------------------------------------------------------------
class StreamProcessor {
  public:
    explicit StreamProcessor(const PipelineConfig& cfg);

    IndicatorRecord process_tick(const TickRecord& tick);
    const Basis& basis() const { return *basis_; }

  private:
    PipelineConfig cfg_;
    std::shared_ptr<const Basis> basis_;
    MomentSet ms_;
    ScalpAccumulator acc_;
    Mat dmu_;
    bool first_ = true;
    std::int64_t prev_t_ns_ = 0;
    double prev_price_ = 0.0;
};

// Convenience driver: read, process, write. Returns the record count.
std::size_t run_pipeline(const PipelineConfig& cfg);

}  // namespace tickscalp
