// =============================================================================
// main.cpp - batch indicator run: tick TSV in, per-tick indicator table out
// =============================================================================
// Exit codes: 0 success, 1 usage error, 2 input format error, 3 numeric
// failure while processing.
// =============================================================================
#include "tickscalp/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>

using namespace tickscalp;

int main(int argc, char** argv) {
    CLI::App app{
        "Streaming spectral indicators from (time, price, shares) ticks"};
    app.allow_extras(false);

    PipelineConfig cfg;
    std::string cols = "4:0:2:3";
    std::string measure = measure_token(BasisKind::ShiftedLegendre);
    std::string dp_to_use = fl_kind_token(FlKind::PROBCORR_2D_SCALP);
    std::string z;

    app.add_option("--musein_file", cfg.input_path,
                   "input tick file, TSV, .gz transparent")
        ->required();
    app.add_option("--musein_cols", cols,
                   "TOTAL:T:P:V base-0 column layout (default 4:0:2:3)");
    app.add_option("--museout_file", cfg.output_path, "output indicator table")
        ->required();
    app.add_option("--n", cfg.measure.n, "basis dimension (2..24)");
    app.add_option("--tau", cfg.measure.tau, "decay time, seconds");
    app.add_option("--measure", measure,
                   "ScalpedMaxIProjection{LegendreShifted,Laguerre,Monomials}");
    app.add_option("--dp_to_use", dp_to_use, "directional attribute variant");
    app.add_option("--z", z, "z weight of the 2D / non-local attributes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }

    if (!cfg.parse_cols(cols)) {
        std::fprintf(stderr, "bad --musein_cols '%s' (want TOTAL:T:P:V)\n",
                     cols.c_str());
        return 1;
    }
    if (!parse_measure_token(measure, cfg.measure.kind)) {
        std::fprintf(stderr, "unknown --measure '%s'\n", measure.c_str());
        return 1;
    }
    if (!parse_fl_kind(dp_to_use, cfg.variant.kind)) {
        std::fprintf(stderr, "unknown --dp_to_use '%s'\n", dp_to_use.c_str());
        return 1;
    }
    cfg.z_given = !z.empty();
    if (cfg.z_given && !parse_z_kind(z, cfg.variant.z)) {
        std::fprintf(stderr, "unknown --z '%s'\n", z.c_str());
        return 1;
    }
    if (!cfg.z_given) cfg.variant.z = default_z(cfg.variant.kind);

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    }

    try {
        std::size_t n = run_pipeline(cfg);
        std::fprintf(stderr, "%zu records -> %s\n", n,
                     cfg.output_path.c_str());
        return 0;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    }
}
