// =============================================================================
// extract_series.cpp - pull plot-ready columns out of an indicator table
// =============================================================================
// Usage:
//   extract_series <indicator_table> <out.tsv> field[:shift] [field[:shift]...]
// Each selected field may carry an additive shift (handy for overlaying price
// curves); the shifts are recorded in a leading comment line of the output.
// =============================================================================
#include "tickscalp/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <string>
#include <vector>

using namespace tickscalp;

int main(int argc, char** argv) {
    if (argc < 4) {
        std::fprintf(stderr,
                     "usage: %s <indicator_table> <out.tsv> field[:shift]...\n",
                     argv[0]);
        return 1;
    }
    std::vector<PlotField> selection;
    for (int i = 3; i < argc; ++i) {
        std::string arg = argv[i];
        PlotField pf;
        std::size_t colon = arg.rfind(':');
        if (colon == std::string::npos) {
            pf.name = arg;
        } else {
            pf.name = arg.substr(0, colon);
            const char* first = arg.data() + colon + 1;
            const char* last = arg.data() + arg.size();
            auto [p, ec] = std::from_chars(first, last, pf.shift);
            if (ec != std::errc() || p != last) {
                std::fprintf(stderr, "bad shift in '%s'\n", arg.c_str());
                return 1;
            }
        }
        if (record_field_index(pf.name) < 0) {
            std::fprintf(stderr, "unknown field '%s'\n", pf.name.c_str());
            return 1;
        }
        selection.push_back(pf);
    }
    try {
        emit_plot_series(read_records(argv[1]), selection, argv[2]);
        return 0;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
