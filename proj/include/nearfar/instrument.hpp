#ifndef NEARFAR_INSTRUMENT_HPP
#define NEARFAR_INSTRUMENT_HPP

#include <map>
#include <string>
#include <vector>

#include "nearfar/data_model.hpp"

namespace nearfar {

// Leave-one-out judge severity per case. Higher severity = more lenient
// judge relative to the region. The encouraged-toward-bail member of a
// matched pair is always the one with LOWER severity; downstream code uses
// explicit roles, never the raw sign.
struct InstrumentEntry {
    double severity = 0.0;
    std::size_t n_jbc = 0;   // cases with this (judge, region, charge)
    std::size_t n_bc = 0;    // cases with this (region, charge)
    bool flagged = false;    // degenerate cell, severity undefined
};

struct InstrumentTable {
    std::map<std::string, InstrumentEntry> entries;  // case_id -> entry

    const InstrumentEntry& at(const std::string& case_id) const {
        return entries.at(case_id);
    }
    std::size_t flagged_count() const {
        std::size_t n = 0;
        for (const auto& [id, e] : entries) n += e.flagged;
        return n;
    }
};

InstrumentTable compute_severity(const AnalysisSet& analysis);

struct SeveritySummary {
    struct RegionQuantiles {
        std::string region;
        std::size_t n = 0;
        double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
    };
    std::vector<RegionQuantiles> per_region;
    std::size_t flagged = 0;
    std::size_t total = 0;
};

SeveritySummary severity_summary(const InstrumentTable& table,
                                 const AnalysisSet& analysis);

void export_instrument(std::ostream& out, const InstrumentTable& table);

}  // namespace nearfar

#endif
