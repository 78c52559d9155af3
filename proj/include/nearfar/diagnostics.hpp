#ifndef NEARFAR_DIAGNOSTICS_HPP
#define NEARFAR_DIAGNOSTICS_HPP

#include <string>
#include <vector>

#include "nearfar/instrument.hpp"
#include "nearfar/matching.hpp"

namespace nearfar {

struct BalanceRow {
    std::string variable;
    double mean_encouraged = 0.0;
    double mean_unencouraged = 0.0;
    double std_diff = 0.0;       // |diff| / pre-match pooled SD
    bool infinite = false;       // zero pre-match SD with unequal means
    bool diagnostic = false;     // Guilty / Bail Set / IV rows: not minimized
};

// Post-match standardized differences between the encouraged and
// unencouraged groups. The denominator is the SD of the variable in the
// full pre-match analysis sample.
std::vector<BalanceRow> balance_table(const std::vector<MatchResult>& results,
                                      const AnalysisSet& analysis,
                                      const InstrumentTable& instrument);

struct GeneralizabilityRow {
    std::string variable;
    double mean_matched = 0.0;
    double mean_full = 0.0;
    double std_diff = 0.0;
    std::vector<double> deciles_matched;  // 10%..90%
    std::vector<double> deciles_full;
    bool flagged = false;  // std_diff > 0.1
};

std::vector<GeneralizabilityRow> generalizability_report(
    const std::vector<MatchResult>& results, const AnalysisSet& analysis);

void render_balance(std::ostream& out, const std::vector<BalanceRow>& rows);
void export_balance(std::ostream& out, const std::vector<BalanceRow>& rows);
void render_generalizability(std::ostream& out,
                             const std::vector<GeneralizabilityRow>& rows);

}  // namespace nearfar

#endif
