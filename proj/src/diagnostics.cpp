#include "nearfar/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>

namespace nearfar {

namespace {

using Extractor = std::function<double(const CaseRecord&)>;

struct Variable {
    std::string name;
    Extractor get;
    bool diagnostic;
};

// Table-1 row order: outcome, treatment and IV first (diagnostic rows,
// not meant to be minimized), then the matching covariates.
std::vector<Variable> table_variables(const InstrumentTable& instrument) {
    return {
        {"Guilty", [](const CaseRecord& r) { return static_cast<double>(r.guilty.value_or(0)); }, true},
        {"Bail Set", [](const CaseRecord& r) { return static_cast<double>(r.bail_set); }, true},
        {"IV", [&instrument](const CaseRecord& r) { return instrument.at(r.case_id).severity; }, true},
        {"Age", [](const CaseRecord& r) { return r.age; }, false},
        {"White", [](const CaseRecord& r) { return static_cast<double>(r.race_white); }, false},
        {"Black", [](const CaseRecord& r) { return static_cast<double>(r.race_black); }, false},
        {"Non-Hispanic", [](const CaseRecord& r) { return static_cast<double>(r.non_hispanic); }, false},
        {"Male", [](const CaseRecord& r) { return r.gender == "male" ? 1.0 : 0.0; }, false},
        {"Prior Records 2014", [](const CaseRecord& r) { return static_cast<double>(r.prior_counts_2014); }, false},
        {"Wkly Income", [](const CaseRecord& r) { return r.weekly_income; }, false},
        {"Any Income", [](const CaseRecord& r) { return static_cast<double>(r.any_income); }, false},
        {"Employer", [](const CaseRecord& r) { return static_cast<double>(r.has_employer); }, false},
        {"Phone Number", [](const CaseRecord& r) { return static_cast<double>(r.has_phone); }, false},
        {"Address", [](const CaseRecord& r) { return static_cast<double>(r.has_address); }, false},
    };
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<BalanceRow> balance_table(const std::vector<MatchResult>& results,
                                      const AnalysisSet& analysis,
                                      const InstrumentTable& instrument) {
    auto vars = table_variables(instrument);
    std::vector<BalanceRow> rows;
    for (const auto& var : vars) {
        std::vector<double> enc, unenc, pre;
        for (const auto& r : analysis.records) pre.push_back(var.get(r));
        for (const auto& mr : results) {
            for (const auto& p : mr.pairs) {
                enc.push_back(var.get(analysis.records[p.encouraged]));
                unenc.push_back(var.get(analysis.records[p.unencouraged]));
            }
        }
        BalanceRow row;
        row.variable = var.name;
        row.diagnostic = var.diagnostic;
        row.mean_encouraged = mean(enc);
        row.mean_unencouraged = mean(unenc);
        double sd = sample_sd(pre);
        double diff = std::fabs(row.mean_encouraged - row.mean_unencouraged);
        if (sd == 0.0) {
            if (diff == 0.0) {
                row.std_diff = 0.0;
            } else {
                row.infinite = true;
                row.std_diff = std::numeric_limits<double>::infinity();
            }
        } else {
            row.std_diff = diff / sd;
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<GeneralizabilityRow> generalizability_report(
    const std::vector<MatchResult>& results, const AnalysisSet& analysis) {
    std::vector<std::size_t> matched_indices;
    for (const auto& mr : results) {
        for (const auto& p : mr.pairs) {
            matched_indices.push_back(p.encouraged);
            matched_indices.push_back(p.unencouraged);
        }
    }
    std::sort(matched_indices.begin(), matched_indices.end());

    std::vector<GeneralizabilityRow> rows;
    for (std::size_t c = 0; c < kMatchingCovariates.size(); ++c) {
        std::vector<double> full, matched;
        for (const auto& r : analysis.records) full.push_back(matching_covariates(r)[c]);
        for (std::size_t idx : matched_indices)
            matched.push_back(matching_covariates(analysis.records[idx])[c]);

        GeneralizabilityRow row;
        row.variable = kMatchingCovariates[c];
        row.mean_full = mean(full);
        row.mean_matched = mean(matched);
        double sd = sample_sd(full);
        double diff = std::fabs(row.mean_matched - row.mean_full);
        row.std_diff = sd > 0 ? diff / sd : (diff > 0 ? std::numeric_limits<double>::infinity() : 0.0);
        row.flagged = row.std_diff > 0.1;

        auto sorted_full = full;
        auto sorted_matched = matched;
        std::sort(sorted_full.begin(), sorted_full.end());
        std::sort(sorted_matched.begin(), sorted_matched.end());
        for (int d = 1; d <= 9; ++d) {
            row.deciles_full.push_back(quantile_sorted(sorted_full, d / 10.0));
            row.deciles_matched.push_back(quantile_sorted(sorted_matched, d / 10.0));
        }
        rows.push_back(row);
    }
    return rows;
}

void render_balance(std::ostream& out, const std::vector<BalanceRow>& rows) {
    out << std::left << std::setw(22) << "" << std::setw(14) << "Encouraged"
        << std::setw(14) << "Unencouraged"
        << "St Dif\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(22) << r.variable << std::setw(14) << std::fixed
            << std::setprecision(2) << r.mean_encouraged << std::setw(14)
            << r.mean_unencouraged;
        if (r.infinite)
            out << "+Inf";
        else
            out << r.std_diff;
        out << "\n";
        out.unsetf(std::ios::fixed);
    }
}

void export_balance(std::ostream& out, const std::vector<BalanceRow>& rows) {
    out << "variable,mean_encouraged,mean_unencouraged,std_diff,diagnostic\n";
    out.precision(17);
    for (const auto& r : rows) {
        out << r.variable << ',' << r.mean_encouraged << ',' << r.mean_unencouraged
            << ',';
        if (r.infinite)
            out << "+Inf";
        else
            out << r.std_diff;
        out << ',' << (r.diagnostic ? 1 : 0) << '\n';
    }
}

void render_generalizability(std::ostream& out,
                             const std::vector<GeneralizabilityRow>& rows) {
    out << "Matched sample vs full analysis sample\n";
    for (const auto& r : rows) {
        out << "\n" << r.variable << (r.flagged ? "  [FLAGGED: std_diff > 0.1]" : "")
            << "\n";
        out << "  mean matched: " << r.mean_matched << "  mean full: " << r.mean_full
            << "  std_diff: " << r.std_diff << "\n";
        out << "  deciles matched:";
        for (double d : r.deciles_matched) out << ' ' << d;
        out << "\n  deciles full:   ";
        for (double d : r.deciles_full) out << ' ' << d;
        out << "\n";
    }
}

}  // namespace nearfar
