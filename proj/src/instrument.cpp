#include "nearfar/instrument.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <tuple>

namespace nearfar {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

InstrumentTable compute_severity(const AnalysisSet& analysis) {
    using JudgeCell = std::tuple<std::string, std::string, std::string>;  // judge, region, charge
    using RegionCell = std::pair<std::string, std::string>;              // region, charge

    std::map<JudgeCell, std::pair<std::size_t, double>> judge_cells;   // count, sum of T'
    std::map<RegionCell, std::pair<std::size_t, double>> region_cells;

    for (const auto& r : analysis.records) {
        double t_prime = 1.0 - r.bail_set;
        auto& jc = judge_cells[{r.judge_id, r.region, r.top_charge}];
        jc.first += 1;
        jc.second += t_prime;
        auto& rc = region_cells[{r.region, r.top_charge}];
        rc.first += 1;
        rc.second += t_prime;
    }

    InstrumentTable table;
    for (const auto& r : analysis.records) {
        double t_prime = 1.0 - r.bail_set;
        const auto& jc = judge_cells.at({r.judge_id, r.region, r.top_charge});
        const auto& rc = region_cells.at({r.region, r.top_charge});
        InstrumentEntry e;
        e.n_jbc = jc.first;
        e.n_bc = rc.first;
        if (jc.first < 2 || rc.first < 2) {
            e.flagged = true;
        } else {
            double judge_term = (jc.second - t_prime) / static_cast<double>(jc.first - 1);
            double region_term = (rc.second - t_prime) / static_cast<double>(rc.first - 1);
            e.severity = judge_term - region_term;
        }
        table.entries.emplace(r.case_id, e);
    }
    return table;
}

SeveritySummary severity_summary(const InstrumentTable& table,
                                 const AnalysisSet& analysis) {
    SeveritySummary s;
    s.total = table.entries.size();
    std::map<std::string, std::vector<double>> by_region;
    for (const auto& r : analysis.records) {
        auto it = table.entries.find(r.case_id);
        if (it == table.entries.end()) continue;
        if (it->second.flagged) {
            ++s.flagged;
            continue;
        }
        by_region[r.region].push_back(it->second.severity);
    }
    for (auto& [region, vals] : by_region) {
        std::sort(vals.begin(), vals.end());
        SeveritySummary::RegionQuantiles rq;
        rq.region = region;
        rq.n = vals.size();
        rq.min = quantile(vals, 0.0);
        rq.q25 = quantile(vals, 0.25);
        rq.median = quantile(vals, 0.5);
        rq.q75 = quantile(vals, 0.75);
        rq.max = quantile(vals, 1.0);
        s.per_region.push_back(rq);
    }
    return s;
}

void export_instrument(std::ostream& out, const InstrumentTable& table) {
    out << "case_id,severity,n_jbc,n_bc,flagged\n";
    out.precision(17);
    for (const auto& [id, e] : table.entries) {
        out << id << ',' << e.severity << ',' << e.n_jbc << ',' << e.n_bc << ','
            << (e.flagged ? 1 : 0) << '\n';
    }
}

}  // namespace nearfar
