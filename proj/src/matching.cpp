#include "nearfar/matching.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "nearfar/blossom.hpp"

namespace nearfar {

const std::vector<std::string> kMatchingCovariates = {
    "age",          "race_white",   "race_black", "non_hispanic",
    "prior_counts_2014", "weekly_income", "any_income", "has_employer",
    "has_phone",    "has_address",  "crime_type"};

std::vector<double> matching_covariates(const CaseRecord& r) {
    return {r.age,
            static_cast<double>(r.race_white),
            static_cast<double>(r.race_black),
            static_cast<double>(r.non_hispanic),
            static_cast<double>(r.prior_counts_2014),
            r.weekly_income,
            static_cast<double>(r.any_income),
            static_cast<double>(r.has_employer),
            static_cast<double>(r.has_phone),
            static_cast<double>(r.has_address),
            r.crime_type == CrimeType::Felony ? 1.0 : 0.0};
}

std::vector<Stratum> stratify(const AnalysisSet& analysis,
                              const InstrumentTable& instrument) {
    std::map<StratumKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < analysis.records.size(); ++i) {
        const auto& r = analysis.records[i];
        const auto& entry = instrument.at(r.case_id);
        if (entry.flagged) continue;  // no within-cell comparison exists
        groups[{r.top_charge, r.region, r.gender}].push_back(i);
    }
    std::vector<Stratum> strata;
    strata.reserve(groups.size());
    for (auto& [key, members] : groups)
        strata.push_back({key, std::move(members)});
    return strata;
}

MatchProblem build_problem(const Stratum& stratum, const AnalysisSet& analysis,
                           const InstrumentTable& instrument) {
    MatchProblem p;
    p.key = stratum.key;
    p.case_indices = stratum.members;
    for (std::size_t idx : stratum.members) {
        const auto& r = analysis.records[idx];
        p.covariates.push_back(matching_covariates(r));
        p.severities.push_back(instrument.at(r.case_id).severity);
    }
    return p;
}

namespace {

// Average ranks (1-based), ties share the mean rank.
std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

std::vector<std::vector<double>> covariate_distance_matrix(
    const MatchProblem& problem, std::vector<std::string>* dropped_columns) {
    const std::size_t n = problem.covariates.size();
    assert(n >= 2);
    const std::size_t k_all = problem.covariates.front().size();

    // Rank-transform each column; drop columns with zero variance (already
    // exactly balanced within the stratum).
    std::vector<std::vector<double>> rank_cols;
    for (std::size_t c = 0; c < k_all; ++c) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = problem.covariates[i][c];
        bool constant = std::all_of(col.begin(), col.end(),
                                    [&](double v) { return v == col.front(); });
        if (constant) {
            if (dropped_columns && c < kMatchingCovariates.size())
                dropped_columns->push_back(kMatchingCovariates[c]);
            continue;
        }
        rank_cols.push_back(average_ranks(col));
    }

    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    if (rank_cols.empty()) return dist;

    const std::size_t k = rank_cols.size();
    Eigen::MatrixXd R(n, k);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < n; ++i) R(i, c) = rank_cols[c][i];

    Eigen::RowVectorXd mean = R.colwise().mean();
    Eigen::MatrixXd centered = R.rowwise() - mean;
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(cov);
    Eigen::MatrixXd cov_inv = cod.pseudoInverse();

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            Eigen::VectorXd d = (R.row(i) - R.row(j)).transpose();
            double q = d.dot(cov_inv * d);
            double v = std::sqrt(std::max(0.0, q));
            dist[i][j] = v;
            dist[j][i] = v;
        }
    }
    return dist;
}

std::vector<std::vector<double>> nearfar_adjusted_distance(
    const std::vector<std::vector<double>>& covariate_distances,
    const std::vector<double>& severities, double caliper, double penalty) {
    const std::size_t n = covariate_distances.size();
    assert(severities.size() == n);
    auto adjusted = covariate_distances;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && std::fabs(severities[i] - severities[j]) < caliper)
                adjusted[i][j] += penalty;
        }
    }
    return adjusted;
}

std::vector<int> optimal_nonbipartite_match(
    const std::vector<std::vector<double>>& adjusted, int sink_count,
    double sink_sink_weight) {
    const int n_real = static_cast<int>(adjusted.size());
    if ((n_real + sink_count) % 2 != 0) ++sink_count;  // perfect matching needs even order
    const int n = n_real + sink_count;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n_real; ++i)
        for (int j = 0; j < n_real; ++j) cost[i][j] = adjusted[i][j];
    for (int i = n_real; i < n; ++i)
        for (int j = n_real; j < n; ++j)
            if (i != j) cost[i][j] = sink_sink_weight;
    auto mate = min_cost_perfect_matching(cost);
    std::vector<int> result(n_real, -1);
    for (int v = 0; v < n_real; ++v)
        result[v] = mate[v] < n_real ? mate[v] : -1;  // -1: dropped to a sink
    return result;
}

std::optional<double> first_stage_F(
    const std::vector<std::pair<int, int>>& treatments) {
    const std::size_t I = treatments.size();
    if (I < 2) return std::nullopt;
    double m1 = 0, m2 = 0;
    for (const auto& [t1, t2] : treatments) {
        m1 += t1;
        m2 += t2;
    }
    m1 /= static_cast<double>(I);
    m2 /= static_cast<double>(I);
    double ss = 0;
    for (const auto& [t1, t2] : treatments) {
        ss += (t1 - m1) * (t1 - m1);
        ss += (t2 - m2) * (t2 - m2);
    }
    if (m1 == m2) return 0.0;
    double pooled_var = ss / static_cast<double>(2 * I - 2);
    if (pooled_var == 0.0) return std::numeric_limits<double>::infinity();
    double t = (m1 - m2) / std::sqrt(pooled_var * (2.0 / static_cast<double>(I)));
    return t * t;
}

MatchResult match_stratum(const MatchProblem& problem, const AnalysisSet& analysis,
                          const std::vector<std::vector<double>>* precomputed) {
    MatchResult result;
    result.key = problem.key;
    const std::size_t n = problem.case_indices.size();
    if (n < 2) {
        result.dropped = problem.case_indices;
        return result;
    }

    std::vector<std::vector<double>> dist_local;
    const std::vector<std::vector<double>>* dist = precomputed;
    if (!dist) {
        dist_local = covariate_distance_matrix(problem, &result.dropped_covariate_columns);
        dist = &dist_local;
    }

    double max_dist = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            max_dist = std::max(max_dist, (*dist)[i][j]);
    double penalty = problem.penalty > 0 ? problem.penalty
                                         : (max_dist > 0 ? 10.0 * max_dist : 1.0);

    auto adjusted =
        nearfar_adjusted_distance(*dist, problem.severities, problem.caliper, penalty);

    int sink_count = static_cast<int>(
        std::floor(problem.sink_fraction * static_cast<double>(n)));
    auto mate = optimal_nonbipartite_match(adjusted, sink_count, 100.0 * penalty);

    for (std::size_t i = 0; i < n; ++i) {
        int j = mate[i];
        if (j < 0) {
            result.dropped.push_back(problem.case_indices[i]);
            continue;
        }
        if (static_cast<std::size_t>(j) < i) continue;  // pair already emitted
        std::size_t a = i, b = static_cast<std::size_t>(j);
        double sa = problem.severities[a], sb = problem.severities[b];
        // Encouraged toward bail = lower severity (stricter judge); ties
        // break by case_id.
        bool a_encouraged =
            sa < sb || (sa == sb && analysis.records[problem.case_indices[a]].case_id <
                                        analysis.records[problem.case_indices[b]].case_id);
        std::size_t enc = a_encouraged ? a : b;
        std::size_t unenc = a_encouraged ? b : a;
        MatchedPair pair;
        pair.encouraged = problem.case_indices[enc];
        pair.unencouraged = problem.case_indices[unenc];
        pair.covariate_distance = (*dist)[a][b];
        pair.severity_gap = std::fabs(sa - sb);
        result.pairs.push_back(pair);
        result.total_distance += adjusted[a][b];
    }

    std::vector<std::pair<int, int>> treatments;
    for (const auto& p : result.pairs)
        treatments.emplace_back(analysis.records[p.encouraged].bail_set,
                                analysis.records[p.unencouraged].bail_set);
    result.first_stage_F = first_stage_F(treatments);
    return result;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

CalibrationResult calibrate_and_match(const std::vector<Stratum>& strata,
                                      const AnalysisSet& analysis,
                                      const InstrumentTable& instrument,
                                      const SearchGrid& grid) {
    if (grid.sink_fractions.empty() || grid.caliper_quantiles.empty())
        throw std::invalid_argument("empty search grid");

    std::vector<MatchProblem> problems;
    std::vector<std::vector<std::vector<double>>> distances;
    std::vector<const Stratum*> singletons;
    std::vector<double> gaps;
    for (const auto& s : strata) {
        if (!s.matchable()) {
            singletons.push_back(&s);
            continue;
        }
        problems.push_back(build_problem(s, analysis, instrument));
        const auto& p = problems.back();
        distances.push_back(covariate_distance_matrix(p, nullptr));
        for (std::size_t i = 0; i < p.severities.size(); ++i)
            for (std::size_t j = i + 1; j < p.severities.size(); ++j)
                gaps.push_back(std::fabs(p.severities[i] - p.severities[j]));
    }
    std::sort(gaps.begin(), gaps.end());
    if (gaps.empty() || gaps.back() == 0.0)
        throw WeakInstrumentError(
            "instrument too weak: zero severity variance within every stratum");

    std::vector<double> calipers;
    for (double q : grid.caliper_quantiles) calipers.push_back(quantile_sorted(gaps, q));

    CalibrationResult result;
    bool have_winner = false;
    double best_F = 0.0;

    for (double sf : grid.sink_fractions) {
        for (double caliper : calipers) {
            std::vector<MatchResult> per_stratum;
            std::vector<std::pair<int, int>> treatments;
            for (std::size_t s = 0; s < problems.size(); ++s) {
                MatchProblem p = problems[s];
                p.caliper = caliper;
                p.sink_fraction = sf;
                per_stratum.push_back(match_stratum(p, analysis, &distances[s]));
                for (const auto& pr : per_stratum.back().pairs)
                    treatments.emplace_back(analysis.records[pr.encouraged].bail_set,
                                            analysis.records[pr.unencouraged].bail_set);
            }
            GridPoint gp;
            gp.sink_fraction = sf;
            gp.caliper = caliper;
            gp.n_pairs = treatments.size();
            gp.global_F = first_stage_F(treatments);
            result.trace.push_back(gp);
            if (gp.n_pairs < 2 || !gp.global_F) continue;
            // Ties break toward fewer sinks, then smaller caliper (grid order).
            if (!have_winner || *gp.global_F > best_F) {
                have_winner = true;
                best_F = *gp.global_F;
                result.winner = gp;
                result.per_stratum = std::move(per_stratum);
            }
        }
    }

    if (!have_winner)
        throw WeakInstrumentError(
            "instrument too weak / data too small: no grid point yields 2 pairs");

    for (const Stratum* s : singletons) {
        MatchResult mr;
        mr.key = s->key;
        mr.dropped = s->members;
        result.per_stratum.push_back(std::move(mr));
    }

    for (const auto& mr : result.per_stratum) {
        result.cases_matched += 2 * mr.pairs.size();
        result.cases_dropped += mr.dropped.size();
    }
    return result;
}

void export_pairs(std::ostream& out, const std::vector<MatchResult>& results,
                  const AnalysisSet& analysis) {
    out << "pair_id,stratum_key,encouraged_case_id,unencouraged_case_id,"
           "covariate_distance,severity_gap\n";
    out.precision(17);
    std::size_t pair_id = 0;
    for (const auto& mr : results) {
        for (const auto& p : mr.pairs) {
            out << pair_id++ << ',' << mr.key.label() << ','
                << analysis.records[p.encouraged].case_id << ','
                << analysis.records[p.unencouraged].case_id << ','
                << p.covariate_distance << ',' << p.severity_gap << '\n';
        }
    }
}

void export_grid_trace(std::ostream& out, const std::vector<GridPoint>& trace) {
    out << "sink_fraction,delta,pairs,global_F\n";
    out.precision(17);
    for (const auto& gp : trace) {
        out << gp.sink_fraction << ',' << gp.caliper << ',' << gp.n_pairs << ',';
        if (gp.global_F)
            out << *gp.global_F;
        else
            out << "NA";
        out << '\n';
    }
}

}  // namespace nearfar
