#ifndef NEARFAR_MATCHING_HPP
#define NEARFAR_MATCHING_HPP

#include <optional>
#include <string>
#include <vector>

#include "nearfar/data_model.hpp"
#include "nearfar/instrument.hpp"

namespace nearfar {

// Matching covariates, in the order used by distance and balance code.
extern const std::vector<std::string> kMatchingCovariates;

// Extracts the matching-covariate vector of a record (same order as
// kMatchingCovariates).
std::vector<double> matching_covariates(const CaseRecord& r);

struct StratumKey {
    std::string top_charge;
    std::string region;
    std::string gender;
    auto operator<=>(const StratumKey&) const = default;
    std::string label() const { return top_charge + "|" + region + "|" + gender; }
};

struct Stratum {
    StratumKey key;
    std::vector<std::size_t> members;  // indices into AnalysisSet.records
    bool matchable() const { return members.size() >= 2; }
};

std::vector<Stratum> stratify(const AnalysisSet& analysis,
                              const InstrumentTable& instrument);

struct MatchProblem {
    StratumKey key;
    std::vector<std::vector<double>> covariates;  // row per case
    std::vector<double> severities;
    std::vector<std::size_t> case_indices;        // into AnalysisSet.records
    double caliper = 0.0;                         // severity units
    double penalty = 0.0;                         // distance units; > 0
    double sink_fraction = 0.0;                   // [0, 1)
};

struct MatchedPair {
    std::size_t encouraged;    // record index; lower severity
    std::size_t unencouraged;  // record index; higher severity
    double covariate_distance = 0.0;
    double severity_gap = 0.0;
};

struct MatchResult {
    StratumKey key;
    std::vector<MatchedPair> pairs;
    std::vector<std::size_t> dropped;  // record indices matched to sinks
    double total_distance = 0.0;
    std::optional<double> first_stage_F;
    std::vector<std::string> dropped_covariate_columns;  // zero variance in stratum
};

// Rank-based Mahalanobis distances between all case pairs of a problem.
// Ties get average ranks; zero-variance columns are dropped (reported via
// the optional out-parameter); a singular rank covariance falls back to the
// pseudo-inverse.
std::vector<std::vector<double>> covariate_distance_matrix(
    const MatchProblem& problem,
    std::vector<std::string>* dropped_columns = nullptr);

// Adds the caliper penalty: entries with |S_i - S_j| < caliper gain +penalty.
std::vector<std::vector<double>> nearfar_adjusted_distance(
    const std::vector<std::vector<double>>& covariate_distances,
    const std::vector<double>& severities, double caliper, double penalty);

// Minimum-weight perfect matching on real nodes plus sinks. Sink-real edges
// weigh 0, sink-sink edges weigh sink_sink_weight. One extra sink is added
// when parity requires. Returns mate[] over real node indices with -1
// meaning "matched to a sink".
std::vector<int> optimal_nonbipartite_match(
    const std::vector<std::vector<double>>& adjusted, int sink_count,
    double sink_sink_weight);

// Squared pooled-variance two-sample t comparing bail_set between the
// encouraged and unencouraged groups. nullopt below 2 pairs; +inf when the
// pooled variance is 0 with unequal means.
std::optional<double> first_stage_F(const std::vector<std::pair<int, int>>& treatments);

// Runs one stratum end to end with given parameters, reusing a precomputed
// covariate distance matrix when supplied.
MatchResult match_stratum(const MatchProblem& problem, const AnalysisSet& analysis,
                          const std::vector<std::vector<double>>* precomputed = nullptr);

struct SearchGrid {
    std::vector<double> sink_fractions = {0.0,  0.05, 0.10, 0.15, 0.20,
                                          0.25, 0.30, 0.35, 0.40, 0.45};
    std::vector<double> caliper_quantiles = {0.1, 0.2, 0.3, 0.4, 0.5,
                                             0.6, 0.7, 0.8, 0.9};
};

struct GridPoint {
    double sink_fraction = 0.0;
    double caliper = 0.0;
    std::size_t n_pairs = 0;
    std::optional<double> global_F;
};

struct CalibrationResult {
    std::vector<MatchResult> per_stratum;   // winning configuration
    GridPoint winner;
    std::vector<GridPoint> trace;
    std::size_t cases_matched = 0;          // 2 * total pairs
    std::size_t cases_dropped = 0;
};

class WeakInstrumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

CalibrationResult calibrate_and_match(const std::vector<Stratum>& strata,
                                      const AnalysisSet& analysis,
                                      const InstrumentTable& instrument,
                                      const SearchGrid& grid = {});

MatchProblem build_problem(const Stratum& stratum, const AnalysisSet& analysis,
                           const InstrumentTable& instrument);

void export_pairs(std::ostream& out, const std::vector<MatchResult>& results,
                  const AnalysisSet& analysis);
void export_grid_trace(std::ostream& out, const std::vector<GridPoint>& trace);

}  // namespace nearfar

#endif
