#ifndef NEARFAR_INFERENCE_HPP
#define NEARFAR_INFERENCE_HPP

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nearfar/data_model.hpp"
#include "nearfar/matching.hpp"

namespace nearfar {

// Per-pair outcome and treatment differences, encouraged minus unencouraged.
struct PairOutcome {
    int delta_outcome = 0;    // G_enc - G_unenc, in {-1, 0, 1}
    int delta_treatment = 0;  // T_enc - T_unenc, in {-1, 0, 1}
    int g_encouraged = 0;
    int g_unencouraged = 0;
    int t_encouraged = 0;
    int t_unencouraged = 0;
    std::string region;
    CrimeType crime_type = CrimeType::Misdemeanor;
    std::string gender;
};

using PairOutcomes = std::vector<PairOutcome>;

PairOutcomes pair_outcomes(const std::vector<MatchResult>& results,
                           const AnalysisSet& analysis);

class NoComplianceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Effect ratio: sum of outcome differences over sum of treatment
// differences. Throws NoComplianceError when the denominator is zero.
double effect_ratio(const PairOutcomes& pairs);

struct ConfidenceInterval {
    double low = 0.0;
    double high = 0.0;
    bool unbounded = false;   // weak instrument: the inversion set is not an interval
    bool degenerate = false;  // zero spread: point interval
};

// Test-inversion (Fieller-type) confidence interval for the effect ratio.
ConfidenceInterval effect_ratio_ci(const PairOutcomes& pairs, double alpha = 0.05);

struct EffectEstimate {
    std::string scheme;         // Aggregate / Region / Crime Type / Gender
    std::string stratum_label;
    double lambda_hat = 0.0;
    ConfidenceInterval ci;
    std::size_t n_cases = 0;    // 2 * pairs in the stratum
    bool significant = false;
    bool estimable = true;      // false when the stratum has zero net compliance
    std::optional<double> first_stage_F;
};

enum class StratificationScheme { Aggregate, Region, CrimeTypeScheme, Gender };

std::vector<EffectEstimate> stratified_estimates(
    const PairOutcomes& pairs,
    const std::vector<StratificationScheme>& schemes =
        {StratificationScheme::Aggregate, StratificationScheme::Region,
         StratificationScheme::CrimeTypeScheme, StratificationScheme::Gender},
    double alpha = 0.05);

// Worst-case one-sided p-value bound for "no positive effect" when the
// within-pair odds of receiving the encouraged role may differ by up to
// gamma (normal approximation to the sign-score bound).
struct SensitivityRow {
    double gamma = 1.0;
    double p_upper = 0.0;
};

struct SensitivityResult {
    std::vector<SensitivityRow> rows;
    std::optional<double> gamma_star;  // largest grid gamma with p_upper < 0.05
};

SensitivityResult sensitivity_analysis(const PairOutcomes& pairs,
                                       const std::vector<double>& gamma_grid);

// Amplification of a sensitivity parameter: points (lambda, delta) with
// gamma = (lambda*delta + 1) / (lambda + delta), sampled over lambda > gamma.
struct AmplificationPoint {
    double lambda = 0.0;  // odds multiplier on encouragement assignment
    double delta = 0.0;   // odds multiplier on outcome
};

std::vector<AmplificationPoint> amplify(double gamma,
                                        const std::vector<double>& lambda_samples);

double normal_cdf(double x);
double normal_quantile(double p);

void render_estimates(std::ostream& out, const std::vector<EffectEstimate>& estimates);
void export_estimates(std::ostream& out, const std::vector<EffectEstimate>& estimates);
void export_sensitivity(std::ostream& out, const SensitivityResult& sens,
                        const std::vector<AmplificationPoint>& curve);

}  // namespace nearfar

#endif
