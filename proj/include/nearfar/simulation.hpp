#ifndef NEARFAR_SIMULATION_HPP
#define NEARFAR_SIMULATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nearfar/data_model.hpp"

namespace nearfar {

// Generative model with explicit compliance classes, so the complier
// average effect is lambda_true by construction. Judges are assigned
// uniformly at random within region, independent of covariates.
struct SimScenario {
    std::size_t n_cases = 2000;
    std::size_t n_judges = 10;
    std::size_t n_regions = 2;
    std::size_t charges_per_region = 6;
    double charge_skew = 1.0;        // Zipf exponent of the charge mix; 0 = uniform
    double leniency_spread = 0.15;   // judge offsets uniform in [-spread, spread]
    double confounding = 0.0;        // covariate effect on both bail and guilt
    double frac_always = 0.15;       // always-bail fraction (at u = 0)
    double frac_never = 0.45;        // never-bail fraction (at u = 0)
    double complier_base_bail = 0.5; // complier bail probability at neutral judge
    double base_guilt = 0.32;        // P(G(0) = 1) at u = 0
    double lambda_true = 0.0;        // complier average effect
    double frac_disposed = 0.0;      // disposed-at-arraignment share
    double frac_excluded = 0.0;      // extradited / special court / irregular share
    double frac_unresolved = 0.0;    // missing-outcome share
    std::uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument on infeasible settings
};

struct GroundTruth {
    double lambda_true = 0.0;
    std::size_t n_compliers = 0;
    std::size_t n_always = 0;
    std::size_t n_never = 0;
    std::size_t n_cases = 0;
};

struct SimOutput {
    std::vector<CaseRecord> cases;
    GroundTruth truth;
};

SimOutput generate(const SimScenario& scenario);

void write_ground_truth(std::ostream& out, const GroundTruth& truth);

}  // namespace nearfar

#endif
