#include "nearfar/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

namespace nearfar {

void SimScenario::validate() const {
    if (n_cases == 0 || n_judges == 0 || n_regions == 0 || charges_per_region == 0)
        throw std::invalid_argument("scenario counts must be positive");
    if (n_judges < n_regions)
        throw std::invalid_argument("need at least one judge per region");
    if (frac_always < 0 || frac_never < 0 || frac_always + frac_never > 1.0)
        throw std::invalid_argument("compliance fractions must be in [0,1] and sum to <= 1");
    if (charge_skew < 0.0 || charge_skew > 5.0)
        throw std::invalid_argument("charge_skew must be in [0, 5]");
    if (lambda_true < -1.0 || lambda_true > 1.0)
        throw std::invalid_argument("lambda_true must be in [-1, 1]");
    for (double p : {leniency_spread, complier_base_bail, base_guilt, frac_disposed,
                     frac_excluded, frac_unresolved})
        if (p < 0 || p > 1) throw std::invalid_argument("probability out of [0, 1]");
    if (base_guilt + std::fabs(confounding) + std::max(0.0, lambda_true) > 1.0 ||
        base_guilt - std::fabs(confounding) + std::min(0.0, lambda_true) < 0.0)
        throw std::invalid_argument(
            "guilt probabilities leave [0,1]: reduce confounding or base_guilt");
}

namespace {

// Platform-independent draws on top of mt19937_64 (std distributions are
// implementation-defined, which would break the byte-identical contract
// across toolchains).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }
    int poisson(double mean) {  // Knuth; fine for small means
        double l = std::exp(-mean), p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        return k - 1;
    }
    double exponential(double mean) { return -mean * std::log(1.0 - uniform()); }

private:
    std::mt19937_64 gen_;
};

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

const char* kChargeNames[] = {
    "Assault 3",        "Petit Larceny",    "Criminal Mischief 2",
    "Drug Possession 7", "Trespass 2",       "Theft of Services",
    "Assault 2",        "Burglary 3",       "Robbery 2",
    "Drug Possession 3", "Grand Larceny 4",  "Weapon Possession 2",
    "Forgery 2",        "Menacing 2",       "Resisting Arrest",
    "Obstruction 2",    "Harassment 1",     "Bail Jumping 2",
    "Stolen Property 5", "Contempt 2"};
constexpr std::size_t kNumCharges = sizeof(kChargeNames) / sizeof(kChargeNames[0]);

// First 6 charges are misdemeanors handled most often; the rest felonies.
bool charge_is_felony(std::size_t c) { return c % kNumCharges >= 6; }

const char* charge_class(std::size_t c) {
    static const char* classes[] = {"A", "B", "C", "D", "E"};
    return classes[c % 5];
}

}  // namespace

SimOutput generate(const SimScenario& sc) {
    sc.validate();
    Rng rng(sc.seed);

    // Judges round-robin across regions; leniency offsets fixed per judge.
    std::vector<std::size_t> judge_region(sc.n_judges);
    std::vector<double> judge_offset(sc.n_judges);
    for (std::size_t j = 0; j < sc.n_judges; ++j) {
        judge_region[j] = j % sc.n_regions;
        judge_offset[j] = (2.0 * rng.uniform() - 1.0) * sc.leniency_spread;
    }
    std::vector<std::vector<std::size_t>> region_judges(sc.n_regions);
    for (std::size_t j = 0; j < sc.n_judges; ++j) region_judges[judge_region[j]].push_back(j);

    SimOutput out;
    out.truth.lambda_true = sc.lambda_true;
    out.truth.n_cases = sc.n_cases;
    out.cases.reserve(sc.n_cases);

    for (std::size_t i = 0; i < sc.n_cases; ++i) {
        CaseRecord r;
        r.case_id = "C" + std::to_string(i);

        std::size_t region = rng.uniform_index(sc.n_regions);
        r.region = "R" + std::to_string(region);

        // Zipf-ish charge mix within the region's charge list; skew 0 is uniform.
        std::size_t nch = std::min<std::size_t>(sc.charges_per_region, kNumCharges);
        double total = 0;
        for (std::size_t c = 0; c < nch; ++c)
            total += std::pow(static_cast<double>(c + 1), -sc.charge_skew);
        double u = rng.uniform() * total;
        std::size_t charge = nch - 1;
        for (std::size_t c = 0; c < nch; ++c) {
            u -= std::pow(static_cast<double>(c + 1), -sc.charge_skew);
            if (u <= 0) {
                charge = c;
                break;
            }
        }
        r.top_charge = kChargeNames[charge];
        r.crime_type = charge_is_felony(charge) ? CrimeType::Felony : CrimeType::Misdemeanor;
        r.charge_class = charge_class(charge);

        r.gender = rng.bernoulli(0.8) ? "male" : "female";
        r.age = std::floor(18.0 + rng.exponential(14.0));
        double race = rng.uniform();
        r.race_white = race < 0.28 ? 1 : 0;
        r.race_black = (race >= 0.28 && race < 0.80) ? 1 : 0;
        r.non_hispanic = rng.bernoulli(0.65) ? 1 : 0;
        r.prior_counts_2014 = rng.poisson(0.6);
        if (rng.bernoulli(0.12)) {
            r.weekly_income = std::floor(100.0 + rng.exponential(300.0));
            r.any_income = 1;
        }
        r.has_employer = rng.bernoulli(0.17) ? 1 : 0;
        r.has_phone = rng.bernoulli(0.15) ? 1 : 0;
        r.has_address = rng.bernoulli(0.9) ? 1 : 0;

        // Latent risk from observed covariates; centered near 0 by design.
        double u_risk = 0.4 * (r.prior_counts_2014 - 0.6) + 0.8 * (0.9 - r.has_address) +
                        0.4 * (0.15 - r.has_phone) + 0.01 * (r.age - 32.0);
        u_risk = std::clamp(u_risk, -1.0, 1.0);

        // Compliance class; confounding shifts always/never membership by risk.
        double p_always = clamp01(sc.frac_always + sc.confounding * u_risk);
        double p_never = clamp01(sc.frac_never - sc.confounding * u_risk);
        if (p_always + p_never > 1.0) {
            double scale = 1.0 / (p_always + p_never);
            p_always *= scale;
            p_never *= scale;
        }
        double cls = rng.uniform();
        enum { Always, Never, Complier } compliance =
            cls < p_always ? Always : (cls < p_always + p_never ? Never : Complier);

        // Judge assignment: uniform within region, independent of covariates.
        std::size_t judge = region_judges[region][rng.uniform_index(region_judges[region].size())];
        r.judge_id = "J" + std::to_string(judge);

        // Strict judges (negative offset) set bail on compliers more often.
        switch (compliance) {
            case Always:
                r.bail_set = 1;
                ++out.truth.n_always;
                break;
            case Never:
                r.bail_set = 0;
                ++out.truth.n_never;
                break;
            case Complier:
                r.bail_set =
                    rng.bernoulli(clamp01(sc.complier_base_bail - judge_offset[judge])) ? 1 : 0;
                ++out.truth.n_compliers;
                break;
        }

        // Potential outcomes; effect lambda_true among compliers only.
        double p_g0 = clamp01(sc.base_guilt + sc.confounding * u_risk);
        int g0 = rng.bernoulli(p_g0) ? 1 : 0;
        int g1 = g0;
        if (compliance == Complier)
            g1 = rng.bernoulli(clamp01(p_g0 + sc.lambda_true)) ? 1 : 0;
        r.guilty = r.bail_set ? g1 : g0;

        if (rng.bernoulli(sc.frac_disposed)) r.disposed_at_arraignment = 1;
        if (rng.bernoulli(sc.frac_excluded)) {
            static const char* reasons[] = {"extradited", "special_court", "irregular"};
            r.excluded_reason = reasons[rng.uniform_index(3)];
        }
        if (rng.bernoulli(sc.frac_unresolved)) r.guilty.reset();

        out.cases.push_back(std::move(r));
    }
    return out;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
    out.precision(17);
    out << "lambda_true," << truth.lambda_true << "\n"
        << "n_cases," << truth.n_cases << "\n"
        << "n_compliers," << truth.n_compliers << "\n"
        << "n_always," << truth.n_always << "\n"
        << "n_never," << truth.n_never << "\n";
}

}  // namespace nearfar
