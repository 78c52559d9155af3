#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nearfar/inference.hpp"
#include "oracles.hpp"

using namespace nearfar;

namespace {

PairOutcome po(int g_enc, int g_unenc, int t_enc, int t_unenc,
               const std::string& region = "A",
               CrimeType ct = CrimeType::Misdemeanor,
               const std::string& gender = "male") {
    PairOutcome p;
    p.g_encouraged = g_enc;
    p.g_unencouraged = g_unenc;
    p.t_encouraged = t_enc;
    p.t_unencouraged = t_unenc;
    p.delta_outcome = g_enc - g_unenc;
    p.delta_treatment = t_enc - t_unenc;
    p.region = region;
    p.crime_type = ct;
    p.gender = gender;
    return p;
}

PairOutcomes random_pairs(std::mt19937& gen, int n) {
    PairOutcomes pairs;
    for (int i = 0; i < n; ++i)
        pairs.push_back(po(gen() % 2, gen() % 2, gen() % 2, gen() % 2));
    return pairs;
}

}  // namespace

TEST_CASE("effect ratio on the worked example") {
    // Outcome differences [1,0,1,-1], treatment differences [1,1,0,1].
    PairOutcomes pairs = {po(1, 0, 1, 0), po(0, 0, 1, 0), po(1, 0, 0, 0),
                          po(0, 1, 1, 0)};
    CHECK(effect_ratio(pairs) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("zero net compliance is an explicit error") {
    PairOutcomes pairs = {po(1, 0, 1, 0), po(0, 0, 0, 1)};
    CHECK_THROWS_AS(effect_ratio(pairs), NoComplianceError);
}

TEST_CASE("confidence interval matches the dense grid oracle") {
    std::mt19937 gen(31);
    int checked = 0;
    while (checked < 25) {
        auto pairs = random_pairs(gen, 20 + gen() % 60);
        int dt = 0;
        for (const auto& p : pairs) dt += p.delta_treatment;
        if (dt == 0) continue;
        auto ci = effect_ratio_ci(pairs);
        if (ci.unbounded || ci.degenerate) continue;
        auto [lo, hi] = oracles::ci_grid_oracle(pairs, 0.05, -30.0, 30.0, 1e-4);
        REQUIRE(!std::isnan(lo));
        CHECK(std::fabs(ci.low - lo) <= 2e-4);
        CHECK(std::fabs(ci.high - hi) <= 2e-4);
        double lam = effect_ratio(pairs);
        CHECK(ci.low <= lam);
        CHECK(ci.high >= lam);
        ++checked;
    }
}

TEST_CASE("identical pair differences give a degenerate point interval") {
    PairOutcomes pairs(6, po(1, 0, 1, 0));
    auto ci = effect_ratio_ci(pairs);
    CHECK(ci.degenerate);
    CHECK(ci.low == doctest::Approx(1.0));
    CHECK(ci.high == doctest::Approx(1.0));
}

TEST_CASE("weak-instrument inversion sets are reported unbounded") {
    // Treatment differences that average near zero relative to their spread.
    PairOutcomes pairs;
    for (int i = 0; i < 10; ++i) {
        pairs.push_back(po(1, 0, 1, 0));
        pairs.push_back(po(0, 1, 0, 1));
    }
    pairs.push_back(po(0, 0, 1, 0));
    auto ci = effect_ratio_ci(pairs);
    CHECK(ci.unbounded);
}

TEST_CASE("interval endpoints satisfy the inversion equation") {
    // At each finite endpoint, |T(lambda0)| equals the critical value.
    std::mt19937 gen(77);
    PairOutcomes pairs;
    for (int i = 0; i < 80; ++i)
        pairs.push_back(po(gen() % 2, gen() % 2, gen() % 4 ? 1 : 0, 0));
    auto ci = effect_ratio_ci(pairs);
    REQUIRE_FALSE(ci.unbounded);
    double z = normal_quantile(0.975);
    const double n = static_cast<double>(pairs.size());
    for (double lam : {ci.low, ci.high}) {
        double mean_v = 0;
        for (const auto& p : pairs) mean_v += p.delta_outcome - lam * p.delta_treatment;
        mean_v /= n;
        double ss = 0;
        for (const auto& p : pairs) {
            double v = p.delta_outcome - lam * p.delta_treatment;
            ss += (v - mean_v) * (v - mean_v);
        }
        double se = std::sqrt(ss / (n * (n - 1)));
        CHECK(std::fabs(mean_v / se) == doctest::Approx(z).epsilon(1e-9));
    }
}

TEST_CASE("stratified estimates split by scheme and keep the aggregate") {
    PairOutcomes pairs = {
        po(1, 0, 1, 0, "North", CrimeType::Misdemeanor, "male"),
        po(1, 0, 1, 0, "North", CrimeType::Misdemeanor, "male"),
        po(0, 0, 1, 0, "North", CrimeType::Felony, "female"),
        po(1, 0, 1, 0, "South", CrimeType::Felony, "male"),
        po(0, 1, 1, 0, "South", CrimeType::Misdemeanor, "female"),
        po(1, 1, 1, 0, "South", CrimeType::Felony, "male"),
    };
    auto est = stratified_estimates(pairs);
    // 1 aggregate + 2 regions + 2 crime types + 2 genders.
    REQUIRE(est.size() == 7);
    CHECK(est[0].scheme == "Aggregate");
    CHECK(est[0].stratum_label == "total");
    CHECK(est[0].lambda_hat == doctest::Approx(2.0 / 6.0));
    CHECK(est[0].n_cases == 12);

    std::size_t region_cases = 0;
    for (const auto& e : est)
        if (e.scheme == "Region") region_cases += e.n_cases;
    CHECK(region_cases == 12);
}

TEST_CASE("zero-compliance stratum is marked inestimable, others unaffected") {
    PairOutcomes pairs = {
        po(1, 0, 1, 0, "North"),
        po(0, 0, 1, 0, "North"),
        po(1, 0, 0, 0, "South"),
        po(0, 1, 0, 0, "South"),
    };
    auto est = stratified_estimates(pairs, {StratificationScheme::Region});
    REQUIRE(est.size() == 2);
    CHECK(est[0].stratum_label == "North");
    CHECK(est[0].estimable);
    CHECK(est[1].stratum_label == "South");
    CHECK_FALSE(est[1].estimable);
}

TEST_CASE("rendered table carries one row per estimate") {
    PairOutcomes pairs = {po(1, 0, 1, 0), po(0, 0, 1, 0), po(1, 0, 1, 0),
                          po(0, 1, 1, 0)};
    auto est = stratified_estimates(pairs);
    std::ostringstream out;
    render_estimates(out, est);
    auto text = out.str();
    CHECK(text.find("total") != std::string::npos);
    CHECK(text.find("misdemeanor") != std::string::npos);

    std::ostringstream csv;
    export_estimates(csv, est);
    CHECK(csv.str().find("scheme,stratum,est,low,hi,n,significant") == 0);
}

TEST_CASE("sensitivity at gamma 1 reproduces the unadjusted bound") {
    std::mt19937 gen(13);
    for (int rep = 0; rep < 10; ++rep) {
        auto pairs = random_pairs(gen, 40);
        int nonzero = 0;
        for (const auto& p : pairs) nonzero += p.delta_outcome != 0;
        if (nonzero == 0) continue;
        auto sens = sensitivity_analysis(pairs, {1.0});
        REQUIRE(sens.rows.size() == 1);
        CHECK(sens.rows[0].p_upper ==
              doctest::Approx(oracles::sensitivity_direct(pairs, 1.0)).epsilon(1e-10));
    }
}

TEST_CASE("sensitivity bound is monotone in gamma and gamma_star is the crossing") {
    PairOutcomes pairs;
    for (int i = 0; i < 35; ++i) pairs.push_back(po(1, 0, 1, 0));
    for (int i = 0; i < 10; ++i) pairs.push_back(po(0, 1, 1, 0));
    std::vector<double> grid;
    for (double g = 1.0; g <= 4.0 + 1e-9; g += 0.05) grid.push_back(g);
    auto sens = sensitivity_analysis(pairs, grid);
    REQUIRE(sens.rows.size() == grid.size());
    for (std::size_t i = 1; i < sens.rows.size(); ++i)
        CHECK(sens.rows[i].p_upper >= sens.rows[i - 1].p_upper - 1e-12);
    for (const auto& row : sens.rows)
        CHECK(row.p_upper ==
              doctest::Approx(oracles::sensitivity_direct(pairs, row.gamma))
                  .epsilon(1e-10));
    REQUIRE(sens.gamma_star.has_value());
    // gamma_star is the largest grid value still significant at 0.05.
    for (const auto& row : sens.rows) {
        if (row.gamma <= *sens.gamma_star) CHECK(row.p_upper < 0.05);
    }
}

TEST_CASE("amplification reproduces the closed-form check point") {
    // gamma = 18/17 amplifies to (lambda, delta) = (4/3, 3/2).
    auto curve = amplify(18.0 / 17.0, {4.0 / 3.0});
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].lambda == doctest::Approx(4.0 / 3.0));
    CHECK(curve[0].delta == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("amplification round-trips through the defining identity") {
    std::vector<double> gammas = {1.1, 1.5, 2.0, 3.0};
    for (double gamma : gammas) {
        auto curve = amplify(gamma, {gamma + 0.5, gamma + 1.0, 2 * gamma, 5 * gamma});
        for (const auto& pt : curve) {
            double back = (pt.lambda * pt.delta + 1.0) / (pt.lambda + pt.delta);
            CHECK(back == doctest::Approx(gamma).epsilon(1e-12));
        }
    }
}

TEST_CASE("no ambiguity at gamma 1") {
    auto curve = amplify(1.0, {2.0, 3.0});
    for (const auto& pt : curve) CHECK(pt.delta == doctest::Approx(1.0));
}

TEST_CASE("normal quantile and cdf are mutual inverses") {
    for (double p : {0.025, 0.05, 0.5, 0.9, 0.975, 0.999})
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}
