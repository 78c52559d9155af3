#include "nearfar/inference.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace nearfar {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

}  // namespace

// Acklam's rational approximation, polished with one Newton step.
double normal_quantile(double p) {
    assert(p > 0.0 && p < 1.0);
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= phigh) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    double e = normal_cdf(x) - p;
    x -= e / normal_pdf(x);
    return x;
}

PairOutcomes pair_outcomes(const std::vector<MatchResult>& results,
                           const AnalysisSet& analysis) {
    PairOutcomes out;
    for (const auto& mr : results) {
        for (const auto& p : mr.pairs) {
            const auto& enc = analysis.records[p.encouraged];
            const auto& unenc = analysis.records[p.unencouraged];
            // Exact stratification guarantees shared tags; asserted, not assumed.
            assert(enc.region == unenc.region);
            assert(enc.gender == unenc.gender);
            assert(enc.crime_type == unenc.crime_type);
            PairOutcome po;
            po.g_encouraged = enc.guilty.value();
            po.g_unencouraged = unenc.guilty.value();
            po.t_encouraged = enc.bail_set;
            po.t_unencouraged = unenc.bail_set;
            po.delta_outcome = po.g_encouraged - po.g_unencouraged;
            po.delta_treatment = po.t_encouraged - po.t_unencouraged;
            po.region = enc.region;
            po.crime_type = enc.crime_type;
            po.gender = enc.gender;
            out.push_back(po);
        }
    }
    return out;
}

double effect_ratio(const PairOutcomes& pairs) {
    long long num = 0, den = 0;
    for (const auto& p : pairs) {
        num += p.delta_outcome;
        den += p.delta_treatment;
    }
    if (den == 0)
        throw NoComplianceError(
            "no induced compliance: instrument produced no net treatment difference");
    return static_cast<double>(num) / static_cast<double>(den);
}

namespace {

// f(lambda) = T(lambda)^2 - z^2 SE(lambda)^2, scaled by I^2; the CI is
// {lambda : f(lambda) <= 0}.
struct InversionStats {
    double n = 0;
    double mean_a = 0, mean_b = 0;
    double saa = 0, sab = 0, sbb = 0;  // centered sums of squares / products
    double c = 0;                      // z^2 / (I (I-1))

    double f(double lambda) const {
        double t = mean_a - lambda * mean_b;
        double ss = saa - 2 * lambda * sab + lambda * lambda * sbb;
        return t * t - c * ss;
    }
};

InversionStats make_stats(const PairOutcomes& pairs, double alpha) {
    InversionStats s;
    s.n = static_cast<double>(pairs.size());
    for (const auto& p : pairs) {
        s.mean_a += p.delta_outcome;
        s.mean_b += p.delta_treatment;
    }
    s.mean_a /= s.n;
    s.mean_b /= s.n;
    for (const auto& p : pairs) {
        double da = p.delta_outcome - s.mean_a;
        double db = p.delta_treatment - s.mean_b;
        s.saa += da * da;
        s.sab += da * db;
        s.sbb += db * db;
    }
    double z = normal_quantile(1.0 - alpha / 2.0);
    s.c = z * z / (s.n * (s.n - 1.0));
    return s;
}

// Expanding-bracket bisection for a root of f between lambda_inside (f<=0)
// and the direction dir (+1/-1).
double bisect_root(const InversionStats& s, double lambda_inside, double dir) {
    double step = 1.0;
    double lo = lambda_inside, hi = lambda_inside + dir * step;
    int guard = 0;
    while (s.f(hi) <= 0 && guard++ < 200) {
        step *= 2;
        lo = hi;
        hi = lambda_inside + dir * step;
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (s.f(mid) <= 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ConfidenceInterval effect_ratio_ci(const PairOutcomes& pairs, double alpha) {
    if (pairs.size() < 2)
        throw std::invalid_argument("effect_ratio_ci needs at least 2 pairs");
    double lambda_hat = effect_ratio(pairs);  // throws on zero denominator
    InversionStats s = make_stats(pairs, alpha);

    ConfidenceInterval ci;
    double A = s.mean_b * s.mean_b - s.c * s.sbb;
    double B = s.mean_a * s.mean_b - s.c * s.sab;
    double C = s.mean_a * s.mean_a - s.c * s.saa;

    double se2_at_hat = s.saa - 2 * lambda_hat * s.sab + lambda_hat * lambda_hat * s.sbb;
    if (se2_at_hat <= 0) {
        ci.low = ci.high = lambda_hat;
        ci.degenerate = true;
        return ci;
    }

    if (A <= 0) {
        // Non-positive leading coefficient: the acceptance region is
        // unbounded (weak instrument).
        ci.unbounded = true;
        ci.low = -std::numeric_limits<double>::infinity();
        ci.high = std::numeric_limits<double>::infinity();
        return ci;
    }

    double disc = B * B - A * C;
    if (disc >= 0) {
        double root = std::sqrt(disc);
        ci.low = (B - root) / A;
        ci.high = (B + root) / A;
    } else {
        // Numerically degenerate quadratic: bisection from the point
        // estimate, which always satisfies f <= 0.
        ci.low = bisect_root(s, lambda_hat, -1.0);
        ci.high = bisect_root(s, lambda_hat, +1.0);
    }
    if (ci.low > lambda_hat) ci.low = lambda_hat;
    if (ci.high < lambda_hat) ci.high = lambda_hat;
    return ci;
}

namespace {

EffectEstimate estimate_for(const std::string& scheme, const std::string& label,
                            const PairOutcomes& subset, double alpha) {
    EffectEstimate e;
    e.scheme = scheme;
    e.stratum_label = label;
    e.n_cases = 2 * subset.size();
    long long den = 0;
    for (const auto& p : subset) den += p.delta_treatment;
    if (subset.size() < 2 || den == 0) {
        e.estimable = false;  // reported as-is with an error marker
        return e;
    }
    e.lambda_hat = effect_ratio(subset);
    e.ci = effect_ratio_ci(subset, alpha);
    e.significant = !e.ci.unbounded && (e.ci.low > 0.0 || e.ci.high < 0.0);
    std::vector<std::pair<int, int>> treatments;
    for (const auto& p : subset)
        treatments.emplace_back(p.t_encouraged, p.t_unencouraged);
    e.first_stage_F = first_stage_F(treatments);
    return e;
}

}  // namespace

std::vector<EffectEstimate> stratified_estimates(
    const PairOutcomes& pairs, const std::vector<StratificationScheme>& schemes,
    double alpha) {
    std::vector<EffectEstimate> out;
    for (auto scheme : schemes) {
        switch (scheme) {
            case StratificationScheme::Aggregate:
                out.push_back(estimate_for("Aggregate", "total", pairs, alpha));
                break;
            case StratificationScheme::Region: {
                std::map<std::string, PairOutcomes> groups;
                for (const auto& p : pairs) groups[p.region].push_back(p);
                for (const auto& [region, subset] : groups)
                    out.push_back(estimate_for("Region", region, subset, alpha));
                break;
            }
            case StratificationScheme::CrimeTypeScheme: {
                std::map<std::string, PairOutcomes> groups;
                for (const auto& p : pairs) groups[to_string(p.crime_type)].push_back(p);
                for (const auto& [type, subset] : groups)
                    out.push_back(estimate_for("Crime Type", type, subset, alpha));
                break;
            }
            case StratificationScheme::Gender: {
                std::map<std::string, PairOutcomes> groups;
                for (const auto& p : pairs) groups[p.gender].push_back(p);
                for (const auto& [gender, subset] : groups)
                    out.push_back(estimate_for("Gender", gender, subset, alpha));
                break;
            }
        }
    }
    return out;
}

SensitivityResult sensitivity_analysis(const PairOutcomes& pairs,
                                       const std::vector<double>& gamma_grid) {
    if (pairs.empty()) throw std::invalid_argument("sensitivity needs pairs");
    double positives = 0, nonzero = 0;
    for (const auto& p : pairs) {
        if (p.delta_outcome > 0) ++positives;
        if (p.delta_outcome != 0) ++nonzero;
    }
    SensitivityResult result;
    for (double gamma : gamma_grid) {
        if (gamma < 1.0) throw std::invalid_argument("gamma must be >= 1");
        SensitivityRow row;
        row.gamma = gamma;
        if (nonzero == 0) {
            row.p_upper = 1.0;
        } else {
            double p = gamma / (1.0 + gamma);
            double mu = nonzero * p;
            double sigma = std::sqrt(nonzero * p * (1.0 - p));
            row.p_upper = 1.0 - normal_cdf((positives - mu) / sigma);
        }
        result.rows.push_back(row);
        if (row.p_upper < 0.05 &&
            (!result.gamma_star || gamma > *result.gamma_star))
            result.gamma_star = gamma;
    }
    return result;
}

std::vector<AmplificationPoint> amplify(double gamma,
                                        const std::vector<double>& lambda_samples) {
    if (gamma < 1.0) throw std::invalid_argument("gamma must be >= 1");
    std::vector<AmplificationPoint> curve;
    for (double lambda : lambda_samples) {
        if (lambda <= 1.0) continue;
        if (gamma == 1.0) {
            curve.push_back({lambda, 1.0});
            continue;
        }
        if (lambda <= gamma) continue;  // no finite delta on this branch
        curve.push_back({lambda, (lambda * gamma - 1.0) / (lambda - gamma)});
    }
    return curve;
}

namespace {

std::string fmt2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

}  // namespace

void render_estimates(std::ostream& out, const std::vector<EffectEstimate>& estimates) {
    out << std::left << std::setw(12) << "" << std::setw(14) << "Stratum"
        << std::setw(8) << "Est" << std::setw(8) << "Low" << std::setw(8) << "Hi"
        << std::setw(10) << "n"
        << "*\n";
    std::string last_scheme;
    for (const auto& e : estimates) {
        std::string scheme = e.scheme == last_scheme ? "" : e.scheme;
        last_scheme = e.scheme;
        out << std::left << std::setw(12) << scheme << std::setw(14)
            << e.stratum_label;
        if (!e.estimable) {
            out << std::setw(8) << "NA" << std::setw(8) << "NA" << std::setw(8) << "NA";
        } else if (e.ci.unbounded) {
            out << std::setw(8) << fmt2(e.lambda_hat) << std::setw(8) << "-Inf"
                << std::setw(8) << "+Inf";
        } else {
            out << std::setw(8) << fmt2(e.lambda_hat) << std::setw(8) << fmt2(e.ci.low)
                << std::setw(8) << fmt2(e.ci.high);
        }
        out << std::setw(10) << e.n_cases << (e.significant ? "*" : "") << "\n";
    }
}

void export_estimates(std::ostream& out, const std::vector<EffectEstimate>& estimates) {
    out << "scheme,stratum,est,low,hi,n,significant\n";
    out.precision(17);
    for (const auto& e : estimates) {
        out << e.scheme << ',' << e.stratum_label << ',';
        if (!e.estimable) {
            out << "NA,NA,NA";
        } else if (e.ci.unbounded) {
            out << e.lambda_hat << ",-Inf,+Inf";
        } else {
            out << e.lambda_hat << ',' << e.ci.low << ',' << e.ci.high;
        }
        out << ',' << e.n_cases << ',' << (e.significant ? 1 : 0) << '\n';
    }
}

void export_sensitivity(std::ostream& out, const SensitivityResult& sens,
                        const std::vector<AmplificationPoint>& curve) {
    out << "gamma,p_upper\n";
    out.precision(17);
    for (const auto& row : sens.rows) out << row.gamma << ',' << row.p_upper << '\n';
    out << "gamma_star,";
    if (sens.gamma_star)
        out << *sens.gamma_star;
    else
        out << "NA";
    out << "\n\namplification_lambda,amplification_delta\n";
    for (const auto& pt : curve) out << pt.lambda << ',' << pt.delta << '\n';
}

}  // namespace nearfar
