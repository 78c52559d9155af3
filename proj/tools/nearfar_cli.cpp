// Batch pipeline driver: simulate -> match -> estimate / sensitivity / report.
// Stages communicate through files in --out-dir so every run leaves an audit
// trail; a manifest records the exact configuration of each stage.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "nearfar/data_model.hpp"
#include "nearfar/diagnostics.hpp"
#include "nearfar/inference.hpp"
#include "nearfar/instrument.hpp"
#include "nearfar/matching.hpp"
#include "nearfar/simulation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nearfar;

namespace {

constexpr const char* kVersion = "nearfar 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitSchema = 2;
constexpr int kExitWeakInstrument = 3;
constexpr int kExitMissingArtifact = 4;

class MissingArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// All writes go through a temp file and rename, so a crashed run never
// leaves a truncated artifact.
void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

struct RunConfig {
    std::string input;
    std::string out_dir = ".";
    std::string config_path;
    double alpha = 0.05;
    int threads = 1;
    std::uint64_t seed = 1;
    SimScenario scenario;
    SearchGrid grid;
    std::vector<double> gamma_grid = {1.0, 1.05, 1.1, 1.15, 1.2, 1.3, 1.4, 1.5, 1.75, 2.0};
    json raw_config = json::object();
};

void apply_config_file(RunConfig& cfg) {
    if (cfg.config_path.empty()) return;
    std::ifstream in(cfg.config_path);
    if (!in) throw MissingArtifactError("config file not found: " + cfg.config_path);
    json j = json::parse(in);
    cfg.raw_config = j;
    auto get = [&](const char* key, auto& target) {
        if (j.contains(key)) target = j.at(key).get<std::decay_t<decltype(target)>>();
    };
    get("input", cfg.input);
    get("out_dir", cfg.out_dir);
    get("alpha", cfg.alpha);
    get("threads", cfg.threads);
    get("seed", cfg.seed);
    get("gamma_grid", cfg.gamma_grid);
    get("sink_fractions", cfg.grid.sink_fractions);
    get("caliper_quantiles", cfg.grid.caliper_quantiles);
    get("n_cases", cfg.scenario.n_cases);
    get("n_judges", cfg.scenario.n_judges);
    get("n_regions", cfg.scenario.n_regions);
    get("charges_per_region", cfg.scenario.charges_per_region);
    get("charge_skew", cfg.scenario.charge_skew);
    get("leniency_spread", cfg.scenario.leniency_spread);
    get("confounding", cfg.scenario.confounding);
    get("frac_always", cfg.scenario.frac_always);
    get("frac_never", cfg.scenario.frac_never);
    get("complier_base_bail", cfg.scenario.complier_base_bail);
    get("base_guilt", cfg.scenario.base_guilt);
    get("lambda_true", cfg.scenario.lambda_true);
    get("frac_disposed", cfg.scenario.frac_disposed);
    get("frac_excluded", cfg.scenario.frac_excluded);
    get("frac_unresolved", cfg.scenario.frac_unresolved);
}

json config_json(const RunConfig& cfg) {
    json j;
    j["input"] = cfg.input;
    j["out_dir"] = cfg.out_dir;
    j["alpha"] = cfg.alpha;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["sink_fractions"] = cfg.grid.sink_fractions;
    j["caliper_quantiles"] = cfg.grid.caliper_quantiles;
    j["gamma_grid"] = cfg.gamma_grid;
    return j;
}

void write_manifest(const RunConfig& cfg, const std::string& stage,
                    const json& extras) {
    json m;
    m["version"] = kVersion;
    m["stage"] = stage;
    m["config"] = config_json(cfg);
    m["outputs"] = extras;
    atomic_write(fs::path(cfg.out_dir) / ("manifest_" + stage + ".json"),
                 m.dump(2) + "\n");
}

std::string require_artifact(const RunConfig& cfg, const std::string& name) {
    fs::path p = fs::path(cfg.out_dir) / name;
    if (!fs::exists(p))
        throw MissingArtifactError("missing artifact: " + p.string() +
                                   " (run the upstream command first)");
    return p.string();
}

std::string cases_path(const RunConfig& cfg) {
    if (!cfg.input.empty()) {
        if (!fs::exists(cfg.input))
            throw MissingArtifactError("input file not found: " + cfg.input);
        return cfg.input;
    }
    return require_artifact(cfg, "cases.csv");
}

struct LoadedPairs {
    AnalysisSet analysis;
    InstrumentTable instrument;
    std::vector<MatchResult> results;  // single synthetic result holding all pairs
};

// Rehydrates matched pairs from the pairs.csv artifact.
LoadedPairs load_pipeline_state(const RunConfig& cfg) {
    LoadedPairs state;
    auto records = load_cases(cases_path(cfg));
    state.analysis = apply_filters(records);
    state.instrument = compute_severity(state.analysis);

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < state.analysis.records.size(); ++i)
        index[state.analysis.records[i].case_id] = i;

    std::ifstream in(require_artifact(cfg, "pairs.csv"));
    std::string line;
    std::getline(in, line);  // header
    MatchResult all;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string pair_id, stratum, enc, unenc, dist, gap;
        std::getline(ss, pair_id, ',');
        std::getline(ss, stratum, ',');
        std::getline(ss, enc, ',');
        std::getline(ss, unenc, ',');
        std::getline(ss, dist, ',');
        std::getline(ss, gap, ',');
        MatchedPair p;
        p.encouraged = index.at(enc);
        p.unencouraged = index.at(unenc);
        p.covariate_distance = std::stod(dist);
        p.severity_gap = std::stod(gap);
        all.pairs.push_back(p);
    }
    state.results.push_back(std::move(all));
    return state;
}

int cmd_simulate(const RunConfig& cfg) {
    SimScenario sc = cfg.scenario;
    sc.seed = cfg.seed;
    auto out = generate(sc);
    fs::create_directories(cfg.out_dir);
    {
        std::ostringstream ss;
        write_cases(ss, out.cases);
        atomic_write(fs::path(cfg.out_dir) / "cases.csv", ss.str());
    }
    {
        std::ostringstream ss;
        write_ground_truth(ss, out.truth);
        atomic_write(fs::path(cfg.out_dir) / "ground_truth.csv", ss.str());
    }
    json extras;
    extras["cases"] = out.cases.size();
    extras["compliers"] = out.truth.n_compliers;
    write_manifest(cfg, "simulate", extras);
    std::cout << "simulated " << out.cases.size() << " cases -> " << cfg.out_dir
              << "/cases.csv\n";
    return kExitOk;
}

int cmd_match(const RunConfig& cfg) {
    auto records = load_cases(cases_path(cfg));
    auto analysis = apply_filters(records);
    auto instrument = compute_severity(analysis);
    auto strata = stratify(analysis, instrument);
    auto calibration = calibrate_and_match(strata, analysis, instrument, cfg.grid);

    fs::create_directories(cfg.out_dir);
    {
        std::ostringstream ss;
        export_pairs(ss, calibration.per_stratum, analysis);
        atomic_write(fs::path(cfg.out_dir) / "pairs.csv", ss.str());
    }
    {
        std::ostringstream ss;
        export_grid_trace(ss, calibration.trace);
        atomic_write(fs::path(cfg.out_dir) / "grid_trace.csv", ss.str());
    }
    {
        std::ostringstream ss;
        ss << "case_id,reason\n";
        for (const auto& mr : calibration.per_stratum)
            for (std::size_t idx : mr.dropped)
                ss << analysis.records[idx].case_id << ",sink_or_unmatchable\n";
        for (const auto& [id, e] : instrument.entries)
            if (e.flagged) ss << id << ",degenerate_instrument_cell\n";
        atomic_write(fs::path(cfg.out_dir) / "dropped.csv", ss.str());
    }
    {
        std::ostringstream ss;
        export_instrument(ss, instrument);
        atomic_write(fs::path(cfg.out_dir) / "instrument.csv", ss.str());
    }

    json extras;
    extras["strata"] = strata.size();
    extras["pairs"] = calibration.cases_matched / 2;
    extras["cases_matched"] = calibration.cases_matched;
    extras["cases_dropped"] = calibration.cases_dropped;
    extras["winner_sink_fraction"] = calibration.winner.sink_fraction;
    extras["winner_caliper"] = calibration.winner.caliper;
    extras["filters"] = {{"excluded_reason", analysis.provenance.excluded_reason},
                         {"disposed_at_arraignment", analysis.provenance.disposed_at_arraignment},
                         {"unresolved_outcome", analysis.provenance.unresolved_outcome}};
    write_manifest(cfg, "match", extras);
    std::cout << "matched " << calibration.cases_matched / 2 << " pairs ("
              << calibration.cases_dropped << " cases dropped), global F=";
    if (calibration.winner.global_F)
        std::cout << *calibration.winner.global_F;
    else
        std::cout << "NA";
    std::cout << "\n";
    return kExitOk;
}

int cmd_estimate(const RunConfig& cfg) {
    auto state = load_pipeline_state(cfg);
    auto pairs = pair_outcomes(state.results, state.analysis);
    auto estimates = stratified_estimates(
        pairs,
        {StratificationScheme::Aggregate, StratificationScheme::Region,
         StratificationScheme::CrimeTypeScheme, StratificationScheme::Gender},
        cfg.alpha);
    auto balance = balance_table(state.results, state.analysis, state.instrument);
    auto general = generalizability_report(state.results, state.analysis);

    {
        std::ostringstream ss;
        export_estimates(ss, estimates);
        atomic_write(fs::path(cfg.out_dir) / "estimates.csv", ss.str());
    }
    {
        std::ostringstream ss;
        render_estimates(ss, estimates);
        atomic_write(fs::path(cfg.out_dir) / "estimates.txt", ss.str());
    }
    {
        std::ostringstream ss;
        export_balance(ss, balance);
        atomic_write(fs::path(cfg.out_dir) / "balance.csv", ss.str());
    }
    {
        std::ostringstream ss;
        render_balance(ss, balance);
        atomic_write(fs::path(cfg.out_dir) / "balance.txt", ss.str());
    }
    {
        std::ostringstream ss;
        render_generalizability(ss, general);
        atomic_write(fs::path(cfg.out_dir) / "generalizability.txt", ss.str());
    }
    json extras;
    extras["pairs"] = pairs.size();
    extras["estimates"] = estimates.size();
    write_manifest(cfg, "estimate", extras);
    std::cout << "estimated " << estimates.size() << " strata from " << pairs.size()
              << " pairs\n";
    return kExitOk;
}

int cmd_sensitivity(const RunConfig& cfg) {
    auto state = load_pipeline_state(cfg);
    auto pairs = pair_outcomes(state.results, state.analysis);
    auto sens = sensitivity_analysis(pairs, cfg.gamma_grid);

    std::vector<double> lambdas;
    for (double l = 1.05; l <= 5.0 + 1e-9; l += 0.05) lambdas.push_back(l);
    std::vector<AmplificationPoint> curve;
    if (sens.gamma_star) curve = amplify(*sens.gamma_star, lambdas);

    std::ostringstream ss;
    export_sensitivity(ss, sens, curve);
    atomic_write(fs::path(cfg.out_dir) / "sensitivity.csv", ss.str());

    json extras;
    extras["gamma_points"] = sens.rows.size();
    if (sens.gamma_star) extras["gamma_star"] = *sens.gamma_star;
    write_manifest(cfg, "sensitivity", extras);
    std::cout << "sensitivity over " << sens.rows.size() << " gamma values";
    if (sens.gamma_star) std::cout << ", gamma* = " << *sens.gamma_star;
    std::cout << "\n";
    return kExitOk;
}

int cmd_report(const RunConfig& cfg) {
    auto state = load_pipeline_state(cfg);
    auto pairs = pair_outcomes(state.results, state.analysis);
    auto estimates = stratified_estimates(
        pairs,
        {StratificationScheme::Aggregate, StratificationScheme::Region,
         StratificationScheme::CrimeTypeScheme, StratificationScheme::Gender},
        cfg.alpha);
    auto balance = balance_table(state.results, state.analysis, state.instrument);
    auto general = generalizability_report(state.results, state.analysis);
    auto sens = sensitivity_analysis(pairs, cfg.gamma_grid);

    std::ostringstream ss;
    ss << "Near-far matching analysis report (" << kVersion << ")\n";
    ss << "=================================================\n\n";
    ss << "Analysis sample: " << state.analysis.records.size() << " cases, "
       << pairs.size() << " matched pairs (" << 2 * pairs.size() << " cases analyzed)\n\n";
    ss << "Covariate balance (post-match standardized differences)\n";
    ss << "--------------------------------------------------------\n";
    render_balance(ss, balance);
    ss << "\nEffect estimates\n";
    ss << "----------------\n";
    render_estimates(ss, estimates);
    ss << "\nSensitivity analysis (one-sided p-value bounds)\n";
    ss << "-----------------------------------------------\n";
    for (const auto& row : sens.rows)
        ss << "  gamma " << row.gamma << ": p_upper " << row.p_upper << "\n";
    if (sens.gamma_star)
        ss << "  gamma* = " << *sens.gamma_star << " (largest gamma with p < 0.05)\n";
    else
        ss << "  gamma* = NA (not significant at gamma = 1)\n";
    ss << "\nGeneralizability\n";
    ss << "----------------\n";
    render_generalizability(ss, general);
    atomic_write(fs::path(cfg.out_dir) / "report.txt", ss.str());

    json extras;
    extras["pairs"] = pairs.size();
    write_manifest(cfg, "report", extras);
    std::cout << "report written to " << cfg.out_dir << "/report.txt\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Near-far matching instrumental-variable pipeline"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::map<std::string, bool> flag_set;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--input", cfg.input, "Input cases CSV");
        sub->add_option("--out-dir", cfg.out_dir, "Output directory");
        sub->add_option("--config", cfg.config_path, "JSON config file");
        sub->add_option("--seed", cfg.seed, "RNG seed");
        sub->add_option("--alpha", cfg.alpha, "Significance level")
            ->check(CLI::Range(1e-9, 1.0 - 1e-9));
        sub->add_option("--threads", cfg.threads, "Worker threads");
    };

    auto* sim = app.add_subcommand("simulate", "Generate synthetic cases with known truth");
    sim->add_option("--n-cases", cfg.scenario.n_cases, "Cases to generate");
    sim->add_option("--n-judges", cfg.scenario.n_judges, "Number of judges");
    sim->add_option("--n-regions", cfg.scenario.n_regions, "Number of regions");
    sim->add_option("--lambda-true", cfg.scenario.lambda_true, "True complier effect");
    sim->add_option("--confounding", cfg.scenario.confounding, "Confounding strength");
    sim->add_option("--leniency-spread", cfg.scenario.leniency_spread, "Judge offset spread");
    auto* mat = app.add_subcommand("match", "Build near-far matched pairs");
    auto* est = app.add_subcommand("estimate", "Effect ratio estimates + balance");
    auto* sen = app.add_subcommand("sensitivity", "Gamma sensitivity analysis");
    auto* rep = app.add_subcommand("report", "Consolidated plain-text report");
    for (auto* sub : {sim, mat, est, sen, rep}) add_common(sub);

    // Flags override the config file: parse flags first, then fill anything
    // the user did not pass from the file.
    try {
        app.parse(argc, argv);
        if (!cfg.config_path.empty()) {
            RunConfig flag_cfg = cfg;
            RunConfig file_cfg = cfg;
            apply_config_file(file_cfg);
            cfg = file_cfg;
            auto seen = [&](const std::string& name) {
                CLI::App* active = app.get_subcommands().front();
                auto* opt = active->get_option_no_throw(name);
                return opt && opt->count() > 0;
            };
            if (seen("--input")) cfg.input = flag_cfg.input;
            if (seen("--out-dir")) cfg.out_dir = flag_cfg.out_dir;
            if (seen("--seed")) cfg.seed = flag_cfg.seed;
            if (seen("--alpha")) cfg.alpha = flag_cfg.alpha;
            if (seen("--threads")) cfg.threads = flag_cfg.threads;
            if (sim->parsed()) {
                if (seen("--n-cases")) cfg.scenario.n_cases = flag_cfg.scenario.n_cases;
                if (seen("--n-judges")) cfg.scenario.n_judges = flag_cfg.scenario.n_judges;
                if (seen("--n-regions")) cfg.scenario.n_regions = flag_cfg.scenario.n_regions;
                if (seen("--lambda-true"))
                    cfg.scenario.lambda_true = flag_cfg.scenario.lambda_true;
                if (seen("--confounding"))
                    cfg.scenario.confounding = flag_cfg.scenario.confounding;
                if (seen("--leniency-spread"))
                    cfg.scenario.leniency_spread = flag_cfg.scenario.leniency_spread;
            }
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) return cmd_simulate(cfg);
        if (mat->parsed()) return cmd_match(cfg);
        if (est->parsed()) return cmd_estimate(cfg);
        if (sen->parsed()) return cmd_sensitivity(cfg);
        if (rep->parsed()) return cmd_report(cfg);
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const RowErrors& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        for (const auto& msg : e.row_messages) std::cerr << "  " << msg << "\n";
        return kExitSchema;
    } catch (const WeakInstrumentError& e) {
        std::cerr << "weak instrument: " << e.what() << "\n";
        return kExitWeakInstrument;
    } catch (const NoComplianceError& e) {
        std::cerr << "weak instrument: " << e.what() << "\n";
        return kExitWeakInstrument;
    } catch (const MissingArtifactError& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitOther;
    }
    return kExitOther;
}
