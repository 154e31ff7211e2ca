// isacbf command-line entry point.
//
//   isacbf solve        --config FILE --out DIR [--comm-only] [--beta-mode M] [--seed S]
//   isacbf sweep        --config FILE --out DIR --axis A --values v1,v2,... [--jobs N]
//   isacbf feasibility  --config FILE
//   isacbf beampattern  --beamformers FILE --out FILE.csv [--step DEG]
//   isacbf oracle-compare --config FILE --out DIR
//
// Errors go to stderr as JSON; exit codes 0 ok, 2 infeasible, 3 stalled, 4 config.

#include "isacbf/io/artifacts.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace isacbf;
using namespace isacbf::io;

int reportError(const Error& e)
{
    std::cerr << errorJson(e).dump() << '\n';
    return exitCodeFor(e.code());
}

int finish(const RunOutcome& outcome)
{
    if (outcome.status == "error")
        std::cerr << outcome.result.dump() << '\n';
    else
        std::cout << outcome.result.dump(2) << '\n';
    return outcome.exitCode;
}

std::optional<BetaMode> parseBetaMode(const std::string& s)
{
    if (s.empty()) return std::nullopt;
    if (s == "subgradient") return BetaMode::Subgradient;
    if (s == "closed-form") return BetaMode::ClosedForm;
    throw ValidationError("--beta-mode", "must be subgradient or closed-form");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ISAC beamforming by uplink-downlink duality"};
    app.require_subcommand(1);

    std::string config, out, betaMode, axis, beamformers;
    std::vector<double> values;
    bool commOnly = false;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    double step = 0.1;

    auto addRunFlags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "output directory")->required();
        cmd->add_option("--beta-mode", betaMode, "subgradient or closed-form")
            ->check(CLI::IsMember({"subgradient", "closed-form"}));
        cmd->add_option("--seed", seed, "override the scenario seed");
        cmd->add_flag("--comm-only", commOnly, "power-minimizing beamformers scaled to the budget");
    };

    CLI::App* solveCmd = app.add_subcommand("solve", "solve one scenario");
    addRunFlags(solveCmd);

    CLI::App* sweepCmd = app.add_subcommand("sweep", "re-solve over one parameter axis");
    addRunFlags(sweepCmd);
    sweepCmd->add_option("--axis", axis, "power | sinrDb | priorStd")
        ->required()
        ->check(CLI::IsMember({"power", "sinrDb", "priorStd"}));
    sweepCmd->add_option("--values", values, "sorted axis values")->required()->delimiter(',');
    sweepCmd->add_option("--jobs", jobs, "concurrent solves")->check(CLI::PositiveNumber);

    CLI::App* feasCmd = app.add_subcommand("feasibility", "minimum power for the SINR targets");
    feasCmd->add_option("--config", config, "scenario JSON")->required()->check(CLI::ExistingFile);

    CLI::App* bpCmd = app.add_subcommand("beampattern", "array response of saved beamformers");
    bpCmd->add_option("--beamformers", beamformers, "beamformers.json")->required()->check(CLI::ExistingFile);
    bpCmd->add_option("--out", out, "output CSV")->required();
    bpCmd->add_option("--step", step, "grid step in degrees")->check(CLI::PositiveNumber);

    CLI::App* oracleCmd = app.add_subcommand("oracle-compare", "cross-check against the SDR oracle if installed");
    addRunFlags(oracleCmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ExitConfig;
    }

    try {
        RunOptions opts;
        opts.commOnly = commOnly;
        opts.betaMode = parseBetaMode(betaMode);
        opts.seed = seed;

        if (*solveCmd) return finish(runSolve(loadScenario(config), out, opts));

        if (*sweepCmd) {
            const auto rows = runSweep(loadScenario(config), parseSweepAxis(axis), values, out, jobs, opts);
            int worst = ExitSuccess;
            for (const SweepRow& r : rows) worst = std::max(worst, r.outcome.exitCode);
            std::cout << (fs::path(out) / "summary.csv").string() << '\n';
            return worst;
        }

        if (*feasCmd) {
            const ScenarioConfig cfg = loadScenario(config);
            const IsacProblem problem = buildProblem(cfg);
            const Feasibility f = checkFeasibility(problem);
            json doc = {{"feasible", f.feasible},
                        {"uplinkStatus", to_string(f.status)},
                        {"powerBudget", problem.powerBudget},
                        {"minPower", std::isfinite(f.minPower) ? json(f.minPower) : json(nullptr)}};
            if (std::isfinite(f.minPower)) doc["marginDb"] = lin2db(problem.powerBudget / f.minPower);
            std::cout << doc.dump(2) << '\n';
            return f.feasible ? ExitSuccess : ExitInfeasible;
        }

        if (*bpCmd) {
            const CMat v = beamformersFromJson(readJson(beamformers));
            writeBeamPatternCsv(computeBeamPattern(v, -90.0, 90.0, step), out);
            return ExitSuccess;
        }

        if (*oracleCmd) return finish(runOracleCompare(config, out, opts));
    } catch (const Error& e) {
        return reportError(e);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}, {"exitCode", ExitInternal}}}}.dump()
                  << '\n';
        return ExitInternal;
    }
    return ExitInternal;
}
