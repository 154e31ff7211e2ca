#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/io/beampattern.hpp"
#include "isacbf/io/scenario.hpp"
#include "isacbf/link.hpp"
#include "isacbf/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace isacbf::io {

namespace fs = std::filesystem;

/// %.17g, enough to round-trip any double.
inline std::string formatDouble(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::ofstream openForWrite(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::MissingArtifact, "cannot write " + path.string());
    return out;
}

inline json readJson(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

inline void writeJson(const json& doc, const fs::path& path) { openForWrite(path) << doc.dump(2) << '\n'; }

// ---------------------------------------------------------------------------

inline void writeBeamPatternCsv(const BeamPattern& bp, const fs::path& path)
{
    std::ofstream out = openForWrite(path);
    out << "theta_deg,gain_linear,gain_db\n";
    for (std::size_t i = 0; i < bp.size(); ++i)
        out << formatDouble(bp.thetaDeg[i]) << ',' << formatDouble(bp.gain[i]) << ',' << formatDouble(bp.gainDb[i])
            << '\n';
}

inline BeamPattern readBeamPatternCsv(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "theta_deg,gain_linear,gain_db") throw Error(ErrorCode::ParseError, path.string() + ": bad header");
    BeamPattern bp;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double t = 0, g = 0, d = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &g, &d) != 3)
            throw Error(ErrorCode::ParseError, path.string() + ": bad row '" + line + "'");
        bp.thetaDeg.push_back(t);
        bp.gain.push_back(g);
        bp.gainDb.push_back(d);
    }
    return bp;
}

inline void writeTraceCsv(const std::vector<TraceRecord>& trace, const fs::path& path)
{
    std::ofstream out = openForWrite(path);
    out << "iter,lambda,dual,primal,gap,step,retries,beta_norm\n";
    for (const TraceRecord& r : trace)
        out << r.iteration << ',' << formatDouble(r.lambda) << ',' << formatDouble(r.dual) << ','
            << formatDouble(r.primal) << ',' << formatDouble(r.gap) << ',' << formatDouble(r.step) << ',' << r.retries
            << ',' << formatDouble(r.betaNorm) << '\n';
}

/// Column k of V is stored as [re_0, im_0, re_1, im_1, ...].
inline json beamformersToJson(const CMat& v)
{
    json cols = json::array();
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
        std::vector<double> col;
        col.reserve(static_cast<std::size_t>(2 * v.rows()));
        for (Eigen::Index n = 0; n < v.rows(); ++n) {
            col.push_back(v(n, k).real());
            col.push_back(v(n, k).imag());
        }
        cols.push_back(col);
    }
    return {{"schemaVersion", kSchemaVersion}, {"nTx", v.rows()}, {"users", v.cols()}, {"columns", cols}};
}

inline CMat beamformersFromJson(const json& doc)
{
    try {
        const auto nTx = doc.at("nTx").get<Eigen::Index>();
        const auto K = doc.at("users").get<Eigen::Index>();
        const json& cols = doc.at("columns");
        if (nTx < 1 || K < 1 || cols.size() != static_cast<std::size_t>(K))
            throw Error(ErrorCode::ParseError, "beamformers: column count disagrees with users");
        CMat v(nTx, K);
        for (Eigen::Index k = 0; k < K; ++k) {
            const auto col = cols[static_cast<std::size_t>(k)].get<std::vector<double>>();
            if (col.size() != static_cast<std::size_t>(2 * nTx))
                throw Error(ErrorCode::ParseError, "beamformers: column length must be 2 nTx");
            for (Eigen::Index n = 0; n < nTx; ++n)
                v(n, k) = cdouble(col[static_cast<std::size_t>(2 * n)], col[static_cast<std::size_t>(2 * n + 1)]);
        }
        return v;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("beamformers: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

enum ExitCode : int {
    ExitSuccess = 0,
    ExitInternal = 1,
    ExitInfeasible = 2,
    ExitStalled = 3,
    ExitConfig = 4,
};

inline int exitCodeFor(ErrorCode code)
{
    switch (code) {
    case ErrorCode::Infeasible: return ExitInfeasible;
    case ErrorCode::ParseError:
    case ErrorCode::ValidationError:
    case ErrorCode::QuadratureOrderTooSmall:
    case ErrorCode::InvalidStatistics:
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ZeroChannel: return ExitConfig;
    default: return ExitInternal;
    }
}

inline json errorJson(const Error& e)
{
    json err = {{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"exitCode", exitCodeFor(e.code())}};
    if (const auto* v = dynamic_cast<const ValidationError*>(&e)) err["field"] = v->field();
    return {{"error", err}};
}

struct RunOptions {
    bool commOnly = false;
    std::optional<BetaMode> betaMode;
    std::optional<std::uint64_t> seed;
};

struct RunOutcome {
    int exitCode = ExitSuccess;
    std::string status;
    double bcrb = std::numeric_limits<double>::quiet_NaN();
    double gap = std::numeric_limits<double>::quiet_NaN();
    double power = std::numeric_limits<double>::quiet_NaN();
    double wallSeconds = 0.0;
    json result; // result.json on success, error JSON otherwise
};

inline ScenarioConfig applyRunOptions(ScenarioConfig cfg, const RunOptions& opts)
{
    if (opts.betaMode) cfg.solver.betaMode = *opts.betaMode;
    if (opts.seed) cfg.seed = *opts.seed;
    return cfg;
}

/// Solves one scenario and writes result.json, beampattern.csv, trace.csv and
/// beamformers.json into outDir. Failures write error.json instead and are
/// reported through the exit code; nothing is thrown for solver or config errors.
inline RunOutcome runSolve(const ScenarioConfig& config, const fs::path& outDir, const RunOptions& opts = {})
{
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
    const ScenarioConfig cfg = applyRunOptions(config, opts);
    RunOutcome out;
    try {
        const IsacProblem problem = buildProblem(cfg);
        json result;
        result["schemaVersion"] = kSchemaVersion;
        result["mode"] = opts.commOnly ? "comm-only" : "isac";
        result["nTx"] = cfg.nTx;
        result["nRx"] = cfg.nRx;
        result["users"] = cfg.users();
        result["seed"] = cfg.seed;
        result["powerBudget"] = cfg.powerBudget;
        result["sinrTargetsDb"] = cfg.sinrTargetsDb;

        CMat v;
        std::vector<TraceRecord> trace;
        if (opts.commOnly) {
            const Feasibility feas = checkFeasibility(problem);
            if (!feas.feasible)
                throw Error(ErrorCode::Infeasible, "SINR targets cannot be met within the power budget");
            v = feas.commBeamformers * std::sqrt(problem.powerBudget / feas.minPower);
            out.status = "comm-only";
            out.bcrb = bcrbOf(problem, v);
            result["status"] = out.status;
            result["bcrb"] = out.bcrb;
            result["dualValue"] = nullptr;
            result["gap"] = nullptr;
            result["relativeGap"] = nullptr;
            result["iterations"] = 0;
            result["minCommPower"] = feas.minPower;
        } else {
            const SolveReport report = solve(problem, cfg.solver);
            v = report.V;
            trace = report.trace;
            out.status = to_string(report.status);
            out.bcrb = report.bcrb;
            out.gap = report.relativeGap;
            if (report.status != SolveStatus::Converged) out.exitCode = ExitStalled;
            result["status"] = out.status;
            result["betaMode"] = to_string(cfg.solver.betaMode);
            result["bcrb"] = report.bcrb;
            result["dualValue"] = report.dualValue;
            result["gap"] = report.gap;
            result["relativeGap"] = report.relativeGap;
            result["iterations"] = report.iterations;
            result["weakDualityViolations"] = report.weakDualityViolations;
            result["minCommPower"] = report.minCommPower;
        }
        out.power = totalPower(v);
        result["totalPower"] = out.power;
        const RVec sinr = downlinkSinr(problem.link.channels, v, problem.link.noisePower);
        std::vector<double> sinrDb;
        for (Eigen::Index k = 0; k < sinr.size(); ++k) sinrDb.push_back(lin2db(sinr(k)));
        result["sinrDb"] = sinrDb;

        fs::create_directories(outDir);
        writeBeamPatternCsv(computeBeamPattern(v), outDir / "beampattern.csv");
        writeTraceCsv(trace, outDir / "trace.csv");
        writeJson(beamformersToJson(v), outDir / "beamformers.json");
        out.wallSeconds = elapsed();
        result["wallTimeSeconds"] = out.wallSeconds;
        writeJson(result, outDir / "result.json");
        out.result = std::move(result);
    } catch (const Error& e) {
        out.exitCode = exitCodeFor(e.code());
        out.status = "error";
        out.result = errorJson(e);
        out.wallSeconds = elapsed();
        fs::create_directories(outDir);
        writeJson(out.result, outDir / "error.json");
    }
    return out;
}

// ---------------------------------------------------------------------------

enum class SweepAxis { Power, SinrDb, PriorStd };

inline SweepAxis parseSweepAxis(const std::string& name)
{
    if (name == "power") return SweepAxis::Power;
    if (name == "sinrDb") return SweepAxis::SinrDb;
    if (name == "priorStd") return SweepAxis::PriorStd;
    throw ValidationError("axis", "must be one of power, sinrDb, priorStd");
}

inline const char* to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::Power: return "power";
    case SweepAxis::SinrDb: return "sinrDb";
    case SweepAxis::PriorStd: return "priorStd";
    }
    return "unknown";
}

/// sinrDb sets the target of every user to the same value.
inline ScenarioConfig applySweepValue(ScenarioConfig cfg, SweepAxis axis, double value)
{
    switch (axis) {
    case SweepAxis::Power:
        detail::positive(value, "values");
        cfg.powerBudget = value;
        break;
    case SweepAxis::SinrDb:
        if (!std::isfinite(value)) throw ValidationError("values", "must be finite");
        std::fill(cfg.sinrTargetsDb.begin(), cfg.sinrTargetsDb.end(), value);
        break;
    case SweepAxis::PriorStd:
        detail::positive(value, "values");
        cfg.sensing.priorStdDeg = value;
        break;
    }
    return cfg;
}

struct SweepRow {
    double value = 0.0;
    RunOutcome outcome;
};

inline fs::path sweepPointDir(const fs::path& outDir, std::size_t i)
{
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu", i);
    return outDir / name;
}

/// One runSolve per value, each into its own point_NNN directory, at most `jobs` at a
/// time. Failed points are recorded in summary.csv and do not stop the sweep.
inline std::vector<SweepRow> runSweep(const ScenarioConfig& config, SweepAxis axis, const std::vector<double>& values,
                                      const fs::path& outDir, int jobs = 1, const RunOptions& opts = {})
{
    if (values.empty()) throw ValidationError("values", "needs at least one value");
    if (!std::is_sorted(values.begin(), values.end())) throw ValidationError("values", "must be sorted ascending");
    std::vector<ScenarioConfig> configs;
    for (double value : values) configs.push_back(applySweepValue(config, axis, value));

    std::vector<SweepRow> rows(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            rows[i].value = values[i];
            rows[i].outcome = runSolve(configs[i], sweepPointDir(outDir, i), opts);
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = static_cast<std::size_t>(std::max(1, jobs));
        for (std::size_t t = 0; t < std::min(n, values.size()); ++t) pool.emplace_back(worker);
    }

    std::ofstream csv = openForWrite(outDir / "summary.csv");
    csv << "value,bcrb,gap,power,runtime,status,exit_code\n";
    for (const SweepRow& r : rows)
        csv << formatDouble(r.value) << ',' << formatDouble(r.outcome.bcrb) << ',' << formatDouble(r.outcome.gap) << ','
            << formatDouble(r.outcome.power) << ',' << formatDouble(r.outcome.wallSeconds) << ',' << r.outcome.status
            << ',' << r.outcome.exitCode << '\n';
    return rows;
}

// ---------------------------------------------------------------------------

inline constexpr const char* kOracleEnv = "ISACBF_SDR_ORACLE";

inline std::string shellQuote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

/// Runs the primary solve into outDir/primary, then hands the scenario and the
/// primary artifacts to the external SDR oracle named by $ISACBF_SDR_ORACLE:
///
///   $ISACBF_SDR_ORACLE --config <scenario> --primary <outDir/primary> --out <outDir>
///
/// which must leave compare_report.json in outDir. Without the variable the compare
/// step is skipped and recorded as unavailable in outDir/oracle_status.json.
inline RunOutcome runOracleCompare(const fs::path& scenarioPath, const fs::path& outDir, const RunOptions& opts = {})
{
    RunOutcome primary = runSolve(loadScenario(scenarioPath), outDir / "primary", opts);
    if (primary.exitCode != ExitSuccess) return primary;

    const char* oracle = std::getenv(kOracleEnv);
    if (oracle == nullptr || *oracle == '\0') {
        primary.result = {{"oracle", {{"available", false}, {"reason", std::string(kOracleEnv) + " is not set"}}}};
        writeJson(primary.result, outDir / "oracle_status.json");
        return primary;
    }
    const fs::path report = outDir / "compare_report.json";
    fs::remove(report);
    const std::string cmd = std::string(oracle) + " --config " + shellQuote(fs::absolute(scenarioPath).string()) +
                            " --primary " + shellQuote(fs::absolute(outDir / "primary").string()) + " --out " +
                            shellQuote(fs::absolute(outDir).string());
    const int rc = std::system(cmd.c_str());
    if (rc != 0 || !fs::exists(report)) {
        const Error e(ErrorCode::MissingArtifact, "SDR oracle failed (status " + std::to_string(rc) +
                                                      ") or produced no compare_report.json");
        primary.exitCode = exitCodeFor(e.code());
        primary.status = "error";
        primary.result = errorJson(e);
        writeJson(primary.result, outDir / "error.json");
        return primary;
    }
    primary.result = {{"oracle", {{"available", true}, {"report", readJson(report)}}}};
    writeJson(primary.result, outDir / "oracle_status.json");
    return primary;
}

} // namespace isacbf::io
