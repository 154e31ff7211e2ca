#pragma once

#include "isacbf/errors.hpp"
#include "isacbf/linalg.hpp"
#include "isacbf/sensing_model.hpp"
#include "isacbf/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace isacbf::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class ChannelKind { LineOfSight, Explicit, Rayleigh };

struct ChannelSpec {
    ChannelKind kind = ChannelKind::LineOfSight;
    std::vector<double> anglesDeg; // LineOfSight
    std::vector<double> gains;     // LineOfSight / Rayleigh, power gain per user
    CMat explicitChannels;         // Explicit, N_T x K
};

struct ScenarioConfig {
    int schemaVersion = kSchemaVersion;
    std::string note;
    int nTx = 1;
    int nRx = 1;
    int symbols = 1;
    double noisePower = 1.0;
    double powerBudget = 1.0;
    std::vector<double> sinrTargetsDb;
    ChannelSpec channel;
    AoAModel sensing;
    SolveOptions solver;
    std::uint64_t seed = 1;

    std::size_t users() const { return sinrTargetsDb.size(); }
};

namespace detail {

// Typed field access with dotted paths in the error messages.
class Reader {
public:
    Reader(const json& node, std::string path)
        : node_(node)
        , path_(std::move(path))
    {
        if (!node_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "must be an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return node_.contains(key); }
    const json& at(const std::string& key) const
    {
        if (!node_.contains(key)) throw ValidationError(field(key), "missing required field");
        return node_.at(key);
    }
    Reader child(const std::string& key) const { return Reader(at(key), field(key)); }

    double number(const std::string& key) const
    {
        const json& v = at(key);
        if (!v.is_number()) throw ValidationError(field(key), "must be a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key) const
    {
        const json& v = at(key);
        if (!v.is_number_integer()) throw ValidationError(field(key), "must be an integer");
        return v.get<int>();
    }
    int integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

    std::string string(const std::string& key, const std::string& fallback) const
    {
        if (!has(key)) return fallback;
        const json& v = at(key);
        if (!v.is_string()) throw ValidationError(field(key), "must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) const
    {
        const json& v = at(key);
        if (!v.is_array()) throw ValidationError(field(key), "must be an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ValidationError(field(key) + "[" + std::to_string(i) + "]", "must be a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

private:
    const json& node_;
    std::string path_;
};

inline void positive(double value, const std::string& field)
{
    if (!(value > 0.0) || !std::isfinite(value)) throw ValidationError(field, "must be a positive finite number");
}

} // namespace detail

/// Validates a parsed JSON document and converts it to a ScenarioConfig.
inline ScenarioConfig parseScenario(const json& doc)
{
    const detail::Reader root(doc, "");
    ScenarioConfig cfg;
    cfg.schemaVersion = root.integer("schemaVersion");
    if (cfg.schemaVersion != kSchemaVersion)
        throw ValidationError("schemaVersion", "unsupported version " + std::to_string(cfg.schemaVersion));
    cfg.note = root.string("note", "");
    cfg.nTx = root.integer("nTx");
    cfg.nRx = root.integer("nRx", cfg.nTx);
    cfg.symbols = root.integer("symbols", 1);
    cfg.noisePower = root.number("noisePower");
    cfg.powerBudget = root.number("powerBudget");
    cfg.sinrTargetsDb = root.numbers("sinrTargetsDb");
    if (cfg.nTx < 1) throw ValidationError("nTx", "must be >= 1");
    if (cfg.nRx < 1) throw ValidationError("nRx", "must be >= 1");
    if (cfg.symbols < 1) throw ValidationError("symbols", "must be >= 1");
    detail::positive(cfg.noisePower, "noisePower");
    detail::positive(cfg.powerBudget, "powerBudget");
    if (cfg.sinrTargetsDb.empty()) throw ValidationError("sinrTargetsDb", "needs at least one user");
    for (std::size_t k = 0; k < cfg.sinrTargetsDb.size(); ++k)
        if (!std::isfinite(cfg.sinrTargetsDb[k]))
            throw ValidationError("sinrTargetsDb[" + std::to_string(k) + "]", "must be finite");
    const std::size_t K = cfg.sinrTargetsDb.size();

    const detail::Reader ch = root.child("channel");
    const std::string type = ch.string("type", "");
    if (type == "los") {
        cfg.channel.kind = ChannelKind::LineOfSight;
        cfg.channel.anglesDeg = ch.numbers("anglesDeg");
        cfg.channel.gains = ch.has("gains") ? ch.numbers("gains") : std::vector<double>(K, 1.0);
        if (cfg.channel.anglesDeg.size() != K)
            throw ValidationError("channel.anglesDeg", "needs one angle per entry of sinrTargetsDb");
    } else if (type == "rayleigh") {
        cfg.channel.kind = ChannelKind::Rayleigh;
        cfg.channel.gains = ch.has("gains") ? ch.numbers("gains") : std::vector<double>(K, 1.0);
    } else if (type == "explicit") {
        cfg.channel.kind = ChannelKind::Explicit;
        const json& users = ch.at("users");
        if (!users.is_array() || users.size() != K)
            throw ValidationError("channel.users", "needs one channel per entry of sinrTargetsDb");
        cfg.channel.explicitChannels.resize(cfg.nTx, static_cast<Eigen::Index>(K));
        for (std::size_t k = 0; k < K; ++k) {
            const detail::Reader u(users[k], "channel.users[" + std::to_string(k) + "]");
            const auto re = u.numbers("re");
            const auto im = u.numbers("im");
            if (re.size() != static_cast<std::size_t>(cfg.nTx) || im.size() != re.size())
                throw ValidationError(u.field("re"), "re and im must both have nTx entries");
            for (int n = 0; n < cfg.nTx; ++n)
                cfg.channel.explicitChannels(n, static_cast<Eigen::Index>(k)) = cdouble(re[n], im[n]);
        }
    } else {
        throw ValidationError("channel.type", "must be one of \"los\", \"explicit\", \"rayleigh\"");
    }
    if (cfg.channel.kind != ChannelKind::Explicit) {
        if (cfg.channel.gains.size() != K) throw ValidationError("channel.gains", "needs one gain per user");
        for (std::size_t k = 0; k < K; ++k) detail::positive(cfg.channel.gains[k], "channel.gains[" + std::to_string(k) + "]");
    }

    const detail::Reader s = root.child("sensing");
    if (s.string("model", "aoa") != "aoa") throw ValidationError("sensing.model", "only \"aoa\" is supported");
    cfg.sensing.nTx = cfg.nTx;
    cfg.sensing.nRx = cfg.nRx;
    if (s.has("pathGain")) {
        const detail::Reader g = s.child("pathGain");
        cfg.sensing.pathGain = cdouble(g.number("re", 1.0), g.number("im", 0.0));
    }
    cfg.sensing.priorMeanDeg = s.number("priorMeanDeg", 0.0);
    cfg.sensing.priorStdDeg = s.number("priorStdDeg");
    cfg.sensing.quadratureOrder = s.integer("quadratureOrder", AoAModel{}.quadratureOrder);
    detail::positive(cfg.sensing.priorStdDeg, "sensing.priorStdDeg");
    if (cfg.sensing.quadratureOrder < 2) throw ValidationError("sensing.quadratureOrder", "must be >= 2");

    if (root.has("solver")) {
        const detail::Reader o = root.child("solver");
        SolveOptions& so = cfg.solver;
        so.gapTolerance = o.number("gapTol", so.gapTolerance);
        so.powerTolerance = o.number("powerTol", so.powerTolerance);
        so.maxIterations = o.integer("maxIterations", so.maxIterations);
        so.maxHalvings = o.integer("maxHalvings", so.maxHalvings);
        so.lambdaStep = o.number("lambdaStep", so.lambdaStep);
        so.betaStep = o.number("betaStep", so.betaStep);
        const std::string mode = o.string("betaMode", "subgradient");
        if (mode == "subgradient")
            so.betaMode = BetaMode::Subgradient;
        else if (mode == "closed-form")
            so.betaMode = BetaMode::ClosedForm;
        else
            throw ValidationError("solver.betaMode", "must be \"subgradient\" or \"closed-form\"");
        detail::positive(so.gapTolerance, "solver.gapTol");
        detail::positive(so.powerTolerance, "solver.powerTol");
        detail::positive(so.lambdaStep, "solver.lambdaStep");
        detail::positive(so.betaStep, "solver.betaStep");
        if (so.maxIterations < 1) throw ValidationError("solver.maxIterations", "must be >= 1");
        if (so.maxHalvings < 0) throw ValidationError("solver.maxHalvings", "must be >= 0");
        if (o.has("seed")) {
            const json& seed = o.at("seed");
            if (!seed.is_number_unsigned()) throw ValidationError("solver.seed", "must be a nonnegative integer");
            cfg.seed = seed.get<std::uint64_t>();
        }
    }
    return cfg;
}

inline ScenarioConfig loadScenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return parseScenario(doc);
}

inline json toJson(const ScenarioConfig& cfg)
{
    json doc;
    doc["schemaVersion"] = cfg.schemaVersion;
    if (!cfg.note.empty()) doc["note"] = cfg.note;
    doc["nTx"] = cfg.nTx;
    doc["nRx"] = cfg.nRx;
    doc["symbols"] = cfg.symbols;
    doc["noisePower"] = cfg.noisePower;
    doc["powerBudget"] = cfg.powerBudget;
    doc["sinrTargetsDb"] = cfg.sinrTargetsDb;

    json ch;
    switch (cfg.channel.kind) {
    case ChannelKind::LineOfSight:
        ch["type"] = "los";
        ch["anglesDeg"] = cfg.channel.anglesDeg;
        ch["gains"] = cfg.channel.gains;
        break;
    case ChannelKind::Rayleigh:
        ch["type"] = "rayleigh";
        ch["gains"] = cfg.channel.gains;
        break;
    case ChannelKind::Explicit: {
        ch["type"] = "explicit";
        json users = json::array();
        const CMat& h = cfg.channel.explicitChannels;
        for (Eigen::Index k = 0; k < h.cols(); ++k) {
            std::vector<double> re(static_cast<std::size_t>(h.rows())), im(re.size());
            for (Eigen::Index n = 0; n < h.rows(); ++n) {
                re[static_cast<std::size_t>(n)] = h(n, k).real();
                im[static_cast<std::size_t>(n)] = h(n, k).imag();
            }
            users.push_back({{"re", re}, {"im", im}});
        }
        ch["users"] = users;
        break;
    }
    }
    doc["channel"] = ch;

    doc["sensing"] = {
        {"model", "aoa"},
        {"pathGain", {{"re", cfg.sensing.pathGain.real()}, {"im", cfg.sensing.pathGain.imag()}}},
        {"priorMeanDeg", cfg.sensing.priorMeanDeg},
        {"priorStdDeg", cfg.sensing.priorStdDeg},
        {"quadratureOrder", cfg.sensing.quadratureOrder},
    };
    doc["solver"] = {
        {"gapTol", cfg.solver.gapTolerance},
        {"powerTol", cfg.solver.powerTolerance},
        {"maxIterations", cfg.solver.maxIterations},
        {"maxHalvings", cfg.solver.maxHalvings},
        {"lambdaStep", cfg.solver.lambdaStep},
        {"betaStep", cfg.solver.betaStep},
        {"betaMode", to_string(cfg.solver.betaMode)},
        {"seed", cfg.seed},
    };
    return doc;
}

inline void saveScenario(const ScenarioConfig& cfg, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
    out << toJson(cfg).dump(2) << '\n';
}

/// Channel matrix H (N_T x K): LOS users get sqrt(gain) a_T(theta_k); Rayleigh users
/// draw CN(0, gain I) from the scenario seed.
inline CMat materializeChannels(const ScenarioConfig& cfg)
{
    const auto K = static_cast<Eigen::Index>(cfg.users());
    switch (cfg.channel.kind) {
    case ChannelKind::Explicit: return cfg.channel.explicitChannels;
    case ChannelKind::LineOfSight: {
        CMat h(cfg.nTx, K);
        for (Eigen::Index k = 0; k < K; ++k)
            h.col(k) = std::sqrt(cfg.channel.gains[static_cast<std::size_t>(k)]) *
                       steeringVector(cfg.nTx, deg2rad(cfg.channel.anglesDeg[static_cast<std::size_t>(k)]));
        return h;
    }
    case ChannelKind::Rayleigh: {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
        CMat h(cfg.nTx, K);
        for (Eigen::Index k = 0; k < K; ++k) {
            const double g = std::sqrt(cfg.channel.gains[static_cast<std::size_t>(k)]);
            for (Eigen::Index n = 0; n < cfg.nTx; ++n) h(n, k) = g * cdouble(normal(rng), normal(rng));
        }
        return h;
    }
    }
    return {};
}

/// Problem instance for the solver. The quadrature self-check runs here, so an
/// insufficient sensing.quadratureOrder surfaces as a configuration error.
inline IsacProblem buildProblem(const ScenarioConfig& cfg)
{
    IsacProblem p;
    p.link.channels = materializeChannels(cfg);
    p.link.sinrTargets.resize(static_cast<Eigen::Index>(cfg.users()));
    for (std::size_t k = 0; k < cfg.users(); ++k) p.link.sinrTargets(static_cast<Eigen::Index>(k)) = db2lin(cfg.sinrTargetsDb[k]);
    p.link.noisePower = cfg.noisePower;
    p.powerBudget = cfg.powerBudget;
    p.symbols = cfg.symbols;
    AoAModel model = cfg.sensing;
    model.nTx = cfg.nTx;
    model.nRx = cfg.nRx;
    p.sensing = computeStatistics(model, /*selfCheck=*/true);
    return p;
}

} // namespace isacbf::io
