#include "switchlab/scenario.hpp"

#include "experiments.hpp"
#include "switchlab/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace switchlab {

namespace {

const std::vector<std::pair<Experiment, std::string>>& experiment_table() {
    static const std::vector<std::pair<Experiment, std::string>> t = {
        {Experiment::SpectralRadius, "spectral_radius"},
        {Experiment::ExpansionRates, "expansion_rates"},
        {Experiment::OrbitFloquet, "orbit_floquet"},
        {Experiment::InvariantDensity, "invariant_density"},
        {Experiment::ThresholdSweep, "threshold_sweep"},
        {Experiment::FastSwitchingSweep, "fast_switching_sweep"},
        {Experiment::BlowupAffine, "blowup_affine"},
        {Experiment::GammaSupport, "gamma_support"},
        {Experiment::NeumannCheck, "neumann_check"},
        {Experiment::TelegraphOracle, "telegraph_oracle"},
    };
    return t;
}

Experiment experiment_from(const std::string& name) {
    for (const auto& [e, n] : experiment_table())
        if (n == name) return e;
    throw ConfigError("unknown experiment " + name);
}

// Experiments that sweep sweep.param over sweep.values themselves.
bool sweeps_internally(Experiment e) {
    return e == Experiment::ThresholdSweep || e == Experiment::FastSwitchingSweep ||
           e == Experiment::BlowupAffine || e == Experiment::TelegraphOracle;
}

std::string quoted(std::string s) {
    std::replace(s.begin(), s.end(), '"', '\'');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return "\"" + s + "\"";
}

std::uint64_t read_seed(const Config& cfg) {
    if (!cfg.has("seed")) return 0;
    const std::string s = cfg.str("seed");
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    cfg.fail("seed", "expected a non-negative integer");
}

Vec read_vec(const Config& cfg, const std::string& key, int dim) {
    const auto v = cfg.nums(key);
    if (static_cast<int>(v.size()) != dim) cfg.fail(key, "expected " + std::to_string(dim) + " numbers");
    Vec out(dim);
    for (int i = 0; i < dim; ++i) out[i] = v[i];
    return out;
}

}  // namespace

std::string to_string(Experiment e) {
    for (const auto& [x, n] : experiment_table())
        if (x == e) return n;
    return "?";
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& p : experiment_table()) out.push_back(p.second);
        return out;
    }();
    return names;
}

std::string to_string(Status s) {
    switch (s) {
    case Status::Pass: return "pass";
    case Status::Inconclusive: return "inconclusive";
    case Status::Fail: return "fail";
    case Status::Info: return "info";
    }
    return "?";
}

int exit_code(Status s) {
    switch (s) {
    case Status::Fail: return 1;
    case Status::Inconclusive: return 2;
    default: return 0;
    }
}

Status RunReport::status() const {
    bool inconclusive = false;
    for (const auto& v : verdicts) {
        if (v.status == Status::Fail) return Status::Fail;
        inconclusive = inconclusive || v.status == Status::Inconclusive;
    }
    return inconclusive ? Status::Inconclusive : Status::Pass;
}

const Metric* RunReport::metric(const std::string& key) const {
    for (const auto& m : metrics)
        if (m.key == key) return &m;
    return nullptr;
}

const VerdictEntry* RunReport::verdict(const std::string& name) const {
    for (const auto& v : verdicts)
        if (v.name == name) return &v;
    return nullptr;
}

void RunReport::write(std::ostream& os) const {
    os << "scenario = " << scenario << "\n";
    os << "experiment = " << experiment << "\n";
    os << "config_hash = " << config_hash << "\n";
    os << "seed = " << seed << "\n";
    os << "status = " << to_string(status()) << "\n";
    os << "wall_time_s = " << detail::fmt(wall_time) << "\n";
    if (budget > 0.0) os << "budget_s = " << detail::fmt(budget) << "\n";
    std::string list;
    for (const auto& f : files) list += (list.empty() ? "" : ", ") + f;
    os << "files = " << quoted(list) << "\n";
    os << "\n[metrics]\n";
    for (const auto& m : metrics) {
        os << m.key << " = " << detail::fmt(m.value) << "\n";
        if (!m.diagnostic.empty()) os << m.key << ".diagnostic = " << quoted(m.diagnostic) << "\n";
    }
    os << "\n[verdicts]\n";
    for (const auto& v : verdicts) {
        os << v.name << " = " << to_string(v.status) << "\n";
        if (!v.detail.empty()) os << v.name << ".detail = " << quoted(v.detail) << "\n";
    }
}

std::filesystem::path default_out_root() {
    const char* env = std::getenv("SWITCHLAB_OUT");
    return env && *env ? std::filesystem::path(env) : std::filesystem::path("out");
}

Space build_space(const Config& cfg, const std::string& prefix) {
    const std::string kind = cfg.choice(prefix + ".kind", {"circle", "torus2", "box"});
    if (kind == "circle") return Space::torus1();
    if (kind == "torus2") return Space::torus2();
    const auto lo = cfg.nums(prefix + ".lower");
    const int dim = static_cast<int>(lo.size());
    if (dim < 1 || dim > kMaxDim) cfg.fail(prefix + ".lower", "box dimension must be 1 or 2");
    try {
        return Space::box(read_vec(cfg, prefix + ".lower", dim), read_vec(cfg, prefix + ".upper", dim));
    } catch (const InvalidArgument& e) {
        cfg.fail(prefix + ".upper", e.what());
    }
}

FieldSpec build_field(const Config& cfg, const std::string& prefix, int dim) {
    const std::string key = prefix + ".kind";
    const std::string kind =
        cfg.choice(key, {"constant", "shear_sin", "affine", "circle1d", "counter_campbell"});
    auto field = [&]() -> FieldSpec {
        if (kind == "constant") return FieldSpec::constant(read_vec(cfg, prefix + ".velocity", dim));
        if (kind == "shear_sin")
            return FieldSpec::shear_sin(cfg.num(prefix + ".speed", 1.0), cfg.num(prefix + ".amplitude"));
        if (kind == "affine") {
            const auto m = cfg.nums(prefix + ".matrix");
            if (static_cast<int>(m.size()) != dim * dim)
                cfg.fail(prefix + ".matrix", "expected " + std::to_string(dim * dim) + " entries (row-major)");
            Mat a(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) a(i, j) = m[i * dim + j];
            return FieldSpec::affine(a, read_vec(cfg, prefix + ".anchor", dim));
        }
        if (kind == "circle1d") {
            const std::string p = cfg.choice(prefix + ".profile", {"trig", "poly"});
            return FieldSpec::circle1d(p == "trig" ? Profile::Trig : Profile::Poly, cfg.nums(prefix + ".params"));
        }
        return FieldSpec::counter_campbell(cfg.num(prefix + ".alpha"));
    };
    try {
        FieldSpec f = field();
        if (f.dim() != dim) cfg.fail(key, "field dimension does not match the space");
        return f;
    } catch (const InvalidArgument& e) {
        cfg.fail(key, e.what());
    }
}

std::vector<FieldSpec> build_modes(const Config& cfg, int dim) {
    std::vector<FieldSpec> out;
    for (int i = 0; cfg.has("modes." + std::to_string(i) + ".kind"); ++i)
        out.push_back(build_field(cfg, "modes." + std::to_string(i), dim));
    if (out.empty()) throw ConfigError(cfg.source() + ": no modes (expected [modes.0] with a kind)");
    return out;
}

Eigen::MatrixXd build_rates(const Config& cfg, int modes) {
    const double all = cfg.num("rates.all", 0.0);
    const double scale = cfg.num("rates.scale", 1.0);
    Eigen::MatrixXd r = Eigen::MatrixXd::Constant(modes, modes, all);
    for (int i = 0; i < modes; ++i) {
        r(i, i) = 0.0;
        for (int j = 0; j < modes; ++j) {
            const std::string key = "rates.r" + std::to_string(i) + std::to_string(j);
            if (!cfg.has(key)) continue;
            if (i == j) cfg.fail(key, "diagonal rates are implied");
            r(i, j) = cfg.num(key);
        }
    }
    return scale * r;
}

Characteristics build_characteristics(const Config& cfg) {
    const Space space = build_space(cfg);
    auto modes = build_modes(cfg, space.dim());
    const auto rates = build_rates(cfg, static_cast<int>(modes.size()));
    try {
        auto ch = Characteristics::constant_rates(space, std::move(modes), rates);
        if (cfg.has("sim.step")) ch.set_integrator(IntegratorOpts{cfg.num("sim.step")});
        return ch;
    } catch (const InvalidArgument& e) {
        throw ConfigError(cfg.source() + ": " + e.what());
    }
}

MapHandle build_map(const Config& cfg) {
    const std::string kind =
        cfg.choice("map.kind", {"counter_campbell", "expanding", "rotation", "identity", "flow"});
    IntegratorOpts io;
    if (cfg.has("map.step")) io.step = cfg.num("map.step");
    if (kind == "expanding")
        return MapHandle::expanding(static_cast<int>(cfg.integer("map.multiplier")), cfg.num("map.eps", 0.0));
    if (kind == "rotation") return MapHandle::rotation(cfg.num("map.theta"));
    if (kind == "counter_campbell")
        return MapHandle::from_flow(Space::torus1(), FieldSpec::counter_campbell(cfg.num("map.alpha")),
                                    cfg.num("map.time", 1.0), io);
    const Space space = build_space(cfg);
    if (kind == "identity") return MapHandle::identity(space);
    return MapHandle::from_flow(space, build_field(cfg, "map.field", space.dim()), cfg.num("map.time", 1.0), io);
}

RunReport run_scenario(Config cfg, const RunContext& ctx) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.scenario = cfg.str("id");
    const Experiment exp = experiment_from(cfg.choice("experiment", experiment_names()));
    report.experiment = to_string(exp);
    cfg.str("description", "");
    cfg.touch("sweep.sweepable");
    report.budget = cfg.num("budget_s", 0.0);
    report.seed = ctx.seed ? *ctx.seed : read_seed(cfg);
    cfg.set("seed", std::to_string(report.seed));
    cfg.touch("seed");
    report.config_hash = cfg.content_hash();
    report.out_dir = ctx.out_root / cfg.str("output", report.scenario);

    detail::Output out(report.out_dir, ctx.write_files);
    detail::ExpCtx x{cfg, report.seed, ctx.threads, out, report};
    switch (exp) {
    case Experiment::SpectralRadius: detail::run_spectral_radius(x); break;
    case Experiment::ExpansionRates: detail::run_expansion_rates(x); break;
    case Experiment::OrbitFloquet: detail::run_orbit_floquet(x); break;
    case Experiment::InvariantDensity: detail::run_invariant_density(x); break;
    case Experiment::ThresholdSweep: detail::run_threshold_sweep(x); break;
    case Experiment::FastSwitchingSweep: detail::run_fast_switching_sweep(x); break;
    case Experiment::BlowupAffine: detail::run_blowup_affine(x); break;
    case Experiment::GammaSupport: detail::run_gamma_support(x); break;
    case Experiment::NeumannCheck: detail::run_neumann_check(x); break;
    case Experiment::TelegraphOracle: detail::run_telegraph_oracle(x); break;
    }
    out.finish();

    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report.budget > 0.0)
        report.verdicts.push_back({"runtime", report.wall_time <= report.budget ? Status::Pass : Status::Fail,
                                   detail::fmt(report.wall_time) + " s of a " + detail::fmt(report.budget) +
                                       " s budget"});
    report.files = out.files();
    report.files.push_back("report.txt");
    if (ctx.write_files) {
        std::ofstream os(report.out_dir / "report.txt", std::ios::binary);
        report.write(os);
    }
    return report;
}

RunReport run_file(const std::filesystem::path& file, const RunContext& ctx) {
    return run_scenario(Config::load(file), ctx);
}

RunReport sweep_scenario(Config cfg, const std::string& param, const std::vector<double>& values,
                         const RunContext& ctx) {
    if (values.empty()) throw ConfigError(cfg.source() + ": sweep needs at least one value");
    std::vector<std::string> declared;
    if (cfg.has("sweep.sweepable")) declared = cfg.strs("sweep.sweepable");
    const std::string own = cfg.str("sweep.param", "");
    if (!own.empty()) declared.push_back(own);
    if (std::find(declared.begin(), declared.end(), param) == declared.end())
        throw ConfigError(cfg.source() + ": '" + param + "' is not a declared sweepable key");

    const Experiment exp = experiment_from(cfg.choice("experiment", experiment_names()));
    if (sweeps_internally(exp) && param == own) {
        cfg.set("sweep.values", detail::join(values));
        return run_scenario(std::move(cfg), ctx);
    }

    const auto t0 = std::chrono::steady_clock::now();
    RunReport agg;
    agg.scenario = cfg.str("id");
    agg.experiment = to_string(exp) + " sweep over " + param;
    agg.seed = ctx.seed ? *ctx.seed : read_seed(cfg);
    Config hashed = cfg;
    hashed.set("seed", std::to_string(agg.seed));
    hashed.set("sweep.cli.param", param);
    hashed.set("sweep.cli.values", detail::join(values));
    agg.config_hash = hashed.content_hash();
    agg.out_dir = ctx.out_root / cfg.str("output", agg.scenario);

    std::string csv = "value,metric,estimate,verdict\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        Config c = cfg;
        c.set(param, detail::fmt(values[i]));
        RunContext sub = ctx;
        sub.seed = derive_seed(agg.seed, i);
        sub.out_root = agg.out_dir / ("sweep_" + std::to_string(i));
        c.set("output", ".");
        const RunReport r = run_scenario(std::move(c), sub);
        const std::string tag = "value" + std::to_string(i);
        const Metric* m = r.metrics.empty() ? nullptr : &r.metrics.front();
        const std::string name = m ? m->key : "none";
        const double est = m ? m->value : 0.0;
        csv += detail::fmt(values[i]) + "," + name + "," + detail::fmt(est) + "," + to_string(r.status()) + "\n";
        agg.metrics.push_back({tag + "." + name, est, param + " = " + detail::fmt(values[i]) +
                                                          (m ? "; " + m->diagnostic : std::string())});
        agg.verdicts.push_back({tag, r.status(), param + " = " + detail::fmt(values[i])});
        for (const auto& f : r.files) agg.files.push_back("sweep_" + std::to_string(i) + "/" + f);
    }
    agg.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ctx.write_files) {
        std::filesystem::create_directories(agg.out_dir);
        std::ofstream(agg.out_dir / "sweep.csv", std::ios::binary) << csv;
        agg.files.push_back("sweep.csv");
        agg.files.push_back("report.txt");
        std::ofstream os(agg.out_dir / "report.txt", std::ios::binary);
        agg.write(os);
    }
    return agg;
}

std::vector<ScenarioInfo> list_scenarios(const std::filesystem::path& dir) {
    std::vector<ScenarioInfo> out;
    if (!std::filesystem::is_directory(dir)) throw ConfigError("no scenario directory " + dir.string());
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() != ".cfg") continue;
        const Config c = Config::load(e.path());
        out.push_back({c.str("id"), c.str("experiment"), c.str("description", ""), c.num("budget_s", 0.0),
                       e.path()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

}  // namespace switchlab
