// Runs the shipped scenarios and prints one PASS/FAIL line per acceptance
// criterion. Thresholds are checked here against the reports and CSV output,
// with closed forms recomputed independently of the library.

#include "switchlab/scenario.hpp"
#include "telegraph_oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace switchlab;

namespace {

std::filesystem::path g_out;

struct Outcome {
    bool pass = false;
    std::string detail;
};

RunReport run(const std::string& name) {
    RunContext ctx;
    ctx.out_root = g_out;
    return run_file(std::filesystem::path(SWITCHLAB_SCENARIO_DIR) / (name + ".cfg"), ctx);
}

double metric(const RunReport& r, const std::string& key) {
    const Metric* m = r.metric(key);
    if (!m) throw std::runtime_error(r.scenario + ": missing metric " + key);
    return m->value;
}

std::string num(double v, int digits = 4) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// CSV with a header row; returns rows as column -> text.
std::vector<std::map<std::string, std::string>> read_csv(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::string cell;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') quoted = !quoted;
            else if (c == ',' && !quoted) {
                out.push_back(cell);
                cell.clear();
            } else cell += c;
        }
        out.push_back(cell);
        return out;
    };
    std::string line;
    std::getline(in, line);
    const auto head = split(line);
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < head.size() && i < cells.size(); ++i) row[head[i]] = cells[i];
        rows.push_back(row);
    }
    return rows;
}

bool rel_close(double v, double want, double tol) { return std::abs(v - want) <= tol * std::abs(want); }

Outcome c1() {
    const auto r = run("countercampbell_alpha2");
    bool ok = r.wall_time < 60.0;
    std::string d = "radius";
    for (int k = 0; k <= 2; ++k) {
        const double v = metric(r, "radius.k" + std::to_string(k));
        ok = ok && rel_close(v, std::pow(2.0, k + 1), 0.15);
        d += " " + num(v);
    }
    return {ok, d + " vs 2 4 8 (15%); " + num(r.wall_time, 3) + " s"};
}

Outcome c2() {
    const auto r = run("doubling_radius");
    const double a = metric(r, "radius.k0"), b = metric(r, "radius.k1");
    return {std::abs(a - 1) <= 0.05 && std::abs(b - 1) <= 0.05 && r.wall_time < 30.0,
            "radius " + num(a) + " " + num(b) + " vs 1 +- 0.05; " + num(r.wall_time, 3) + " s"};
}

Outcome c3() {
    const auto r = run("countercampbell_rates");
    bool ok = true;
    std::string d = "EV_k";
    for (int k = 0; k <= 2; ++k) {
        const double v = metric(r, "ev.k" + std::to_string(k));
        ok = ok && rel_close(v, -std::log(2.0) * (k + 1), 0.10);
        d += " " + num(v);
    }
    int maps = 0, held = 0;
    for (const auto& row : read_csv(r.out_dir / "catalog.csv")) {
        const double de = std::stod(row.at("d_times_e")), ev0 = std::stod(row.at("ev0")),
                     ld = std::stod(row.at("log_degree"));
        ++maps;
        held += de <= ev0 + 1e-9 && ev0 <= ld + 1e-9;
    }
    const double de = 1 * metric(r, "expansion"), ev0 = metric(r, "ev.k0");
    const bool own = de <= ev0 + 1e-9 && ev0 <= 1e-9;
    ok = ok && own && maps > 0 && held == maps;
    return {ok, d + " vs -ln2 (k+1) (10%); chain holds on " + std::to_string(held) + "/" + std::to_string(maps) +
                    " catalog maps" + (own ? "" : ", fails on the scenario map")};
}

Outcome c4() {
    const auto r = run("shear_orbit_s0.1");
    const double lambda = -2.0 * M_PI * 0.1;
    double gap = 0.0;
    int orbits = 0;
    for (; r.metric("orbit" + std::to_string(orbits) + ".liouville_gap"); ++orbits)
        gap = std::max(gap, metric(r, "orbit" + std::to_string(orbits) + ".liouville_gap"));
    bool ok = orbits > 0 && gap < 1e-6;
    std::string d = "Liouville gap " + num(gap, 3) + " over " + std::to_string(orbits) + " orbits; EV_k";
    for (int k = 0; k <= 2; ++k) {
        const double v = metric(r, "ev.k" + std::to_string(k));
        ok = ok && rel_close(v, (k + 1) * lambda, 0.10);
        d += " " + num(v);
    }
    return {ok, d + " vs (k+1)(-2 pi 0.1) (10%)"};
}

Outcome c5() {
    const auto r = run("telegraph_kernel");
    const double l1 = metric(r, "kernel_l1");
    const Config cfg = Config::load(std::filesystem::path(SWITCHLAB_SCENARIO_DIR) / "telegraph_kernel.cfg");
    const long events = cfg.integer("sim.events") * cfg.integer("sim.chains");
    const bool ok = l1 <= 0.05 && events >= 1000000 && cfg.integer("sim.bins") == 64 && r.wall_time < 300.0;
    return {ok, "L1 " + num(l1) + " at 64 bins, " + std::to_string(events) + " events; " + num(r.wall_time, 3) + " s"};
}

Outcome c6() {
    const auto r = run("telegraph_ladder");
    const std::vector<double> as = {0.5, 1.5, 2.5, 3.5};
    const double b = 0.5;
    bool ok = true;
    std::string d;
    for (std::size_t i = 0; i < as.size(); ++i) {
        const telegraph::Law law{as[i], b};
        const auto rows = read_csv(r.out_dir / ("oracle_v" + std::to_string(i) + ".csv"));
        std::vector<int> n(2, 0);
        for (const auto& row : rows) ++n[std::stoi(row.at("mode"))];
        double l1 = 0.0;
        std::vector<int> seen(2, 0);
        std::vector<std::vector<double>> exact = {law.bin_masses(0, n[0]), law.bin_masses(1, n[1])};
        for (const auto& row : rows) {
            const int m = std::stoi(row.at("mode"));
            l1 += std::abs(std::stod(row.at("empirical_mass")) - exact[m][seen[m]++]);
        }
        const int predicted = static_cast<int>(std::ceil(as[i] - 1.0));
        const int observed = static_cast<int>(metric(r, "v" + std::to_string(i) + ".smallest_diverging"));
        ok = ok && l1 <= 0.05 && observed == predicted;
        d += (d.empty() ? "" : "; ") + std::string("a=") + num(as[i]) + " L1 " + num(l1, 2) + " k* " +
             std::to_string(observed) + "/" + std::to_string(predicted);
    }
    return {ok, d};
}

Outcome c7() {
    const auto r = run("torus_threshold_s0.1");
    bool ok = r.wall_time < 900.0;
    std::string d;
    for (const auto& row : read_csv(r.out_dir / "sweep.csv")) {
        if (row.at("metric") != "k0_ratio") continue;
        const double v = std::stod(row.at("value"));
        if (v >= 0.8) ok = ok && row.at("verdict") == "BoundedStable";
        d += (d.empty() ? "" : ", ") + num(v) + ": " + row.at("verdict");
    }
    return {ok, "k=0 " + d + "; " + num(r.wall_time, 3) + " s"};
}

Outcome c8() {
    const auto r = run("affine_blowup");
    bool ok = true;
    std::string d;
    for (int i = 0; i < 2; ++i)
        for (int m = 0; m < 2; ++m) {
            const auto* v = r.verdict("v" + std::to_string(i) + ".mode" + std::to_string(m));
            if (!v) throw std::runtime_error("missing blow-up verdict");
            const bool flagged = v->detail.rfind("flagged", 0) == 0;
            ok = ok && flagged == (i == 0);  // rate 1 then rate 10
            d += std::string(d.empty() ? "" : ", ") + (i == 0 ? "rate 1" : "rate 10") + " p" + std::to_string(m) +
                 (flagged ? " flagged" : " not flagged");
        }
    const double rank = metric(r, "bracket_rank_min");
    const auto* rv = r.verdict("bracket_rank");
    ok = ok && rank == 2 && rv && rv->status == Status::Pass && rv->detail.find("of 10000 points") != std::string::npos;
    return {ok, d + "; min bracket rank " + num(rank) + " on 10^4 points"};
}

Outcome c9() {
    const auto r = run("neumann_instances");
    const double res = metric(r, "residual_max"), gap = metric(r, "eigen_gap_max");
    return {res <= 1e-12 && gap <= 1e-10, "residual " + num(res, 3) + ", eigen gap " + num(gap, 3) + " over 20 instances"};
}

Outcome c10() {
    const auto r = run("transverse_torus_fastswitch");
    const auto* v = r.verdict("alpha_star");
    const bool ok = v && v->status == Status::Pass;
    return {ok, (ok ? "alpha* = " + num(metric(r, "alpha_star")) : std::string(v ? v->detail : "no verdict")) + "; " +
                    num(r.wall_time, 3) + " s"};
}

Outcome c11() {
    bool ok = true;
    std::string d;
    for (const std::string name : {"affine_support", "torus_support"}) {
        const auto r = run(name);
        const double a = metric(r, "support_in_gamma"), b = metric(r, "gamma_in_support"),
                     dis = metric(r, "mode_disagreement");
        ok = ok && a >= 0.95 && b >= 0.95 && dis <= 0.02;
        d += (d.empty() ? "" : "; ") + name + " coverage " + num(a, 3) + "/" + num(b, 3) + ", mode gap " + num(dis, 3);
    }
    return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
    g_out = argc > 1 ? argv[1] : "acceptance_out";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"counter-Campbell spectral radius", c1},
        {"doubling-map spectral radius", c2},
        {"expansion-volume rates and bound chain", c3},
        {"periodic-orbit identities on the shear field", c4},
        {"kernel correspondence", c5},
        {"telegraph oracle and smoothness ladder", c6},
        {"torus threshold sweep", c7},
        {"affine blow-up and bracket rank", c8},
        {"Neumann-series invariant", c9},
        {"fast-switching sweep", c10},
        {"support vs reachable set", c11},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("criterion %zu (%s): %s  %s [%.1f s]\n", i + 1, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), s);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
