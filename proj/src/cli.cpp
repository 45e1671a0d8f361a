#include "refineq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "refineq/config.hpp"
#include "refineq/errors.hpp"
#include "refineq/expr.hpp"
#include "refineq/grids.hpp"
#include "refineq/hypotheses.hpp"
#include "refineq/interp.hpp"
#include "refineq/iterate.hpp"
#include "refineq/problem.hpp"
#include "refineq/rng.hpp"
#include "refineq/solver.hpp"
#include "refineq/transform.hpp"

namespace refineq {
namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string iso_utc_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << content;
    out.flush();
    if (!out) throw ConfigError("failed while writing output file: " + path);
}

// Emits to --out when given, to stdout otherwise.
void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        write_text_file(out_path, content);
}

struct CliOpts {
    std::string config_path;
    std::string out_path;
    std::string format = "csv";
    bool strict = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> grid, depth, samples;
    std::optional<double> alpha, tolerance;
    // subcommand-specific
    std::string density_path;          // verify
    std::vector<double> window;        // transform / manufacture, two values
    std::string diffeo_kind;           // transform
    std::string f_true;                // manufacture
};

void apply_overrides(Problem& p, const CliOpts& o) {
    if (o.seed) p.solver.seed = *o.seed;
    if (o.grid) {
        if (*o.grid < 8) throw ConfigError("--grid must be at least 8");
        p.solver.grid_points = *o.grid;
    }
    if (o.depth) {
        if (*o.depth < 1) throw ConfigError("--depth must be at least 1");
        p.solver.mc_depth = *o.depth;
    }
    if (o.samples) {
        if (*o.samples < 1) throw ConfigError("--samples must be at least 1");
        p.solver.mc_samples = *o.samples;
    }
    if (o.tolerance) {
        if (!(*o.tolerance > 0.0)) throw ConfigError("--tolerance must be positive");
        p.solver.tolerance = *o.tolerance;
    }
    if (o.alpha) p.alpha_mass = *o.alpha;
}

// Trajectory starting points: the ends of the effective forcing support,
// widened when the support is degenerate (mirrors the window chooser).
std::vector<double> default_starts(const Problem& p) {
    double s0 = p.g_report.effective_lo, s1 = p.g_report.effective_hi;
    const Interval& iv = p.interval;
    if (!(s0 < s1)) {
        s0 -= 1.0;
        s1 += 1.0;
        if (iv.bounded_below()) s0 = std::max(s0, 0.5 * (iv.lo + s1));
        if (iv.bounded_above()) s1 = std::min(s1, 0.5 * (iv.hi + s0));
    }
    return {s0, s1};
}

std::vector<int> depth_schedule(int depth) {
    depth = std::max(2, depth);
    return {std::max(1, depth / 2), depth};
}

struct StageLog {
    std::vector<std::pair<std::string, std::string>> stages;
    void set(const std::string& name, const std::string& status) {
        for (auto& s : stages)
            if (s.first == name) {
                s.second = status;
                return;
            }
        stages.emplace_back(name, status);
    }
};

// The manifest makes a run reproducible: it carries the resolved problem
// (after flag overrides), the seed, the tool version, and what each stage
// reported. Timestamps are informational; the numeric outputs depend only
// on config + seed + version.
void write_manifest(const std::string& command, const Problem& resolved, const CliOpts& o,
                    const std::vector<std::string>& outputs, const StageLog& log,
                    const std::string& started, const ordered_json& extra = {}) {
    if (o.out_path.empty()) return;
    ordered_json m;
    m["command"] = command;
    m["version"] = kToolVersion;
    m["seed"] = resolved.solver.seed;
    m["started_at"] = started;
    m["finished_at"] = iso_utc_now();
    m["outputs"] = outputs;
    ordered_json st = ordered_json::object();
    for (const auto& [name, status] : log.stages) st[name] = status;
    m["stages"] = st;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    m["config"] = ordered_json::parse(problem_to_json(resolved));
    write_text_file(o.out_path + ".manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// The hypothesis suite shared by `check` and the solve pipeline. Each check
// becomes one JSON object {check, value, threshold, pass, details}; artifacts
// that later stages reuse (antiderivative, limit law, sign split) are kept.
// ---------------------------------------------------------------------------

struct CheckOutcome {
    std::vector<json> reports;
    bool all_pass = true;
    bool condition_d_pass = true;
    Antiderivative G;
    std::optional<LimitCdf> limit;
    std::optional<SignSplit> split;
    std::string split_error;
};

CheckOutcome run_checks(const Problem& p, const ClosureExtendedProblem& cep) {
    CheckOutcome out;
    auto push = [&](const std::string& name, double value, json threshold, bool pass,
                    json details) {
        out.reports.push_back(json{{"check", name},
                                   {"value", value},
                                   {"threshold", std::move(threshold)},
                                   {"pass", pass},
                                   {"details", std::move(details)}});
        out.all_pass = out.all_pass && pass;
    };

    double wsum = 0.0;
    for (const auto& a : p.atoms) wsum += a.weight();
    push("weights_sum", wsum, 1e-12, std::abs(wsum - 1.0) <= 1e-12,
         json{{"deviation", std::abs(wsum - 1.0)}, {"atoms", p.atoms.size()}});

    FamilyValidation fam = validate_map_family(p);
    json per_atom = json::array();
    int failing = 0;
    for (std::size_t i = 0; i < fam.atoms.size(); ++i) {
        const AtomValidation& a = fam.atoms[i];
        failing += a.pass ? 0 : 1;
        per_atom.push_back(json{{"atom", i},
                                {"monotone", a.monotone},
                                {"increasing", a.increasing},
                                {"derivative_nonvanishing", a.derivative_nonvanishing},
                                {"derivative_matches", a.derivative_matches},
                                {"inverse_matches", a.inverse_matches},
                                {"maps_into", a.maps_into},
                                {"onto_heuristic", a.onto_heuristic},
                                {"note", a.note}});
    }
    push("map_family", static_cast<double>(failing), 0.0, fam.pass, json{{"atoms", per_atom}});

    try {
        SignSplit split = classify_atoms(p);
        out.split = split;
        push("sign_split", split.p_plus, nullptr, true,
             json{{"increasing", split.plus_atoms.size()},
                  {"decreasing", split.minus_atoms.size()},
                  {"p_plus", split.p_plus}});
    } catch (const PreconditionError& e) {
        out.split_error = e.what();
        push("sign_split", 0.0, nullptr, false, json{{"error", e.what()}});
    }

    ContractionReport cr =
        estimate_contraction_factor(p, 256, substream_seed(p.solver.seed, 0xC0));
    json cdet{{"sampled_l", cr.sampled_l}, {"probe_pairs", 256}};
    cdet["analytic_l"] = cr.analytic_l ? json(*cr.analytic_l) : json(nullptr);
    push("contraction_in_mean", cr.analytic_l ? *cr.analytic_l : cr.sampled_l, 1.0, cr.pass,
         cdet);

    DisplacementReport dr = check_displacement_integrability(p, probe_grid(p.interval, 33));
    double dmax = 0.0;
    for (double v : dr.values) dmax = std::max(dmax, std::abs(v));
    push("displacement_integrable", dmax, nullptr, dr.pass,
         json{{"probes", dr.probes.size()}, {"note", dr.note}});

    const IntegrabilityReport& ir = p.g_report;
    push("forcing_integrable", ir.abs_mass, nullptr, ir.converged,
         json{{"signed_mass", ir.signed_mass},
              {"effective_lo", ir.effective_lo},
              {"effective_hi", ir.effective_hi}});

    out.G = build_antiderivative(p, p.solver.grid_points);
    LipschitzEstimate le = estimate_lipschitz(out.G);
    push("forcing_sup", le.value, nullptr, std::isfinite(le.value), json{{"at", le.at}});

    std::vector<int> sched = depth_schedule(p.solver.mc_depth);
    LimitCdf lim = estimate_limit_cdf(cep, default_starts(p), sched,
                                      static_cast<std::size_t>(p.solver.mc_samples),
                                      substream_seed(p.solver.seed, 0xD0));
    SurvivalIntegralReport sr =
        evaluate_survival_integral(out.G, p.g, lim.cdf, kSurvivalTolEstimated);
    out.condition_d_pass = sr.pass;
    push("condition_D", sr.value, sr.tol * sr.scale, sr.pass,
         json{{"scale", sr.scale},
              {"relative_tol", sr.tol},
              {"limit_converged", lim.converged},
              {"cross_start_ks", lim.cross_start_ks},
              {"depth", sched.back()},
              {"samples", lim.samples}});
    out.limit = std::move(lim);
    return out;
}

std::string reports_to_lines(const std::vector<json>& reports) {
    std::string text;
    for (const json& r : reports) text += r.dump() + "\n";
    return text;
}

void warn_failing_checks(const CheckOutcome& checks) {
    for (const json& r : checks.reports)
        if (!r.at("pass").get<bool>())
            std::cerr << "warning: check '" << r.at("check").get<std::string>()
                      << "' failed (value " << r.at("value").dump() << ")\n";
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

int cmd_check(const CliOpts& o) {
    const std::string started = iso_utc_now();
    Problem p = load_problem(o.config_path);
    apply_overrides(p, o);
    StageLog log;
    log.set("load", "ok");
    ClosureExtendedProblem cep = extend_to_closure(p);
    log.set("closure", "ok");
    CheckOutcome checks = run_checks(p, cep);
    log.set("check", checks.all_pass ? "ok" : "failed");

    emit(o.out_path, reports_to_lines(checks.reports));
    std::vector<std::string> outputs;
    if (!o.out_path.empty()) outputs.push_back(o.out_path);
    write_manifest("check", p, o, outputs, log, started);
    if (!checks.all_pass && o.strict) return 1;
    return 0;
}

// ---------------------------------------------------------------------------
// limit-dist
// ---------------------------------------------------------------------------

int cmd_limit_dist(const CliOpts& o) {
    const std::string started = iso_utc_now();
    Problem p = load_problem(o.config_path);
    apply_overrides(p, o);
    StageLog log;
    log.set("load", "ok");
    ClosureExtendedProblem cep = extend_to_closure(p);
    log.set("closure", "ok");

    std::vector<int> sched = depth_schedule(p.solver.mc_depth);
    LimitCdf lim = estimate_limit_cdf(cep, default_starts(p), sched,
                                      static_cast<std::size_t>(p.solver.mc_samples),
                                      p.solver.seed);
    log.set("estimate", lim.converged ? "converged" : "not-converged");

    // Output nodes: the full ECDF by default; --grid thins to a uniform grid
    // over the sample hull.
    std::vector<double> ts, cs;
    const std::vector<double>& s = lim.cdf.sorted_samples();
    if (o.grid) {
        std::vector<double> tg = uniform_grid(s.front(), s.back(),
                                              static_cast<std::size_t>(*o.grid));
        for (double t : tg) {
            ts.push_back(t);
            cs.push_back(lim.cdf.value(t));
        }
    } else {
        const double n = static_cast<double>(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i + 1 < s.size() && s[i + 1] == s[i]) continue;
            ts.push_back(s[i]);
            cs.push_back(static_cast<double>(i + 1) / n);
        }
    }

    std::string content;
    if (o.format == "json") {
        ordered_json j;
        j["t"] = ts;
        j["cdf"] = cs;
        j["depths"] = lim.depths;
        j["depth_ks"] = lim.depth_ks;
        j["cross_start_ks"] = lim.cross_start_ks;
        j["samples"] = lim.samples;
        j["seed"] = lim.seed;
        j["boundary_mass_lo"] = lim.boundary_mass_lo;
        j["boundary_mass_hi"] = lim.boundary_mass_hi;
        j["converged"] = lim.converged;
        content = j.dump(2) + "\n";
    } else {
        content = "t,cdf\n";
        for (std::size_t i = 0; i < ts.size(); ++i)
            content += fmt17(ts[i]) + "," + fmt17(cs[i]) + "\n";
    }
    emit(o.out_path, content);

    std::vector<std::string> outputs;
    if (!o.out_path.empty()) outputs.push_back(o.out_path);
    ordered_json extra;
    extra["diagnostics"] = ordered_json{{"depth_ks", lim.depth_ks},
                                        {"cross_start_ks", lim.cross_start_ks},
                                        {"converged", lim.converged}};
    write_manifest("limit-dist", p, o, outputs, log, started, extra);
    return lim.converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

// Pointwise refinement defect |f - g - sum p|m'| f(m)| at x; nodes where the
// maps are singular (closure endpoints of conjugated problems) fall back to
// zero rather than poisoning the CSV with non-finite text.
double pointwise_defect(const DensityEstimate& f, const Problem& p, double x) {
    double acc = f(x) - p.g(x);
    for (const auto& atom : p.atoms)
        acc -= atom.weight() * std::abs(atom.slope(x)) * f(atom.apply(x));
    double r = std::abs(acc);
    return std::isfinite(r) ? r : 0.0;
}

int cmd_solve(const CliOpts& o) {
    const std::string started = iso_utc_now();
    Problem p = load_problem(o.config_path);
    apply_overrides(p, o);
    StageLog log;
    log.set("load", "ok");
    ClosureExtendedProblem cep = extend_to_closure(p);
    log.set("closure", "ok");

    CheckOutcome checks = run_checks(p, cep);
    log.set("check", checks.all_pass ? "ok" : "failed");
    if (!checks.all_pass) {
        warn_failing_checks(checks);
        if (o.strict) {
            std::cerr << "error: hypothesis checks failed and --strict is set\n";
            write_manifest("solve", p, o, {}, log, started);
            return 1;
        }
        std::cerr << "continuing without --strict\n";
    }
    if (!checks.split) throw PreconditionError(checks.split_error);

    SolveParams params;
    params.grid_points = p.solver.grid_points;
    params.max_terms = p.solver.max_terms;
    params.tolerance = p.solver.tolerance;
    params.seed = p.solver.seed;

    CdfSolution F;
    double alpha_used = 0.0;
    if (checks.split->minus_atoms.empty()) {
        F = solve_cdf_series(cep, checks.G, params);
    } else {
        if (p.alpha_mass) {
            alpha_used = *p.alpha_mass;
        } else {
            std::cerr << "warning: decreasing maps need the total mass alpha; "
                         "alpha_mass is not set, defaulting to 0\n";
        }
        F = solve_cdf_reflected(cep, checks.G, alpha_used, params);
    }
    log.set("solve", to_string(F.status));

    DensityEstimate f = derive_density(F);
    log.set("density", to_string(f.status));
    if (f.status == DensityStatus::DerivativeUnreliable)
        std::cerr << "warning: the distribution function has sub-grid jumps; "
                     "the differentiated density is unreliable\n";

    f.residual_l1 = residual_refinement(f, p, 4 * params.grid_points);
    log.set("residual", "ok");

    std::string csv = "x,F,f,residual_pointwise\n";
    for (std::size_t j = 0; j < f.grid.size(); ++j) {
        double x = f.grid[j];
        csv += fmt17(x) + "," + fmt17(F.values[j]) + "," + fmt17(f.values[j]) + "," +
               fmt17(pointwise_defect(f, p, x)) + "\n";
    }

    ordered_json side;
    side["status"] = to_string(f.status);
    side["terms_used"] = F.terms_used;
    side["tail_estimate"] = F.tail_estimate;
    side["residual_l1"] = *f.residual_l1;
    side["alpha_mass"] = F.alpha_mass;
    side["window"] = ordered_json{{"lo", F.window.lo}, {"hi", F.window.hi}, {"how", F.window.how}};
    side["seed"] = p.solver.seed;
    std::string side_text = side.dump(2) + "\n";

    std::vector<std::string> outputs;
    if (o.out_path.empty()) {
        std::cout << csv;
        std::cerr << side_text; // keep stdout purely CSV
    } else {
        write_text_file(o.out_path, csv);
        write_text_file(o.out_path + ".meta.json", side_text);
        outputs.push_back(o.out_path);
        outputs.push_back(o.out_path + ".meta.json");
    }
    write_manifest("solve", p, o, outputs, log, started);

    if (F.status != SolveStatus::Converged) {
        std::cerr << "error: iteration did not converge (" << to_string(F.status) << ")\n";
        return 2;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
}

DensityEstimate load_density_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open density table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("density table is empty: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv_line(line);
    int xcol = -1, fcol = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == "x") xcol = static_cast<int>(i);
        if (header[i] == "f") fcol = static_cast<int>(i);
    }
    if (xcol < 0 || fcol < 0)
        throw ConfigError("density table needs a CSV header with 'x' and 'f' columns");

    std::vector<std::pair<double, double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() <= static_cast<std::size_t>(std::max(xcol, fcol)))
            throw ConfigError("density table row " + std::to_string(lineno) +
                              " has too few columns");
        char* endx = nullptr;
        char* endf = nullptr;
        double x = std::strtod(cells[xcol].c_str(), &endx);
        double v = std::strtod(cells[fcol].c_str(), &endf);
        if (endx == cells[xcol].c_str() || endf == cells[fcol].c_str() || !std::isfinite(x) ||
            !std::isfinite(v))
            throw ConfigError("density table row " + std::to_string(lineno) +
                              " is not numeric");
        rows.emplace_back(x, v);
    }
    if (rows.size() < 2) throw ConfigError("density table needs at least 2 rows");
    std::sort(rows.begin(), rows.end());
    DensityEstimate f;
    const double gap = 1e-12 * (rows.back().first - rows.front().first);
    for (const auto& [x, v] : rows) {
        if (!f.grid.empty() && !(x > f.grid.back() + gap)) continue;
        f.grid.push_back(x);
        f.values.push_back(v);
    }
    if (f.grid.size() < 2) throw ConfigError("density table grid is degenerate");
    std::vector<double> av(f.values.size());
    for (std::size_t i = 0; i < av.size(); ++i) av[i] = std::abs(f.values[i]);
    f.l1_norm = trapezoid(f.grid, av);
    f.construction = "loaded";
    return f;
}

int cmd_verify(const CliOpts& o) {
    const std::string started = iso_utc_now();
    Problem p = load_problem(o.config_path);
    apply_overrides(p, o);
    StageLog log;
    log.set("load", "ok");
    DensityEstimate f = load_density_table(o.density_path);
    log.set("table", "ok");

    double residual = residual_refinement(f, p, 4 * p.solver.grid_points);
    log.set("residual", "ok");

    std::string content;
    if (o.format == "json") {
        ordered_json j;
        j["residual_l1"] = residual;
        j["l1_norm"] = f.l1_norm;
        j["nodes"] = f.grid.size();
        j["grid_lo"] = f.grid.front();
        j["grid_hi"] = f.grid.back();
        content = j.dump(2) + "\n";
    } else {
        content = "x,residual_pointwise\n";
        for (double x : f.grid) content += fmt17(x) + "," + fmt17(pointwise_defect(f, p, x)) + "\n";
    }
    emit(o.out_path, content);
    std::cerr << "verify: residual_l1 " << fmt17(residual) << ", density l1_norm "
              << fmt17(f.l1_norm) << "\n";

    std::vector<std::string> outputs;
    if (!o.out_path.empty()) outputs.push_back(o.out_path);
    ordered_json extra;
    extra["density_table"] = o.density_path;
    extra["residual_l1"] = residual;
    write_manifest("verify", p, o, outputs, log, started, extra);

    const double gate = o.tolerance ? *o.tolerance : 1e-3;
    if (o.strict && !(residual <= gate)) {
        std::cerr << "error: residual " << fmt17(residual) << " exceeds " << fmt17(gate)
                  << " and --strict is set\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

// Conjugated forcings close over the chart, so they cannot be serialized
// directly; sample them onto a piecewise-linear table over the effective
// support, straddling every jump with twin knots.
Forcing tabulate_forcing(const Forcing& g, const IntegrabilityReport& rep, int n) {
    double lo = rep.effective_lo, hi = rep.effective_hi;
    if (!(lo < hi)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double span = hi - lo;
    std::vector<double> knots = uniform_grid(lo, hi, static_cast<std::size_t>(std::max(n, 2)));
    const double eps = 5e-10 * span;
    for (double b : g.breakpoints()) {
        if (b - eps > lo && b + eps < hi) {
            knots.push_back(b - eps);
            knots.push_back(b + eps);
        }
    }
    std::sort(knots.begin(), knots.end());
    const double gap = 1e-12 * span;
    std::vector<std::pair<double, double>> rows;
    for (double t : knots) {
        if (!rows.empty() && !(t > rows.back().first + gap)) continue;
        double v = g(t);
        rows.emplace_back(t, std::isfinite(v) ? v : 0.0);
    }
    return Forcing::from_table(std::move(rows));
}

// Orientation rule: the problem is rewritten on the other side of the chart.
// A problem on the full line moves onto the bounded --window; a bounded
// problem (whose interval must equal --window) moves onto the full line;
// affine charts rewrite between same-shape intervals.
Diffeo pick_chart(const Problem& p, const std::string& kind, const Interval& w) {
    const Interval line;
    const bool on_line = !p.interval.bounded_below() && !p.interval.bounded_above();
    auto window_is_interval = [&]() {
        return w.lo == p.interval.lo && w.hi == p.interval.hi;
    };
    if (kind == "logistic") {
        if (on_line) return invert_diffeo(builtin_diffeo("logistic", line, w));
        if (!window_is_interval())
            throw ConfigError(
                "a logistic chart on a bounded problem rewrites it on the full line; "
                "--window must equal the problem interval " +
                p.interval.to_string());
        return builtin_diffeo("logistic", line, w);
    }
    if (kind == "tan_half") {
        if (on_line) return builtin_diffeo("tan_half", w, line);
        if (!window_is_interval())
            throw ConfigError(
                "a tan_half chart on a bounded problem rewrites it on the full line; "
                "--window must equal the problem interval " +
                p.interval.to_string());
        return invert_diffeo(builtin_diffeo("tan_half", w, line));
    }
    if (kind == "affine") return builtin_diffeo("affine", w, p.interval);
    throw ConfigError("unknown diffeomorphism kind: " + kind);
}

int cmd_transform(const CliOpts& o) {
    const std::string started = iso_utc_now();
    Problem p = load_problem(o.config_path);
    apply_overrides(p, o);
    StageLog log;
    log.set("load", "ok");

    Interval w(o.window[0], o.window[1]);
    Diffeo d = pick_chart(p, o.diffeo_kind, w);
    validate_diffeo(d);
    log.set("chart", "ok");

    Problem conj = conjugate_problem(p, d);
    log.set("conjugate", "ok");
    if (conj.g.kind() != "expression") {
        conj.g = tabulate_forcing(conj.g, conj.g_report, p.solver.grid_points);
        conj.g_report = scan_integrable(conj.g, conj.interval);
        log.set("tabulate", "ok");
    }

    std::string doc = problem_to_json(conj);
    emit(o.out_path, doc);
    std::cerr << "transform: problem rewritten on " << conj.interval.to_string()
              << " via " << o.diffeo_kind << "\n";

    std::vector<std::string> outputs;
    if (!o.out_path.empty()) outputs.push_back(o.out_path);
    ordered_json extra;
    extra["diffeo"] = o.diffeo_kind;
    extra["window"] = ordered_json{{"lo", w.lo}, {"hi", w.hi}};
    write_manifest("transform", p, o, outputs, log, started, extra);
    return 0;
}

// ---------------------------------------------------------------------------
// manufacture
// ---------------------------------------------------------------------------

int cmd_manufacture(const CliOpts& o) {
    const std::string started = iso_utc_now();
    Problem p = load_problem(o.config_path);
    apply_overrides(p, o);
    StageLog log;
    log.set("load", "ok");

    const double lo = o.window[0], hi = o.window[1];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        throw ConfigError("--window for manufacture must be a finite pair lo < hi");
    Forcing shape = Forcing::from_expression_text(o.f_true);
    PointwiseDensity f_true;
    f_true.eval = [shape, lo, hi](double x) { return (x >= lo && x <= hi) ? shape(x) : 0.0; };
    f_true.breakpoints = {lo, hi};

    const int table_points = o.grid ? *o.grid : 512;
    ManufacturedPair mp = manufacture_forcing(p, f_true, table_points);
    log.set("manufacture", "ok");

    std::string content;
    if (o.format == "json") {
        Problem out = p;
        out.g = mp.g_table;
        out.g_report = scan_integrable(out.g, out.interval);
        content = problem_to_json(out); // ready-to-solve config with the new forcing
    } else {
        content = "t,g\n";
        for (const auto& [t, v] : mp.g_table.table()) content += fmt17(t) + "," + fmt17(v) + "\n";
    }
    emit(o.out_path, content);
    std::cerr << "manufacture: " << mp.g_table.table().size() << " knots, integral of g "
              << fmt17(mp.g_integral) << "\n";

    std::vector<std::string> outputs;
    if (!o.out_path.empty()) outputs.push_back(o.out_path);
    ordered_json extra;
    extra["f_true"] = o.f_true;
    extra["support"] = ordered_json{{"lo", lo}, {"hi", hi}};
    extra["g_integral"] = mp.g_integral;
    write_manifest("manufacture", p, o, outputs, log, started, extra);
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"workbench for refinement-type functional equations "
                 "f = sum_i p_i |m_i'| f(m_i) + g on an open interval"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    CliOpts o;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", o.config_path, "problem description (JSON)")->required();
        s->add_option("--out", o.out_path, "output path (stdout when omitted)");
        s->add_option("--seed", o.seed, "override solver.seed");
        s->add_option("--format", o.format, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        s->add_flag("--strict", o.strict, "gate the run on failing checks");
        s->add_option("--grid", o.grid, "override solver.grid_points / output nodes");
        s->add_option("--depth", o.depth, "override solver.mc_depth");
        s->add_option("--samples", o.samples, "override solver.mc_samples");
        s->add_option("--alpha", o.alpha, "override alpha_mass (total mass of f)");
        s->add_option("--tolerance", o.tolerance, "override solver.tolerance");
        return s;
    };

    CLI::App* c_check =
        add_common(app.add_subcommand("check", "run the hypothesis suite, one JSON line each"));
    CLI::App* c_limit = add_common(
        app.add_subcommand("limit-dist", "estimate the limit distribution of the iterates"));
    CLI::App* c_solve = add_common(
        app.add_subcommand("solve", "check, iterate, differentiate, and report residuals"));
    CLI::App* c_verify =
        add_common(app.add_subcommand("verify", "recompute residuals of a stored density"));
    c_verify->add_option("--density", o.density_path, "CSV table with 'x' and 'f' columns")
        ->required();
    CLI::App* c_transform = add_common(app.add_subcommand(
        "transform", "emit the problem conjugated by a change of variables"));
    c_transform
        ->add_option("--window", o.window, "chart window, written lo,hi (use --window=lo,hi)")
        ->expected(2)
        ->delimiter(',')
        ->required();
    c_transform->add_option("--diffeo", o.diffeo_kind, "logistic, tan_half, or affine")
        ->check(CLI::IsMember({"logistic", "tan_half", "affine"}))
        ->required();
    CLI::App* c_manufacture = add_common(
        app.add_subcommand("manufacture", "emit the forcing that makes --f-true the solution"));
    c_manufacture->add_option("--f-true", o.f_true, "density expression in t")->required();
    c_manufacture
        ->add_option("--window", o.window, "support of f-true, written lo,hi")
        ->expected(2)
        ->delimiter(',')
        ->required();

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("refineq");
    for (const std::string& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 3;
    }

    try {
        if (app.got_subcommand(c_check)) return cmd_check(o);
        if (app.got_subcommand(c_limit)) return cmd_limit_dist(o);
        if (app.got_subcommand(c_solve)) return cmd_solve(o);
        if (app.got_subcommand(c_verify)) return cmd_verify(o);
        if (app.got_subcommand(c_transform)) return cmd_transform(o);
        if (app.got_subcommand(c_manufacture)) return cmd_manufacture(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const PreconditionError& e) {
        std::cerr << "hypothesis failure: " << e.what() << "\n";
        return 1;
    } catch (const SupportBudgetError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 3; // unreachable: require_subcommand(1) guarantees a dispatch
}

} // namespace refineq
