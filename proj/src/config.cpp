#include "refineq/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "refineq/grids.hpp"

namespace refineq {

namespace {

using nlohmann::json;

double parse_endpoint(const json& j, bool is_lo) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
        throw ConfigError("interval endpoint string must be \"-inf\" or \"+inf\", got \"" + s +
                          "\"");
    }
    throw ConfigError(std::string("interval.") + (is_lo ? "lo" : "hi") +
                      " must be a number or an infinity string");
}

Expr parse_field_expression(const json& j, const std::string& field, const std::string& var) {
    if (!j.is_string()) throw ConfigError(field + " must be an expression string");
    try {
        return parse_expression(j.get<std::string>(), var);
    } catch (const ParseError& e) {
        throw ConfigError(field + ": " + e.what());
    }
}

void validate_derivatives(const std::vector<MapAtom>& atoms, const Interval& iv) {
    auto grid = probe_grid(iv, 33);
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const auto& a = atoms[i];
        if (!a.has_derivative_expr()) continue;
        for (double x : grid) {
            double d = eval_expression(a.derivative_expr(), x);
            double h = 1e-6 * std::max(1.0, std::fabs(x));
            double cd = (a.apply(x + h) - a.apply(x - h)) / (2.0 * h);
            double tol = 1e-6 * std::max(1.0, std::fabs(d));
            bool ok = std::isfinite(d) && std::fabs(d - cd) <= tol;
            if (!ok && std::isfinite(d)) {
                // Richardson fallback for maps with steep boundary curvature,
                // where the plain stencil is truncation-limited.
                double ch = (a.apply(x + 0.5 * h) - a.apply(x - 0.5 * h)) / h;
                ok = std::fabs(d - (4.0 * ch - cd) / 3.0) <= tol;
            }
            if (!ok)
                throw ConfigError("atoms[" + std::to_string(i) +
                                  "].derivative disagrees with central differences of the map "
                                  "near x = " +
                                  std::to_string(x));
        }
    }
}

} // namespace

Problem load_problem_from_text(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

    Problem p;
    p.label = doc.value("label", std::string{});

    if (!doc.contains("interval") || !doc["interval"].is_object())
        throw ConfigError("config needs an \"interval\" object");
    const auto& jiv = doc["interval"];
    if (!jiv.contains("lo") || !jiv.contains("hi"))
        throw ConfigError("interval needs \"lo\" and \"hi\"");
    p.interval = Interval(parse_endpoint(jiv["lo"], true), parse_endpoint(jiv["hi"], false));

    if (!doc.contains("atoms") || !doc["atoms"].is_array() || doc["atoms"].empty())
        throw ConfigError("config needs a nonempty \"atoms\" array");
    for (std::size_t i = 0; i < doc["atoms"].size(); ++i) {
        const auto& ja = doc["atoms"][i];
        std::string where = "atoms[" + std::to_string(i) + "]";
        if (!ja.is_object()) throw ConfigError(where + " must be an object");
        if (!ja.contains("weight") || !ja["weight"].is_number())
            throw ConfigError(where + " needs a numeric \"weight\"");
        if (!ja.contains("map")) throw ConfigError(where + " needs a \"map\" expression");
        Expr map = parse_field_expression(ja["map"], where + ".map", "x");
        Expr deriv, inv;
        if (ja.contains("derivative"))
            deriv = parse_field_expression(ja["derivative"], where + ".derivative", "x");
        if (ja.contains("inverse"))
            inv = parse_field_expression(ja["inverse"], where + ".inverse", "x");
        p.atoms.emplace_back(ja["weight"].get<double>(), std::move(map), std::move(deriv),
                             std::move(inv));
    }
    check_weights(p.atoms);
    validate_derivatives(p.atoms, p.interval);

    if (!doc.contains("g")) throw ConfigError("config needs a \"g\" entry");
    const auto& jg = doc["g"];
    if (jg.is_string()) {
        p.g = Forcing::from_expression_text(jg.get<std::string>());
    } else if (jg.is_object() && jg.contains("table")) {
        const auto& jt = jg["table"];
        if (!jt.is_array() || jt.empty()) throw ConfigError("g.table must be a nonempty array");
        std::vector<std::pair<double, double>> rows;
        for (const auto& row : jt) {
            if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
                throw ConfigError("g.table rows must be [t, value] number pairs");
            rows.emplace_back(row[0].get<double>(), row[1].get<double>());
        }
        p.g = Forcing::from_table(std::move(rows));
    } else {
        throw ConfigError("g must be an expression string or {\"table\": [[t, value], ...]}");
    }

    if (doc.contains("alpha_mass")) {
        if (!doc["alpha_mass"].is_number()) throw ConfigError("alpha_mass must be a number");
        p.alpha_mass = doc["alpha_mass"].get<double>();
    }

    if (doc.contains("solver")) {
        const auto& js = doc["solver"];
        if (!js.is_object()) throw ConfigError("solver must be an object");
        auto get_int = [&](const char* key, int dflt, int min) {
            if (!js.contains(key)) return dflt;
            if (!js[key].is_number_integer() || js[key].get<long long>() < min)
                throw ConfigError(std::string("solver.") + key + " must be an integer >= " +
                                  std::to_string(min));
            return static_cast<int>(js[key].get<long long>());
        };
        p.solver.grid_points = get_int("grid_points", p.solver.grid_points, 8);
        p.solver.max_terms = get_int("max_terms", p.solver.max_terms, 1);
        p.solver.mc_samples = get_int("mc_samples", p.solver.mc_samples, 1);
        p.solver.mc_depth = get_int("mc_depth", p.solver.mc_depth, 1);
        if (js.contains("tolerance")) {
            if (!js["tolerance"].is_number() || !(js["tolerance"].get<double>() > 0))
                throw ConfigError("solver.tolerance must be a positive number");
            p.solver.tolerance = js["tolerance"].get<double>();
        }
        if (js.contains("seed")) {
            if (!js["seed"].is_number_unsigned())
                throw ConfigError("solver.seed must be an unsigned integer");
            p.solver.seed = js["seed"].get<std::uint64_t>();
        }
    }

    p.g_report = scan_integrable(p.g, p.interval);
    return p;
}

Problem load_problem(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_problem_from_text(buf.str());
}

std::string problem_to_json(const Problem& problem) {
    json doc;
    doc["label"] = problem.label;
    json jiv;
    jiv["lo"] = std::isfinite(problem.interval.lo) ? json(problem.interval.lo) : json("-inf");
    jiv["hi"] = std::isfinite(problem.interval.hi) ? json(problem.interval.hi) : json("+inf");
    doc["interval"] = jiv;

    doc["atoms"] = json::array();
    for (const auto& a : problem.atoms) {
        json ja;
        ja["weight"] = a.weight();
        ja["map"] = print_expression(a.map_expr());
        if (a.has_derivative_expr()) ja["derivative"] = print_expression(a.derivative_expr());
        if (a.has_inverse_expr()) ja["inverse"] = print_expression(a.inverse_expr());
        doc["atoms"].push_back(std::move(ja));
    }

    if (problem.g.kind() == "expression") {
        doc["g"] = print_expression(problem.g.expr(), "t");
    } else if (problem.g.kind() != "table") {
        throw ConfigError("cannot serialize a native-callable g; tabulate it first");
    } else {
        json rows = json::array();
        for (const auto& [t, v] : problem.g.table()) rows.push_back(json::array({t, v}));
        doc["g"] = json{{"table", std::move(rows)}};
    }

    if (problem.alpha_mass) doc["alpha_mass"] = *problem.alpha_mass;

    json js;
    js["grid_points"] = problem.solver.grid_points;
    js["max_terms"] = problem.solver.max_terms;
    js["tolerance"] = problem.solver.tolerance;
    js["mc_samples"] = problem.solver.mc_samples;
    js["mc_depth"] = problem.solver.mc_depth;
    js["seed"] = problem.solver.seed;
    doc["solver"] = js;

    return doc.dump(2) + "\n";
}

} // namespace refineq
