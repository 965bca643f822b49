#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "seqrand/seqrand.hpp"

namespace {

using namespace seqrand;

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kInputError = 2;
constexpr int kSolverFailure = 3;

// "a,b,c" or "start:stop:count"
std::vector<double> parse_grid(const std::string& spec, const std::string& name) {
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ParseError("--" + name + ": not a number: '" + s + "'");
        }
        if (used != s.size() || !std::isfinite(v)) throw ParseError("--" + name + ": not a number: '" + s + "'");
        return v;
    };
    std::vector<std::string> parts;
    std::string part;
    const char sep = spec.find(':') != std::string::npos ? ':' : ',';
    std::istringstream in(spec);
    while (std::getline(in, part, sep)) parts.push_back(part);
    if (parts.empty()) throw ParseError("--" + name + ": empty grid");
    if (sep == ':') {
        if (parts.size() != 3) throw ParseError("--" + name + ": range must be start:stop:count");
        const double n = number(parts[2]);
        if (n < 1 || n != std::floor(n)) throw ParseError("--" + name + ": count must be a positive integer");
        return commands::linspace(number(parts[0]), number(parts[1]), static_cast<int>(n));
    }
    std::vector<double> out;
    for (const auto& s : parts) out.push_back(number(s));
    return out;
}

void check_theta_grid(const std::vector<double>& thetas) {
    for (double t : thetas)
        if (t < 0.0 || t > commands::kQuarterPi + 1e-12)
            throw ParseError("theta values must lie in [0, pi/4]");
}

double parse_scalar(const std::string& spec, const std::string& name) {
    const auto v = parse_grid(spec, name);
    if (v.size() != 1) throw ParseError("--" + name + " expects a single value here");
    return v.front();
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out);
    if (!f) throw ParseError("cannot write " + out);
    f << text;
}

std::string render(const commands::NumericTable& t, const std::string& format) {
    return format == "json" ? commands::to_json(t).dump(2) + "\n" : commands::to_csv(t);
}

sdp::SolverSettings solver_settings(bool extended, int max_iters) {
    sdp::SolverSettings s;
    if (const char* env = std::getenv("SEQRAND_SOLVER_TOL")) {
        char* end = nullptr;
        const double tol = std::strtod(env, &end);
        if (end == env || *end != '\0' || !(tol > 0.0)) throw ParseError("SEQRAND_SOLVER_TOL must be a positive number");
        s.tol = tol;
    }
    if (extended) s.precision = sdp::Precision::Extended;
    if (max_iters > 0) s.max_iters = max_iters;
    return s;
}

npa::ConstraintMode parse_mode(const std::string& m) {
    if (m == "full" || m == "FullTable") return npa::ConstraintMode::FullTable;
    if (m == "summary" || m == "Summary") return npa::ConstraintMode::Summary;
    throw ParseError("--mode must be full or summary");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Randomness certification in the sequential CHSH scenario"};
    app.require_subcommand(1);

    std::string theta_spec, p_spec, c_spec = "0", mode_name, out, format = "csv", table_path, dump_path;
    double epsilon = 0.0;
    unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
    bool extended = false;
    int max_iters = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", out, "output file (default stdout)");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    };
    auto solver = [&](CLI::App* sub, const std::string& default_mode) {
        sub->add_option("--mode", mode_name, "full or summary (default " + default_mode + ")");
        sub->add_option("--epsilon", epsilon, "slack on the behavior constraints")->check(CLI::NonNegativeNumber);
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--extended", extended, "solve in long double");
        sub->add_option("--max-iters", max_iters, "interior-point iteration cap")->check(CLI::PositiveNumber);
    };

    auto* boundary = app.add_subcommand("boundary", "ideal-protocol Bell values along the boundary");
    boundary->add_option("--theta", theta_spec, "grid (default 0:0.785398163397:33)");
    common(boundary);

    auto* scan_theta = app.add_subcommand("scan-theta", "H_min versus measurement strength");
    scan_theta->add_option("--theta", theta_spec, "grid (default 0:0.785398163397:33)");
    scan_theta->add_option("--p", p_spec, "depolarization list (default 0,0.005,0.01,0.02)");
    scan_theta->add_option("--c", c_spec, "decoherence (default 0)");
    common(scan_theta);
    solver(scan_theta, "full");

    auto* scan_noise = app.add_subcommand("scan-noise", "best H_min over theta versus noise");
    scan_noise->add_option("--p", p_spec, "depolarization grid (default 0:0.08:20)");
    common(scan_noise);
    solver(scan_noise, "full");

    auto* tables = app.add_subcommand("tables", "model columns for the three experiment settings");
    common(tables);
    solver(tables, "summary");

    auto* table = app.add_subcommand("table", "correlation table of the protocol as JSON");
    bool dilated = false;
    table->add_option("--theta", theta_spec, "strength (default pi/8)");
    table->add_option("--p", p_spec, "depolarization (default 0)");
    table->add_option("--c", c_spec, "decoherence (default 0)");
    table->add_flag("--dilated", dilated, "compute through the projective dilation");
    table->add_option("--out", out, "output file (default stdout)");

    auto* validate = app.add_subcommand("validate", "no-signaling and sequentiality checks on a table");
    double validate_tol = 1e-9;
    validate->add_option("--table", table_path, "correlation table JSON")->required();
    validate->add_option("--tol", validate_tol, "tolerance")->check(CLI::NonNegativeNumber);
    validate->add_option("--out", out, "output file (default stdout)");

    auto* minentropy = app.add_subcommand("minentropy", "single min-entropy solve");
    minentropy->add_option("--theta", theta_spec, "strength (default pi/8)");
    minentropy->add_option("--p", p_spec, "depolarization (default 0)");
    minentropy->add_option("--c", c_spec, "decoherence (default 0)");
    minentropy->add_option("--table", table_path, "correlation table JSON instead of parameters");
    minentropy->add_option("--dump-sdp", dump_path, "write the SDP instance as JSON");
    minentropy->add_option("--out", out, "output file (default stdout)");
    solver(minentropy, "full");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    try {
        const auto settings = solver_settings(extended, max_iters);
        auto mode_for = [&](const std::string& fallback) {
            return npa::GuessingConstraintMode{parse_mode(mode_name.empty() ? fallback : mode_name), epsilon};
        };
        const auto default_thetas = [] { return commands::linspace(0.0, commands::kQuarterPi, 33); };

        if (boundary->parsed()) {
            const auto thetas = theta_spec.empty() ? default_thetas() : parse_grid(theta_spec, "theta");
            check_theta_grid(thetas);
            emit(render(commands::boundary(thetas), format), out);
            return kOk;
        }
        if (scan_theta->parsed()) {
            const auto thetas = theta_spec.empty() ? default_thetas() : parse_grid(theta_spec, "theta");
            check_theta_grid(thetas);
            const auto ps = p_spec.empty() ? std::vector<double>{0.0, 0.005, 0.01, 0.02} : parse_grid(p_spec, "p");
            const double c = parse_scalar(c_spec, "c");
            for (double p : ps) protocol::check_noise(p, c);
            const auto t = commands::scan_theta(ps, thetas, c, mode_for("full"), settings, jobs);
            emit(render(t, format), out);
            return t.any_failed() ? kSolverFailure : kOk;
        }
        if (scan_noise->parsed()) {
            const auto ps = p_spec.empty() ? commands::linspace(0.0, 0.08, 20) : parse_grid(p_spec, "p");
            for (double p : ps) protocol::check_noise(p, 0.0);
            const auto t = commands::scan_noise(ps, mode_for("full"), settings, jobs);
            emit(render(t, format), out);
            return t.any_failed() ? kSolverFailure : kOk;
        }
        if (tables->parsed()) {
            const auto t = commands::tables(mode_for("summary"), settings, jobs);
            emit(render(t, format), out);
            return t.any_failed() ? kSolverFailure : kOk;
        }
        auto single_params = [&] {
            protocol::ProtocolParams params;
            if (!theta_spec.empty()) params.theta = parse_scalar(theta_spec, "theta");
            if (!p_spec.empty()) params.p = parse_scalar(p_spec, "p");
            params.c = parse_scalar(c_spec, "c");
            protocol::check_params(params);
            return params;
        };
        if (table->parsed()) {
            const auto params = single_params();
            const auto t = dilated ? protocol::correlations_dilated(params) : protocol::correlations_kraus(params);
            emit(scenario::to_json(t).dump(2) + "\n", out);
            return kOk;
        }
        if (validate->parsed()) {
            const auto behavior = scenario::table_from_json(read_json(table_path));
            const auto r = commands::validate(behavior, validate_tol);
            emit(commands::to_json(r).dump(2) + "\n", out);
            return r.passed ? kOk : kValidationFailed;
        }
        if (minentropy->parsed()) {
            nlohmann::json report;
            npa::BehaviorInput behavior;
            if (!table_path.empty()) {
                if (!theta_spec.empty() || !p_spec.empty()) throw ParseError("--table excludes --theta/--p");
                behavior = scenario::table_from_json(read_json(table_path));
                report["table"] = table_path;
            } else {
                const auto params = single_params();
                behavior = protocol::correlations_kraus(params);
                report["params"] = protocol::to_json(params);
            }
            const auto mode = mode_for("full");
            const auto problem = npa::build_guessing_problem(behavior, mode);
            if (!dump_path.empty()) emit(sdp::to_json(problem).dump(2) + "\n", dump_path);
            const auto sol = sdp::solve(problem, settings);
            const auto status = commands::status_code(sol.status);
            report["mode"] = mode.mode == npa::ConstraintMode::FullTable ? "full" : "summary";
            report["epsilon"] = mode.epsilon;
            report["status"] = sdp::to_string(sol.status);
            report["iterations"] = sol.iterations;
            if (!commands::is_failure(status)) {
                report["guessing_probability"] = sol.objective_value;
                report["hmin"] = npa::hmin_from_guessing(sol.objective_value);
                report["verify"] = sdp::verify(problem, sol).passed;
            } else {
                report["message"] = sol.message;
            }
            emit(report.dump(2) + "\n", out);
            return commands::is_failure(status) ? kSolverFailure : kOk;
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolverFailure;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}
