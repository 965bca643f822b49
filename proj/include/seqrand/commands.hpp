// commands.hpp
// Pipelines behind the seqrand subcommands. Each returns plain numeric rows so
// the CLI only has to format and write them.

#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqrand/bell.hpp"
#include "seqrand/error.hpp"
#include "seqrand/npa.hpp"
#include "seqrand/parallel.hpp"
#include "seqrand/protocol.hpp"
#include "seqrand/scenario.hpp"
#include "seqrand/sdp.hpp"

namespace seqrand::commands {

inline constexpr double kQuarterPi = std::numbers::pi / 4;

// Status column: 0 optimal, 1 inaccurate, 2 infeasible, 3 failed.
inline int status_code(sdp::SolveStatus s) { return static_cast<int>(s); }

inline bool is_failure(int code) { return code >= status_code(sdp::SolveStatus::Infeasible); }

struct NumericTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    bool any_failed(const std::string& status_column = "status") const {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (columns[c] != status_column) continue;
            for (const auto& r : rows)
                if (is_failure(static_cast<int>(r[c]))) return true;
        }
        return false;
    }
};

inline std::string format_number(double v) {
    if (!std::isfinite(v)) v = 0.0;
    if (v == 0.0) v = 0.0;  // drop the sign of -0
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string to_csv(const NumericTable& t) {
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
    out += '\n';
    for (const auto& r : t.rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + format_number(r[c]);
        out += '\n';
    }
    return out;
}

inline nlohmann::json to_json(const NumericTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json row = nlohmann::json::object();
        for (std::size_t c = 0; c < r.size(); ++c) row[t.columns[c]] = std::isfinite(r[c]) ? r[c] : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

/// n points from lo to hi inclusive.
inline std::vector<double> linspace(double lo, double hi, int n) {
    if (n < 1) throw ParseError("grid needs at least one point");
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
    return out;
}

inline bool is_endpoint(double theta) { return std::abs(theta) < 1e-12 || std::abs(theta - kQuarterPi) < 1e-12; }

// ---- boundary ----

inline NumericTable boundary(const std::vector<double>& thetas) {
    NumericTable t{{"theta", "s1", "s2", "sc", "s_theta", "circle_residual"}, {}};
    for (double theta : thetas) {
        const auto table = protocol::correlations_kraus({theta, 0.0, 0.0});
        const auto v = bell::bell_values(table);
        const auto r = bell::boundary_residuals(table, theta);
        t.rows.push_back({theta, v.s1, v.s2, v.sc, bell::s_theta(v, theta), r.circle});
    }
    return t;
}

// ---- min-entropy ----

struct GuessResult {
    double hmin = 0.0;
    double guessing_probability = 1.0;
    int status = status_code(sdp::SolveStatus::Failed);
};

inline GuessResult guess(const npa::BehaviorInput& behavior, const npa::GuessingConstraintMode& mode,
                         const sdp::SolverSettings& settings) {
    const auto sol = sdp::solve(npa::build_guessing_problem(behavior, mode), settings);
    GuessResult r;
    r.status = status_code(sol.status);
    if (!is_failure(r.status)) {
        r.guessing_probability = sol.objective_value;
        r.hmin = npa::hmin_from_guessing(sol.objective_value);
    }
    return r;
}

inline GuessResult guess(const protocol::ProtocolParams& params, const npa::GuessingConstraintMode& mode,
                         const sdp::SolverSettings& settings) {
    return guess(protocol::correlations_kraus(params), mode, settings);
}

// ---- scan-theta ----

inline NumericTable scan_theta(const std::vector<double>& ps, const std::vector<double>& thetas, double c,
                               const npa::GuessingConstraintMode& mode, const sdp::SolverSettings& settings,
                               unsigned jobs) {
    struct Point {
        double p, theta;
    };
    std::vector<Point> points;
    for (double p : ps)
        for (double theta : thetas) points.push_back({p, theta});
    const auto results = parallel::ordered_map(points.size(), jobs, [&](std::size_t i) {
        return guess(protocol::ProtocolParams{points[i].theta, points[i].p, c}, mode, settings);
    });
    NumericTable t{{"p", "theta", "hmin", "guessing_probability", "status", "endpoint"}, {}};
    for (std::size_t i = 0; i < points.size(); ++i) {
        t.rows.push_back({points[i].p, points[i].theta, results[i].hmin, results[i].guessing_probability,
                          static_cast<double>(results[i].status), is_endpoint(points[i].theta) ? 1.0 : 0.0});
    }
    return t;
}

// ---- scan-noise ----

struct ThetaOptimum {
    double theta = 0.0;
    double hmin = 0.0;
    int status = 0;  // worst status met during the search
};

inline constexpr double kSearchLo = 0.05;
inline constexpr double kSearchHi = kQuarterPi - 0.05;

/// Golden-section search for the maximum of a unimodal h on [lo, hi].
/// h returns a GuessResult; failed points count as -1 so the search moves away.
template <class H>
ThetaOptimum golden_section_max(H&& h, double lo = kSearchLo, double hi = kSearchHi, double theta_tol = 1e-3) {
    ThetaOptimum best{lo, -1.0, 0};
    auto f = [&](double theta) {
        const GuessResult r = h(theta);
        best.status = std::max(best.status, r.status);
        const double v = is_failure(r.status) ? -1.0 : r.hmin;
        if (v > best.hmin) {
            best.hmin = v;
            best.theta = theta;
        }
        return v;
    };
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo;
    double b = hi;
    double x1 = b - g * (b - a);
    double x2 = a + g * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    while (b - a > theta_tol) {
        if (f1 >= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if (best.hmin < 0.0) best.hmin = 0.0;
    return best;
}

/// Strength maximizing H_min at fixed noise.
inline ThetaOptimum best_theta(double p, double c, const npa::GuessingConstraintMode& mode,
                               const sdp::SolverSettings& settings) {
    return golden_section_max(
        [&](double theta) { return guess(protocol::ProtocolParams{theta, p, c}, mode, settings); });
}

inline NumericTable scan_noise(const std::vector<double>& ps, const npa::GuessingConstraintMode& mode,
                               const sdp::SolverSettings& settings, unsigned jobs) {
    struct Row {
        ThetaOptimum opt;
        double analytic = 0.0;
        GuessResult level2;
    };
    const auto rows = parallel::ordered_map(ps.size(), jobs, [&](std::size_t i) {
        Row r;
        r.opt = best_theta(ps[i], 0.0, mode, settings);
        const double s = protocol::chsh_reference(ps[i], 0.0);
        r.analytic = bell::pironio_hmin(s);
        const auto sol = sdp::solve(npa::build_chsh_guessing_problem(s, 2), settings);
        r.level2.status = status_code(sol.status);
        if (!is_failure(r.level2.status)) {
            r.level2.guessing_probability = sol.objective_value;
            r.level2.hmin = npa::hmin_from_guessing(sol.objective_value);
        }
        return r;
    });
    NumericTable t{{"p", "hmin", "theta", "analytic_chsh_hmin", "level2_chsh_hmin", "status"}, {}};
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const Row& r = rows[i];
        t.rows.push_back({ps[i], r.opt.hmin, r.opt.theta, r.analytic, r.level2.hmin,
                          static_cast<double>(std::max(r.opt.status, r.level2.status))});
    }
    return t;
}

// ---- tables ----

struct ExperimentRow {
    int id;
    protocol::ProtocolParams params;
    double chsh_experiment;  // printed experimental CHSH value of the reference experiment
};

inline const std::vector<ExperimentRow>& experiment_rows() {
    static const std::vector<ExperimentRow> rows{
        {1, {0.412, 0.019, 0.017}, 2.761},
        {2, {0.436, 0.016, 0.012}, 2.772},
        {3, {0.357, 0.015, 0.012}, 2.797},
    };
    return rows;
}

inline NumericTable tables(const npa::GuessingConstraintMode& mode, const sdp::SolverSettings& settings, unsigned jobs) {
    const auto& rows = experiment_rows();
    const auto results = parallel::ordered_map(rows.size(), jobs, [&](std::size_t i) {
        return guess(rows[i].params, mode, settings);
    });
    NumericTable t{{"id", "p", "c", "theta", "s1", "s2", "sc", "hmin", "guessing_probability", "status",
                    "chsh_model", "chsh_model_hmin", "chsh_experiment", "chsh_experiment_hmin"},
                   {}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto v = bell::bell_values(protocol::correlations_kraus(r.params));
        const double model = protocol::chsh_reference(r.params.p, r.params.c);
        t.rows.push_back({static_cast<double>(r.id), r.params.p, r.params.c, r.params.theta, v.s1, v.s2, v.sc,
                          results[i].hmin, results[i].guessing_probability, static_cast<double>(results[i].status),
                          model, bell::pironio_hmin(model), r.chsh_experiment, bell::pironio_hmin(r.chsh_experiment)});
    }
    return t;
}

// ---- validate ----

struct ValidationResult {
    scenario::NoSignalingReport no_signaling;
    scenario::SequentialityReport sequentiality;
    bool passed = false;
};

inline ValidationResult validate(const scenario::CorrelationTable& t, double tol) {
    ValidationResult r{scenario::validate_no_signaling(t, tol), scenario::validate_sequentiality(t, tol), false};
    r.passed = r.no_signaling.passed && r.sequentiality.passed;
    return r;
}

inline nlohmann::json to_json(const scenario::ViolationReport& v) {
    return {{"max_violation", v.max_violation}, {"worst", v.worst}, {"passed", v.passed}};
}

inline nlohmann::json to_json(const ValidationResult& r) {
    return {{"passed", r.passed},
            {"tolerance", r.no_signaling.tolerance},
            {"no_signaling",
             {{"bob_marginals_independent_of_x", to_json(r.no_signaling.alice_independent_of_x)},
              {"alice_marginal_independent_of_y", to_json(r.no_signaling.bobs_independent_of_y)}}},
            {"sequentiality", {{"bob1_independent_of_y2", to_json(r.sequentiality.bob1_independent_of_y2)}}}};
}

}  // namespace seqrand::commands
