// Acceptance run: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "seqrand/seqrand.hpp"

using namespace seqrand;

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::sqrt(2.0);

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Every generated table and every SDP solve passes through here so that the
// property checks of criterion 9 cover the whole run.
struct Audit {
    std::size_t tables = 0;
    std::size_t table_failures = 0;
    std::size_t solves = 0;
    std::size_t optimal = 0;
    std::size_t verify_failures = 0;
    std::string first_verify_failure;
    double slowest_solve = 0.0;
};

Audit audit;

scenario::CorrelationTable make_table(const protocol::ProtocolParams& params) {
    auto t = protocol::correlations_kraus(params);
    ++audit.tables;
    if (!scenario::validate_no_signaling(t, 1e-12).passed || !scenario::validate_sequentiality(t, 1e-12).passed)
        ++audit.table_failures;
    return t;
}

commands::GuessResult solve(const protocol::ProtocolParams& params, npa::ConstraintMode mode) {
    const auto problem = npa::build_guessing_problem(make_table(params), {mode, 0.0});
    const auto t0 = Clock::now();
    const auto sol = sdp::solve(problem);
    audit.slowest_solve = std::max(audit.slowest_solve, seconds_since(t0));
    ++audit.solves;
    if (sol.status == sdp::SolveStatus::Optimal) {
        ++audit.optimal;
        const auto rep = sdp::verify(problem, sol);
        if (!rep.passed) {
            if (audit.verify_failures++ == 0) {
                char buf[200];
                std::snprintf(buf, sizeof buf, "theta=%.4f p=%.4f c=%.4f", params.theta, params.p, params.c);
                audit.first_verify_failure = buf;
            }
        }
    }
    commands::GuessResult r;
    r.status = commands::status_code(sol.status);
    if (!commands::is_failure(r.status)) {
        r.guessing_probability = sol.objective_value;
        r.hmin = npa::hmin_from_guessing(sol.objective_value);
    }
    return r;
}

commands::GuessResult full(double theta, double p, double c = 0.0) {
    return solve({theta, p, c}, npa::ConstraintMode::FullTable);
}

int failures = 0;

void report(int id, bool ok, const std::string& title, const std::string& detail) {
    std::printf("%s %d %s | %s\n", ok ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void criterion1() {
    const auto t0 = Clock::now();
    double worst_sc = 0.0, worst_st = 0.0, worst_circle = 0.0;
    for (int k = 0; k <= 32; ++k) {
        const double theta = kPi / 4 * k / 32;
        const auto v = bell::bell_values(make_table({theta, 0.0, 0.0}));
        worst_sc = std::max(worst_sc, std::abs(v.sc - 2 * kSqrt2));
        worst_st = std::max(worst_st, std::abs(bell::s_theta(v, theta) - kSqrt2));
        const double circle = (v.s1 - kSqrt2) * (v.s1 - kSqrt2) + (v.s2 - kSqrt2) * (v.s2 - kSqrt2);
        worst_circle = std::max(worst_circle, std::abs(circle - 2.0));
    }
    const double elapsed = seconds_since(t0);
    report(1, worst_sc <= 1e-9 && worst_st <= 1e-9 && worst_circle <= 1e-9 && elapsed < 1.0, "boundary saturation",
           fmt("33 thetas: max|sc-2sqrt2|=%.1e max|S_theta-sqrt2|=%.1e max|circle-2|=%.1e in %.3fs", worst_sc, worst_st,
               worst_circle, elapsed));
}

void criterion2() {
    struct Case {
        double theta;
        double lo, hi;
    };
    const Case cases[] = {{kPi / 8, 1.999, 1e9}, {0.0, 0.999, 1.001}, {kPi / 4, 0.999, 1.001}};
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        const auto t0 = Clock::now();
        const auto r = full(c.theta, 0.0);
        const double dt = seconds_since(t0);
        ok = ok && !commands::is_failure(r.status) && r.hmin >= c.lo && r.hmin <= c.hi && dt < 30.0;
        detail += fmt("theta=%.4f H=%.5f (%s, %.2fs) ", c.theta, r.hmin,
                      sdp::to_string(static_cast<sdp::SolveStatus>(r.status)), dt);
    }
    report(2, ok, "ideal min-entropy via SDP", detail);
}

// Non-decreasing up to the maximum and non-increasing after it, up to tol.
bool unimodal(const std::vector<double>& h, std::size_t peak, double tol) {
    for (std::size_t i = 0; i + 1 <= peak; ++i)
        if (h[i + 1] < h[i] - tol) return false;
    for (std::size_t i = peak; i + 1 < h.size(); ++i)
        if (h[i + 1] > h[i] + tol) return false;
    return true;
}

void criterion3() {
    bool ok = true;
    double worst = 0.0;
    for (int k = 1; k <= 7; ++k) {
        const auto r = full(0.1 * k, 0.0);
        worst = std::max(worst, std::abs(r.hmin - 2.0));
        ok = ok && !commands::is_failure(r.status);
    }
    ok = ok && worst <= 1e-3;
    std::string detail = fmt("p=0: max|H-2|=%.1e over theta=0.1..0.7;", worst);
    const auto grid = commands::linspace(commands::kSearchLo, commands::kSearchHi, 15);
    for (double p : {0.005, 0.01, 0.02}) {
        std::vector<double> h;
        for (double theta : grid) h.push_back(full(theta, p).hmin);
        const std::size_t peak = static_cast<std::size_t>(std::max_element(h.begin(), h.end()) - h.begin());
        const double edge = std::max(full(0.0, p).hmin, full(kPi / 4, p).hmin);
        const bool interior = peak > 0 && peak + 1 < h.size() && h[peak] > edge;
        const bool shape = unimodal(h, peak, 1e-4);
        ok = ok && interior && shape;
        detail += fmt(" p=%.3f peak H=%.3f at theta=%.3f, endpoints<=%.3f, %s;", p, h[peak], grid[peak], edge,
                      shape ? "unimodal" : "NOT unimodal");
    }
    report(3, ok, "flat p=0 curve and interior maxima", detail);
}

double best_h(double p) {
    return commands::golden_section_max([&](double theta) { return full(theta, p); }).hmin;
}

void criterion4() {
    const auto t0 = Clock::now();
    double lo = 0.005, hi = 0.04;
    const double h_lo = best_h(lo), h_hi = best_h(hi);
    bool bracket = h_lo > 1.0 && h_hi < 1.0;
    if (bracket) {
        for (int it = 0; it < 12; ++it) {
            const double mid = (lo + hi) / 2;
            (best_h(mid) > 1.0 ? lo : hi) = mid;
        }
    }
    const double crossing = (lo + hi) / 2;
    const bool crossing_ok = bracket && crossing >= 0.018 * 0.8 && crossing <= 0.018 * 1.2;

    bool ordering = true;
    double min_margin = 1e9, margin_p = 0.0;
    for (double p : commands::linspace(0.0, 0.08, 20)) {
        const double seq = best_h(p);
        const double analytic = bell::pironio_hmin(protocol::chsh_reference(p, 0.0));
        if (seq - analytic < min_margin) {
            min_margin = seq - analytic;
            margin_p = p;
        }
        ordering = ordering && seq >= analytic;
    }
    const double elapsed = seconds_since(t0);
    report(4, crossing_ok && ordering && elapsed < 1800.0, "noise thresholds",
           fmt("H=1 crossing at p=%.5f (window 0.0144..0.0216); min(seq-analytic CHSH)=%.4f at p=%.4f over 20 points; "
               "%.1fs",
               crossing, min_margin, margin_p, elapsed));
}

void criterion5() {
    const double s_expected[3][3] = {{2.305, 2.388, 2.751}, {2.270, 2.444, 2.766}, {2.272, 2.446, 2.770}};
    const double h_expected[3] = {0.82, 0.89, 0.90};
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& row = commands::experiment_rows()[i];
        const auto v = bell::bell_values(make_table(row.params));
        const auto r = solve(row.params, npa::ConstraintMode::Summary);
        const double got[3] = {v.s1, v.s2, v.sc};
        bool row_ok = !commands::is_failure(r.status) && std::abs(r.hmin - h_expected[i]) <= 0.03;
        for (int k = 0; k < 3; ++k) row_ok = row_ok && std::abs(got[k] - s_expected[i][k]) <= 0.002;
        ok = ok && row_ok;
        detail += fmt("ID%d s=(%.4f,%.4f,%.4f) H=%.4f%s; ", row.id, v.s1, v.s2, v.sc, r.hmin, row_ok ? "" : " MISMATCH");
    }
    // The third reference row is reproduced by the second row's theta; shown for diagnosis only.
    const auto alt = bell::bell_values(make_table({0.436, 0.015, 0.012}));
    detail += fmt("[ID3 at theta=0.436: s=(%.4f,%.4f,%.4f)]", alt.s1, alt.s2, alt.sc);
    report(5, ok, "experiment model columns", detail);
}

void criterion6() {
    const double s[3] = {2.761, 2.772, 2.797};
    const double expected[3] = {0.61, 0.63, 0.72};
    bool ok = true;
    std::string detail;
    for (int i = 0; i < 3; ++i) {
        const double h = bell::pironio_hmin(s[i]);
        ok = ok && std::abs(h - expected[i]) <= 0.02 && std::abs(h - oracle::pironio(s[i])) < 1e-12;
        detail += fmt("S=%.3f H=%.4f; ", s[i], h);
    }
    const double model = bell::pironio_hmin(protocol::chsh_reference(0.019, 0.017));
    ok = ok && std::abs(model - 0.60) <= 0.02;
    detail += fmt("ID1 model H=%.4f", model);
    report(6, ok, "analytic CHSH bound", detail);
}

void criterion7() {
    std::mt19937 rng(20240607);
    std::uniform_real_distribution<double> th(0.0, kPi / 4), u(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const double p = 0.5 * u(rng);
        const double c = (1.0 - p) * 0.5 * u(rng);
        const protocol::ProtocolParams params{th(rng), p, c};
        const auto a = make_table(params);
        const auto b = protocol::correlations_dilated(params);
        for (std::size_t i = 0; i < scenario::CorrelationTable::kSize; ++i)
            worst = std::max(worst, std::abs(a.probabilities()[i] - b.probabilities()[i]));
    }
    report(7, worst < 1e-12, "Kraus and dilation agree", fmt("50 random (theta,p,c): max discrepancy %.2e", worst));
}

void criterion8() {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> alpha(-kPi / 4, kPi / 4);
    double sos = 0.0;
    for (int k = 0; k < 20; ++k) {
        const auto s = oracle::random_strategy(rng, k % 2 == 0);
        const double a = alpha(rng);
        sos = std::max(sos, std::abs(bell::sos_residual(s, a) - (2 * kSqrt2 - oracle::s_prime_value(s, a))));
    }
    double tangent = 0.0;
    for (double a : {-0.6, -0.3, 0.0, 0.2, 0.5, 0.7}) tangent = std::max(tangent, std::abs(bell::sos_residual(bell::tangent_strategy(a), a)));
    double state = 0.0;
    for (int k = 0; k <= 32; ++k) {
        const double theta = kPi / 4 * k / 32;
        state = std::max(state, bell::state_characterization_residual(protocol::build_dilated({theta, 0.0, 0.0}), theta));
    }
    report(8, sos <= 1e-10 && tangent <= 1e-10 && state <= 1e-10, "sum-of-squares certificates",
           fmt("random strategies max|sos-(2sqrt2-S')|=%.1e, tangent %.1e, state characterization %.1e", sos, tangent,
               state));
}

void criterion9() {
    const auto conf = oracle::confluence(4);

    std::mt19937 rng(99);
    std::uniform_real_distribution<double> th(0.05, 0.75), pd(0.0, 0.05), cd(0.0, 0.03);
    int ordering_failures = 0;
    double min_gap = 1e9;
    for (int k = 0; k < 10; ++k) {
        const protocol::ProtocolParams params{th(rng), pd(rng), cd(rng)};
        const auto s = solve(params, npa::ConstraintMode::Summary);
        const auto f = solve(params, npa::ConstraintMode::FullTable);
        const double gap = s.guessing_probability - f.guessing_probability;
        min_gap = std::min(min_gap, gap);
        if (commands::is_failure(s.status) || commands::is_failure(f.status) || gap < -1e-6) ++ordering_failures;
    }

    const bool ok = audit.table_failures == 0 && conf.violations == 0 && ordering_failures == 0 &&
                    audit.verify_failures == 0 && audit.optimal > 0;
    std::string detail = fmt("validators: %zu/%zu tables pass at 1e-12; confluence: %zu words, %zu violations; "
                             "G_summary-G_full >= %.2e on 10 behaviors; verify: %zu/%zu optimal solutions pass "
                             "(%zu solves, slowest %.2fs)",
                             audit.tables - audit.table_failures, audit.tables, conf.words, conf.violations, min_gap,
                             audit.optimal - audit.verify_failures, audit.optimal, audit.solves, audit.slowest_solve);
    if (!audit.first_verify_failure.empty()) detail += "; first verify failure at " + audit.first_verify_failure;
    report(9, ok, "property suites", detail);
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    try {
        criterion1();
        criterion2();
        criterion3();
        criterion4();
        criterion5();
        criterion6();
        criterion7();
        criterion8();
        criterion9();
    } catch (const std::exception& e) {
        std::printf("FAIL aborted | %s\n", e.what());
        return 1;
    }
    std::printf("%d of 9 criteria failed, %.1fs total\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
