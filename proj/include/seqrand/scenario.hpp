// scenario.hpp
// Three-party sequential behaviors p(a,b1,b2|x,y1,y2) and their validation.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

#include "json.hpp"

#include "seqrand/error.hpp"

namespace seqrand::scenario {

inline constexpr double kEntryTol = 1e-12;
inline constexpr double kNormTol = 1e-10;

// Outcomes are +1/-1; inputs are 0/1.
struct Setting {
    int x;
    int y1;
    int y2;
};

struct Outcome {
    int a;
    int b1;
    int b2;
};

inline constexpr std::array<int, 2> kInputs{0, 1};
inline constexpr std::array<int, 2> kOutcomes{+1, -1};

/// Full behavior of the Alice / Bob1 / Bob2 scenario (64 probabilities).
class CorrelationTable {
public:
    static constexpr std::size_t kSize = 64;

    CorrelationTable() = default;

    explicit CorrelationTable(const std::array<double, kSize>& probabilities) : p_(probabilities) { check(); }

    static std::size_t index(int x, int y1, int y2, int a, int b1, int b2) {
        auto bit = [](int o) -> std::size_t { return o > 0 ? 0 : 1; };
        return (static_cast<std::size_t>(x) << 5) | (static_cast<std::size_t>(y1) << 4) |
               (static_cast<std::size_t>(y2) << 3) | (bit(a) << 2) | (bit(b1) << 1) | bit(b2);
    }

    double operator()(int x, int y1, int y2, int a, int b1, int b2) const { return p_[index(x, y1, y2, a, b1, b2)]; }
    double operator()(Setting s, Outcome o) const { return (*this)(s.x, s.y1, s.y2, o.a, o.b1, o.b2); }

    const std::array<double, kSize>& probabilities() const { return p_; }

    // Builds a table from a callable f(x,y1,y2,a,b1,b2) -> probability.
    template <class F>
    static CorrelationTable from_function(F&& f) {
        std::array<double, kSize> p{};
        for (int x : kInputs)
            for (int y1 : kInputs)
                for (int y2 : kInputs)
                    for (int a : kOutcomes)
                        for (int b1 : kOutcomes)
                            for (int b2 : kOutcomes) p[index(x, y1, y2, a, b1, b2)] = f(x, y1, y2, a, b1, b2);
        return CorrelationTable(p);
    }

    static CorrelationTable uniform() {
        std::array<double, kSize> p{};
        p.fill(1.0 / 8.0);
        return CorrelationTable(p);
    }

private:
    void check() const {
        for (double v : p_) {
            if (!std::isfinite(v) || v < -kEntryTol || v > 1.0 + kEntryTol) {
                throw InvalidBehavior("CorrelationTable: probability outside [0,1]");
            }
        }
        for (std::size_t setting = 0; setting < 8; ++setting) {
            double sum = 0.0;
            for (std::size_t o = 0; o < 8; ++o) sum += p_[(setting << 3) | o];
            if (std::abs(sum - 1.0) > kNormTol) {
                throw InvalidBehavior("CorrelationTable: outcomes of setting " + std::to_string(setting) +
                                      " sum to " + std::to_string(sum));
            }
        }
    }

    std::array<double, kSize> p_{};
};

/// Worst violation of a family of marginal equalities.
struct ViolationReport {
    double max_violation = 0.0;
    std::string worst;  // human-readable location of the worst violation
    bool passed = true;
};

struct NoSignalingReport {
    ViolationReport alice_independent_of_x;  // Bob marginals do not depend on x
    ViolationReport bobs_independent_of_y;   // Alice marginals do not depend on (y1,y2)
    double tolerance = 0.0;
    bool passed = true;
};

struct SequentialityReport {
    ViolationReport bob1_independent_of_y2;
    double tolerance = 0.0;
    bool passed = true;
};

namespace detail {

inline std::string sign(int o) { return o > 0 ? "+" : "-"; }

inline void record(ViolationReport& r, double v, const std::string& where) {
    if (v > r.max_violation) {
        r.max_violation = v;
        r.worst = where;
    }
}

}  // namespace detail

inline NoSignalingReport validate_no_signaling(const CorrelationTable& t, double tol) {
    NoSignalingReport rep;
    rep.tolerance = tol;
    // sum_a p(a,b|x,y) is independent of x
    for (int y1 : kInputs)
        for (int y2 : kInputs)
            for (int b1 : kOutcomes)
                for (int b2 : kOutcomes) {
                    double m[2] = {0.0, 0.0};
                    for (int x : kInputs)
                        for (int a : kOutcomes) m[x] += t(x, y1, y2, a, b1, b2);
                    detail::record(rep.alice_independent_of_x, std::abs(m[0] - m[1]),
                                   "y=(" + std::to_string(y1) + "," + std::to_string(y2) + ") b=(" + detail::sign(b1) +
                                       "," + detail::sign(b2) + ")");
                }
    // sum_b p(a,b|x,y) is independent of y
    for (int x : kInputs)
        for (int a : kOutcomes) {
            double m[4] = {0.0, 0.0, 0.0, 0.0};
            for (int y1 : kInputs)
                for (int y2 : kInputs)
                    for (int b1 : kOutcomes)
                        for (int b2 : kOutcomes) m[2 * y1 + y2] += t(x, y1, y2, a, b1, b2);
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j)
                    detail::record(rep.bobs_independent_of_y, std::abs(m[i] - m[j]),
                                   "x=" + std::to_string(x) + " a=" + detail::sign(a) + " y=" + std::to_string(i) +
                                       " vs " + std::to_string(j));
        }
    rep.alice_independent_of_x.passed = rep.alice_independent_of_x.max_violation <= tol;
    rep.bobs_independent_of_y.passed = rep.bobs_independent_of_y.max_violation <= tol;
    rep.passed = rep.alice_independent_of_x.passed && rep.bobs_independent_of_y.passed;
    return rep;
}

inline SequentialityReport validate_sequentiality(const CorrelationTable& t, double tol) {
    SequentialityReport rep;
    rep.tolerance = tol;
    for (int x : kInputs)
        for (int y1 : kInputs)
            for (int a : kOutcomes)
                for (int b1 : kOutcomes) {
                    double m[2] = {0.0, 0.0};
                    for (int y2 : kInputs)
                        for (int b2 : kOutcomes) m[y2] += t(x, y1, y2, a, b1, b2);
                    detail::record(rep.bob1_independent_of_y2, std::abs(m[0] - m[1]),
                                   "x=" + std::to_string(x) + " y1=" + std::to_string(y1) + " a=" + detail::sign(a) +
                                       " b1=" + detail::sign(b1));
                }
    rep.bob1_independent_of_y2.passed = rep.bob1_independent_of_y2.max_violation <= tol;
    rep.passed = rep.bob1_independent_of_y2.passed;
    return rep;
}

/// Single- and two-observable mean values of a behavior.
struct BehaviorSummary {
    std::array<double, 2> a{};       // <A_x>
    std::array<double, 2> b{};       // <B_y1>
    std::array<double, 2> b0{};      // <B_{0,y2}>
    std::array<std::array<double, 2>, 2> ab{};   // <A_x B_y1>
    std::array<std::array<double, 2>, 2> ab0{};  // <A_x B_{0,y2}>
};

inline constexpr double kSummaryValidationTol = 1e-9;

inline BehaviorSummary summarize(const CorrelationTable& t) {
    const auto ns = validate_no_signaling(t, kSummaryValidationTol);
    const auto seq = validate_sequentiality(t, kSummaryValidationTol);
    if (!ns.passed || !seq.passed) {
        throw InvalidBehavior("summarize: behavior violates no-signaling or sequentiality");
    }
    BehaviorSummary s;
    for (int x : kInputs)
        for (int a : kOutcomes)
            for (int b1 : kOutcomes)
                for (int b2 : kOutcomes) s.a[x] += a * t(x, 0, 0, a, b1, b2);
    for (int y1 : kInputs)
        for (int a : kOutcomes)
            for (int b1 : kOutcomes)
                for (int b2 : kOutcomes) s.b[y1] += b1 * t(0, y1, 0, a, b1, b2);
    for (int y2 : kInputs)
        for (int a : kOutcomes)
            for (int b1 : kOutcomes)
                for (int b2 : kOutcomes) s.b0[y2] += b2 * t(0, 0, y2, a, b1, b2);
    for (int x : kInputs)
        for (int y : kInputs)
            for (int a : kOutcomes)
                for (int b1 : kOutcomes)
                    for (int b2 : kOutcomes) {
                        s.ab[x][y] += a * b1 * t(x, y, 0, a, b1, b2);
                        s.ab0[x][y] += a * b2 * t(x, 0, y, a, b1, b2);
                    }
    return s;
}

// JSON: {"p": {"x,y1,y2,a,b1,b2": prob, ...}} with outcomes written "+" / "-".
// U+2212 is accepted for "-" on input.
inline std::string table_key(int x, int y1, int y2, int a, int b1, int b2) {
    return std::to_string(x) + "," + std::to_string(y1) + "," + std::to_string(y2) + "," + detail::sign(a) + "," +
           detail::sign(b1) + "," + detail::sign(b2);
}

inline nlohmann::json to_json(const CorrelationTable& t) {
    nlohmann::json p = nlohmann::json::object();
    for (int x : kInputs)
        for (int y1 : kInputs)
            for (int y2 : kInputs)
                for (int a : kOutcomes)
                    for (int b1 : kOutcomes)
                        for (int b2 : kOutcomes) p[table_key(x, y1, y2, a, b1, b2)] = t(x, y1, y2, a, b1, b2);
    return nlohmann::json{{"p", p}};
}

namespace detail {

inline std::string normalize_key(std::string key) {
    const std::string unicode_minus = "\xE2\x88\x92";
    for (std::size_t pos = key.find(unicode_minus); pos != std::string::npos; pos = key.find(unicode_minus)) {
        key.replace(pos, unicode_minus.size(), "-");
    }
    std::string out;
    for (char c : key)
        if (c != ' ') out += c;
    return out;
}

}  // namespace detail

inline CorrelationTable table_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("p") || !j.at("p").is_object()) {
        throw ParseError("correlation table: expected an object with key \"p\"");
    }
    std::array<double, CorrelationTable::kSize> p{};
    std::array<bool, CorrelationTable::kSize> seen{};
    for (const auto& [raw_key, value] : j.at("p").items()) {
        const std::string key = detail::normalize_key(raw_key);
        bool matched = false;
        for (int x : kInputs)
            for (int y1 : kInputs)
                for (int y2 : kInputs)
                    for (int a : kOutcomes)
                        for (int b1 : kOutcomes)
                            for (int b2 : kOutcomes) {
                                if (key != table_key(x, y1, y2, a, b1, b2)) continue;
                                if (!value.is_number()) {
                                    throw ParseError("correlation table: value of \"" + raw_key + "\" is not a number");
                                }
                                const auto idx = CorrelationTable::index(x, y1, y2, a, b1, b2);
                                p[idx] = value.get<double>();
                                seen[idx] = true;
                                matched = true;
                            }
        if (!matched) {
            throw ParseError("correlation table: unrecognized key \"" + raw_key + "\"");
        }
    }
    for (bool s : seen) {
        if (!s) throw ParseError("correlation table: expected 64 entries");
    }
    return CorrelationTable(p);
}

}  // namespace seqrand::scenario
