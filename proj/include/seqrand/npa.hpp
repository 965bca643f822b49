// npa.hpp
// Moment relaxation of the adversary's guessing probability on the Bobs'
// outcome pair in the sequential scenario, and its CHSH counterpart.
//
// Operators are the +1 projectors of Alice's observables A0, A1 and of the
// dilated Bob observables B0, B1 (Bob1) and B00, B01 (Bob2 after y1 = 0).
// Relations: every generator is a projector; Alice commutes with Bob; two Bob
// generators commute when one input sequence is a strict prefix of the other.
// Moments are real, so a word and its adjoint share one variable.

#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "seqrand/error.hpp"
#include "seqrand/scenario.hpp"
#include "seqrand/sdp.hpp"

namespace seqrand::npa {

enum class Generator : std::uint8_t { A0, A1, B0, B1, B00, B01 };

inline constexpr std::array<Generator, 6> kGenerators{Generator::A0, Generator::A1, Generator::B0,
                                                      Generator::B1, Generator::B00, Generator::B01};

inline bool is_alice(Generator g) { return g == Generator::A0 || g == Generator::A1; }

inline const char* name(Generator g) {
    static constexpr const char* names[] = {"A0", "A1", "B0", "B1", "B00", "B01"};
    return names[static_cast<int>(g)];
}

// Input sequence that selects a Bob generator.
inline std::vector<int> bob_inputs(Generator g) {
    switch (g) {
        case Generator::B0: return {0};
        case Generator::B1: return {1};
        case Generator::B00: return {0, 0};
        case Generator::B01: return {0, 1};
        default: return {};
    }
}

inline bool commutes(Generator g, Generator h) {
    if (g == h) return true;
    if (is_alice(g) != is_alice(h)) return true;
    if (is_alice(g)) return false;
    auto a = bob_inputs(g);
    auto b = bob_inputs(h);
    if (a.size() > b.size()) std::swap(a, b);
    return a.size() < b.size() && std::equal(a.begin(), a.end(), b.begin());
}

struct Word {
    std::vector<Generator> alice;
    std::vector<Generator> bob;

    Word() = default;
    Word(std::vector<Generator> a, std::vector<Generator> b) : alice(std::move(a)), bob(std::move(b)) {}

    // Splits a mixed sequence; Alice's letters commute with Bob's.
    static Word from_sequence(const std::vector<Generator>& seq) {
        Word w;
        for (Generator g : seq) (is_alice(g) ? w.alice : w.bob).push_back(g);
        return w;
    }

    std::size_t size() const { return alice.size() + bob.size(); }
    bool empty() const { return alice.empty() && bob.empty(); }

    friend bool operator==(const Word&, const Word&) = default;

    // Shorter words first, then lexicographic by generator order.
    friend std::strong_ordering operator<=>(const Word& a, const Word& b) {
        if (auto c = a.size() <=> b.size(); c != 0) return c;
        if (auto c = a.alice <=> b.alice; c != 0) return c;
        return a.bob <=> b.bob;
    }
};

inline Word product(const Word& a, const Word& b) {
    Word w = a;
    w.alice.insert(w.alice.end(), b.alice.begin(), b.alice.end());
    w.bob.insert(w.bob.end(), b.bob.begin(), b.bob.end());
    return w;
}

inline Word adjoint(const Word& w) {
    return Word({w.alice.rbegin(), w.alice.rend()}, {w.bob.rbegin(), w.bob.rend()});
}

inline std::string to_string(const Word& w) {
    if (w.empty()) return "1";
    std::string s;
    for (Generator g : w.alice) s += std::string(s.empty() ? "" : " ") + name(g);
    for (Generator g : w.bob) s += std::string(s.empty() ? "" : " ") + name(g);
    return s;
}

namespace detail {

inline bool commutes_with_range(const std::vector<Generator>& w, std::size_t from, std::size_t to, Generator g) {
    for (std::size_t k = from; k < to; ++k)
        if (!commutes(w[k], g)) return false;
    return true;
}

// Normal form of one party's letters: remove a repeated letter when it can be
// moved next to its earlier copy, then take the lexicographically smallest
// arrangement reachable by swapping adjacent commuting letters. Repeat.
inline std::vector<Generator> canonical_part(std::vector<Generator> w) {
    for (;;) {
        bool changed = false;
        for (std::size_t i = 0; i < w.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < w.size(); ++j) {
                if (w[j] == w[i] && commutes_with_range(w, i + 1, j, w[i])) {
                    w.erase(w.begin() + static_cast<std::ptrdiff_t>(j));
                    changed = true;
                    break;
                }
                if (!commutes(w[j], w[i])) break;
            }
        }
        std::vector<Generator> out;
        std::vector<Generator> rest = w;
        while (!rest.empty()) {
            std::size_t best = rest.size();
            for (std::size_t i = 0; i < rest.size(); ++i) {
                if (commutes_with_range(rest, 0, i, rest[i]) && (best == rest.size() || rest[i] < rest[best])) best = i;
            }
            out.push_back(rest[best]);
            rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(best));
        }
        if (out != w) changed = true;
        w = std::move(out);
        if (!changed) return w;
    }
}

}  // namespace detail

inline Word canonicalize(const Word& w) {
    return Word(detail::canonical_part(w.alice), detail::canonical_part(w.bob));
}

/// Variable label of the moment <w>: the smaller of the canonical forms of w and w^dag.
inline Word moment_key(const Word& w) {
    Word a = canonicalize(w);
    Word b = canonicalize(adjoint(w));
    return std::min(a, b);
}

struct MomentLayout {
    std::vector<Word> basis;
    std::map<Word, int> var_index;  // moment key -> variable id
    std::vector<std::vector<int>> entry_var;
    std::vector<std::pair<int, int>> representative;  // first entry (i <= j) of each variable
    int block_count = 1;

    int size() const { return static_cast<int>(basis.size()); }
    int variable_count() const { return static_cast<int>(representative.size()); }

    // Entry of the moment matrix holding <w>; throws when w is not a moment of the layout.
    std::pair<int, int> entry(const Word& w) const {
        auto it = var_index.find(moment_key(w));
        if (it == var_index.end()) {
            throw InvalidProblem("moment <" + to_string(w) + "> does not appear in the moment matrix");
        }
        return representative[static_cast<std::size_t>(it->second)];
    }
};

inline MomentLayout make_layout(std::vector<Word> basis, int block_count) {
    MomentLayout L;
    L.basis = std::move(basis);
    L.block_count = block_count;
    const std::size_t n = L.basis.size();
    L.entry_var.assign(n, std::vector<int>(n, -1));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const Word key = moment_key(product(adjoint(L.basis[i]), L.basis[j]));
            auto [it, inserted] = L.var_index.emplace(key, static_cast<int>(L.representative.size()));
            if (inserted) L.representative.emplace_back(static_cast<int>(i), static_cast<int>(j));
            L.entry_var[i][j] = L.entry_var[j][i] = it->second;
        }
    }
    return L;
}

/// Level 1+AB basis of the sequential scenario: 1, Alice letters, Bob words
/// (single letters and commuting pairs), and Alice x Bob products.
inline std::vector<Word> sequential_basis_words() {
    using G = Generator;
    const std::vector<Word> bob = {Word({}, {G::B0}),          Word({}, {G::B1}),          Word({}, {G::B00}),
                                   Word({}, {G::B01}),         Word({}, {G::B0, G::B00}), Word({}, {G::B0, G::B01})};
    std::vector<Word> basis = {Word(), Word({G::A0}, {}), Word({G::A1}, {})};
    basis.insert(basis.end(), bob.begin(), bob.end());
    for (G a : {G::A0, G::A1})
        for (const auto& b : bob) basis.push_back(Word({a}, b.bob));
    return basis;
}

inline MomentLayout generate_basis() { return make_layout(sequential_basis_words(), 4); }

/// Words of the CHSH scenario (A0, A1, B0, B1) at level 1 or 2.
inline std::vector<Word> chsh_basis_words(int level) {
    using G = Generator;
    if (level != 1 && level != 2) throw InvalidProblem("chsh basis: level must be 1 or 2");
    std::vector<Word> basis = {Word(), Word({G::A0}, {}), Word({G::A1}, {}), Word({}, {G::B0}), Word({}, {G::B1})};
    if (level == 2) {
        basis.push_back(Word({G::A0, G::A1}, {}));
        basis.push_back(Word({G::A1, G::A0}, {}));
        basis.push_back(Word({}, {G::B0, G::B1}));
        basis.push_back(Word({}, {G::B1, G::B0}));
        for (G a : {G::A0, G::A1})
            for (G b : {G::B0, G::B1}) basis.push_back(Word({a}, {b}));
    }
    return basis;
}

/// Linear combination of words.
using Polynomial = std::vector<std::pair<double, Word>>;

/// Product of outcome projectors, with the -1 projector written as 1 - P.
inline Polynomial expand_projectors(const std::vector<std::pair<Generator, int>>& factors) {
    Polynomial terms = {{1.0, Word()}};
    for (const auto& [g, outcome] : factors) {
        const Word letter = Word::from_sequence({g});
        Polynomial next;
        for (const auto& [c, w] : terms) {
            if (outcome > 0) {
                next.emplace_back(c, product(w, letter));
            } else {
                next.emplace_back(c, w);
                next.emplace_back(-c, product(w, letter));
            }
        }
        terms = std::move(next);
    }
    return terms;
}

// <O> = 2P - 1 and <O O'> = 4PP' - 2P - 2P' + 1 for commuting observables.
inline Polynomial correlator(const std::vector<Generator>& gens) {
    Polynomial p;
    if (gens.size() == 1) {
        p = {{2.0, Word::from_sequence(gens)}, {-1.0, Word()}};
    } else if (gens.size() == 2) {
        p = {{4.0, Word::from_sequence(gens)},
             {-2.0, Word::from_sequence({gens[0]})},
             {-2.0, Word::from_sequence({gens[1]})},
             {1.0, Word()}};
    } else {
        throw InvalidProblem("correlator: expected one or two observables");
    }
    return p;
}

/// Moment matrices of one relaxation: one PSD block per adversary outcome,
/// with entries that share a moment tied together.
class MomentProblem {
public:
    explicit MomentProblem(MomentLayout layout) : layout_(std::move(layout)) {
        for (int e = 0; e < layout_.block_count; ++e) {
            const int b = problem_.add_block(layout_.size());
            for (int i = 0; i < layout_.size(); ++i)
                for (int j = i; j < layout_.size(); ++j) {
                    const auto [ri, rj] = layout_.representative[static_cast<std::size_t>(
                        layout_.entry_var[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])];
                    if (ri == i && rj == j) continue;
                    problem_.add_constraint({{b, i, j, 1.0}, {b, ri, rj, -1.0}}, sdp::Relation::Eq, 0.0, 0.0,
                                            "structure");
                }
        }
    }

    const MomentLayout& layout() const { return layout_; }
    sdp::SdpProblem& problem() { return problem_; }

    std::vector<sdp::Term> terms(int block, const Polynomial& poly) const {
        std::vector<sdp::Term> out;
        for (const auto& [c, w] : poly) {
            const auto [i, j] = layout_.entry(w);
            out.push_back({block, i, j, c});
        }
        return out;
    }

    // Sum over all blocks of the polynomial's moments.
    std::vector<sdp::Term> summed_terms(const Polynomial& poly) const {
        std::vector<sdp::Term> out;
        for (int e = 0; e < layout_.block_count; ++e) {
            auto t = terms(e, poly);
            out.insert(out.end(), t.begin(), t.end());
        }
        return out;
    }

    void add_normalization() {
        problem_.add_constraint(summed_terms({{1.0, Word()}}), sdp::Relation::Eq, 1.0, 0.0, "normalization");
    }

private:
    MomentLayout layout_;
    sdp::SdpProblem problem_;
};

enum class ConstraintMode { FullTable, Summary };

struct GuessingConstraintMode {
    ConstraintMode mode = ConstraintMode::FullTable;
    double epsilon = 0.0;
};

using BehaviorInput = std::variant<scenario::CorrelationTable, scenario::BehaviorSummary>;

inline std::pair<int, int> certified_input() { return {0, 1}; }

/// Guessing-probability relaxation for the Bobs' outcomes at inputs y_r = (0, 1).
inline sdp::SdpProblem build_guessing_problem(const BehaviorInput& behavior, const GuessingConstraintMode& mode,
                                              std::pair<int, int> y_r = certified_input()) {
    using G = Generator;
    if (y_r != certified_input()) {
        throw UnsupportedTarget("guessing problem: only the input pair (0,1) is supported");
    }
    if (!(mode.epsilon >= 0.0) || !std::isfinite(mode.epsilon)) {
        throw InvalidProblem("guessing problem: epsilon must be finite and >= 0");
    }
    MomentProblem mp(generate_basis());
    mp.add_normalization();
    const G alice[2] = {G::A0, G::A1};
    const G bob1[2] = {G::B0, G::B1};
    const G bob2[2] = {G::B00, G::B01};
    auto add = [&](const Polynomial& poly, double target, std::string label) {
        mp.problem().add_constraint(mp.summed_terms(poly), sdp::Relation::Eq, target, mode.epsilon, std::move(label));
    };

    if (mode.mode == ConstraintMode::FullTable) {
        const auto* t = std::get_if<scenario::CorrelationTable>(&behavior);
        if (t == nullptr) throw InvalidBehavior("guessing problem: FullTable mode needs a full correlation table");
        const auto ns = scenario::validate_no_signaling(*t, scenario::kSummaryValidationTol);
        const auto seq = scenario::validate_sequentiality(*t, scenario::kSummaryValidationTol);
        if (!ns.passed || !seq.passed) throw InvalidBehavior("guessing problem: behavior is signaling");
        for (int x : scenario::kInputs)
            for (int y2 : scenario::kInputs)
                for (int a : scenario::kOutcomes)
                    for (int b1 : scenario::kOutcomes)
                        for (int b2 : scenario::kOutcomes)
                            add(expand_projectors({{alice[x], a}, {G::B0, b1}, {bob2[y2], b2}}),
                                (*t)(x, 0, y2, a, b1, b2), "p " + scenario::table_key(x, 0, y2, a, b1, b2));
        for (int x : scenario::kInputs)
            for (int a : scenario::kOutcomes)
                for (int b1 : scenario::kOutcomes) {
                    double marginal = 0.0;
                    for (int b2 : scenario::kOutcomes) marginal += (*t)(x, 1, 0, a, b1, b2);
                    add(expand_projectors({{alice[x], a}, {G::B1, b1}}), marginal,
                        "p x=" + std::to_string(x) + " y1=1 a=" + std::to_string(a) + " b1=" + std::to_string(b1));
                }
    } else {
        const scenario::BehaviorSummary s = std::holds_alternative<scenario::BehaviorSummary>(behavior)
                                                ? std::get<scenario::BehaviorSummary>(behavior)
                                                : scenario::summarize(std::get<scenario::CorrelationTable>(behavior));
        for (int x : scenario::kInputs) add(correlator({alice[x]}), s.a[x], "<A" + std::to_string(x) + ">");
        for (int y : scenario::kInputs) add(correlator({bob1[y]}), s.b[y], "<B" + std::to_string(y) + ">");
        for (int y : scenario::kInputs) add(correlator({bob2[y]}), s.b0[y], "<B0" + std::to_string(y) + ">");
        for (int x : scenario::kInputs)
            for (int y : scenario::kInputs) {
                add(correlator({alice[x], bob1[y]}), s.ab[x][y], "<A" + std::to_string(x) + "B" + std::to_string(y) + ">");
                add(correlator({alice[x], bob2[y]}), s.ab0[x][y],
                    "<A" + std::to_string(x) + "B0" + std::to_string(y) + ">");
            }
    }

    std::vector<sdp::Term> objective;
    int block = 0;
    for (int e1 : scenario::kOutcomes)
        for (int e2 : scenario::kOutcomes) {
            auto t = mp.terms(block++, expand_projectors({{G::B0, e1}, {G::B01, e2}}));
            objective.insert(objective.end(), t.begin(), t.end());
        }
    mp.problem().set_objective(std::move(objective), true);
    return std::move(mp.problem());
}

inline Polynomial chsh_polynomial() {
    using G = Generator;
    Polynomial s;
    const double sign[2][2] = {{1, 1}, {1, -1}};
    const G alice[2] = {G::A0, G::A1};
    const G bob[2] = {G::B0, G::B1};
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (auto [c, w] : correlator({alice[x], bob[y]})) s.emplace_back(sign[x][y] * c, w);
    return s;
}

inline void check_chsh_target(double s_target) {
    if (!std::isfinite(s_target) || std::abs(s_target) > 2.0 * std::numbers::sqrt2 + 1e-9) {
        throw SuperQuantum("chsh problem: target " + std::to_string(s_target) + " exceeds 2sqrt2");
    }
}

/// Two blocks (Eve's guess of Bob's outcome for input 0), constrained to <S> = s_target.
inline sdp::SdpProblem build_chsh_guessing_problem(double s_target, int level, double epsilon = 0.0) {
    using G = Generator;
    check_chsh_target(s_target);
    MomentProblem mp(make_layout(chsh_basis_words(level), 2));
    mp.add_normalization();
    mp.problem().add_constraint(mp.summed_terms(chsh_polynomial()), sdp::Relation::Eq, s_target, epsilon, "<S>");
    std::vector<sdp::Term> objective;
    int block = 0;
    for (int e : scenario::kOutcomes) {
        auto t = mp.terms(block++, expand_projectors({{G::B0, e}}));
        objective.insert(objective.end(), t.begin(), t.end());
    }
    mp.problem().set_objective(std::move(objective), true);
    return std::move(mp.problem());
}

/// Single block, maximize <S>.
inline sdp::SdpProblem build_chsh_value_problem(int level) {
    MomentProblem mp(make_layout(chsh_basis_words(level), 1));
    mp.add_normalization();
    mp.problem().set_objective(mp.terms(0, chsh_polynomial()), true);
    return std::move(mp.problem());
}

struct MinEntropy {
    double guessing_probability = 0.0;
    double hmin = 0.0;  // bits
    sdp::SdpSolution solution;
};

inline double hmin_from_guessing(double g) { return g >= 1.0 ? 0.0 : -std::log2(g); }

inline MinEntropy solve_guessing(const sdp::SdpProblem& problem, const sdp::SolverSettings& settings) {
    MinEntropy out;
    out.solution = sdp::solve(problem, settings);
    if (out.solution.status == sdp::SolveStatus::Failed || out.solution.status == sdp::SolveStatus::Infeasible) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "guessing SDP %s (%s): pinf %.2e dinf %.2e gap %.2e after %d iterations",
                      sdp::to_string(out.solution.status), out.solution.message.c_str(), out.solution.primal_residual,
                      out.solution.dual_residual, out.solution.duality_gap, out.solution.iterations);
        throw SolverFailure(buf);
    }
    out.guessing_probability = out.solution.objective_value;
    out.hmin = hmin_from_guessing(out.guessing_probability);
    return out;
}

inline MinEntropy minentropy(const BehaviorInput& behavior, const GuessingConstraintMode& mode,
                             std::pair<int, int> y_r = certified_input(), const sdp::SolverSettings& settings = {}) {
    return solve_guessing(build_guessing_problem(behavior, mode, y_r), settings);
}

inline MinEntropy chsh_minentropy(double s_target, int level, const sdp::SolverSettings& settings = {}) {
    return solve_guessing(build_chsh_guessing_problem(s_target, level), settings);
}

}  // namespace seqrand::npa
