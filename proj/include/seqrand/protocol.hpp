// protocol.hpp
// The sequential CHSH protocol: Alice measures (sz +/- sx)/sqrt2, Bob1 measures
// either a weak sz (Kraus pair of strength theta) or sx, Bob2 measures sz or sx
// on Bob1's post-measurement qubit. Both the Kraus form and the projective
// dilation (system qubit B' plus ancilla B'') are provided.

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <variant>

#include "json.hpp"

#include "seqrand/error.hpp"
#include "seqrand/qsim.hpp"
#include "seqrand/scenario.hpp"

namespace seqrand::protocol {

using qsim::ComplexMatrix;
using qsim::DensityMatrix;
using qsim::Ket;
using scenario::CorrelationTable;

struct ProtocolParams {
    double theta = std::numbers::pi / 8;  // measurement strength (rad)
    double p = 0.0;                       // depolarization
    double c = 0.0;                       // decoherence
};

inline void check_noise(double p, double c) {
    if (!std::isfinite(p) || !std::isfinite(c) || p < 0.0 || c < 0.0 || p > 1.0 || c > 1.0 || p + c > 1.0 + 1e-12) {
        throw InvalidNoise("noise parameters must satisfy p,c >= 0 and p + c <= 1 (got p=" + std::to_string(p) +
                           ", c=" + std::to_string(c) + ")");
    }
}

inline void check_params(const ProtocolParams& params) {
    if (!std::isfinite(params.theta)) {
        throw InvalidNoise("theta must be finite");
    }
    check_noise(params.p, params.c);
}

inline ProtocolParams params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("protocol parameters: expected a JSON object");
    ProtocolParams params;
    try {
        params.theta = j.at("theta").get<double>();
        params.p = j.at("p").get<double>();
        params.c = j.at("c").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("protocol parameters: ") + e.what());
    }
    check_params(params);
    return params;
}

inline nlohmann::json to_json(const ProtocolParams& params) {
    return {{"theta", params.theta}, {"p", params.p}, {"c", params.c}};
}

/// rho = (1-p-c)|phi+><phi+| + p I/4 + c (|00><00| + |11><11|)/2
inline DensityMatrix noisy_state(double p, double c) {
    check_noise(p, c);
    ComplexMatrix dephased = ComplexMatrix::Zero(4, 4);
    dephased(0, 0) = dephased(3, 3) = 0.5;
    return DensityMatrix((1.0 - p - c) * qsim::phi_plus().projector() + p * qsim::identity(4) / 4.0 + c * dephased);
}

inline ComplexMatrix alice_observable(int x) {
    const double r = 1.0 / std::sqrt(2.0);
    return x == 0 ? ComplexMatrix(r * (qsim::pauli_z() + qsim::pauli_x()))
                  : ComplexMatrix(r * (qsim::pauli_z() - qsim::pauli_x()));
}

/// cos(theta)|0> + sin(theta)|1>
inline Ket ancilla(double theta) {
    qsim::ComplexVector v(2);
    v << std::cos(theta), std::sin(theta);
    return Ket::normalized(v);
}

using SharedState = std::variant<Ket, DensityMatrix>;

inline bool is_pure(const SharedState& s) { return std::holds_alternative<Ket>(s); }

inline DensityMatrix as_density(const SharedState& s) {
    if (const auto* k = std::get_if<Ket>(&s)) return DensityMatrix::from_ket(*k);
    return std::get<DensityMatrix>(s);
}

inline double expectation(const SharedState& s, const ComplexMatrix& o) {
    return std::visit([&](const auto& state) { return qsim::expectation(state, o); }, s);
}

/// Observables of Alice (A0, A1) and of the Bobs (B0, B1, B00, B01) with a
/// shared state on H_A (x) H_B. No sequential structure is imposed here.
struct Strategy {
    ComplexMatrix a0, a1;
    ComplexMatrix b0, b1, b00, b01;
    SharedState state;

    const ComplexMatrix& alice(int x) const { return x == 0 ? a0 : a1; }
    const ComplexMatrix& bob(int y1) const { return y1 == 0 ? b0 : b1; }
    const ComplexMatrix& bob2(int y2) const { return y2 == 0 ? b00 : b01; }

    Eigen::Index alice_dim() const { return a0.rows(); }
    Eigen::Index bob_dim() const { return b0.rows(); }

    ComplexMatrix on_alice(const ComplexMatrix& o) const { return qsim::tensor(o, qsim::identity(bob_dim())); }
    ComplexMatrix on_bob(const ComplexMatrix& o) const { return qsim::tensor(qsim::identity(alice_dim()), o); }
};

/// A Strategy whose observables are hermitian involutions and whose Bob
/// observables satisfy [B0, B00] = [B0, B01] = 0.
class DilatedOperators {
public:
    explicit DilatedOperators(Strategy s) : s_(std::move(s)) {
        const ComplexMatrix* ops[] = {&s_.a0, &s_.a1, &s_.b0, &s_.b1, &s_.b00, &s_.b01};
        for (const auto* o : ops) {
            if (!qsim::is_hermitian(*o) || qsim::max_abs_diff(*o * *o, qsim::identity(o->rows())) > qsim::kStructuralTol) {
                throw InvalidState("DilatedOperators: observable is not a hermitian involution");
            }
        }
        if (s_.a1.rows() != s_.alice_dim() || s_.b1.rows() != s_.bob_dim() || s_.b00.rows() != s_.bob_dim() ||
            s_.b01.rows() != s_.bob_dim()) {
            throw DimMismatch("DilatedOperators: inconsistent operator dimensions");
        }
        const Eigen::Index d = s_.alice_dim() * s_.bob_dim();
        const Eigen::Index sd = is_pure(s_.state) ? std::get<Ket>(s_.state).dim() : std::get<DensityMatrix>(s_.state).dim();
        if (sd != d) throw DimMismatch("DilatedOperators: state dimension does not match operators");
        const ComplexMatrix zero = ComplexMatrix::Zero(s_.bob_dim(), s_.bob_dim());
        if (qsim::max_abs_diff(qsim::commutator(s_.b0, s_.b00), zero) > qsim::kStructuralTol ||
            qsim::max_abs_diff(qsim::commutator(s_.b0, s_.b01), zero) > qsim::kStructuralTol) {
            throw InvalidState("DilatedOperators: Bob2 observables must commute with B0");
        }
    }

    const Strategy& strategy() const { return s_; }
    const ComplexMatrix& alice(int x) const { return s_.alice(x); }
    const ComplexMatrix& bob(int y1) const { return s_.bob(y1); }
    const ComplexMatrix& bob2(int y2) const { return s_.bob2(y2); }
    const SharedState& state() const { return s_.state; }

private:
    Strategy s_;
};

inline DilatedOperators build_dilated(const ProtocolParams& params) {
    check_params(params);
    const ComplexMatrix sz = qsim::pauli_z();
    const ComplexMatrix sx = qsim::pauli_x();
    const ComplexMatrix id = qsim::identity(2);
    Strategy s{alice_observable(0),
               alice_observable(1),
               qsim::tensor(sz, sz),
               qsim::tensor(sx, id),
               qsim::tensor(sz, id),
               qsim::tensor(sx, sx),
               Ket::basis(1, 0)};
    if (params.p == 0.0 && params.c == 0.0) {
        s.state = qsim::tensor(qsim::phi_plus(), ancilla(params.theta));
    } else {
        s.state = qsim::tensor(noisy_state(params.p, params.c), DensityMatrix::from_ket(ancilla(params.theta)));
    }
    return DilatedOperators(std::move(s));
}

// Entries at or below zero by rounding are clamped so tables built from exact
// zeros stay valid.
inline double clamp_probability(double v) { return v < 0.0 && v > -1e-13 ? 0.0 : v; }

/// Born-rule behavior of a strategy: Alice's projector times the product of
/// the Bobs' projectors. For y1 = 1 Bob2's outcome is an independent fair coin.
inline CorrelationTable correlations(const DilatedOperators& ops) {
    const Strategy& s = ops.strategy();
    std::array<std::array<ComplexMatrix, 2>, 2> pa, pb, pb2;
    for (int i : scenario::kInputs) {
        auto [ap, am] = qsim::projectors_of_involution(s.alice(i));
        auto [bp, bm] = qsim::projectors_of_involution(s.bob(i));
        auto [cp, cm] = qsim::projectors_of_involution(s.bob2(i));
        pa[i] = {ap, am};
        pb[i] = {bp, bm};
        pb2[i] = {cp, cm};
    }
    auto idx = [](int o) { return o > 0 ? 0 : 1; };
    return CorrelationTable::from_function([&](int x, int y1, int y2, int a, int b1, int b2) {
        const ComplexMatrix& alice = pa[x][idx(a)];
        if (y1 == 1) {
            return clamp_probability(expectation(s.state, qsim::tensor(alice, pb[1][idx(b1)])) / 2.0);
        }
        const ComplexMatrix bobs = pb[0][idx(b1)] * pb2[y2][idx(b2)];
        return clamp_probability(expectation(s.state, qsim::tensor(alice, bobs)));
    });
}

inline CorrelationTable correlations_dilated(const ProtocolParams& params) { return correlations(build_dilated(params)); }

/// Behavior computed directly from the Kraus description on the two-qubit state.
inline CorrelationTable correlations_kraus(const ProtocolParams& params) {
    check_params(params);
    const DensityMatrix rho = noisy_state(params.p, params.c);
    const qsim::KrausPair kraus = qsim::kraus_pair(params.theta);
    const ComplexMatrix bob2_obs[2] = {qsim::pauli_z(), qsim::pauli_x()};
    return CorrelationTable::from_function([&](int x, int y1, int y2, int a, int b1, int b2) {
        const ComplexMatrix alice = qsim::outcome_projector(alice_observable(x), a);
        if (y1 == 1) {
            const ComplexMatrix bob = qsim::outcome_projector(qsim::pauli_x(), b1);
            return clamp_probability(qsim::expectation(rho, qsim::tensor(alice, bob)) / 2.0);
        }
        const ComplexMatrix m = qsim::outcome_projector(bob2_obs[y2], b2) * kraus[b1];
        return clamp_probability(qsim::expectation(rho, qsim::tensor(alice, m.adjoint() * m)));
    });
}

/// CHSH value of the non-sequential reference experiment on the same noisy state.
inline double chsh_reference(double p, double c) {
    check_noise(p, c);
    return std::sqrt(2.0) * (2.0 - 2.0 * p - c);
}

/// Eve's extremal-strength attack: Eve holds half of a Bell pair whose other
/// half replaces the ancilla, and the Bobs' devices are rewired so that one of
/// B0 / B01 is read out on the ancilla. Only defined for theta in {0, pi/4}.
struct AttackReport {
    double max_table_deviation = 0.0;  // vs the honest Kraus behavior
    double guessing_probability = 0.0; // Eve's guess of (b1, b2) for y = (0,1)
};

inline AttackReport extremal_attack(double theta) {
    const bool projective = std::abs(theta) < 1e-12;
    const bool non_interactive = std::abs(theta - std::numbers::pi / 4) < 1e-12;
    if (!projective && !non_interactive) {
        throw UnsupportedTarget("extremal_attack: only theta = 0 or pi/4 is supported");
    }
    const ComplexMatrix sz = qsim::pauli_z();
    const ComplexMatrix sx = qsim::pauli_x();
    const ComplexMatrix id = qsim::identity(2);
    // Ordering: A (x) B' (x) B'' (x) E
    const Ket psi = qsim::tensor(qsim::phi_plus(), qsim::phi_plus());
    const ComplexMatrix b0 = projective ? qsim::tensor(sz, id) : qsim::tensor(id, sz);
    const ComplexMatrix b01 = projective ? qsim::tensor(id, sx) : qsim::tensor(sx, id);
    const ComplexMatrix eve = projective ? sx : sz;

    Strategy honest_bobs{alice_observable(0), alice_observable(1), b0, qsim::tensor(sx, id), qsim::tensor(sz, id), b01,
                         Ket::basis(1, 0)};
    // Correlations of A and the Bobs with Eve's system traced out.
    const DensityMatrix rho_abe = DensityMatrix::from_ket(psi);
    ComplexMatrix reduced = ComplexMatrix::Zero(8, 8);
    for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = 0; j < 8; ++j)
            for (Eigen::Index e = 0; e < 2; ++e) reduced(i, j) += rho_abe.matrix()(2 * i + e, 2 * j + e);
    honest_bobs.state = DensityMatrix(reduced);
    const CorrelationTable attacked = correlations(DilatedOperators(std::move(honest_bobs)));
    const CorrelationTable honest = correlations_kraus({theta, 0.0, 0.0});

    AttackReport rep;
    for (std::size_t i = 0; i < CorrelationTable::kSize; ++i) {
        rep.max_table_deviation =
            std::max(rep.max_table_deviation, std::abs(attacked.probabilities()[i] - honest.probabilities()[i]));
    }
    for (int f : scenario::kOutcomes) {
        double best = 0.0;
        for (int b1 : scenario::kOutcomes)
            for (int b2 : scenario::kOutcomes) {
                const ComplexMatrix bobs = qsim::outcome_projector(b0, b1) * qsim::outcome_projector(b01, b2);
                const ComplexMatrix op = qsim::tensor(qsim::tensor(id, bobs), qsim::outcome_projector(eve, f));
                best = std::max(best, qsim::expectation(psi, op));
            }
        rep.guessing_probability += best;
    }
    return rep;
}

}  // namespace seqrand::protocol
