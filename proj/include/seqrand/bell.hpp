// bell.hpp
// CHSH-type functionals of sequential behaviors, the analytic CHSH min-entropy
// bound, and residuals of the sum-of-squares certificate on the boundary.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "seqrand/error.hpp"
#include "seqrand/protocol.hpp"
#include "seqrand/qsim.hpp"
#include "seqrand/scenario.hpp"

namespace seqrand::bell {

using protocol::DilatedOperators;
using protocol::Strategy;
using qsim::ComplexMatrix;
using scenario::BehaviorSummary;
using scenario::CorrelationTable;

inline const double kSqrt2 = std::numbers::sqrt2;
inline const double kTsirelson = 2.0 * std::numbers::sqrt2;

struct BellValues {
    double s1 = 0.0;  // Alice-Bob1: (A0+A1)B0 + (A0-A1)B1
    double s2 = 0.0;  // Alice-Bob2: (A0+A1)B00 + (A0-A1)B01
    double sc = 0.0;  // (A0+A1)B00 + (A0-A1)B1
};

inline BellValues bell_values(const BehaviorSummary& m) {
    BellValues v;
    v.s1 = m.ab[0][0] + m.ab[1][0] + m.ab[0][1] - m.ab[1][1];
    v.s2 = m.ab0[0][0] + m.ab0[1][0] + m.ab0[0][1] - m.ab0[1][1];
    v.sc = m.ab0[0][0] + m.ab0[1][0] + m.ab[0][1] - m.ab[1][1];
    return v;
}

inline BellValues bell_values(const CorrelationTable& t) { return bell_values(scenario::summarize(t)); }

inline double s_theta(const BellValues& v, double theta) {
    return std::cos(2.0 * theta) * (v.s1 - kSqrt2) + std::sin(2.0 * theta) * (v.s2 - kSqrt2);
}

inline double s_theta(const CorrelationTable& t, double theta) { return s_theta(bell_values(t), theta); }

// S'_a = cos(a) S+ + sin(a) S-,  S+- = (A0+A1)B0 +- (A0-A1)B01
inline double s_prime_alpha(const BehaviorSummary& m, double alpha) {
    const double plus_part = m.ab[0][0] + m.ab[1][0];
    const double minus_part = m.ab0[0][1] - m.ab0[1][1];
    return (std::cos(alpha) + std::sin(alpha)) * plus_part + (std::cos(alpha) - std::sin(alpha)) * minus_part;
}

inline double s_prime_alpha(const CorrelationTable& t, double alpha) {
    return s_prime_alpha(scenario::summarize(t), alpha);
}

/// Distances to the boundary. The first two are >= 0 inside the quantum set.
struct BoundaryResiduals {
    double tsirelson = 0.0;  // 2sqrt2 - sc
    double s_theta = 0.0;    // sqrt2 - S_theta
    double circle = 0.0;     // (s1-sqrt2)^2 + (s2-sqrt2)^2 - 2
};

inline BoundaryResiduals boundary_residuals(const CorrelationTable& t, double theta) {
    const BellValues v = bell_values(t);
    return {kTsirelson - v.sc, kSqrt2 - s_theta(v, theta),
            (v.s1 - kSqrt2) * (v.s1 - kSqrt2) + (v.s2 - kSqrt2) * (v.s2 - kSqrt2) - 2.0};
}

/// Operator S'_a on the joint space.
inline ComplexMatrix s_prime_operator(const Strategy& s, double alpha) {
    const ComplexMatrix plus_part = qsim::tensor(s.a0 + s.a1, s.b0);
    const ComplexMatrix minus_part = qsim::tensor(s.a0 - s.a1, s.b01);
    return (std::cos(alpha) + std::sin(alpha)) * plus_part + (std::cos(alpha) - std::sin(alpha)) * minus_part;
}

/// <2sqrt2 - S'_a> evaluated through the two squares
///   P1 = sin(pi/4+a) B0 + cos(pi/4+a) B01 - A0
///   P2 = sin(pi/4+a) B0 - cos(pi/4+a) B01 - A1
/// as (<P1^2> + <P2^2>)/sqrt2. Observables must be hermitian involutions.
inline double sos_residual(const Strategy& s, double alpha) {
    const double sn = std::sin(std::numbers::pi / 4 + alpha);
    const double cs = std::cos(std::numbers::pi / 4 + alpha);
    const ComplexMatrix bob_plus = sn * s.b0 + cs * s.b01;
    const ComplexMatrix bob_minus = sn * s.b0 - cs * s.b01;
    const ComplexMatrix p1 = s.on_bob(bob_plus) - s.on_alice(s.a0);
    const ComplexMatrix p2 = s.on_bob(bob_minus) - s.on_alice(s.a1);
    const double sq = protocol::expectation(s.state, p1 * p1) + protocol::expectation(s.state, p2 * p2);
    return sq / kSqrt2;
}

inline double sos_residual(const DilatedOperators& ops, double alpha) { return sos_residual(ops.strategy(), alpha); }

/// || psi - [cos2t (A0+A1)/sqrt2 B0 + sin2t (A0-A1)/sqrt2 B01] psi ||
inline double state_characterization_residual(const Strategy& s, double theta) {
    const auto* ket = std::get_if<qsim::Ket>(&s.state);
    if (ket == nullptr) {
        throw RequiresPureState("state_characterization_residual: strategy state is mixed");
    }
    const ComplexMatrix op = std::cos(2.0 * theta) / kSqrt2 * qsim::tensor(s.a0 + s.a1, s.b0) +
                             std::sin(2.0 * theta) / kSqrt2 * qsim::tensor(s.a0 - s.a1, s.b01);
    const qsim::ComplexVector& psi = ket->amplitudes();
    return (psi - op * psi).norm();
}

inline double state_characterization_residual(const DilatedOperators& ops, double theta) {
    return state_characterization_residual(ops.strategy(), theta);
}

/// Strategy reaching S'_a = 2sqrt2 on |phi+>.
inline Strategy tangent_strategy(double alpha) {
    const double cs = std::cos(alpha + std::numbers::pi / 4);
    const double sn = std::sin(alpha + std::numbers::pi / 4);
    const ComplexMatrix sx = qsim::pauli_x();
    const ComplexMatrix sz = qsim::pauli_z();
    return Strategy{cs * sx + sn * sz, -cs * sx + sn * sz, sz, sx, sz, sx, qsim::phi_plus()};
}

/// One-sided min-entropy bound of a CHSH value s in bits:
/// 1 - log2(1 + sqrt(2 - s^2/4)) on [2, 2sqrt2], 0 below 2.
inline double pironio_hmin(double s) {
    if (!std::isfinite(s) || std::abs(s) > kTsirelson + 1e-6) {
        throw SuperQuantum("pironio_hmin: CHSH value " + std::to_string(s) + " exceeds 2sqrt2");
    }
    if (s <= 2.0) return 0.0;
    if (s >= kTsirelson) return 1.0;
    const double h = 1.0 - std::log2(1.0 + std::sqrt(2.0 - s * s / 4.0));
    return std::clamp(h, 0.0, 1.0);
}

}  // namespace seqrand::bell
