// qsim.hpp
// Dense complex linear algebra for few-qubit states and operators.
// All matrices in this project are at most 8x8, so everything is dense.

#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "seqrand/error.hpp"

namespace seqrand::qsim {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double kStructuralTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;
inline constexpr double kInvolutionTol = 1e-10;

inline ComplexMatrix identity(Eigen::Index n) { return ComplexMatrix::Identity(n, n); }

inline ComplexMatrix pauli_x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline ComplexMatrix pauli_y() {
    ComplexMatrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}

inline ComplexMatrix pauli_z() {
    ComplexMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

// Largest entrywise modulus of a - b.
inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimMismatch("max_abs_diff: shapes differ");
    }
    return (a - b).cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const ComplexMatrix& m, double tol = kStructuralTol) {
    return m.rows() == m.cols() && max_abs_diff(m, m.adjoint()) <= tol;
}

// Kronecker product; the left factor indexes the most significant qubits.
inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline ComplexVector tensor(const ComplexVector& a, const ComplexVector& b) {
    ComplexVector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        out.segment(i * b.size(), b.size()) = a(i) * b;
    }
    return out;
}

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b - b * a; }

inline ComplexMatrix anticommutator(const ComplexMatrix& a, const ComplexMatrix& b) { return a * b + b * a; }

// Smallest eigenvalue of a hermitian matrix (only the lower triangle is read).
inline double min_eigenvalue(const ComplexMatrix& m) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Normalized pure state.
class Ket {
public:
    explicit Ket(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {
        if (amplitudes_.size() == 0) {
            throw InvalidState("Ket: empty amplitude vector");
        }
        if (std::abs(amplitudes_.norm() - 1.0) > kStructuralTol) {
            throw InvalidState("Ket: amplitudes are not normalized");
        }
    }

    static Ket normalized(ComplexVector v) {
        const double n = v.norm();
        if (n == 0.0) {
            throw InvalidState("Ket: zero vector cannot be normalized");
        }
        return Ket(v / n);
    }

    static Ket basis(Eigen::Index dim, Eigen::Index index) {
        ComplexVector v = ComplexVector::Zero(dim);
        v(index) = 1.0;
        return Ket(std::move(v));
    }

    Eigen::Index dim() const { return amplitudes_.size(); }
    const ComplexVector& amplitudes() const { return amplitudes_; }
    ComplexMatrix projector() const { return amplitudes_ * amplitudes_.adjoint(); }

private:
    ComplexVector amplitudes_;
};

inline Ket tensor(const Ket& a, const Ket& b) { return Ket::normalized(tensor(a.amplitudes(), b.amplitudes())); }

/// (|00> + |11>)/sqrt(2)
inline Ket phi_plus() {
    ComplexVector v = ComplexVector::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    return Ket(std::move(v));
}

/// Hermitian, unit-trace, positive semidefinite operator.
class DensityMatrix {
public:
    explicit DensityMatrix(ComplexMatrix m) : matrix_(std::move(m)) {
        if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
            throw InvalidState("DensityMatrix: matrix must be square and non-empty");
        }
        if (!is_hermitian(matrix_)) {
            throw InvalidState("DensityMatrix: matrix is not hermitian");
        }
        if (std::abs(matrix_.trace() - Complex(1.0)) > kStructuralTol) {
            throw InvalidState("DensityMatrix: trace differs from 1");
        }
        if (min_eigenvalue(matrix_) < -kPsdTol) {
            throw InvalidState("DensityMatrix: matrix has a negative eigenvalue");
        }
    }

    static DensityMatrix from_ket(const Ket& k) { return DensityMatrix(k.projector()); }

    static DensityMatrix maximally_mixed(Eigen::Index dim) {
        return DensityMatrix(identity(dim) / static_cast<double>(dim));
    }

    Eigen::Index dim() const { return matrix_.rows(); }
    const ComplexMatrix& matrix() const { return matrix_; }

private:
    ComplexMatrix matrix_;
};

inline DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
    return DensityMatrix(tensor(a.matrix(), b.matrix()));
}

/// Two-outcome measurement K+, K- on a qubit.
struct KrausPair {
    ComplexMatrix k_plus;
    ComplexMatrix k_minus;

    const ComplexMatrix& operator[](int outcome) const { return outcome > 0 ? k_plus : k_minus; }

    // max |K+^dag K+ + K-^dag K- - I|
    double completeness_residual() const {
        return max_abs_diff(k_plus.adjoint() * k_plus + k_minus.adjoint() * k_minus, identity(k_plus.rows()));
    }
};

// K+ = cos(t)|0><0| + sin(t)|1><1|, K- = cos(t)|1><1| + sin(t)|0><0|.
inline KrausPair kraus_pair(double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    ComplexMatrix kp = ComplexMatrix::Zero(2, 2);
    ComplexMatrix km = ComplexMatrix::Zero(2, 2);
    kp(0, 0) = c;
    kp(1, 1) = s;
    km(0, 0) = s;
    km(1, 1) = c;
    return {kp, km};
}

/// Eigenprojectors ((I+o)/2, (I-o)/2) of a hermitian involution.
inline std::pair<ComplexMatrix, ComplexMatrix> projectors_of_involution(const ComplexMatrix& o) {
    if (o.rows() != o.cols()) {
        throw NotInvolution("projectors_of_involution: operator is not square");
    }
    if (!is_hermitian(o, kInvolutionTol)) {
        throw NotInvolution("projectors_of_involution: operator is not hermitian");
    }
    const ComplexMatrix id = identity(o.rows());
    if (max_abs_diff(o * o, id) > kInvolutionTol) {
        throw NotInvolution("projectors_of_involution: o^2 differs from identity");
    }
    return {(id + o) / 2.0, (id - o) / 2.0};
}

// Projector of `o` onto the eigenvalue `outcome` (+1 or -1).
inline ComplexMatrix outcome_projector(const ComplexMatrix& o, int outcome) {
    auto [plus, minus] = projectors_of_involution(o);
    return outcome > 0 ? plus : minus;
}

/// Tr[rho o] for hermitian o.
inline double expectation(const DensityMatrix& state, const ComplexMatrix& o) {
    if (o.rows() != state.dim() || o.cols() != state.dim()) {
        throw DimMismatch("expectation: operator is " + std::to_string(o.rows()) + "x" + std::to_string(o.cols()) +
                          ", state has dimension " + std::to_string(state.dim()));
    }
    const Complex value = (state.matrix() * o).trace();
    if (std::abs(value.imag()) > 1e-10) {
        throw NotHermitian("expectation: non-real expectation value; operator is not hermitian");
    }
    return value.real();
}

inline double expectation(const Ket& state, const ComplexMatrix& o) {
    if (o.rows() != state.dim() || o.cols() != state.dim()) {
        throw DimMismatch("expectation: operator and ket dimensions differ");
    }
    const Complex value = state.amplitudes().dot(o * state.amplitudes());
    if (std::abs(value.imag()) > 1e-10) {
        throw NotHermitian("expectation: non-real expectation value; operator is not hermitian");
    }
    return value.real();
}

}  // namespace seqrand::qsim
