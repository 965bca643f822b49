#include <gtest/gtest.h>

#include <random>

#include "seqrand/qsim.hpp"

using namespace seqrand;
using namespace seqrand::qsim;

namespace {

ComplexMatrix random_matrix(std::mt19937& rng, int n) {
    std::normal_distribution<double> g;
    ComplexMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = Complex(g(rng), g(rng));
    return m;
}

}  // namespace

TEST(Qsim, PauliAlgebra) {
    const Complex i(0.0, 1.0);
    EXPECT_LT(max_abs_diff(pauli_x() * pauli_y(), i * pauli_z()), 1e-15);
    EXPECT_LT(max_abs_diff(pauli_y() * pauli_z(), i * pauli_x()), 1e-15);
    EXPECT_LT(max_abs_diff(anticommutator(pauli_x(), pauli_z()), ComplexMatrix::Zero(2, 2)), 1e-15);
    for (const auto& p : {pauli_x(), pauli_y(), pauli_z()}) {
        EXPECT_TRUE(is_hermitian(p));
        EXPECT_LT(max_abs_diff(p * p, identity(2)), 1e-15);
    }
}

TEST(Qsim, TensorMixedProduct) {
    std::mt19937 rng(7);
    const ComplexMatrix a = random_matrix(rng, 2), b = random_matrix(rng, 3);
    const ComplexMatrix c = random_matrix(rng, 2), d = random_matrix(rng, 3);
    const ComplexMatrix lhs = tensor(a, b) * tensor(c, d);
    EXPECT_EQ(lhs.rows(), 6);
    EXPECT_LT(max_abs_diff(lhs, tensor(ComplexMatrix(a * c), ComplexMatrix(b * d))), 1e-12);
    // explicit index oracle
    const ComplexMatrix ab = tensor(a, b);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) EXPECT_EQ(ab(3 * i + k, 3 * j + l), a(i, j) * b(k, l));
}

TEST(Qsim, KrausCompleteness) {
    for (double t = 0.0; t <= 1.6; t += 0.05) {
        const auto k = kraus_pair(t);
        EXPECT_LT(k.completeness_residual(), 1e-15) << t;
    }
    const auto proj = kraus_pair(0.0);
    EXPECT_LT(max_abs_diff(proj.k_plus, outcome_projector(pauli_z(), +1)), 1e-15);
}

TEST(Qsim, StateValidation) {
    EXPECT_THROW(Ket(ComplexVector::Ones(2)), InvalidState);
    EXPECT_THROW(Ket::normalized(ComplexVector::Zero(2)), InvalidState);
    EXPECT_THROW(DensityMatrix(ComplexMatrix::Identity(2, 2)), InvalidState);
    ComplexMatrix neg = ComplexMatrix::Zero(2, 2);
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    EXPECT_THROW(DensityMatrix{neg}, InvalidState);
    ComplexMatrix nh = identity(2) / 2.0;
    nh(0, 1) = 0.1;
    EXPECT_THROW(DensityMatrix{nh}, InvalidState);
    EXPECT_NO_THROW(DensityMatrix::maximally_mixed(4));
}

TEST(Qsim, ExpectationValues) {
    const Ket phi = phi_plus();
    EXPECT_NEAR(expectation(phi, tensor(pauli_z(), pauli_z())), 1.0, 1e-15);
    EXPECT_NEAR(expectation(phi, tensor(pauli_x(), pauli_x())), 1.0, 1e-15);
    EXPECT_NEAR(expectation(phi, tensor(pauli_y(), pauli_y())), -1.0, 1e-15);
    const auto rho = DensityMatrix::from_ket(phi);
    EXPECT_NEAR(expectation(rho, tensor(pauli_z(), identity(2))), 0.0, 1e-15);
    EXPECT_THROW(expectation(rho, pauli_z()), DimMismatch);
    EXPECT_THROW(expectation(phi, pauli_z()), DimMismatch);
    EXPECT_THROW(expectation(rho, ComplexMatrix(Complex(0, 1) * tensor(pauli_z(), pauli_z()))), NotHermitian);
}

TEST(Qsim, InvolutionProjectors) {
    const auto [p, m] = projectors_of_involution(pauli_x());
    EXPECT_LT(max_abs_diff(p * p, p), 1e-15);
    EXPECT_LT(max_abs_diff(p + m, identity(2)), 1e-15);
    EXPECT_THROW(projectors_of_involution(identity(2) * 2.0), NotInvolution);
    EXPECT_THROW(projectors_of_involution(ComplexMatrix::Zero(2, 3)), NotInvolution);
}
