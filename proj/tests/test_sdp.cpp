#include <gtest/gtest.h>

#include <random>

#include "seqrand/sdp.hpp"

using namespace seqrand;
using namespace seqrand::sdp;

namespace {

std::vector<Term> matrix_terms(int block, const Eigen::MatrixXd& m) {
    std::vector<Term> t;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i; j < m.cols(); ++j) t.push_back({block, i, j, i == j ? m(i, j) : 2.0 * m(i, j)});
    return t;
}

Eigen::MatrixXd random_symmetric(std::mt19937& rng, int n) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = g(rng);
    return (m + m.transpose()) / 2.0;
}

// max <C, X> s.t. tr X = 1, X psd  ==  largest eigenvalue of C
SdpProblem eigen_problem(const Eigen::MatrixXd& c, bool maximize) {
    SdpProblem p;
    const int b = p.add_block(static_cast<int>(c.rows()));
    p.set_objective(matrix_terms(b, c), maximize);
    p.add_constraint(matrix_terms(b, Eigen::MatrixXd::Identity(c.rows(), c.cols())), Relation::Eq, 1.0);
    return p;
}

SolverSettings with(Formulation f, Precision prec = Precision::Double) {
    SolverSettings s;
    s.formulation = f;
    s.precision = prec;
    return s;
}

// Farkas check: with sum_k l_k A_k negative semidefinite and l'b > 0 (signs
// matching the relations), no psd X can satisfy the constraints.
bool certifies_infeasibility(const SdpProblem& p, const std::vector<double>& l) {
    if (l.size() != p.constraints.size()) return false;
    std::vector<Eigen::MatrixXd> m;
    for (int n : p.block_sizes) m.push_back(Eigen::MatrixXd::Zero(n, n));
    double bound = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < l.size(); ++k) {
        const auto& c = p.constraints[k];
        if (c.relation == Relation::Le && l[k] > 1e-12) return false;
        if (c.relation == Relation::Ge && l[k] < -1e-12) return false;
        bound += l[k] * c.target - std::abs(l[k]) * c.tolerance;
        scale = std::max(scale, std::abs(l[k]));
        for (const auto& t : c.terms) {
            const double v = t.row == t.col ? t.coef : t.coef / 2.0;
            m[t.block](t.row, t.col) += l[k] * v;
            if (t.row != t.col) m[t.block](t.col, t.row) += l[k] * v;
        }
    }
    for (const auto& b : m)
        if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(b).eigenvalues().maxCoeff() > 1e-8 * scale) return false;
    return bound > 1e-6 * scale;
}

}  // namespace

TEST(Sdp, EigenvalueOracle) {
    std::mt19937 rng(1);
    for (int n : {2, 4, 7}) {
        const Eigen::MatrixXd c = random_symmetric(rng, n);
        const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues();
        for (auto f : {Formulation::Primal, Formulation::Dual}) {
            const auto mx = solve(eigen_problem(c, true), with(f));
            ASSERT_EQ(mx.status, SolveStatus::Optimal);
            EXPECT_NEAR(mx.objective_value, ev.maxCoeff(), 1e-7);
            EXPECT_TRUE(verify(eigen_problem(c, true), mx).passed);
            const auto mn = solve(eigen_problem(c, false), with(f));
            EXPECT_NEAR(mn.objective_value, ev.minCoeff(), 1e-7);
            EXPECT_TRUE(verify(eigen_problem(c, false), mn).passed);
        }
    }
}

TEST(Sdp, ExtendedPrecisionAgrees) {
    std::mt19937 rng(2);
    const Eigen::MatrixXd c = random_symmetric(rng, 5);
    const double d = solve(eigen_problem(c, true)).objective_value;
    const double e = solve(eigen_problem(c, true), with(Formulation::Auto, Precision::Extended)).objective_value;
    EXPECT_NEAR(d, e, 1e-8);
}

TEST(Sdp, InequalitiesAndTolerances) {
    // max X01 with X00 <= 1, X11 <= 4 (X psd)  ->  2
    SdpProblem p;
    p.add_block(2);
    p.set_objective({{0, 0, 1, 1.0}}, true);
    p.add_constraint({{0, 0, 0, 1.0}}, Relation::Le, 1.0);
    p.add_constraint({{0, 1, 1, 1.0}}, Relation::Le, 4.0);
    for (auto f : {Formulation::Primal, Formulation::Dual}) {
        const auto s = solve(p, with(f));
        EXPECT_NEAR(s.objective_value, 2.0, 1e-7);
        EXPECT_TRUE(verify(p, s).passed);
    }
    // equality with tolerance: X00 = 1 +- 0.5 on a 1x1 block, maximize -> 1.5
    SdpProblem q;
    q.add_block(1);
    q.set_objective({{0, 0, 0, 1.0}}, true);
    q.add_constraint({{0, 0, 0, 1.0}}, Relation::Eq, 1.0, 0.5);
    for (auto f : {Formulation::Primal, Formulation::Dual}) EXPECT_NEAR(solve(q, with(f)).objective_value, 1.5, 1e-7);
    // Ge: min X00 with X00 >= 3  -> 3
    SdpProblem r;
    r.add_block(1);
    r.set_objective({{0, 0, 0, 1.0}}, false);
    r.add_constraint({{0, 0, 0, 1.0}}, Relation::Ge, 3.0);
    for (auto f : {Formulation::Primal, Formulation::Dual}) EXPECT_NEAR(solve(r, with(f)).objective_value, 3.0, 1e-7);
}

TEST(Sdp, FormulationsAgreeOnCoupledBlocks) {
    // two blocks tied by shared entries and a sum constraint
    std::mt19937 rng(4);
    SdpProblem p;
    p.add_block(3);
    p.add_block(3);
    const Eigen::MatrixXd c0 = random_symmetric(rng, 3), c1 = random_symmetric(rng, 3);
    auto obj = matrix_terms(0, c0);
    auto o1 = matrix_terms(1, c1);
    obj.insert(obj.end(), o1.begin(), o1.end());
    p.set_objective(obj, true);
    p.add_constraint({{0, 0, 0, 1.0}, {1, 0, 0, 1.0}}, Relation::Eq, 1.0);
    p.add_constraint({{0, 1, 1, 1.0}, {0, 0, 0, -1.0}}, Relation::Eq, 0.0);
    p.add_constraint({{0, 2, 2, 1.0}, {0, 0, 0, -1.0}}, Relation::Eq, 0.0);
    p.add_constraint({{1, 1, 1, 1.0}, {1, 0, 0, -1.0}}, Relation::Eq, 0.0);
    p.add_constraint({{1, 2, 2, 1.0}, {1, 0, 0, -1.0}}, Relation::Eq, 0.0);
    p.add_constraint({{0, 0, 1, 1.0}, {1, 0, 1, 1.0}}, Relation::Le, 0.1);
    const auto a = solve(p, with(Formulation::Primal));
    const auto b = solve(p, with(Formulation::Dual));
    ASSERT_EQ(a.status, SolveStatus::Optimal);
    ASSERT_EQ(b.status, SolveStatus::Optimal);
    EXPECT_EQ(a.formulation, Formulation::Primal);
    EXPECT_EQ(b.formulation, Formulation::Dual);
    EXPECT_NEAR(a.objective_value, b.objective_value, 1e-7);
    EXPECT_TRUE(verify(p, a).passed);
    EXPECT_TRUE(verify(p, b).passed);
}

TEST(Sdp, DetectsInfeasibility) {
    SdpProblem p;
    p.add_block(1);
    p.set_objective({{0, 0, 0, 1.0}}, true);
    p.add_constraint({{0, 0, 0, 1.0}}, Relation::Eq, -1.0);
    SdpProblem q;  // correlation 2 between unit-bounded variables
    q.add_block(2);
    q.set_objective({{0, 0, 0, 1.0}}, true);
    q.add_constraint({{0, 0, 1, 1.0}}, Relation::Eq, 2.0);
    q.add_constraint({{0, 0, 0, 1.0}}, Relation::Le, 1.0);
    q.add_constraint({{0, 1, 1, 1.0}}, Relation::Le, 1.0);
    for (const auto* prob : {&p, &q}) {
        for (auto f : {Formulation::Primal, Formulation::Dual}) {
            const auto s = solve(*prob, with(f));
            EXPECT_EQ(s.status, SolveStatus::Infeasible);
            ASSERT_EQ(s.certificate.size(), prob->constraints.size());
            EXPECT_TRUE(certifies_infeasibility(*prob, s.certificate));
            const auto rep = verify(*prob, s);
            EXPECT_TRUE(rep.infeasible_certificate);
            EXPECT_FALSE(rep.passed);
        }
    }
    SdpProblem r;  // x = 1 and x = 2
    r.add_block(1);
    r.set_objective({{0, 0, 0, 1.0}}, true);
    r.add_constraint({{0, 0, 0, 1.0}}, Relation::Eq, 1.0);
    r.add_constraint({{0, 0, 0, 1.0}}, Relation::Eq, 2.0);
    EXPECT_EQ(solve(r).status, SolveStatus::Infeasible);
}

TEST(Sdp, ReportsUnbounded) {
    SdpProblem p;
    p.add_block(1);
    p.set_objective({{0, 0, 0, 1.0}}, true);
    p.add_constraint({{0, 0, 0, 1.0}}, Relation::Ge, 1.0);
    for (auto f : {Formulation::Primal, Formulation::Dual}) {
        const auto s = solve(p, with(f));
        EXPECT_EQ(s.status, SolveStatus::Failed);
        EXPECT_NE(s.message.find("unbounded"), std::string::npos);
    }
}

TEST(Sdp, ValidatesInput) {
    SdpProblem p;
    EXPECT_THROW(p.validate(), InvalidProblem);
    p.add_block(2);
    p.objective = {{0, 1, 0, 1.0}};
    EXPECT_THROW(p.validate(), InvalidProblem);
    p.objective = {{3, 0, 0, 1.0}};
    EXPECT_THROW(p.validate(), InvalidProblem);
    p.objective = {};
    p.constraints.push_back({{{0, 0, 0, 1.0}}, Relation::Eq, 1.0, -1.0, ""});
    EXPECT_THROW(p.validate(), InvalidProblem);
    EXPECT_EQ(normalize_terms({{0, 1, 0, 1.0}, {0, 0, 1, 1.0}, {0, 0, 0, 0.0}}).size(), 1u);
}

TEST(Sdp, JsonRoundTrip) {
    std::mt19937 rng(9);
    auto p = eigen_problem(random_symmetric(rng, 3), true);
    p.add_constraint({{0, 0, 1, 1.0}}, Relation::Le, 0.2, 1e-3, "cap");
    const auto q = problem_from_json(to_json(p));
    EXPECT_EQ(to_json(q).dump(), to_json(p).dump());
    EXPECT_EQ(q.constraints.back().label, "cap");
    EXPECT_NEAR(solve(q).objective_value, solve(p).objective_value, 1e-12);
    EXPECT_THROW(problem_from_json(nlohmann::json::array()), Error);
}

TEST(Sdp, VerifyRejectsWrongAnswers) {
    const Eigen::MatrixXd c = Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
    const auto p = eigen_problem(c, true);
    auto s = solve(p);
    ASSERT_TRUE(verify(p, s).passed);
    s.objective_value += 0.1;
    EXPECT_FALSE(verify(p, s).passed);
    s = solve(p);
    s.block_values[0](0, 0) -= 0.5;
    EXPECT_FALSE(verify(p, s).passed);
}
