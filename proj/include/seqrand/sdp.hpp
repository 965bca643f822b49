// sdp.hpp
// Small dense semidefinite programs over symmetric block variables.
//
//   maximize / minimize  sum_k c_k X[b_k](i_k, j_k)
//   subject to           sum_k a_k X[b_k](i_k, j_k)  (=, <=, >=)  target  (+- tolerance)
//                        X[b] positive semidefinite for every block
//
// A term on an off-diagonal entry (i, j) refers to the single value
// X(i,j) = X(j,i); terms are stored on the upper triangle.
//
// The reference solver is an infeasible primal-dual interior-point method
// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. Inequality
// constraints get nonnegative slack variables. Exact equalities are checked for
// linear dependence before solving. The solver is templated on the scalar type
// so that the same code runs in double or in long double.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "seqrand/error.hpp"

namespace seqrand::sdp {

enum class Relation { Eq, Le, Ge };

struct Term {
    int block = 0;
    int row = 0;
    int col = 0;
    double coef = 0.0;
};

struct Constraint {
    std::vector<Term> terms;
    Relation relation = Relation::Eq;
    double target = 0.0;
    double tolerance = 0.0;  // Eq: |value - target| <= tol; Le: value <= target + tol; Ge: value >= target - tol
    std::string label;
};

/// Sorts terms onto the upper triangle, merges duplicates and drops zeros.
inline std::vector<Term> normalize_terms(std::vector<Term> terms) {
    for (auto& t : terms)
        if (t.row > t.col) std::swap(t.row, t.col);
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
        return std::tie(a.block, a.row, a.col) < std::tie(b.block, b.row, b.col);
    });
    std::vector<Term> out;
    for (const auto& t : terms) {
        if (!out.empty() && out.back().block == t.block && out.back().row == t.row && out.back().col == t.col) {
            out.back().coef += t.coef;
        } else {
            out.push_back(t);
        }
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    return out;
}

struct SdpProblem {
    std::vector<int> block_sizes;
    std::vector<Term> objective;
    std::vector<Constraint> constraints;
    bool maximize = true;

    int add_block(int size) {
        block_sizes.push_back(size);
        return static_cast<int>(block_sizes.size()) - 1;
    }

    std::size_t add_constraint(std::vector<Term> terms, Relation rel, double target, double tolerance = 0.0,
                               std::string label = {}) {
        constraints.push_back({normalize_terms(std::move(terms)), rel, target, tolerance, std::move(label)});
        return constraints.size() - 1;
    }

    void set_objective(std::vector<Term> terms, bool maximize_objective) {
        objective = normalize_terms(std::move(terms));
        maximize = maximize_objective;
    }

    int total_dimension() const {
        int n = 0;
        for (int s : block_sizes) n += s;
        return n;
    }

    void validate() const {
        if (block_sizes.empty()) throw InvalidProblem("SdpProblem: no blocks");
        for (int s : block_sizes)
            if (s <= 0) throw InvalidProblem("SdpProblem: block sizes must be positive");
        auto check_terms = [&](const std::vector<Term>& terms, const std::string& where) {
            for (const auto& t : terms) {
                if (t.block < 0 || t.block >= static_cast<int>(block_sizes.size())) {
                    throw InvalidProblem(where + ": term references unknown block " + std::to_string(t.block));
                }
                const int n = block_sizes[static_cast<std::size_t>(t.block)];
                if (t.row < 0 || t.col < 0 || t.row >= n || t.col >= n) {
                    throw InvalidProblem(where + ": term entry outside block " + std::to_string(t.block));
                }
                if (t.row > t.col) throw InvalidProblem(where + ": term not on upper triangle");
                if (!std::isfinite(t.coef)) throw InvalidProblem(where + ": non-finite coefficient");
            }
        };
        check_terms(objective, "objective");
        for (std::size_t k = 0; k < constraints.size(); ++k) {
            const auto& c = constraints[k];
            check_terms(c.terms, "constraint " + std::to_string(k));
            if (!std::isfinite(c.target) || !std::isfinite(c.tolerance) || c.tolerance < 0.0) {
                throw InvalidProblem("constraint " + std::to_string(k) + ": invalid target or tolerance");
            }
        }
    }
};

/// Value of a linear functional at block values.
template <class Blocks>
double evaluate(const std::vector<Term>& terms, const Blocks& blocks) {
    double v = 0.0;
    for (const auto& t : terms) v += t.coef * blocks[static_cast<std::size_t>(t.block)](t.row, t.col);
    return v;
}

enum class SolveStatus { Optimal, Inaccurate, Infeasible, Failed };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Inaccurate: return "inaccurate";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Failed: return "failed";
    }
    return "unknown";
}

enum class Precision { Double, Extended };

// Which variables the interior-point method works on. Primal keeps the blocks
// as primal variables and one row per constraint. Dual first merges entries
// tied by equalities x_a = x_b, eliminates the remaining exact equalities and
// treats the blocks as dual slacks of the free entries. Auto picks the
// smaller Schur system.
enum class Formulation { Auto, Primal, Dual };

struct SolverSettings {
    double tol = 1e-9;
    int max_iters = 100;
    Precision precision = Precision::Double;
    Formulation formulation = Formulation::Auto;
    bool verbose = false;
};

struct SdpSolution {
    SolveStatus status = SolveStatus::Failed;
    double objective_value = 0.0;  // primal objective in the problem's own sense
    double dual_objective = 0.0;   // dual bound from the multipliers
    std::vector<Eigen::MatrixXd> block_values;
    std::vector<double> multipliers;  // one per constraint; dual sign conventions as in verify()
    double primal_residual = 0.0;     // relative infeasibility of the equality system
    double dual_residual = 0.0;
    double duality_gap = 0.0;  // relative
    int iterations = 0;
    double seconds = 0.0;
    std::string message;
    std::vector<std::string> trace;
    std::vector<double> certificate;  // Farkas multipliers (one per constraint) when Infeasible
    double certificate_residual = 0.0;
    Formulation formulation = Formulation::Primal;  // the one actually used
};

namespace detail {

struct RowTerm {
    int block;
    int i;
    int j;
    double coef;  // coefficient of X(i,j), i <= j
};

struct LpTerm {
    int col;
    double coef;
};

// min <C,X> + c'x  s.t.  A(X) + A_l x = b,  X psd,  x >= 0
struct ConicForm {
    std::vector<int> block_sizes;
    std::vector<std::vector<RowTerm>> rows;
    std::vector<std::vector<LpTerm>> row_lp;
    std::vector<double> rhs;
    int lp_count = 0;
    std::vector<RowTerm> cost;
    std::vector<double> lp_cost;
};

inline double entry_weight(int i, int j) { return i == j ? 1.0 : 2.0; }

// Sparse elimination over the exact equality rows. Returns indices of rows to
// keep and reports an inconsistent dependent row through `inconsistent`.
inline std::vector<std::size_t> independent_rows(const std::vector<std::vector<RowTerm>>& rows,
                                                 const std::vector<double>& rhs,
                                                 const std::vector<int>& block_sizes, std::string& inconsistent) {
    std::vector<long> offset(block_sizes.size() + 1, 0);
    for (std::size_t b = 0; b < block_sizes.size(); ++b) {
        const long n = block_sizes[b];
        offset[b + 1] = offset[b] + n * (n + 1) / 2;
    }
    auto var = [&](const RowTerm& t) {
        const long n = block_sizes[static_cast<std::size_t>(t.block)];
        return offset[static_cast<std::size_t>(t.block)] + t.i * n - t.i * (t.i - 1) / 2 + (t.j - t.i);
    };
    struct Pivot {
        std::map<long, double> row;
        double rhs;
    };
    std::map<long, Pivot> pivots;  // keyed by pivot column
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::map<long, double> row;
        double scale = 0.0;
        for (const auto& t : rows[r]) {
            row[var(t)] += t.coef;
            scale = std::max(scale, std::abs(t.coef));
        }
        double b = rhs[r];
        for (auto it = row.begin(); it != row.end();) {
            if (std::abs(it->second) <= 1e-12 * scale) {
                it = row.erase(it);
                continue;
            }
            auto p = pivots.find(it->first);
            if (p == pivots.end()) {
                ++it;
                continue;
            }
            const double f = it->second / p->second.row.at(it->first);
            for (const auto& [col, v] : p->second.row) row[col] -= f * v;
            b -= f * p->second.rhs;
            it = row.begin();
        }
        if (row.empty()) {
            if (std::abs(b) > 1e-9 * (1.0 + std::abs(rhs[r]))) {
                inconsistent = "equality row " + std::to_string(r) + " is dependent with inconsistent target (residual " +
                               std::to_string(b) + ")";
            }
            continue;
        }
        auto best = std::max_element(row.begin(), row.end(), [](const auto& a, const auto& c) {
            return std::abs(a.second) < std::abs(c.second);
        });
        pivots[best->first] = Pivot{row, b};
        keep.push_back(r);
    }
    return keep;
}

// ---- primal reduction: blocks are the primal variables ----

struct PrimalMap {
    std::vector<std::size_t> origin;  // constraint of each row
};

inline ConicForm primal_form(const SdpProblem& p, PrimalMap& map, std::string& inconsistent) {
    ConicForm f;
    f.block_sizes = p.block_sizes;
    const double sign = p.maximize ? -1.0 : 1.0;
    for (const auto& t : p.objective) f.cost.push_back({t.block, t.row, t.col, sign * t.coef});

    std::vector<std::size_t> exact;
    std::vector<std::vector<RowTerm>> exact_rows;
    std::vector<double> exact_rhs;
    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        const auto& c = p.constraints[k];
        if (c.relation != Relation::Eq || c.tolerance != 0.0) continue;
        exact.push_back(k);
        std::vector<RowTerm> row;
        for (const auto& t : c.terms) row.push_back({t.block, t.row, t.col, t.coef});
        exact_rows.push_back(std::move(row));
        exact_rhs.push_back(c.target);
    }
    std::vector<bool> keep_exact(p.constraints.size(), false);
    for (std::size_t i : independent_rows(exact_rows, exact_rhs, p.block_sizes, inconsistent)) keep_exact[exact[i]] = true;

    auto push_row = [&](std::size_t k, double rhs, int slack_sign) {
        std::vector<RowTerm> row;
        for (const auto& t : p.constraints[k].terms) row.push_back({t.block, t.row, t.col, t.coef});
        f.rows.push_back(std::move(row));
        std::vector<LpTerm> lp;
        if (slack_sign != 0) {
            lp.push_back({f.lp_count++, static_cast<double>(slack_sign)});
            f.lp_cost.push_back(0.0);
        }
        f.row_lp.push_back(std::move(lp));
        f.rhs.push_back(rhs);
        map.origin.push_back(k);
    };
    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        const auto& c = p.constraints[k];
        switch (c.relation) {
            case Relation::Eq:
                if (c.tolerance == 0.0) {
                    if (keep_exact[k]) push_row(k, c.target, 0);
                } else {
                    push_row(k, c.target + c.tolerance, +1);
                    push_row(k, c.target - c.tolerance, -1);
                }
                break;
            case Relation::Le: push_row(k, c.target + c.tolerance, +1); break;
            case Relation::Ge: push_row(k, c.target - c.tolerance, -1); break;
        }
    }
    return f;
}

// ---- dual reduction: blocks are dual slacks of the free entry classes ----

struct Entry {
    int block, i, j;
};

struct Link {
    std::size_t constraint;
    int e1, e2;  // global entry ids
    double a1, a2;
};

struct DualMap {
    double sense = 1.0;  // +1 maximize, -1 minimize
    std::vector<Entry> entries;
    std::vector<int> entry_class;
    std::vector<std::vector<int>> class_entries;
    std::vector<double> entry_objective;  // sense * objective coefficient
    std::vector<double> class_objective;
    std::vector<Link> tree_links;
    std::vector<bool> is_link;
    // Exact rows kept after elimination: pivot class, rhs and reduced row over free classes.
    std::vector<std::size_t> exact_constraint;
    std::vector<int> pivot_class;
    std::vector<double> pivot_rhs;
    std::vector<std::vector<std::pair<int, double>>> pivot_row;  // (free index, coef)
    Eigen::MatrixXd exact_at_pivots;                              // original rows restricted to pivot classes
    std::vector<std::map<int, double>> class_rows;                // class coefficients of each constraint
    std::vector<int> free_class;                                  // class of each free variable
    std::vector<int> class_free;                                  // free index or -1
    std::vector<std::pair<std::size_t, int>> lp_side;             // constraint, +1 upper / -1 lower
};

inline ConicForm dual_form(const SdpProblem& p, DualMap& map, std::string& inconsistent) {
    map.sense = p.maximize ? 1.0 : -1.0;
    const std::size_t nb = p.block_sizes.size();
    std::vector<std::vector<int>> id(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        const int n = p.block_sizes[b];
        id[b].assign(static_cast<std::size_t>(n * n), -1);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                id[b][static_cast<std::size_t>(i * n + j)] = static_cast<int>(map.entries.size());
                map.entries.push_back({static_cast<int>(b), i, j});
            }
    }
    auto entry_of = [&](const Term& t) {
        return id[static_cast<std::size_t>(t.block)][static_cast<std::size_t>(t.row * p.block_sizes[static_cast<std::size_t>(t.block)] + t.col)];
    };
    const int ne = static_cast<int>(map.entries.size());
    std::vector<int> parent(static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) parent[static_cast<std::size_t>(e)] = e;
    auto root = [&](int e) {
        while (parent[static_cast<std::size_t>(e)] != e) {
            parent[static_cast<std::size_t>(e)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(e)])];
            e = parent[static_cast<std::size_t>(e)];
        }
        return e;
    };
    map.is_link.assign(p.constraints.size(), false);
    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        const auto& c = p.constraints[k];
        if (c.relation != Relation::Eq || c.tolerance != 0.0 || c.target != 0.0 || c.terms.size() != 2) continue;
        const double a1 = c.terms[0].coef;
        const double a2 = c.terms[1].coef;
        if (std::abs(a1 + a2) > 1e-15 * std::abs(a1)) continue;
        map.is_link[k] = true;
        const int e1 = entry_of(c.terms[0]);
        const int e2 = entry_of(c.terms[1]);
        const int r1 = root(e1);
        const int r2 = root(e2);
        if (r1 == r2) continue;  // redundant
        parent[static_cast<std::size_t>(r1)] = r2;
        map.tree_links.push_back({k, e1, e2, a1, a2});
    }
    map.entry_class.assign(static_cast<std::size_t>(ne), -1);
    std::vector<int> class_of_root(static_cast<std::size_t>(ne), -1);
    for (int e = 0; e < ne; ++e) {
        int& c = class_of_root[static_cast<std::size_t>(root(e))];
        if (c < 0) {
            c = static_cast<int>(map.class_entries.size());
            map.class_entries.emplace_back();
        }
        map.entry_class[static_cast<std::size_t>(e)] = c;
        map.class_entries[static_cast<std::size_t>(c)].push_back(e);
    }
    const int nv = static_cast<int>(map.class_entries.size());

    map.entry_objective.assign(static_cast<std::size_t>(ne), 0.0);
    map.class_objective.assign(static_cast<std::size_t>(nv), 0.0);
    for (const auto& t : p.objective) {
        const int e = entry_of(t);
        map.entry_objective[static_cast<std::size_t>(e)] += map.sense * t.coef;
        map.class_objective[static_cast<std::size_t>(map.entry_class[static_cast<std::size_t>(e)])] += map.sense * t.coef;
    }
    map.class_rows.resize(p.constraints.size());
    std::vector<std::size_t> exact;
    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        if (map.is_link[k]) continue;
        for (const auto& t : p.constraints[k].terms)
            map.class_rows[k][map.entry_class[static_cast<std::size_t>(entry_of(t))]] += t.coef;
        const auto& c = p.constraints[k];
        if (c.relation == Relation::Eq && c.tolerance == 0.0) exact.push_back(k);
    }

    // Reduced row echelon form of the exact rows; pivots chosen for sparsity.
    const Eigen::Index nr = static_cast<Eigen::Index>(exact.size());
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nr, nv);
    Eigen::VectorXd rhs(nr);
    std::vector<int> col_count(static_cast<std::size_t>(nv), 0);
    for (Eigen::Index r = 0; r < nr; ++r) {
        const std::size_t k = exact[static_cast<std::size_t>(r)];
        for (const auto& [v, a] : map.class_rows[k]) {
            R(r, v) = a;
            if (a != 0.0) ++col_count[static_cast<std::size_t>(v)];
        }
        rhs(r) = p.constraints[k].target;
    }
    const Eigen::MatrixXd original = R;
    std::vector<Eigen::Index> kept;
    std::vector<int> pivots;
    for (Eigen::Index r = 0; r < nr; ++r) {
        const double orig_scale = original.row(r).cwiseAbs().maxCoeff();
        const double scale = R.row(r).cwiseAbs().maxCoeff();
        if (scale <= 1e-12 * orig_scale || scale == 0.0) {
            if (std::abs(rhs(r)) > 1e-9 * (1.0 + std::abs(p.constraints[exact[static_cast<std::size_t>(r)]].target))) {
                inconsistent = "constraint " + std::to_string(exact[static_cast<std::size_t>(r)]) +
                               " is dependent with inconsistent target";
            }
            continue;
        }
        int pv = -1;
        for (int v = 0; v < nv; ++v) {
            const double a = std::abs(R(r, v));
            if (a < 0.1 * scale) continue;
            if (pv < 0 || col_count[static_cast<std::size_t>(v)] < col_count[static_cast<std::size_t>(pv)] ||
                (col_count[static_cast<std::size_t>(v)] == col_count[static_cast<std::size_t>(pv)] && a > std::abs(R(r, pv)))) {
                pv = v;
            }
        }
        const double a = R(r, pv);
        R.row(r) /= a;
        rhs(r) /= a;
        for (Eigen::Index s = 0; s < nr; ++s) {
            if (s == r || R(s, pv) == 0.0) continue;
            const double f = R(s, pv);
            R.row(s) -= f * R.row(r);
            rhs(s) -= f * rhs(r);
            R(s, pv) = 0.0;
            for (int v = 0; v < nv; ++v)
                if (std::abs(R(s, v)) < 1e-15) R(s, v) = 0.0;
        }
        kept.push_back(r);
        pivots.push_back(pv);
    }
    std::vector<bool> is_pivot(static_cast<std::size_t>(nv), false);
    for (int v : pivots) is_pivot[static_cast<std::size_t>(v)] = true;
    map.class_free.assign(static_cast<std::size_t>(nv), -1);
    for (int v = 0; v < nv; ++v) {
        if (is_pivot[static_cast<std::size_t>(v)]) continue;
        map.class_free[static_cast<std::size_t>(v)] = static_cast<int>(map.free_class.size());
        map.free_class.push_back(v);
    }
    const int nf = static_cast<int>(map.free_class.size());
    map.exact_at_pivots = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t q = 0; q < kept.size(); ++q) {
        const Eigen::Index r = kept[q];
        map.exact_constraint.push_back(exact[static_cast<std::size_t>(r)]);
        map.pivot_class.push_back(pivots[q]);
        map.pivot_rhs.push_back(rhs(r));
        std::vector<std::pair<int, double>> row;
        for (int u = 0; u < nf; ++u) {
            const double v = R(r, map.free_class[static_cast<std::size_t>(u)]);
            if (v != 0.0) row.emplace_back(u, v);
        }
        map.pivot_row.push_back(std::move(row));
        for (std::size_t q2 = 0; q2 < kept.size(); ++q2)
            map.exact_at_pivots(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q2)) = original(r, pivots[q2]);
    }

    ConicForm f;
    f.block_sizes = p.block_sizes;
    // F_u = E_u - sum_q R(q,u) E_{pivot q}, stored as class weights.
    std::vector<std::map<int, double>> combo(static_cast<std::size_t>(nf));
    for (int u = 0; u < nf; ++u) combo[static_cast<std::size_t>(u)][map.free_class[static_cast<std::size_t>(u)]] = 1.0;
    for (std::size_t q = 0; q < map.pivot_row.size(); ++q)
        for (const auto& [u, v] : map.pivot_row[q]) combo[static_cast<std::size_t>(u)][map.pivot_class[q]] -= v;
    auto class_terms = [&](int v, double w, std::vector<RowTerm>& out) {
        for (int e : map.class_entries[static_cast<std::size_t>(v)]) {
            const Entry& en = map.entries[static_cast<std::size_t>(e)];
            out.push_back({en.block, en.i, en.j, w * entry_weight(en.i, en.j)});
        }
    };
    f.rows.resize(static_cast<std::size_t>(nf));
    f.row_lp.resize(static_cast<std::size_t>(nf));
    f.rhs.assign(static_cast<std::size_t>(nf), 0.0);
    for (int u = 0; u < nf; ++u) {
        auto& row = f.rows[static_cast<std::size_t>(u)];
        for (const auto& [v, w] : combo[static_cast<std::size_t>(u)]) class_terms(v, -w, row);
        double g = 0.0;
        for (const auto& [v, w] : combo[static_cast<std::size_t>(u)]) g += w * map.class_objective[static_cast<std::size_t>(v)];
        f.rhs[static_cast<std::size_t>(u)] = g;
    }
    for (std::size_t q = 0; q < map.pivot_class.size(); ++q) class_terms(map.pivot_class[q], map.pivot_rhs[q], f.cost);

    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        const auto& c = p.constraints[k];
        if (map.is_link[k] || (c.relation == Relation::Eq && c.tolerance == 0.0)) continue;
        // value = l0 + sum_u l_u t_u
        double l0 = 0.0;
        std::vector<double> l(static_cast<std::size_t>(nf), 0.0);
        for (const auto& [v, a] : map.class_rows[k]) {
            const int u = map.class_free[static_cast<std::size_t>(v)];
            if (u >= 0) {
                l[static_cast<std::size_t>(u)] += a;
                continue;
            }
            const std::size_t q = static_cast<std::size_t>(std::find(map.pivot_class.begin(), map.pivot_class.end(), v) - map.pivot_class.begin());
            l0 += a * map.pivot_rhs[q];
            for (const auto& [u2, rv] : map.pivot_row[q]) l[static_cast<std::size_t>(u2)] -= a * rv;
        }
        auto add_side = [&](int side, double bound) {
            const int col = f.lp_count++;
            f.lp_cost.push_back(side > 0 ? bound - l0 : l0 - bound);
            for (int u = 0; u < nf; ++u) {
                const double v = l[static_cast<std::size_t>(u)];
                if (v != 0.0) f.row_lp[static_cast<std::size_t>(u)].push_back({col, side > 0 ? v : -v});
            }
            map.lp_side.emplace_back(k, side);
        };
        if (c.relation != Relation::Ge) add_side(+1, c.target + c.tolerance);
        if (c.relation != Relation::Le) add_side(-1, c.target - c.tolerance);
    }
    return f;
}

// ---- interior-point method ----

// Residual level below which a stopped run still counts as Inaccurate.
inline double loose_tolerance(double tol) { return std::max(1e-5, std::sqrt(tol)); }

enum class IpmOutcome { Converged, Stopped, PrimalInfeasible, DualInfeasible };

struct IpmResult {
    IpmOutcome outcome = IpmOutcome::Stopped;
    std::string message;
    std::vector<Eigen::MatrixXd> X, Z;
    Eigen::VectorXd x, z, y;
    double pobj = 0.0, dobj = 0.0;
    double pinf = 0.0, dinf = 0.0, gap = 0.0;
    double score = 0.0;
    int iterations = 0;
    std::vector<std::string> trace;
};

template <class Scalar>
class InteriorPoint {
public:
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    InteriorPoint(const ConicForm& form, const SolverSettings& settings) : f_(form), settings_(settings) {
        for (auto& row : f_.rows)
            std::stable_sort(row.begin(), row.end(), [](const RowTerm& a, const RowTerm& b) { return a.block < b.block; });
        nb_ = f_.block_sizes.size();
        m_ = static_cast<Eigen::Index>(f_.rows.size());
        nl_ = f_.lp_count;
        b_.resize(m_);
        for (Eigen::Index r = 0; r < m_; ++r) b_(r) = static_cast<Scalar>(f_.rhs[static_cast<std::size_t>(r)]);
        C_.resize(nb_);
        for (std::size_t k = 0; k < nb_; ++k) C_[k] = Mat::Zero(f_.block_sizes[k], f_.block_sizes[k]);
        for (const auto& t : f_.cost) add_sym(C_[static_cast<std::size_t>(t.block)], t.i, t.j, static_cast<Scalar>(t.coef));
        cl_ = Vec::Zero(nl_);
        for (Eigen::Index s = 0; s < nl_; ++s) cl_(s) = static_cast<Scalar>(f_.lp_cost[static_cast<std::size_t>(s)]);
        lp_cols_.resize(static_cast<std::size_t>(nl_));
        for (Eigen::Index r = 0; r < m_; ++r)
            for (const auto& t : f_.row_lp[static_cast<std::size_t>(r)]) lp_cols_[static_cast<std::size_t>(t.col)].push_back({r, t.coef});
        by_block_.resize(nb_);
        for (Eigen::Index r = 0; r < m_; ++r) {
            const auto& row = f_.rows[static_cast<std::size_t>(r)];
            for (std::size_t k = 0; k < row.size();) {
                const int blk = row[k].block;
                const std::size_t start = k;
                while (k < row.size() && row[k].block == blk) ++k;
                by_block_[static_cast<std::size_t>(blk)].push_back({r, start, k});
            }
        }
        // Rows touching a single block and no shared LP column form that block's
        // group; the rest couple the groups.
        groups_.resize(nb_);
        for (Eigen::Index r = 0; r < m_; ++r) {
            const auto& row = f_.rows[static_cast<std::size_t>(r)];
            bool single = !row.empty() && row.front().block == row.back().block;
            for (const auto& t : f_.row_lp[static_cast<std::size_t>(r)])
                if (lp_cols_[static_cast<std::size_t>(t.col)].size() > 1) single = false;
            if (single) {
                groups_[static_cast<std::size_t>(row.front().block)].push_back(r);
            } else {
                coupling_.push_back(r);
            }
        }
    }

    IpmResult run() {
        IpmResult res;
        init();
        Snapshot best;
        best.score = std::numeric_limits<double>::infinity();
        Snapshot latest_ok;  // most advanced iterate within the loose tolerance
        bool have_ok = false;
        int stalls = 0;
        const double tol = settings_.tol;
        const double loose = loose_tolerance(tol);
        for (int it = 0;; ++it) {
            const Metrics mt = metrics();
            char line[200];
            std::snprintf(line, sizeof line, "it %3d pobj % .12e dobj % .12e pinf %.2e dinf %.2e gap %.2e", it,
                          static_cast<double>(mt.pobj), static_cast<double>(mt.dobj), mt.pinf, mt.dinf, mt.gap);
            res.trace.emplace_back(line);
            if (settings_.verbose) std::fprintf(stderr, "%s\n", line);
            const double score = std::max({mt.pinf, mt.dinf, mt.gap});
            Snapshot current = snapshot(mt, it, score);
            if (score <= tol) return finish(res, current, IpmOutcome::Converged, "converged");
            if (auto outcome = infeasibility(mt); outcome != IpmOutcome::Stopped) {
                return finish(res, current, outcome,
                              outcome == IpmOutcome::PrimalInfeasible ? "primal infeasible" : "dual infeasible");
            }
            if (score < best.score) best = current;
            if (score <= loose) {
                latest_ok = std::move(current);
                have_ok = true;
            }
            auto pick = [&]() -> const Snapshot& { return have_ok ? latest_ok : best; };
            if (it >= settings_.max_iters) return finish(res, pick(), IpmOutcome::Stopped, "iteration limit reached");
            double step = 0.0;
            try {
                step = iterate(mt);
            } catch (const Breakdown& e) {
                return finish(res, pick(), IpmOutcome::Stopped, std::string("numerical breakdown: ") + e.what);
            }
            stalls = step < 1e-8 ? stalls + 1 : 0;
            if (stalls >= 3) return finish(res, pick(), IpmOutcome::Stopped, "step length stagnation");
        }
    }

private:
    struct Breakdown {
        const char* what;
    };
    struct Span {
        Eigen::Index row;
        std::size_t begin, end;
    };
    struct Metrics {
        Scalar pobj, dobj;
        double pinf, dinf, gap;
        Scalar mu;
        Vec rp;
        std::vector<Mat> Rd;
        Vec rdl;
    };
    struct Snapshot {
        std::vector<Mat> X, Z;
        Vec x, z, y;
        Scalar pobj = 0, dobj = 0;
        double pinf = 0, dinf = 0, gap = 0, score = 0;
        int iters = 0;
    };

    static void add_sym(Mat& m, int i, int j, Scalar v) {
        if (i == j) {
            m(i, i) += v;
        } else {
            m(i, j) += v / 2;
            m(j, i) += v / 2;
        }
    }

    Scalar inner(const Mat& a, const Mat& b) const { return a.cwiseProduct(b).sum(); }

    // A(X) + A_l x
    Vec apply_A(const std::vector<Mat>& X, const Vec& x) const {
        Vec out = Vec::Zero(m_);
        for (Eigen::Index r = 0; r < m_; ++r) {
            Scalar v = 0;
            for (const auto& t : f_.rows[static_cast<std::size_t>(r)])
                v += static_cast<Scalar>(t.coef) * X[static_cast<std::size_t>(t.block)](t.i, t.j);
            for (const auto& t : f_.row_lp[static_cast<std::size_t>(r)]) v += static_cast<Scalar>(t.coef) * x(t.col);
            out(r) = v;
        }
        return out;
    }

    std::vector<Mat> apply_At(const Vec& y) const {
        std::vector<Mat> out(nb_);
        for (std::size_t k = 0; k < nb_; ++k) out[k] = Mat::Zero(f_.block_sizes[k], f_.block_sizes[k]);
        for (Eigen::Index r = 0; r < m_; ++r)
            for (const auto& t : f_.rows[static_cast<std::size_t>(r)])
                add_sym(out[static_cast<std::size_t>(t.block)], t.i, t.j, static_cast<Scalar>(t.coef) * y(r));
        return out;
    }

    Vec apply_Alt(const Vec& y) const {
        Vec out = Vec::Zero(nl_);
        for (Eigen::Index s = 0; s < nl_; ++s)
            for (const auto& [r, c] : lp_cols_[static_cast<std::size_t>(s)]) out(s) += static_cast<Scalar>(c) * y(r);
        return out;
    }

    void init() {
        X_.resize(nb_);
        Z_.resize(nb_);
        bnorm_ = m_ > 0 ? b_.cwiseAbs().maxCoeff() : Scalar(0);
        for (std::size_t k = 0; k < nb_; ++k) {
            const Scalar n = static_cast<Scalar>(f_.block_sizes[k]);
            Scalar amax = 0;
            Scalar ratio = 0;
            for (const auto& sp : by_block_[k]) {
                Scalar norm2 = 0;
                for (std::size_t q = sp.begin; q < sp.end; ++q) {
                    const auto& t = f_.rows[static_cast<std::size_t>(sp.row)][q];
                    const Scalar c = static_cast<Scalar>(t.coef);
                    norm2 += t.i == t.j ? c * c : c * c / 2;
                }
                const Scalar an = std::sqrt(norm2);
                amax = std::max(amax, an);
                ratio = std::max(ratio, (1 + std::abs(b_(sp.row))) / (1 + an));
            }
            const Scalar xi = std::max({Scalar(10), std::sqrt(n), n * ratio});
            const Scalar eta = std::max({Scalar(10), std::sqrt(n), amax, C_[k].norm()});
            X_[k] = xi * Mat::Identity(f_.block_sizes[k], f_.block_sizes[k]);
            Z_[k] = eta * Mat::Identity(f_.block_sizes[k], f_.block_sizes[k]);
        }
        const Scalar clmax = nl_ > 0 ? cl_.cwiseAbs().maxCoeff() : Scalar(0);
        x_ = Vec::Constant(nl_, std::max(Scalar(10), 1 + bnorm_));
        z_ = Vec::Constant(nl_, std::max(Scalar(10), 1 + clmax));
        y_ = Vec::Zero(m_);
        cnorm_ = clmax;
        for (const auto& c : C_) cnorm_ = std::max(cnorm_, c.cwiseAbs().maxCoeff());
    }

    Metrics metrics() const {
        Metrics mt;
        mt.pobj = 0;
        for (std::size_t k = 0; k < nb_; ++k) mt.pobj += inner(C_[k], X_[k]);
        mt.pobj += cl_.dot(x_);
        mt.dobj = b_.dot(y_);
        mt.rp = b_ - apply_A(X_, x_);
        const auto aty = apply_At(y_);
        mt.Rd.resize(nb_);
        Scalar dmax = 0;
        for (std::size_t k = 0; k < nb_; ++k) {
            mt.Rd[k] = C_[k] - aty[k] - Z_[k];
            dmax = std::max(dmax, mt.Rd[k].cwiseAbs().maxCoeff());
        }
        mt.rdl = cl_ - apply_Alt(y_) - z_;
        if (nl_ > 0) dmax = std::max(dmax, mt.rdl.cwiseAbs().maxCoeff());
        const Scalar pmax = m_ > 0 ? mt.rp.cwiseAbs().maxCoeff() : Scalar(0);
        // Residuals relative to the size of the terms that produce them.
        Scalar xscale = bnorm_;
        for (Eigen::Index r = 0; r < m_; ++r) {
            Scalar v = 0;
            for (const auto& t : f_.rows[static_cast<std::size_t>(r)])
                v += std::abs(static_cast<Scalar>(t.coef) * X_[static_cast<std::size_t>(t.block)](t.i, t.j));
            for (const auto& t : f_.row_lp[static_cast<std::size_t>(r)]) v += std::abs(static_cast<Scalar>(t.coef) * x_(t.col));
            xscale = std::max(xscale, v);
        }
        Scalar zscale = cnorm_;
        for (std::size_t k = 0; k < nb_; ++k) zscale = std::max({zscale, aty[k].cwiseAbs().maxCoeff(), Z_[k].cwiseAbs().maxCoeff()});
        mt.pinf = static_cast<double>(pmax / (1 + xscale));
        mt.dinf = static_cast<double>(dmax / (1 + zscale));
        mt.gap = static_cast<double>(std::abs(mt.pobj - mt.dobj) / (1 + std::abs(mt.pobj) + std::abs(mt.dobj)));
        Scalar xz = 0;
        for (std::size_t k = 0; k < nb_; ++k) xz += inner(X_[k], Z_[k]);
        xz += x_.dot(z_);
        mt.mu = xz / static_cast<Scalar>(total_dim());
        return mt;
    }

    Eigen::Index total_dim() const {
        Eigen::Index n = nl_;
        for (int s : f_.block_sizes) n += s;
        return n;
    }

    Snapshot snapshot(const Metrics& mt, int it, double score) const {
        return Snapshot{X_, Z_, x_, z_, y_, mt.pobj, mt.dobj, mt.pinf, mt.dinf, mt.gap, score, it};
    }

    IpmOutcome infeasibility(const Metrics& mt) const {
        // Primal infeasible: b'y large with A'y + Z ~ 0 relative to it.
        const Scalar by = b_.dot(y_);
        if (by > Scalar(1e6) * (1 + cnorm_)) {
            const auto aty = apply_At(y_);
            Scalar r = 0;
            for (std::size_t k = 0; k < nb_; ++k) r = std::max(r, (aty[k] + Z_[k]).cwiseAbs().maxCoeff());
            if (nl_ > 0) r = std::max(r, (apply_Alt(y_) + z_).cwiseAbs().maxCoeff());
            if (r / by < Scalar(1e-8)) return IpmOutcome::PrimalInfeasible;
        }
        // Dual infeasible: <C,X> very negative with A(X) ~ 0 relative to it.
        if (-mt.pobj > Scalar(1e6) * (1 + bnorm_)) {
            const Vec ax = apply_A(X_, x_);
            const Scalar r = m_ > 0 ? ax.cwiseAbs().maxCoeff() : Scalar(0);
            if (r / -mt.pobj < Scalar(1e-8)) return IpmOutcome::DualInfeasible;
        }
        return IpmOutcome::Stopped;
    }

    // Nesterov-Todd scaling of one block.
    struct Scaling {
        Mat L;     // chol(X)
        Mat G;     // W = G G'
        Mat Ginv;  // G^{-1}
        Mat W;
        Vec d;     // eigenvalues of the scaled point
    };

    Scaling scaling(const Mat& X, const Mat& Z) const {
        Scaling s;
        Eigen::LLT<Mat> llt(X);
        if (llt.info() != Eigen::Success) throw Breakdown{"X not positive definite"};
        s.L = llt.matrixL();
        const Mat T = s.L.transpose() * Z * s.L;
        Eigen::SelfAdjointEigenSolver<Mat> es(T);
        if (es.info() != Eigen::Success) throw Breakdown{"eigendecomposition failed"};
        const Vec lam = es.eigenvalues();
        if (lam.minCoeff() <= 0) throw Breakdown{"XZ not positive definite"};
        s.d = lam.cwiseSqrt();
        const Vec q = s.d.cwiseSqrt();  // lam^{1/4}
        s.G = s.L * es.eigenvectors() * q.cwiseInverse().asDiagonal();
        const Mat Linv = s.L.template triangularView<Eigen::Lower>().solve(Mat::Identity(X.rows(), X.cols()));
        s.Ginv = q.asDiagonal() * es.eigenvectors().transpose() * Linv;
        s.W = s.G * s.G.transpose();
        return s;
    }

    Mat schur(const std::vector<Scaling>& sc) const {
        Mat M = Mat::Zero(m_, m_);
        for (std::size_t k = 0; k < nb_; ++k) {
            const Mat& W = sc[k].W;
            const auto& spans = by_block_[k];
            for (std::size_t a = 0; a < spans.size(); ++a) {
                const auto& ra = f_.rows[static_cast<std::size_t>(spans[a].row)];
                for (std::size_t c = a; c < spans.size(); ++c) {
                    const auto& rc = f_.rows[static_cast<std::size_t>(spans[c].row)];
                    Scalar v = 0;
                    for (std::size_t p = spans[a].begin; p < spans[a].end; ++p) {
                        const auto& t = ra[p];
                        for (std::size_t q = spans[c].begin; q < spans[c].end; ++q) {
                            const auto& u = rc[q];
                            v += static_cast<Scalar>(t.coef * u.coef) *
                                 (W(t.i, u.i) * W(t.j, u.j) + W(t.i, u.j) * W(t.j, u.i)) / 2;
                        }
                    }
                    M(spans[a].row, spans[c].row) += v;
                }
            }
        }
        for (Eigen::Index s = 0; s < nl_; ++s) {
            const Scalar d = x_(s) / z_(s);
            const auto& col = lp_cols_[static_cast<std::size_t>(s)];
            for (std::size_t a = 0; a < col.size(); ++a)
                for (std::size_t c = 0; c < col.size(); ++c) {
                    if (col[a].first > col[c].first) continue;
                    M(col[a].first, col[c].first) += static_cast<Scalar>(col[a].second * col[c].second) * d;
                }
        }
        return M.template selfadjointView<Eigen::Upper>();
    }

    // Factorization of the Schur matrix [[D, E], [E', F]] with D block diagonal.
    struct SchurFactor {
        std::vector<Eigen::LLT<Mat>> d;
        std::vector<Mat> y;  // D_g^{-1} E_g
        std::vector<Mat> e;
        Eigen::LLT<Mat> s;
    };

    static Eigen::LLT<Mat> robust_llt(Mat a) {
        Eigen::LLT<Mat> f(a);
        if (a.size() == 0) return f;
        Scalar shift = std::numeric_limits<Scalar>::epsilon() * 100 * (1 + a.diagonal().cwiseAbs().maxCoeff());
        for (int tries = 0; f.info() != Eigen::Success && tries < 6; ++tries) {
            a.diagonal().array() += shift;
            shift *= 100;
            f.compute(a);
        }
        if (f.info() != Eigen::Success) throw Breakdown{"Schur factorization failed"};
        return f;
    }

    static Mat gather(const Mat& m, const std::vector<Eigen::Index>& r, const std::vector<Eigen::Index>& c) {
        Mat out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(c.size()));
        for (std::size_t i = 0; i < r.size(); ++i)
            for (std::size_t j = 0; j < c.size(); ++j)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(r[i], c[j]);
        return out;
    }

    SchurFactor factor(const Mat& M) const {
        SchurFactor f;
        Mat S = gather(M, coupling_, coupling_);
        for (std::size_t g = 0; g < nb_; ++g) {
            f.d.push_back(robust_llt(gather(M, groups_[g], groups_[g])));
            f.e.push_back(gather(M, groups_[g], coupling_));
            f.y.push_back(groups_[g].empty() || coupling_.empty()
                              ? Mat(static_cast<Eigen::Index>(groups_[g].size()), static_cast<Eigen::Index>(coupling_.size()))
                              : Mat(f.d.back().solve(f.e.back())));
            if (!coupling_.empty() && !groups_[g].empty()) S -= f.e.back().transpose() * f.y.back();
        }
        if (!coupling_.empty()) f.s = robust_llt(S);
        return f;
    }

    Vec schur_solve(const SchurFactor& f, const Vec& r) const {
        Vec out = Vec::Zero(m_);
        const Eigen::Index nc = static_cast<Eigen::Index>(coupling_.size());
        Vec rc(nc);
        for (Eigen::Index i = 0; i < nc; ++i) rc(i) = r(coupling_[static_cast<std::size_t>(i)]);
        std::vector<Vec> u(nb_);
        for (std::size_t g = 0; g < nb_; ++g) {
            if (groups_[g].empty()) continue;
            Vec rg(static_cast<Eigen::Index>(groups_[g].size()));
            for (std::size_t i = 0; i < groups_[g].size(); ++i) rg(static_cast<Eigen::Index>(i)) = r(groups_[g][i]);
            u[g] = f.d[g].solve(rg);
            if (nc > 0) rc -= f.e[g].transpose() * u[g];
        }
        Vec xc = nc > 0 ? Vec(f.s.solve(rc)) : Vec(0);
        for (Eigen::Index i = 0; i < nc; ++i) out(coupling_[static_cast<std::size_t>(i)]) = xc(i);
        for (std::size_t g = 0; g < nb_; ++g) {
            if (groups_[g].empty()) continue;
            const Vec xg = nc > 0 ? Vec(u[g] - f.y[g] * xc) : u[g];
            for (std::size_t i = 0; i < groups_[g].size(); ++i) out(groups_[g][i]) = xg(static_cast<Eigen::Index>(i));
        }
        return out;
    }

    struct Direction {
        std::vector<Mat> dX, dZ;
        Vec dx, dz, dy;
    };

    Direction solve_direction(const SchurFactor& fact, const std::vector<Scaling>& sc, const Metrics& mt,
                              const std::vector<Mat>& Rc, const Vec& rcl) const {
        std::vector<Mat> tmp(nb_);
        for (std::size_t k = 0; k < nb_; ++k) tmp[k] = Rc[k] - sc[k].W * mt.Rd[k] * sc[k].W;
        Vec tl = Vec::Zero(nl_);
        for (Eigen::Index s = 0; s < nl_; ++s) tl(s) = rcl(s) / z_(s) - x_(s) / z_(s) * mt.rdl(s);
        const Vec rhs = mt.rp - apply_A(tmp, tl);
        Direction d;
        d.dy = schur_solve(fact, rhs);
        // Iterative refinement on the primal equation A(dX) + A_l dx = rp.
        for (int pass = 0;; ++pass) {
            const auto aty = apply_At(d.dy);
            d.dZ.resize(nb_);
            d.dX.resize(nb_);
            for (std::size_t k = 0; k < nb_; ++k) {
                d.dZ[k] = mt.Rd[k] - aty[k];
                Mat dx = Rc[k] - sc[k].W * d.dZ[k] * sc[k].W;
                d.dX[k] = (dx + dx.transpose()) / 2;
            }
            d.dz = mt.rdl - apply_Alt(d.dy);
            d.dx = Vec::Zero(nl_);
            for (Eigen::Index s = 0; s < nl_; ++s) d.dx(s) = (rcl(s) - x_(s) * d.dz(s)) / z_(s);
            if (pass == 2 || m_ == 0) break;
            const Vec res = mt.rp - apply_A(d.dX, d.dx);
            if (res.cwiseAbs().maxCoeff() <= std::numeric_limits<Scalar>::epsilon() * (1 + mt.rp.cwiseAbs().maxCoeff())) break;
            d.dy += schur_solve(fact, res);
        }
        return d;
    }

    // Largest step keeping M + a dM positive semidefinite (given M = L L').
    static Scalar max_step(const Mat& L, const Mat& dM) {
        const auto tri = L.template triangularView<Eigen::Lower>();
        const Mat t = tri.solve(tri.solve(dM).transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es((t + t.transpose()) / 2, Eigen::EigenvaluesOnly);
        const Scalar lmin = es.eigenvalues().minCoeff();
        return lmin < 0 ? -1 / lmin : std::numeric_limits<Scalar>::infinity();
    }

    std::pair<Scalar, Scalar> step_lengths(const std::vector<Scaling>& sc, const std::vector<Mat>& zchol,
                                           const Direction& d) const {
        Scalar ap = std::numeric_limits<Scalar>::infinity();
        Scalar ad = ap;
        for (std::size_t k = 0; k < nb_; ++k) {
            ap = std::min(ap, max_step(sc[k].L, d.dX[k]));
            ad = std::min(ad, max_step(zchol[k], d.dZ[k]));
        }
        for (Eigen::Index s = 0; s < nl_; ++s) {
            if (d.dx(s) < 0) ap = std::min(ap, -x_(s) / d.dx(s));
            if (d.dz(s) < 0) ad = std::min(ad, -z_(s) / d.dz(s));
        }
        return {ap, ad};
    }

    double iterate(const Metrics& mt) {
        std::vector<Scaling> sc(nb_);
        std::vector<Mat> zchol(nb_);
        for (std::size_t k = 0; k < nb_; ++k) {
            sc[k] = scaling(X_[k], Z_[k]);
            Eigen::LLT<Mat> llt(Z_[k]);
            if (llt.info() != Eigen::Success) throw Breakdown{"Z not positive definite"};
            zchol[k] = llt.matrixL();
        }
        for (Eigen::Index s = 0; s < nl_; ++s)
            if (!(x_(s) > 0) || !(z_(s) > 0)) throw Breakdown{"LP variable not positive"};
        const Mat M = schur(sc);
        if (!M.allFinite()) throw Breakdown{"non-finite Schur complement"};
        const SchurFactor fact = factor(M);

        // Predictor
        std::vector<Mat> Rc(nb_);
        for (std::size_t k = 0; k < nb_; ++k) Rc[k] = -X_[k];
        Vec rcl = -x_.cwiseProduct(z_);
        const Direction aff = solve_direction(fact, sc, mt, Rc, rcl);
        auto [ap_aff, ad_aff] = step_lengths(sc, zchol, aff);
        ap_aff = std::min(Scalar(1), ap_aff);
        ad_aff = std::min(Scalar(1), ad_aff);
        Scalar xz_aff = 0;
        for (std::size_t k = 0; k < nb_; ++k) xz_aff += inner(X_[k] + ap_aff * aff.dX[k], Z_[k] + ad_aff * aff.dZ[k]);
        xz_aff += (x_ + ap_aff * aff.dx).dot(z_ + ad_aff * aff.dz);
        const Scalar mu_aff = xz_aff / static_cast<Scalar>(total_dim());
        const Scalar amin = std::min(ap_aff, ad_aff);
        const Scalar expo = std::max(Scalar(1), 3 * amin * amin);
        const Scalar sigma = std::min(Scalar(1), std::pow(std::max(Scalar(0), mu_aff / mt.mu), expo));

        // Corrector
        for (std::size_t k = 0; k < nb_; ++k) {
            const auto& s = sc[k];
            const Mat xs = s.Ginv * aff.dX[k] * s.Ginv.transpose();
            const Mat zs = s.G.transpose() * aff.dZ[k] * s.G;
            const Eigen::Index n = s.d.size();
            Mat R = -(xs * zs + zs * xs);
            for (Eigen::Index i = 0; i < n; ++i) R(i, i) += 2 * sigma * mt.mu - 2 * s.d(i) * s.d(i);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) R(i, j) /= s.d(i) + s.d(j);
            Rc[k] = s.G * R * s.G.transpose();
        }
        for (Eigen::Index s = 0; s < nl_; ++s) rcl(s) = sigma * mt.mu - x_(s) * z_(s) - aff.dx(s) * aff.dz(s);
        const Direction d = solve_direction(fact, sc, mt, Rc, rcl);
        auto [ap, ad] = step_lengths(sc, zchol, d);
        const Scalar gamma = Scalar(0.9) + Scalar(0.09) * std::min(ap_aff, ad_aff);
        ap = std::min(Scalar(1), gamma * ap);
        ad = std::min(Scalar(1), gamma * ad);
        for (std::size_t k = 0; k < nb_; ++k) {
            X_[k] += ap * d.dX[k];
            Z_[k] += ad * d.dZ[k];
            X_[k] = (X_[k] + X_[k].transpose()) / 2;
            Z_[k] = (Z_[k] + Z_[k].transpose()) / 2;
        }
        x_ += ap * d.dx;
        z_ += ad * d.dz;
        y_ += ad * d.dy;
        return static_cast<double>(std::min(ap, ad));
    }

    IpmResult finish(IpmResult& res, const Snapshot& s, IpmOutcome outcome, const std::string& msg) const {
        res.outcome = outcome;
        res.message = msg;
        res.iterations = s.iters;
        res.X.clear();
        res.Z.clear();
        for (const auto& m : s.X) res.X.push_back(m.template cast<double>());
        for (const auto& m : s.Z) res.Z.push_back(m.template cast<double>());
        res.x = s.x.template cast<double>();
        res.z = s.z.template cast<double>();
        res.y = s.y.template cast<double>();
        res.pobj = static_cast<double>(s.pobj);
        res.dobj = static_cast<double>(s.dobj);
        res.pinf = s.pinf;
        res.dinf = s.dinf;
        res.gap = s.gap;
        res.score = s.score;
        return res;
    }

    ConicForm f_;
    SolverSettings settings_;
    std::size_t nb_ = 0;
    Eigen::Index m_ = 0;
    Eigen::Index nl_ = 0;
    Vec b_;
    std::vector<Mat> C_;
    Vec cl_;
    std::vector<std::vector<std::pair<Eigen::Index, double>>> lp_cols_;
    std::vector<std::vector<Span>> by_block_;
    std::vector<std::vector<Eigen::Index>> groups_;
    std::vector<Eigen::Index> coupling_;
    std::vector<Mat> X_, Z_;
    Vec x_, z_, y_;
    Scalar bnorm_ = 0, cnorm_ = 0;
};

inline IpmResult run_ipm(const ConicForm& f, const SolverSettings& settings) {
    if (settings.precision == Precision::Extended) return InteriorPoint<long double>(f, settings).run();
    return InteriorPoint<double>(f, settings).run();
}

inline SolveStatus classify(const IpmResult& r, double tol) {
    if (r.outcome == IpmOutcome::Converged) return SolveStatus::Optimal;
    return r.score <= loose_tolerance(tol) ? SolveStatus::Inaccurate : SolveStatus::Failed;
}

// Multipliers in the problem's own sense from the dual reduction. S and nu are
// the multiplier block matrices and LP multipliers; `homogeneous` drops the
// objective (used for infeasibility rays).
inline std::vector<double> dual_multipliers(const SdpProblem& p, const DualMap& map, const std::vector<Eigen::MatrixXd>& S,
                                            const Eigen::VectorXd& nu, bool homogeneous) {
    const std::size_t nk = p.constraints.size();
    std::vector<double> lam(nk, 0.0);  // internal maximize sense
    for (std::size_t q = 0; q < map.lp_side.size(); ++q) lam[map.lp_side[q].first] += map.lp_side[q].second * nu(static_cast<Eigen::Index>(q));
    auto s_of = [&](int e) {
        const Entry& en = map.entries[static_cast<std::size_t>(e)];
        return entry_weight(en.i, en.j) * S[static_cast<std::size_t>(en.block)](en.i, en.j);
    };
    const double objective_scale = homogeneous ? 0.0 : 1.0;
    // Exact rows: stationarity at the pivot classes.
    const Eigen::Index np = static_cast<Eigen::Index>(map.pivot_class.size());
    if (np > 0) {
        Eigen::VectorXd r(np);
        for (Eigen::Index q = 0; q < np; ++q) {
            const int v = map.pivot_class[static_cast<std::size_t>(q)];
            double val = objective_scale * map.class_objective[static_cast<std::size_t>(v)];
            for (int e : map.class_entries[static_cast<std::size_t>(v)]) val += s_of(e);
            for (std::size_t k = 0; k < nk; ++k) {
                if (lam[k] == 0.0 || map.is_link[k]) continue;
                auto it = map.class_rows[k].find(v);
                if (it != map.class_rows[k].end()) val -= lam[k] * it->second;
            }
            r(q) = val;
        }
        const Eigen::VectorXd mu = map.exact_at_pivots.transpose().partialPivLu().solve(r);
        for (Eigen::Index q = 0; q < np; ++q) lam[map.exact_constraint[static_cast<std::size_t>(q)]] = mu(q);
    }
    // Links x_a = x_b: peel each spanning tree from its leaves.
    std::vector<double> rho(map.entries.size(), 0.0);
    for (std::size_t e = 0; e < map.entries.size(); ++e) rho[e] = s_of(static_cast<int>(e)) + objective_scale * map.entry_objective[e];
    std::vector<std::vector<int>> id(p.block_sizes.size());
    {
        std::size_t e = 0;
        for (std::size_t b = 0; b < p.block_sizes.size(); ++b) {
            const int n = p.block_sizes[b];
            id[b].assign(static_cast<std::size_t>(n * n), -1);
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) id[b][static_cast<std::size_t>(i * n + j)] = static_cast<int>(e++);
        }
    }
    for (std::size_t k = 0; k < nk; ++k) {
        if (map.is_link[k] || lam[k] == 0.0) continue;
        for (const auto& t : p.constraints[k].terms) {
            const int e = id[static_cast<std::size_t>(t.block)][static_cast<std::size_t>(t.row * p.block_sizes[static_cast<std::size_t>(t.block)] + t.col)];
            rho[static_cast<std::size_t>(e)] -= lam[k] * t.coef;
        }
    }
    std::vector<std::vector<std::size_t>> incident(map.entries.size());
    for (std::size_t q = 0; q < map.tree_links.size(); ++q) {
        incident[static_cast<std::size_t>(map.tree_links[q].e1)].push_back(q);
        incident[static_cast<std::size_t>(map.tree_links[q].e2)].push_back(q);
    }
    std::vector<int> degree(map.entries.size());
    std::vector<bool> used(map.tree_links.size(), false);
    std::vector<int> leaves;
    for (std::size_t e = 0; e < map.entries.size(); ++e) {
        degree[e] = static_cast<int>(incident[e].size());
        if (degree[e] == 1) leaves.push_back(static_cast<int>(e));
    }
    while (!leaves.empty()) {
        const int e = leaves.back();
        leaves.pop_back();
        if (degree[static_cast<std::size_t>(e)] != 1) continue;
        std::size_t q = 0;
        for (std::size_t cand : incident[static_cast<std::size_t>(e)])
            if (!used[cand]) q = cand;
        used[q] = true;
        const Link& l = map.tree_links[q];
        const bool first = l.e1 == e;
        const double a_here = first ? l.a1 : l.a2;
        const double a_there = first ? l.a2 : l.a1;
        const int other = first ? l.e2 : l.e1;
        const double v = rho[static_cast<std::size_t>(e)] / a_here;
        lam[l.constraint] = v;
        rho[static_cast<std::size_t>(other)] -= v * a_there;
        --degree[static_cast<std::size_t>(e)];
        if (--degree[static_cast<std::size_t>(other)] == 1) leaves.push_back(other);
    }
    for (double& v : lam) v *= map.sense;
    return lam;
}

}  // namespace detail

/// Solves the problem with the reference interior-point method.
inline SdpSolution solve(const SdpProblem& p, const SolverSettings& settings = {}) {
    p.validate();
    const auto start = std::chrono::steady_clock::now();
    SdpSolution sol;
    auto presolve_failure = [&](const std::string& why) {
        sol.status = SolveStatus::Infeasible;
        sol.message = "presolve: " + why;
        sol.multipliers.assign(p.constraints.size(), 0.0);
        for (int n : p.block_sizes) sol.block_values.push_back(Eigen::MatrixXd::Zero(n, n));
        return sol;
    };

    std::string inconsistent;
    detail::PrimalMap pmap;
    detail::DualMap dmap;
    detail::ConicForm pform;
    detail::ConicForm dform;
    bool use_dual = settings.formulation == Formulation::Dual;
    if (settings.formulation != Formulation::Dual) {
        pform = detail::primal_form(p, pmap, inconsistent);
        if (!inconsistent.empty()) return presolve_failure(inconsistent);
    }
    if (settings.formulation != Formulation::Primal) {
        dform = detail::dual_form(p, dmap, inconsistent);
        if (!inconsistent.empty()) return presolve_failure(inconsistent);
        if (settings.formulation == Formulation::Auto) use_dual = dform.rows.size() < pform.rows.size();
    }
    sol.formulation = use_dual ? Formulation::Dual : Formulation::Primal;
    const detail::IpmResult r = detail::run_ipm(use_dual ? dform : pform, settings);
    sol.trace = r.trace;
    sol.iterations = r.iterations;
    sol.message = r.message;
    sol.primal_residual = use_dual ? r.dinf : r.pinf;
    sol.dual_residual = use_dual ? r.pinf : r.dinf;
    sol.duality_gap = r.gap;
    sol.status = detail::classify(r, settings.tol);
    const double sense = p.maximize ? 1.0 : -1.0;

    if (use_dual) {
        // Blocks from the free entries; pivots follow from the exact rows.
        std::vector<double> t(dmap.class_entries.size(), 0.0);
        for (std::size_t u = 0; u < dmap.free_class.size(); ++u) t[static_cast<std::size_t>(dmap.free_class[u])] = r.y(static_cast<Eigen::Index>(u));
        for (std::size_t q = 0; q < dmap.pivot_class.size(); ++q) {
            double v = dmap.pivot_rhs[q];
            for (const auto& [u, c] : dmap.pivot_row[q]) v -= c * r.y(u);
            t[static_cast<std::size_t>(dmap.pivot_class[q])] = v;
        }
        for (int n : p.block_sizes) sol.block_values.push_back(Eigen::MatrixXd::Zero(n, n));
        for (std::size_t e = 0; e < dmap.entries.size(); ++e) {
            const auto& en = dmap.entries[e];
            const double v = t[static_cast<std::size_t>(dmap.entry_class[e])];
            sol.block_values[static_cast<std::size_t>(en.block)](en.i, en.j) = v;
            sol.block_values[static_cast<std::size_t>(en.block)](en.j, en.i) = v;
        }
        sol.multipliers = detail::dual_multipliers(p, dmap, r.X, r.x, false);
        if (r.outcome == detail::IpmOutcome::DualInfeasible) {
            // Ray of the multiplier side with negative cost: the problem is infeasible.
            const double cost = -r.pobj;
            std::vector<Eigen::MatrixXd> S = r.X;
            for (auto& s : S) s /= cost;
            sol.certificate = detail::dual_multipliers(p, dmap, S, r.x / cost, true);
            for (double& v : sol.certificate) v *= -sense;
            sol.status = SolveStatus::Infeasible;
            sol.message = "infeasible";
        } else if (r.outcome == detail::IpmOutcome::PrimalInfeasible) {
            sol.status = SolveStatus::Failed;
            sol.message = "unbounded";
        }
    } else {
        sol.block_values = r.X;
        sol.multipliers.assign(p.constraints.size(), 0.0);
        for (std::size_t row = 0; row < pmap.origin.size(); ++row)
            sol.multipliers[pmap.origin[row]] += -sense * r.y(static_cast<Eigen::Index>(row));
        if (r.outcome == detail::IpmOutcome::PrimalInfeasible) {
            const double by = r.dobj;
            sol.certificate.assign(p.constraints.size(), 0.0);
            for (std::size_t row = 0; row < pmap.origin.size(); ++row)
                sol.certificate[pmap.origin[row]] += r.y(static_cast<Eigen::Index>(row)) / by;
            sol.status = SolveStatus::Infeasible;
            sol.message = "infeasible";
        } else if (r.outcome == detail::IpmOutcome::DualInfeasible) {
            sol.status = SolveStatus::Failed;
            sol.message = "unbounded";
        }
    }
    if (!sol.certificate.empty()) {
        // Farkas form: sum lambda_k A_k <= 0 while the bound on the right is 1.
        std::vector<Eigen::MatrixXd> A;
        for (int n : p.block_sizes) A.push_back(Eigen::MatrixXd::Zero(n, n));
        for (std::size_t k = 0; k < p.constraints.size(); ++k)
            for (const auto& t : p.constraints[k].terms) {
                auto& m = A[static_cast<std::size_t>(t.block)];
                const double v = sol.certificate[k] * t.coef;
                if (t.row == t.col) {
                    m(t.row, t.row) += v;
                } else {
                    m(t.row, t.col) += v / 2;
                    m(t.col, t.row) += v / 2;
                }
            }
        double worst = 0.0;
        for (const auto& m : A) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
            worst = std::max(worst, es.eigenvalues().maxCoeff());
        }
        sol.certificate_residual = worst;
    }
    // Objective and dual bound are recomputed from the returned point.
    sol.objective_value = evaluate(p.objective, sol.block_values);
    double bound = 0.0;
    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        const auto& c = p.constraints[k];
        const double lam = sol.multipliers[k];
        bound += lam * c.target + sense * std::abs(lam) * c.tolerance;
    }
    sol.dual_objective = bound;
    sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

/// Independent recomputation of feasibility and optimality of a solution.
struct VerifyReport {
    double max_constraint_violation = 0.0;
    std::size_t worst_constraint = 0;
    double min_block_eigenvalue = 0.0;
    double objective = 0.0;
    double objective_mismatch = 0.0;  // |recomputed - reported|
    double dual_min_eigenvalue = 0.0;  // of sum(lambda A) - C (maximize) / C - sum(lambda A) (minimize)
    double dual_sign_violation = 0.0;
    double dual_bound = 0.0;
    double gap = 0.0;  // dual_bound - objective (maximize), objective - dual_bound (minimize)
    bool infeasible_certificate = false;
    double certificate_residual = 0.0;
    bool passed = false;
    std::vector<std::string> failures;
};

inline double constraint_violation(const Constraint& c, double value) {
    switch (c.relation) {
        case Relation::Eq: return std::max(0.0, std::abs(value - c.target) - c.tolerance);
        case Relation::Le: return std::max(0.0, value - c.target - c.tolerance);
        case Relation::Ge: return std::max(0.0, c.target - c.tolerance - value);
    }
    return 0.0;
}

inline VerifyReport verify(const SdpProblem& p, const SdpSolution& s, double tol = 1e-7) {
    VerifyReport rep;
    if (s.block_values.size() != p.block_sizes.size()) {
        rep.failures.push_back("block count mismatch");
        return rep;
    }
    for (std::size_t b = 0; b < p.block_sizes.size(); ++b) {
        if (s.block_values[b].rows() != p.block_sizes[b] || s.block_values[b].cols() != p.block_sizes[b]) {
            rep.failures.push_back("block " + std::to_string(b) + " has wrong shape");
            return rep;
        }
    }
    if (s.status == SolveStatus::Infeasible) {
        rep.infeasible_certificate = !s.certificate.empty();
        rep.certificate_residual = s.certificate_residual;
        rep.failures.push_back("solver reported infeasible: " + s.message);
        return rep;
    }
    for (std::size_t k = 0; k < p.constraints.size(); ++k) {
        const double v = constraint_violation(p.constraints[k], evaluate(p.constraints[k].terms, s.block_values));
        if (v > rep.max_constraint_violation) {
            rep.max_constraint_violation = v;
            rep.worst_constraint = k;
        }
    }
    rep.min_block_eigenvalue = std::numeric_limits<double>::infinity();
    for (const auto& x : s.block_values) {
        const Eigen::MatrixXd sym = (x + x.transpose()) / 2;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
        rep.min_block_eigenvalue = std::min(rep.min_block_eigenvalue, es.eigenvalues().minCoeff());
    }
    rep.objective = evaluate(p.objective, s.block_values);
    rep.objective_mismatch = std::abs(rep.objective - s.objective_value);

    // Dual side
    const double sense = p.maximize ? 1.0 : -1.0;
    std::vector<Eigen::MatrixXd> Z;
    for (int n : p.block_sizes) Z.push_back(Eigen::MatrixXd::Zero(n, n));
    auto add = [&](const Term& t, double v) {
        auto& m = Z[static_cast<std::size_t>(t.block)];
        if (t.row == t.col) {
            m(t.row, t.row) += v;
        } else {
            m(t.row, t.col) += v / 2;
            m(t.col, t.row) += v / 2;
        }
    };
    for (const auto& t : p.objective) add(t, -sense * t.coef);
    double lam_max = 0.0;
    for (std::size_t k = 0; k < p.constraints.size() && k < s.multipliers.size(); ++k) {
        const auto& c = p.constraints[k];
        const double lam = s.multipliers[k];
        lam_max = std::max(lam_max, std::abs(lam));
        for (const auto& t : c.terms) add(t, sense * lam * t.coef);
        rep.dual_bound += lam * c.target + sense * std::abs(lam) * c.tolerance;
        // maximize: Le -> lam >= 0, Ge -> lam <= 0; minimize reversed
        if (c.relation == Relation::Le) rep.dual_sign_violation = std::max(rep.dual_sign_violation, std::max(0.0, -sense * lam));
        if (c.relation == Relation::Ge) rep.dual_sign_violation = std::max(rep.dual_sign_violation, std::max(0.0, sense * lam));
    }
    rep.dual_min_eigenvalue = std::numeric_limits<double>::infinity();
    for (const auto& z : Z) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(z, Eigen::EigenvaluesOnly);
        rep.dual_min_eigenvalue = std::min(rep.dual_min_eigenvalue, es.eigenvalues().minCoeff());
    }
    rep.gap = sense * (rep.dual_bound - rep.objective);

    const double scale = 1.0 + std::abs(rep.objective);
    if (rep.max_constraint_violation > tol) rep.failures.push_back("constraint violation");
    if (rep.min_block_eigenvalue < -tol) rep.failures.push_back("block not positive semidefinite");
    if (rep.objective_mismatch > tol * scale) rep.failures.push_back("objective mismatch");
    if (rep.dual_min_eigenvalue < -tol * (1.0 + lam_max)) rep.failures.push_back("dual slack not positive semidefinite");
    if (rep.dual_sign_violation > tol * (1.0 + lam_max)) rep.failures.push_back("dual sign condition violated");
    if (std::abs(rep.gap) > std::max(tol, 10.0 * tol * (1.0 + lam_max * 1e-3)) * scale) rep.failures.push_back("duality gap");
    rep.passed = rep.failures.empty();
    return rep;
}

// JSON problem format:
// {"format": "seqrand-sdp/1", "sense": "maximize", "blocks": [n0, n1, ...],
//  "objective": [[block, row, col, coef], ...],
//  "constraints": [{"relation": "=", "target": t, "tolerance": e, "label": "...", "terms": [[b, r, c, v], ...]}]}
inline nlohmann::json to_json(const SdpProblem& p) {
    auto terms = [](const std::vector<Term>& ts) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& t : ts) a.push_back({t.block, t.row, t.col, t.coef});
        return a;
    };
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : p.constraints) {
        const char* rel = c.relation == Relation::Eq ? "=" : c.relation == Relation::Le ? "<=" : ">=";
        cs.push_back({{"relation", rel}, {"target", c.target}, {"tolerance", c.tolerance}, {"label", c.label},
                      {"terms", terms(c.terms)}});
    }
    return {{"format", "seqrand-sdp/1"},
            {"sense", p.maximize ? "maximize" : "minimize"},
            {"blocks", p.block_sizes},
            {"objective", terms(p.objective)},
            {"constraints", cs}};
}

inline SdpProblem problem_from_json(const nlohmann::json& j) {
    SdpProblem p;
    try {
        if (j.at("format").get<std::string>() != "seqrand-sdp/1") throw ParseError("sdp json: unknown format");
        const auto sense = j.at("sense").get<std::string>();
        if (sense != "maximize" && sense != "minimize") throw ParseError("sdp json: bad sense");
        p.maximize = sense == "maximize";
        p.block_sizes = j.at("blocks").get<std::vector<int>>();
        auto terms = [](const nlohmann::json& a) {
            std::vector<Term> ts;
            for (const auto& e : a) {
                if (!e.is_array() || e.size() != 4) throw ParseError("sdp json: term must be [block,row,col,coef]");
                ts.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>(), e[3].get<double>()});
            }
            return normalize_terms(std::move(ts));
        };
        p.objective = terms(j.at("objective"));
        for (const auto& c : j.at("constraints")) {
            const auto rel = c.at("relation").get<std::string>();
            Relation r;
            if (rel == "=") {
                r = Relation::Eq;
            } else if (rel == "<=") {
                r = Relation::Le;
            } else if (rel == ">=") {
                r = Relation::Ge;
            } else {
                throw ParseError("sdp json: unknown relation " + rel);
            }
            p.constraints.push_back({terms(c.at("terms")), r, c.at("target").get<double>(),
                                     c.value("tolerance", 0.0), c.value("label", std::string{})});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("sdp json: ") + e.what());
    }
    try {
        p.validate();
    } catch (const InvalidProblem& e) {
        throw ParseError(std::string("sdp json: ") + e.what());
    }
    return p;
}

}  // namespace seqrand::sdp
