#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <limits>
#include <optional>
#include <string>

namespace sls {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Convex QP in the form
//
//   min  1/2 z' H z + g' z
//   s.t. Aeq z = beq,   lo <= Ain z <= hi
//
// with H symmetric PSD. Rows of Ain may be one-sided (lo = -inf or hi = +inf).
struct QpProblem {
    Eigen::SparseMatrix<double> H;
    Eigen::VectorXd g;
    Eigen::SparseMatrix<double> Aeq;
    Eigen::VectorXd beq;
    Eigen::SparseMatrix<double> Ain;
    Eigen::VectorXd lo, hi;

    int dim() const { return static_cast<int>(g.size()); }
    int num_eq() const { return static_cast<int>(beq.size()); }
    int num_in() const { return static_cast<int>(lo.size()); }

    // Dimension consistency and H symmetry; throws std::invalid_argument.
    void validate() const;
};

struct QpOptions {
    double eps_prim = 1e-8;
    double eps_dual = 1e-8;
    int max_iter = 200000;
    double rho = 0.1;          // ADMM penalty (inequality rows; equalities use 1e3 x)
    double sigma = 1e-6;       // proximal regularization
    double alpha_relax = 1.6;  // over-relaxation
    bool adaptive_rho = true;
    int rho_interval = 25;     // adaptation cadence, refactors only when rho changes
    bool equilibrate = false;  // Ruiz scaling; off, the target problems are well scaled
    bool polish = true;
    double eps_infeas = 1e-9;  // certificate tolerance
    std::optional<Eigen::VectorXd> initial_z;
    std::string iterate_csv;   // nonempty: dump k, residuals, rho per check
};

enum class QpStatus { optimal, max_iter, infeasible_detected, unbounded_detected };

struct KktResiduals {
    double prim = 0.0;  // worst constraint violation
    double dual = 0.0;  // |Hz + g + A' y|_inf over stacked [eq; in] duals
    // |y_i| times the distance to the bound the multiplier sign points at
    // (a positive multiplier with no upper bound counts as |y_i|); reported,
    // not part of the optimality contract
    double comp = 0.0;
    double max_all() const { return std::max({prim, dual, comp}); }
};

struct QpSolution {
    Eigen::VectorXd z;
    Eigen::VectorXd y;  // stacked duals: [equalities; inequalities]
    QpStatus status = QpStatus::max_iter;
    KktResiduals residuals;
    double objective = 0.0;
    int iterations = 0;
    bool polished = false;
};

// Operator-splitting (ADMM) solve with a cached sparse LDL' KKT factorization
// and an exact active-set polish step. Deterministic for identical inputs.
QpSolution qp_solve(const QpProblem& prob, const QpOptions& opts = {});

// Residuals of an arbitrary primal/dual pair, independent of the solver loop.
KktResiduals kkt_residuals(const QpProblem& prob, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& y);

// Reference solver for tiny problems: enumerates active sets over the
// inequality rows and checks the KKT conditions of each candidate.
// Throws std::invalid_argument when the problem exceeds the enumeration
// limits, std::runtime_error when no feasible KKT point exists.
struct OracleLimits {
    int max_dim = 6;
    long max_candidates = 2000000;
};
Eigen::VectorXd qp_brute_force_oracle(const QpProblem& prob, const OracleLimits& lim = {});

}  // namespace sls
