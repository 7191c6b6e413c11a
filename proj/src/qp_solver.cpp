#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sls/qp.hpp"

namespace sls {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using SpMatRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

double inf_norm(const Eigen::VectorXd& v) {
    return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
}

// Stacked constraint view: A = [Aeq; Ain], l = [beq; lo], u = [beq; hi].
struct Stacked {
    SpMat A;
    Eigen::VectorXd l, u;
    int n_eq = 0;

    explicit Stacked(const QpProblem& p) {
        n_eq = p.num_eq();
        const int m = n_eq + p.num_in();
        const int d = p.dim();
        A.resize(m, d);
        std::vector<Triplet> trip;
        trip.reserve(p.Aeq.nonZeros() + p.Ain.nonZeros());
        for (int k = 0; k < p.Aeq.outerSize(); ++k)
            for (SpMat::InnerIterator it(p.Aeq, k); it; ++it)
                trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        for (int k = 0; k < p.Ain.outerSize(); ++k)
            for (SpMat::InnerIterator it(p.Ain, k); it; ++it)
                trip.emplace_back(n_eq + static_cast<int>(it.row()), static_cast<int>(it.col()),
                                  it.value());
        A.setFromTriplets(trip.begin(), trip.end());
        l.resize(m);
        u.resize(m);
        l.head(n_eq) = p.beq;
        u.head(n_eq) = p.beq;
        l.tail(p.num_in()) = p.lo;
        u.tail(p.num_in()) = p.hi;
    }
};

SpMat build_kkt(const SpMat& H, const SpMat& A, double sigma, const Eigen::VectorXd& rho) {
    const int d = static_cast<int>(H.rows());
    const int m = static_cast<int>(A.rows());
    std::vector<Triplet> trip;
    trip.reserve(H.nonZeros() + 2 * A.nonZeros() + d + m);
    for (int k = 0; k < H.outerSize(); ++k)
        for (SpMat::InnerIterator it(H, k); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < d; ++i) trip.emplace_back(i, i, sigma);
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMat::InnerIterator it(A, k); it; ++it) {
            trip.emplace_back(d + static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
            trip.emplace_back(static_cast<int>(it.col()), d + static_cast<int>(it.row()), it.value());
        }
    for (int i = 0; i < m; ++i) trip.emplace_back(d + i, d + i, -1.0 / rho[i]);
    SpMat K(d + m, d + m);
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

Eigen::VectorXd clamp_to(const Eigen::VectorXd& v, const Eigen::VectorXd& l,
                         const Eigen::VectorXd& u) {
    return v.cwiseMax(l).cwiseMin(u);
}

// Modified Ruiz equilibration of the KKT data plus cost normalization.
// Produces diagonal scalings D (variables), E (constraints) and a cost factor
// c so that the scaled problem (c D H D, c D g, E A D, E l, E u) has rows and
// columns of roughly unit infinity norm.
struct Scaling {
    Eigen::VectorXd D, E;
    double c = 1.0;
};

Scaling ruiz_equilibrate(SpMat& H, Eigen::VectorXd& g, SpMat& A, Eigen::VectorXd& l,
                         Eigen::VectorXd& u, int iters = 10) {
    const int d = static_cast<int>(H.rows());
    const int m = static_cast<int>(A.rows());
    Scaling s;
    s.D = Eigen::VectorXd::Ones(d);
    s.E = Eigen::VectorXd::Ones(m);

    Eigen::VectorXd delta_d(d), delta_e(m);
    for (int pass = 0; pass < iters; ++pass) {
        // column norms of [H; A] and row norms of A (columns of A')
        Eigen::VectorXd col_norm = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < H.outerSize(); ++k)
            for (SpMat::InnerIterator it(H, k); it; ++it)
                col_norm[it.col()] = std::max(col_norm[it.col()], std::abs(it.value()));
        Eigen::VectorXd row_norm = Eigen::VectorXd::Zero(m);
        for (int k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it) {
                col_norm[it.col()] = std::max(col_norm[it.col()], std::abs(it.value()));
                row_norm[it.row()] = std::max(row_norm[it.row()], std::abs(it.value()));
            }
        for (int j = 0; j < d; ++j)
            delta_d[j] = col_norm[j] > 1e-12 ? 1.0 / std::sqrt(col_norm[j]) : 1.0;
        for (int i = 0; i < m; ++i)
            delta_e[i] = row_norm[i] > 1e-12 ? 1.0 / std::sqrt(row_norm[i]) : 1.0;

        // apply: H <- Dd H Dd, A <- De A Dd, g <- Dd g, bounds <- De *
        for (int k = 0; k < H.outerSize(); ++k)
            for (SpMat::InnerIterator it(H, k); it; ++it)
                it.valueRef() *= delta_d[it.row()] * delta_d[it.col()];
        for (int k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it)
                it.valueRef() *= delta_e[it.row()] * delta_d[it.col()];
        g = g.cwiseProduct(delta_d);
        for (int i = 0; i < m; ++i) {
            if (l[i] > -kInf) l[i] *= delta_e[i];
            if (u[i] < kInf) u[i] *= delta_e[i];
        }
        s.D = s.D.cwiseProduct(delta_d);
        s.E = s.E.cwiseProduct(delta_e);

        // cost normalization toward unit scale
        Eigen::VectorXd h_col = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < H.outerSize(); ++k)
            for (SpMat::InnerIterator it(H, k); it; ++it)
                h_col[it.col()] = std::max(h_col[it.col()], std::abs(it.value()));
        const double mean_h = h_col.size() > 0 ? h_col.mean() : 0.0;
        const double g_norm = g.size() > 0 ? g.lpNorm<Eigen::Infinity>() : 0.0;
        const double denom = std::max({mean_h, g_norm, 1e-12});
        const double gamma = 1.0 / std::max(denom, 1e-6);
        if (std::abs(gamma - 1.0) > 1e-3) {
            H *= gamma;
            g *= gamma;
            s.c *= gamma;
        }
    }
    return s;
}

// Exact solve of the equality-constrained QP on a candidate active set.
// Quasi-definite regularization (+-delta) is undone by iterative refinement
// against the unregularized KKT system.
bool polish_solve(const QpProblem& prob, const Stacked& st, const SpMatRow& A_rows,
                  const std::vector<int>& active, const std::vector<double>& active_rhs,
                  Eigen::VectorXd* z_out, Eigen::VectorXd* y_out) {
    const int d = prob.dim();
    const int m = static_cast<int>(st.A.rows());
    const int na = static_cast<int>(active.size());

    // Active-row submatrix, kept sparse.
    SpMatRow A_act(na, d);
    {
        std::vector<Triplet> trip;
        for (int a = 0; a < na; ++a)
            for (SpMatRow::InnerIterator it(A_rows, active[a]); it; ++it)
                trip.emplace_back(a, static_cast<int>(it.col()), it.value());
        A_act.setFromTriplets(trip.begin(), trip.end());
    }

    const double delta = 1e-9;
    std::vector<Triplet> trip;
    trip.reserve(prob.H.nonZeros() + 2 * A_act.nonZeros() + d + na);
    for (int k = 0; k < prob.H.outerSize(); ++k)
        for (SpMat::InnerIterator it(prob.H, k); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int i = 0; i < d; ++i) trip.emplace_back(i, i, delta);
    for (int a = 0; a < na; ++a) {
        for (SpMatRow::InnerIterator it(A_act, a); it; ++it) {
            trip.emplace_back(d + a, static_cast<int>(it.col()), it.value());
            trip.emplace_back(static_cast<int>(it.col()), d + a, it.value());
        }
        trip.emplace_back(d + a, d + a, -delta);
    }
    SpMat K(d + na, d + na);
    K.setFromTriplets(trip.begin(), trip.end());

    Eigen::SimplicialLDLT<SpMat> ldlt;
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) return false;

    Eigen::VectorXd rhs(d + na);
    rhs.head(d) = -prob.g;
    for (int a = 0; a < na; ++a) rhs[d + a] = active_rhs[a];

    auto apply_unreg = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out(d + na);
        out.head(d) = prob.H * v.head(d);
        if (na > 0) {
            out.head(d).noalias() += A_act.transpose() * v.tail(na);
            out.tail(na).noalias() = A_act * v.head(d);
        }
        return out;
    };
    Eigen::VectorXd sol_v = ldlt.solve(rhs);
    for (int round = 0; round < 4; ++round) {
        Eigen::VectorXd resid = rhs - apply_unreg(sol_v);
        sol_v += ldlt.solve(resid);
    }

    *z_out = sol_v.head(d);
    *y_out = Eigen::VectorXd::Zero(m);
    for (int a = 0; a < na; ++a) (*y_out)[active[a]] = sol_v[d + a];
    return true;
}

// A few primal-dual active-set iterations seeded by the splitting iterate:
// drop active rows whose multiplier has the wrong sign, add inactive rows the
// candidate violates (this also pins zero-cost slack directions that the
// regularized KKT would otherwise collapse onto their bounds' wrong side).
bool try_polish(const QpProblem& prob, const Stacked& st, const SpMatRow& A_rows,
                const QpOptions& opts, const Eigen::VectorXd& z_iter,
                const Eigen::VectorXd& y_iter, int iters_so_far, QpSolution* sol) {
    const int m = static_cast<int>(st.A.rows());
    // State per row: 0 inactive, 1 at lower, 2 at upper; equalities fixed at 1.
    // Seeded from primal nearness (weakly active rows carry no dual signal)
    // with the dual sign as tie-breaker for two-sided rows.
    const Eigen::VectorXd Az_seed = st.A * z_iter;
    std::vector<int> state(m, 0);
    for (int i = 0; i < m; ++i) {
        if (i < st.n_eq) {
            state[i] = 1;
            continue;
        }
        const double near_lo =
            st.l[i] > -kInf ? std::abs(Az_seed[i] - st.l[i]) / (1.0 + std::abs(st.l[i])) : kInf;
        const double near_hi =
            st.u[i] < kInf ? std::abs(Az_seed[i] - st.u[i]) / (1.0 + std::abs(st.u[i])) : kInf;
        const double seed_tol = 1e-6;
        if (std::min(near_lo, near_hi) <= seed_tol)
            state[i] = near_lo <= near_hi ? 1 : 2;
        else if (y_iter[i] < -1e-9 && st.l[i] > -kInf)
            state[i] = 1;
        else if (y_iter[i] > 1e-9 && st.u[i] < kInf)
            state[i] = 2;
    }

    for (int attempt = 0; attempt < 12; ++attempt) {
        std::vector<int> active;
        std::vector<double> active_rhs;
        std::vector<bool> at_lower;
        for (int i = 0; i < m; ++i) {
            if (state[i] == 0) continue;
            active.push_back(i);
            active_rhs.push_back(state[i] == 1 ? st.l[i] : st.u[i]);
            at_lower.push_back(state[i] == 1);
        }

        Eigen::VectorXd z, y;
        if (!polish_solve(prob, st, A_rows, active, active_rhs, &z, &y)) return false;

        // Any candidate that verifies as a KKT point is accepted, whether or
        // not the working set has settled.
        KktResiduals res = kkt_residuals(prob, z, y);
        if (res.prim <= opts.eps_prim && res.dual <= opts.eps_dual &&
            res.comp <= std::max(opts.eps_prim, opts.eps_dual)) {
            QpSolution cand;
            cand.z = std::move(z);
            cand.y = std::move(y);
            cand.residuals = res;
            cand.status = QpStatus::optimal;
            cand.objective = 0.5 * cand.z.dot(prob.H * cand.z) + prob.g.dot(cand.z);
            cand.polished = true;
            cand.iterations = iters_so_far;
            *sol = std::move(cand);
            return true;
        }

        bool changed = false;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const int row = active[a];
            if (row < st.n_eq) continue;
            // decisive wrong sign only; degenerate rows hover at +-tiny
            if (at_lower[a] && y[row] > 1e-7) {
                state[row] = 0;
                changed = true;
            } else if (!at_lower[a] && y[row] < -1e-7) {
                state[row] = 0;
                changed = true;
            }
        }
        const Eigen::VectorXd Az = st.A * z;
        for (int i = st.n_eq; i < m; ++i) {
            if (state[i] != 0) continue;
            if (st.l[i] > -kInf && Az[i] < st.l[i] - 0.5 * opts.eps_prim) {
                state[i] = 1;
                changed = true;
            } else if (st.u[i] < kInf && Az[i] > st.u[i] + 0.5 * opts.eps_prim) {
                state[i] = 2;
                changed = true;
            }
        }

        if (!changed) return false;  // settled on a set that does not verify
    }
    return false;
}

}  // namespace

void QpProblem::validate() const {
    const int d = dim();
    if (H.rows() != d || H.cols() != d) throw std::invalid_argument("QpProblem: H shape mismatch");
    if (Aeq.rows() != beq.size() || (Aeq.rows() > 0 && Aeq.cols() != d))
        throw std::invalid_argument("QpProblem: equality system shape mismatch");
    if (Ain.rows() != lo.size() || lo.size() != hi.size() || (Ain.rows() > 0 && Ain.cols() != d))
        throw std::invalid_argument("QpProblem: inequality system shape mismatch");
    for (int i = 0; i < num_in(); ++i)
        if (lo[i] > hi[i]) throw std::invalid_argument("QpProblem: lo > hi on an inequality row");
    SpMat diff = SpMat(H.transpose()) - H;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SpMat::InnerIterator it(diff, k); it; ++it)
            if (std::abs(it.value()) > 1e-10) throw std::invalid_argument("QpProblem: H not symmetric");
}

KktResiduals kkt_residuals(const QpProblem& prob, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& y) {
    Stacked st(prob);
    const int m = static_cast<int>(st.A.rows());
    KktResiduals r;
    Eigen::VectorXd Az = st.A * z;
    for (int i = 0; i < m; ++i) {
        double viol = 0.0;
        if (st.l[i] > -kInf) viol = std::max(viol, st.l[i] - Az[i]);
        if (st.u[i] < kInf) viol = std::max(viol, Az[i] - st.u[i]);
        r.prim = std::max(r.prim, viol);
        if (i >= st.n_eq && y[i] != 0.0) {
            // distance to the bound the multiplier sign points at; a positive
            // multiplier on a row without an upper bound is a sign violation
            if (y[i] > 0.0)
                r.comp = std::max(r.comp,
                                  y[i] * (st.u[i] < kInf ? std::abs(Az[i] - st.u[i]) : 1.0));
            else
                r.comp = std::max(r.comp, -y[i] * (st.l[i] > -kInf ? std::abs(Az[i] - st.l[i])
                                                                   : 1.0));
        }
    }
    Eigen::VectorXd dual = prob.H * z + prob.g + st.A.transpose() * y;
    r.dual = inf_norm(dual);
    return r;
}

QpSolution qp_solve(const QpProblem& prob, const QpOptions& opts) {
    prob.validate();
    const int d = prob.dim();
    Stacked st(prob);
    const int m = static_cast<int>(st.A.rows());

    QpSolution sol;
    sol.z = opts.initial_z.value_or(Eigen::VectorXd::Zero(d));
    if (sol.z.size() != d) throw std::invalid_argument("qp_solve: initial_z dimension mismatch");
    sol.y = Eigen::VectorXd::Zero(m);

    if (m == 0) {
        SpMat K = prob.H;
        for (int i = 0; i < d; ++i) K.coeffRef(i, i) += opts.sigma;
        Eigen::SimplicialLDLT<SpMat> ldlt(K);
        if (ldlt.info() != Eigen::Success) throw std::runtime_error("qp_solve: factorization failed");
        Eigen::VectorXd z = ldlt.solve(-prob.g);
        for (int round = 0; round < 5; ++round) z += ldlt.solve(-(prob.g + prob.H * z));
        sol.z = z;
        sol.residuals = kkt_residuals(prob, sol.z, sol.y);
        sol.status = sol.residuals.dual <= opts.eps_dual ? QpStatus::optimal : QpStatus::max_iter;
        sol.objective = 0.5 * sol.z.dot(prob.H * sol.z) + prob.g.dot(sol.z);
        return sol;
    }

    const SpMatRow A_rows(st.A);

    // Work on the equilibrated problem; residuals, polish and returned
    // quantities are always in the original units.
    SpMat Hs = prob.H;
    SpMat As = st.A;
    Eigen::VectorXd gs = prob.g, ls = st.l, us = st.u;
    const Scaling sc = ruiz_equilibrate(Hs, gs, As, ls, us, opts.equilibrate ? 10 : 0);
    const Eigen::VectorXd D_inv = sc.D.cwiseInverse();
    const Eigen::VectorXd E_inv = sc.E.cwiseInverse();

    auto rho_vector = [&](double base) {
        Eigen::VectorXd rho(m);
        for (int i = 0; i < m; ++i) rho[i] = (i < st.n_eq) ? base * 1e3 : base;
        return rho;
    };

    double rho_scalar = opts.rho;
    Eigen::VectorXd rho = rho_vector(rho_scalar);
    Eigen::SimplicialLDLT<SpMat> ldlt;
    SpMat kkt_mat = build_kkt(Hs, As, opts.sigma, rho);
    ldlt.compute(kkt_mat);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("qp_solve: KKT factorization failed");

    Eigen::VectorXd z = sol.z.cwiseProduct(D_inv);  // scaled primal
    Eigen::VectorXd zhat = clamp_to(As * z, ls, us);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m);   // scaled dual

    std::ofstream csv;
    if (!opts.iterate_csv.empty()) {
        csv.open(opts.iterate_csv);
        csv << "iter,prim_residual,dual_residual,rho\n";
    }

    auto unscale_z = [&](const Eigen::VectorXd& zs) { return zs.cwiseProduct(sc.D).eval(); };
    auto unscale_y = [&](const Eigen::VectorXd& ys) {
        return (ys.cwiseProduct(sc.E) / sc.c).eval();
    };
    auto finish = [&](QpStatus status, int iters, const Eigen::VectorXd& zs,
                      const Eigen::VectorXd& ys) {
        sol.z = unscale_z(zs);
        sol.y = unscale_y(ys);
        sol.iterations = iters;
        sol.status = status;
        sol.residuals = kkt_residuals(prob, sol.z, sol.y);
        sol.objective = 0.5 * sol.z.dot(prob.H * sol.z) + prob.g.dot(sol.z);
        return sol;
    };

    // Polish is attempted once the iterate is moderately accurate; the exact
    // active-set solve then supplies the strict tolerances.
    const double loose_prim = std::max(opts.eps_prim, 1e-6);
    const double loose_dual = std::max(opts.eps_dual, 1e-6);
    int next_polish_attempt = 0;

    const double alpha = opts.alpha_relax;
    Eigen::VectorXd rhs(d + m), kkt_sol(d + m);
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        rhs.head(d) = opts.sigma * z - gs;
        rhs.tail(m) = zhat - y.cwiseQuotient(rho);
        kkt_sol = ldlt.solve(rhs);
        kkt_sol += ldlt.solve(rhs - kkt_mat * kkt_sol);  // one refinement round
        const Eigen::VectorXd x_tilde = kkt_sol.head(d);
        const Eigen::VectorXd nu = kkt_sol.tail(m);
        const Eigen::VectorXd zhat_tilde = zhat + (nu - y).cwiseQuotient(rho);

        const Eigen::VectorXd z_next = alpha * x_tilde + (1.0 - alpha) * z;
        const Eigen::VectorXd mix = alpha * zhat_tilde + (1.0 - alpha) * zhat;
        const Eigen::VectorXd zhat_next = clamp_to(mix + y.cwiseQuotient(rho), ls, us);
        const Eigen::VectorXd y_next = y + rho.cwiseProduct(mix - zhat_next);

        const Eigen::VectorXd dy = y_next - y;
        const Eigen::VectorXd dz = z_next - z;
        z = z_next;
        zhat = zhat_next;
        y = y_next;

        // True residuals in original units via the diagonal scalings.
        const Eigen::VectorXd Az_s = As * z;
        const Eigen::VectorXd Aty_s = As.transpose() * y;
        const Eigen::VectorXd Hz_s = Hs * z;
        const double r_prim = inf_norm((Az_s - zhat).cwiseProduct(E_inv));
        const double r_dual = inf_norm((Hz_s + gs + Aty_s).cwiseProduct(D_inv)) / sc.c;

        if (csv.is_open() && (iter % 10 == 0 || iter == 1))
            csv << iter << ',' << r_prim << ',' << r_dual << ',' << rho_scalar << '\n';

        // Relative progress in scaled space also qualifies for a polish
        // attempt; the polish itself certifies the absolute tolerances.
        const double rp_rel = inf_norm(Az_s - zhat) /
                              std::max({inf_norm(Az_s), inf_norm(zhat), 1.0});
        const double rd_rel = inf_norm(Hz_s + gs + Aty_s) /
                              std::max({inf_norm(Hz_s), inf_norm(Aty_s), inf_norm(gs), 1.0});
        const bool polish_ready =
            (r_prim <= loose_prim && r_dual <= loose_dual) || (rp_rel <= 1e-6 && rd_rel <= 1e-6);
        if (opts.polish && polish_ready && iter >= next_polish_attempt) {
            QpSolution polished;
            polished.iterations = iter;
            if (try_polish(prob, st, A_rows, opts, unscale_z(z), unscale_y(y), iter, &polished)) {
                if (csv.is_open()) csv << iter << ",polished,polished," << rho_scalar << '\n';
                return polished;
            }
            next_polish_attempt = iter + 250;
        }

        if (r_prim <= opts.eps_prim && r_dual <= opts.eps_dual)
            return finish(QpStatus::optimal, iter, z, y);

        // Primal infeasibility certificate on the (unscaled) dual increment.
        const Eigen::VectorXd dy_u = dy.cwiseProduct(sc.E) / sc.c;
        const double dy_norm = inf_norm(dy_u);
        if (dy_norm > 1e-14) {
            const Eigen::VectorXd At_dy = (As.transpose() * dy).cwiseProduct(D_inv) / sc.c;
            double support = 0.0;
            bool valid = inf_norm(At_dy) <= opts.eps_infeas * dy_norm;
            for (int i = 0; valid && i < m; ++i) {
                const double plus = std::max(dy_u[i], 0.0);
                const double minus = std::min(dy_u[i], 0.0);
                if (st.u[i] < kInf)
                    support += st.u[i] * plus;
                else if (plus > opts.eps_infeas * dy_norm)
                    valid = false;
                if (st.l[i] > -kInf)
                    support += st.l[i] * minus;
                else if (-minus > opts.eps_infeas * dy_norm)
                    valid = false;
            }
            if (valid && support <= -opts.eps_infeas * dy_norm) {
                QpSolution out = finish(QpStatus::infeasible_detected, iter, z, y);
                out.y = dy_u / dy_norm;  // certificate direction
                return out;
            }
        }

        // Dual infeasibility (unbounded direction) certificate.
        const Eigen::VectorXd dz_u = dz.cwiseProduct(sc.D);
        const double dz_norm = inf_norm(dz_u);
        if (dz_norm > 1e-14) {
            const Eigen::VectorXd Hdz = (Hs * dz).cwiseProduct(D_inv) / sc.c;
            bool valid = inf_norm(Hdz) <= opts.eps_infeas * dz_norm &&
                         prob.g.dot(dz_u) <= -opts.eps_infeas * dz_norm;
            if (valid) {
                const Eigen::VectorXd Adz = (As * dz).cwiseProduct(E_inv);
                for (int i = 0; valid && i < m; ++i) {
                    if (st.u[i] < kInf && Adz[i] > opts.eps_infeas * dz_norm) valid = false;
                    if (st.l[i] > -kInf && Adz[i] < -opts.eps_infeas * dz_norm) valid = false;
                }
            }
            if (valid) return finish(QpStatus::unbounded_detected, iter, z, y);
        }

        if (opts.adaptive_rho && iter % opts.rho_interval == 0) {
            // The penalty acts on the equilibrated problem, so the rebalancing
            // ratio is computed from the scaled residuals.
            const double rp_s = inf_norm(Az_s - zhat) /
                                std::max({inf_norm(Az_s), inf_norm(zhat), 1e-10});
            const double rd_s = inf_norm(Hz_s + gs + Aty_s) /
                                std::max({inf_norm(Hz_s), inf_norm(Aty_s), inf_norm(gs), 1e-10});
            const double ratio = std::sqrt(rp_s / std::max(rd_s, 1e-16));
            if (ratio > 5.0 || ratio < 0.2) {
                rho_scalar = std::clamp(rho_scalar * ratio, 1e-6, 1e4);
                rho = rho_vector(rho_scalar);
                kkt_mat = build_kkt(Hs, As, opts.sigma, rho);
                ldlt.compute(kkt_mat);
                if (ldlt.info() != Eigen::Success)
                    throw std::runtime_error("qp_solve: KKT refactorization failed");
            }
        }
    }

    return finish(QpStatus::max_iter, opts.max_iter, z, y);
}

}  // namespace sls
