#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sls/qp.hpp"

namespace sls {

namespace {

enum RowState : int { inactive = 0, at_lo = 1, at_hi = 2, pinned = 3 };

}  // namespace

// Enumerates every assignment of the inequality rows to {inactive, at lower
// bound, at upper bound} and checks the KKT system of each candidate. Slow by
// construction; exists to referee the iterative solver on tiny instances.
Eigen::VectorXd qp_brute_force_oracle(const QpProblem& prob, const OracleLimits& lim) {
    prob.validate();
    const int d = prob.dim();
    if (d > lim.max_dim)
        throw std::invalid_argument("qp_brute_force_oracle: dimension above enumeration limit");

    const int mi = prob.num_in();
    std::vector<std::vector<RowState>> states(mi);
    long combos = 1;
    for (int i = 0; i < mi; ++i) {
        if (prob.lo[i] == prob.hi[i]) {
            states[i] = {pinned};
        } else {
            states[i] = {inactive};
            if (prob.lo[i] > -kInf) states[i].push_back(at_lo);
            if (prob.hi[i] < kInf) states[i].push_back(at_hi);
        }
        combos *= static_cast<long>(states[i].size());
        if (combos > lim.max_candidates)
            throw std::invalid_argument("qp_brute_force_oracle: too many active-set candidates");
    }

    const Eigen::MatrixXd H = Eigen::MatrixXd(prob.H);
    const Eigen::MatrixXd Aeq = Eigen::MatrixXd(prob.Aeq);
    const Eigen::MatrixXd Ain = Eigen::MatrixXd(prob.Ain);
    const int me = prob.num_eq();

    const double feas_tol = 1e-9;
    const double sign_tol = 1e-9;

    bool found = false;
    double best_obj = kInf;
    Eigen::VectorXd best_z;

    std::vector<int> choice(mi, 0);
    for (long idx = 0; idx < combos; ++idx) {
        long rem = idx;
        for (int i = 0; i < mi; ++i) {
            choice[i] = static_cast<int>(rem % states[i].size());
            rem /= states[i].size();
        }

        std::vector<int> act_rows;
        std::vector<double> act_rhs;
        std::vector<RowState> act_state;
        for (int i = 0; i < mi; ++i) {
            const RowState s = states[i][choice[i]];
            if (s == inactive) continue;
            act_rows.push_back(i);
            act_rhs.push_back(s == at_lo ? prob.lo[i] : prob.hi[i]);
            act_state.push_back(s);
        }
        const int na = static_cast<int>(act_rows.size());
        const int kdim = d + me + na;

        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(kdim, kdim);
        Eigen::VectorXd rhs(kdim);
        K.topLeftCorner(d, d) = H;
        rhs.head(d) = -prob.g;
        if (me > 0) {
            K.block(d, 0, me, d) = Aeq;
            K.block(0, d, d, me) = Aeq.transpose();
            rhs.segment(d, me) = prob.beq;
        }
        for (int a = 0; a < na; ++a) {
            K.row(d + me + a).head(d) = Ain.row(act_rows[a]);
            K.col(d + me + a).head(d) = Ain.row(act_rows[a]).transpose();
            rhs[d + me + a] = act_rhs[a];
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        Eigen::VectorXd v = lu.solve(rhs);
        const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        if ((K * v - rhs).lpNorm<Eigen::Infinity>() > 1e-8 * scale) continue;  // inconsistent system

        const Eigen::VectorXd z = v.head(d);

        // Primal feasibility over every row.
        bool ok = true;
        if (me > 0 && (Aeq * z - prob.beq).lpNorm<Eigen::Infinity>() > feas_tol) ok = false;
        Eigen::VectorXd Az;
        if (ok && mi > 0) {
            Az = Ain * z;
            for (int i = 0; ok && i < mi; ++i) {
                if (prob.lo[i] > -kInf && Az[i] < prob.lo[i] - feas_tol) ok = false;
                if (prob.hi[i] < kInf && Az[i] > prob.hi[i] + feas_tol) ok = false;
            }
        }
        // Multiplier sign conditions: stacked dual y = mu_hi - mu_lo.
        for (int a = 0; ok && a < na; ++a) {
            const double ya = v[d + me + a];
            if (act_state[a] == at_lo && ya > sign_tol) ok = false;
            if (act_state[a] == at_hi && ya < -sign_tol) ok = false;
        }
        if (!ok) continue;

        const double obj = 0.5 * z.dot(H * z) + prob.g.dot(z);
        if (!found || obj < best_obj - 1e-12) {
            found = true;
            best_obj = obj;
            best_z = z;
        }
    }

    if (!found)
        throw std::runtime_error("qp_brute_force_oracle: no KKT point found (infeasible problem?)");
    return best_z;
}

}  // namespace sls
