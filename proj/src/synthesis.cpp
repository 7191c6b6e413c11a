#include "sls/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace sls {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Decision vector layout: all R entries zone-major (zone, tap, column-major
// entries), then all M entries, then slack mirrors for |R| and |M| when the
// corresponding safety bound is finite, then per-zone row-sum scalars.
struct VarLayout {
    int n = 0, m = 0, T = 0, N = 0;
    bool slack_x = false, slack_u = false;
    int base_M = 0, base_TR = 0, base_TM = 0, base_Sx = 0, base_Su = 0, total = 0;

    VarLayout(int n_, int m_, int T_, int N_, bool sx, bool su)
        : n(n_), m(m_), T(T_), N(N_), slack_x(sx), slack_u(su) {
        const int r_count = N * T * n * n;
        const int m_count = N * T * m * n;
        base_M = r_count;
        base_TR = r_count + m_count;
        base_TM = base_TR + (slack_x ? r_count : 0);
        base_Sx = base_TM + (slack_u ? m_count : 0);
        base_Su = base_Sx + (slack_x ? N : 0);
        total = base_Su + (slack_u ? N : 0);
    }
    int idxR(int i, int k, int r, int c) const { return ((i * T + k) * n + c) * n + r; }
    int idxM(int i, int k, int r, int c) const { return base_M + ((i * T + k) * n + c) * m + r; }
    int idxTR(int i, int k, int r, int c) const { return base_TR + ((i * T + k) * n + c) * n + r; }
    int idxTM(int i, int k, int r, int c) const { return base_TM + ((i * T + k) * n + c) * m + r; }
    int idxSx(int i) const { return base_Sx + i; }
    int idxSu(int i) const { return base_Su + i; }
};

bool mask_allows_R(const SynthesisOptions& opts, int k, int r, int c) {
    return !opts.mask || opts.mask->Sx[k](r, c) != 0;
}
bool mask_allows_M(const SynthesisOptions& opts, int k, int r, int c) {
    return !opts.mask || opts.mask->Su[k](r, c) != 0;
}

void check_inputs(const LinearSystem& sys, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& P,
                  const DisturbanceModel& dist, const SafetySpec& safety,
                  const SynthesisOptions& opts) {
    const int n = sys.n();
    const int m = sys.m();
    if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("synthesis: Q must be n x n");
    if (P.rows() != m || P.cols() != m) throw std::invalid_argument("synthesis: P must be m x m");
    if (opts.T < 2) throw std::invalid_argument("synthesis: T must be at least 2");
    if (opts.radii.empty()) throw std::invalid_argument("synthesis: need at least one radius");
    double prev = 0.0;
    for (double eta : opts.radii) {
        if (!(eta >= prev)) throw std::invalid_argument("synthesis: radii must be nondecreasing");
        prev = eta;
    }
    const bool has_safety = safety.x_max < kInf || safety.u_max < kInf;
    if (has_safety && std::abs(opts.radii.back() - safety.eta_max) > 1e-12)
        throw std::invalid_argument("synthesis: eta_N must equal the safety disturbance bound");
    if (opts.radii.back() > dist.eta_max() + 1e-12)
        throw std::invalid_argument("synthesis: eta_N must not exceed the distribution support");
    if (opts.mask) {
        if (opts.mask->T() != opts.T || static_cast<int>(opts.mask->Su.size()) != opts.T)
            throw std::invalid_argument("synthesis: mask horizon does not match T");
        for (const auto& S : opts.mask->Sx)
            if (S.rows() != n || S.cols() != n)
                throw std::invalid_argument("synthesis: Sx mask shape mismatch");
        for (const auto& S : opts.mask->Su)
            if (S.rows() != m || S.cols() != n)
                throw std::invalid_argument("synthesis: Su mask shape mismatch");
        for (int i = 0; i < n; ++i)
            if (opts.mask->Sx[0](i, i) == 0)
                throw std::invalid_argument("synthesis: Sx_1 must allow the identity support");
    }
    for (int z : opts.dc_reject_zones)
        if (z < 0 || z >= static_cast<int>(opts.radii.size()))
            throw std::invalid_argument("synthesis: dc_reject zone index out of range");
    for (int c : opts.dc_reject_columns)
        if (c < 0 || c >= n) throw std::invalid_argument("synthesis: dc_reject column out of range");
}

}  // namespace

SynthesisQp build_synthesis_qp(const LinearSystem& sys, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& P, const AlphaMoments& alpha,
                               const SafetySpec& safety, const SynthesisOptions& opts) {
    const int n = sys.n();
    const int m = sys.m();
    const int T = opts.T;
    const int N = static_cast<int>(opts.radii.size());
    const VarLayout L(n, m, T, N, safety.x_max < kInf, safety.u_max < kInf);

    SynthesisQp out;
    out.num_core_vars = L.base_TR;
    QpProblem& qp = out.problem;

    // Cost: per tap and column, zones couple through alpha.
    std::vector<Triplet> h_trip;
    for (int k = 0; k < T; ++k) {
        for (int c = 0; c < n; ++c) {
            for (int i = 0; i < N; ++i) {
                for (int j = 0; j < N; ++j) {
                    const double a = alpha.alpha(i, j);
                    if (a == 0.0) continue;
                    for (int r = 0; r < n; ++r)
                        for (int rr = 0; rr < n; ++rr) {
                            const double q = Q(r, rr);
                            if (q != 0.0)
                                h_trip.emplace_back(L.idxR(i, k, r, c), L.idxR(j, k, rr, c),
                                                    2.0 * a * q);
                        }
                    for (int r = 0; r < m; ++r)
                        for (int rr = 0; rr < m; ++rr) {
                            const double p = P(r, rr);
                            if (p != 0.0)
                                h_trip.emplace_back(L.idxM(i, k, r, c), L.idxM(j, k, rr, c),
                                                    2.0 * a * p);
                        }
                }
            }
        }
    }
    qp.H.resize(L.total, L.total);
    qp.H.setFromTriplets(h_trip.begin(), h_trip.end());
    qp.g = Eigen::VectorXd::Zero(L.total);

    // Equalities.
    std::vector<Triplet> eq_trip;
    std::vector<double> eq_rhs;
    auto eq_row = [&](const std::string& family) {
        out.eq_families.push_back(family);
        eq_rhs.push_back(0.0);
        return static_cast<int>(eq_rhs.size()) - 1;
    };

    for (int i = 0; i < N; ++i) {
        // R_1 = I
        for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) {
                const int row = eq_row("fir-feasibility");
                eq_trip.emplace_back(row, L.idxR(i, 0, r, c), 1.0);
                eq_rhs[row] = (r == c) ? 1.0 : 0.0;
            }
        // R_{k+1} = A R_k + B M_k
        for (int k = 0; k + 1 < T; ++k) {
            for (int c = 0; c < n; ++c)
                for (int r = 0; r < n; ++r) {
                    const int row = eq_row("fir-feasibility");
                    eq_trip.emplace_back(row, L.idxR(i, k + 1, r, c), 1.0);
                    for (int s = 0; s < n; ++s)
                        if (sys.A(r, s) != 0.0)
                            eq_trip.emplace_back(row, L.idxR(i, k, s, c), -sys.A(r, s));
                    for (int s = 0; s < m; ++s)
                        if (sys.B(r, s) != 0.0)
                            eq_trip.emplace_back(row, L.idxM(i, k, s, c), -sys.B(r, s));
                }
        }
        // Closure past the horizon.
        if (opts.closure == ClosureKind::coupled) {
            for (int c = 0; c < n; ++c)
                for (int r = 0; r < n; ++r) {
                    const int row = eq_row("fir-feasibility");
                    bool any = false;
                    for (int s = 0; s < n; ++s)
                        if (sys.A(r, s) != 0.0) {
                            eq_trip.emplace_back(row, L.idxR(i, T - 1, s, c), sys.A(r, s));
                            any = true;
                        }
                    for (int s = 0; s < m; ++s)
                        if (sys.B(r, s) != 0.0) {
                            eq_trip.emplace_back(row, L.idxM(i, T - 1, s, c), sys.B(r, s));
                            any = true;
                        }
                    if (!any) {
                        out.eq_families.pop_back();
                        eq_rhs.pop_back();
                    }
                }
        } else {
            for (int c = 0; c < n; ++c) {
                for (int r = 0; r < n; ++r) {
                    const int row = eq_row("fir-feasibility");
                    eq_trip.emplace_back(row, L.idxR(i, T - 1, r, c), 1.0);
                }
                for (int r = 0; r < m; ++r) {
                    const int row = eq_row("fir-feasibility");
                    eq_trip.emplace_back(row, L.idxM(i, T - 1, r, c), 1.0);
                }
            }
        }
        // Support mask pins.
        if (opts.mask) {
            for (int k = 0; k < T; ++k) {
                for (int c = 0; c < n; ++c) {
                    for (int r = 0; r < n; ++r)
                        if (!mask_allows_R(opts, k, r, c)) {
                            const int row = eq_row("locality-mask");
                            eq_trip.emplace_back(row, L.idxR(i, k, r, c), 1.0);
                        }
                    for (int r = 0; r < m; ++r)
                        if (!mask_allows_M(opts, k, r, c)) {
                            const int row = eq_row("locality-mask");
                            eq_trip.emplace_back(row, L.idxM(i, k, r, c), 1.0);
                        }
                }
            }
        }
    }
    // Zero DC gain rows.
    for (int i : opts.dc_reject_zones) {
        std::vector<int> cols = opts.dc_reject_columns;
        if (cols.empty())
            for (int c = 0; c < n; ++c) cols.push_back(c);
        for (int c : cols)
            for (int r = 0; r < n; ++r) {
                const int row = eq_row("dc-rejection");
                for (int k = 0; k < T; ++k) eq_trip.emplace_back(row, L.idxR(i, k, r, c), 1.0);
            }
    }

    qp.Aeq.resize(static_cast<int>(eq_rhs.size()), L.total);
    qp.Aeq.setFromTriplets(eq_trip.begin(), eq_trip.end());
    qp.beq = Eigen::Map<Eigen::VectorXd>(eq_rhs.data(), static_cast<Eigen::Index>(eq_rhs.size()));

    // Inequalities: absolute-value slack links, per-zone row sums, budgets.
    std::vector<Triplet> in_trip;
    std::vector<double> in_lo, in_hi;
    auto in_row = [&](const std::string& family, double lo, double hi) {
        out.in_families.push_back(family);
        in_lo.push_back(lo);
        in_hi.push_back(hi);
        return static_cast<int>(in_lo.size()) - 1;
    };

    if (L.slack_x) {
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < T; ++k)
                for (int c = 0; c < n; ++c)
                    for (int r = 0; r < n; ++r) {
                        if (!mask_allows_R(opts, k, r, c)) continue;
                        int row = in_row("state-safety", -kInf, 0.0);  // z - t <= 0
                        in_trip.emplace_back(row, L.idxR(i, k, r, c), 1.0);
                        in_trip.emplace_back(row, L.idxTR(i, k, r, c), -1.0);
                        row = in_row("state-safety", 0.0, kInf);  // z + t >= 0
                        in_trip.emplace_back(row, L.idxR(i, k, r, c), 1.0);
                        in_trip.emplace_back(row, L.idxTR(i, k, r, c), 1.0);
                    }
        for (int i = 0; i < N; ++i)
            for (int r = 0; r < n; ++r) {
                const int row = in_row("state-safety", -kInf, 0.0);  // row sum <= s_x[i]
                for (int k = 0; k < T; ++k)
                    for (int c = 0; c < n; ++c)
                        if (mask_allows_R(opts, k, r, c))
                            in_trip.emplace_back(row, L.idxTR(i, k, r, c), 1.0);
                in_trip.emplace_back(row, L.idxSx(i), -1.0);
            }
        const int row = in_row("state-safety", -kInf, safety.x_max);
        for (int i = 0; i < N; ++i) {
            const double width = opts.radii[i] - (i == 0 ? 0.0 : opts.radii[i - 1]);
            in_trip.emplace_back(row, L.idxSx(i), width);
        }
    }
    if (L.slack_u) {
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < T; ++k)
                for (int c = 0; c < n; ++c)
                    for (int r = 0; r < m; ++r) {
                        if (!mask_allows_M(opts, k, r, c)) continue;
                        int row = in_row("input-safety", -kInf, 0.0);
                        in_trip.emplace_back(row, L.idxM(i, k, r, c), 1.0);
                        in_trip.emplace_back(row, L.idxTM(i, k, r, c), -1.0);
                        row = in_row("input-safety", 0.0, kInf);
                        in_trip.emplace_back(row, L.idxM(i, k, r, c), 1.0);
                        in_trip.emplace_back(row, L.idxTM(i, k, r, c), 1.0);
                    }
        for (int i = 0; i < N; ++i)
            for (int r = 0; r < m; ++r) {
                const int row = in_row("input-safety", -kInf, 0.0);
                for (int k = 0; k < T; ++k)
                    for (int c = 0; c < n; ++c)
                        if (mask_allows_M(opts, k, r, c))
                            in_trip.emplace_back(row, L.idxTM(i, k, r, c), 1.0);
                in_trip.emplace_back(row, L.idxSu(i), -1.0);
            }
        const int row = in_row("input-safety", -kInf, safety.u_max);
        for (int i = 0; i < N; ++i) {
            const double width = opts.radii[i] - (i == 0 ? 0.0 : opts.radii[i - 1]);
            in_trip.emplace_back(row, L.idxSu(i), width);
        }
    }

    qp.Ain.resize(static_cast<int>(in_lo.size()), L.total);
    qp.Ain.setFromTriplets(in_trip.begin(), in_trip.end());
    qp.lo = Eigen::Map<Eigen::VectorXd>(in_lo.data(), static_cast<Eigen::Index>(in_lo.size()));
    qp.hi = Eigen::Map<Eigen::VectorXd>(in_hi.data(), static_cast<Eigen::Index>(in_hi.size()));
    return out;
}

namespace {

// Violation per constraint family at a given point; used to name the binding
// family when the program is infeasible.
std::string worst_family(const SynthesisQp& sqp, const Eigen::VectorXd& z) {
    std::map<std::string, double> viol;
    const Eigen::VectorXd eq = sqp.problem.Aeq * z - sqp.problem.beq;
    for (int i = 0; i < eq.size(); ++i)
        viol[sqp.eq_families[i]] = std::max(viol[sqp.eq_families[i]], std::abs(eq[i]));
    if (sqp.problem.num_in() > 0) {
        const Eigen::VectorXd val = sqp.problem.Ain * z;
        for (int i = 0; i < val.size(); ++i) {
            double v = 0.0;
            if (sqp.problem.lo[i] > -kInf) v = std::max(v, sqp.problem.lo[i] - val[i]);
            if (sqp.problem.hi[i] < kInf) v = std::max(v, val[i] - sqp.problem.hi[i]);
            viol[sqp.in_families[i]] = std::max(viol[sqp.in_families[i]], v);
        }
    }
    std::string best = "unknown";
    double best_v = -1.0;
    for (const auto& [fam, v] : viol)
        if (v > best_v) {
            best_v = v;
            best = fam;
        }
    return best;
}

// For an infeasibility certificate the weight of each family in the
// certificate direction is more telling than primal violations.
std::string certificate_family(const SynthesisQp& sqp, const Eigen::VectorXd& y) {
    std::map<std::string, double> weight;
    const int ne = sqp.problem.num_eq();
    for (int i = 0; i < ne; ++i)
        weight[sqp.eq_families[i]] = std::max(weight[sqp.eq_families[i]], std::abs(y[i]));
    for (int i = 0; i < sqp.problem.num_in(); ++i)
        weight[sqp.in_families[i]] = std::max(weight[sqp.in_families[i]], std::abs(y[ne + i]));
    std::string best = "unknown";
    double best_v = -1.0;
    for (const auto& [fam, v] : weight)
        if (v > best_v) {
            best_v = v;
            best = fam;
        }
    return best;
}

SynthesisResult run_synthesis(const LinearSystem& sys, const Eigen::MatrixXd& Q,
                              const Eigen::MatrixXd& P, const DisturbanceModel& dist,
                              const SafetySpec& safety, const SynthesisOptions& opts) {
    check_inputs(sys, Q, P, dist, safety, opts);
    const int n = sys.n();
    const int m = sys.m();
    const int T = opts.T;
    const int N = static_cast<int>(opts.radii.size());

    const AlphaMoments alpha = alpha_moments(dist, opts.radii);
    SynthesisQp sqp = build_synthesis_qp(sys, Q, P, alpha, safety, opts);
    const QpSolution sol = qp_solve(sqp.problem, opts.qp);

    if (sol.status == QpStatus::infeasible_detected) {
        // The returned iterate is the best compromise the splitting found;
        // the family it still violates most is the binding one. The
        // certificate direction breaks ties when the iterate is clean.
        std::string family = worst_family(sqp, sol.z);
        if (family == "unknown") family = certificate_family(sqp, sol.y);
        throw SynthesisError("synthesis: program infeasible (binding family: " + family + ")",
                             family, sol.status);
    }
    if (sol.status != QpStatus::optimal) {
        const std::string family = worst_family(sqp, sol.z);
        throw SynthesisError("synthesis: solver stopped without convergence (worst family: " +
                                 family + ")",
                             family, sol.status);
    }

    const VarLayout L(n, m, T, N, safety.x_max < kInf, safety.u_max < kInf);
    SynthesisResult res;
    res.alpha = alpha;
    res.blend.radii = opts.radii;
    res.blend.projection = opts.projection;
    for (int i = 0; i < N; ++i) {
        FirClm zone;
        zone.T = T;
        for (int k = 0; k < T; ++k) {
            Eigen::MatrixXd R(n, n), M(m, n);
            for (int c = 0; c < n; ++c) {
                for (int r = 0; r < n; ++r)
                    R(r, c) = mask_allows_R(opts, k, r, c) ? sol.z[L.idxR(i, k, r, c)] : 0.0;
                for (int r = 0; r < m; ++r)
                    M(r, c) = mask_allows_M(opts, k, r, c) ? sol.z[L.idxM(i, k, r, c)] : 0.0;
            }
            zone.R.push_back(std::move(R));
            zone.M.push_back(std::move(M));
        }
        res.blend.zones.push_back(std::move(zone));
    }

    for (int i = 0; i < N; ++i) {
        const auto rep = validate_fir_clm(res.blend.zones[i], sys, opts.validation_tol, opts.closure);
        if (!rep.pass)
            throw SynthesisError("synthesis: returned CLM failed validation (zone " +
                                     std::to_string(i) + ", residual " +
                                     std::to_string(rep.max_residual()) + ")",
                                 "fir-feasibility", sol.status);
    }

    res.objective = blend_cost(res.blend, alpha, Q, P);
    std::tie(res.state_peak, res.input_peak) = worst_case_peak(res.blend);
    res.status = sol.status;
    res.iterations = sol.iterations;
    res.polished = sol.polished;
    res.residuals = sol.residuals;
    res.qp_objective = sol.objective;
    if (safety.x_max < kInf && res.state_peak > safety.x_max - 1e-6)
        res.active_constraints.push_back("state-safety");
    if (safety.u_max < kInf && res.input_peak > safety.u_max - 1e-6)
        res.active_constraints.push_back("input-safety");
    res.qp = std::make_shared<const QpProblem>(std::move(sqp.problem));
    res.qp_z = sol.z;
    res.qp_y = sol.y;
    return res;
}

}  // namespace

SynthesisResult synthesize_blend(const LinearSystem& sys, const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& P, const DisturbanceModel& dist,
                                 const SafetySpec& safety, const SynthesisOptions& opts) {
    return run_synthesis(sys, Q, P, dist, safety, opts);
}

SynthesisResult synthesize_linear(const LinearSystem& sys, const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& P, const DisturbanceModel& dist,
                                  const SafetySpec& safety, SynthesisOptions opts) {
    opts.radii = {safety.eta_max};
    return run_synthesis(sys, Q, P, dist, safety, opts);
}

double blend_cost(const BlendClm& blend, const AlphaMoments& alpha, const Eigen::MatrixXd& Q,
                  const Eigen::MatrixXd& P) {
    blend.check_structure();
    if (alpha.N() != blend.N()) throw std::invalid_argument("blend_cost: alpha zone count mismatch");
    double total = 0.0;
    for (int i = 0; i < blend.N(); ++i)
        for (int j = 0; j < blend.N(); ++j) {
            const double a = alpha.alpha(i, j);
            if (a == 0.0) continue;
            double s = 0.0;
            for (int k = 0; k < blend.T(); ++k) {
                s += (blend.zones[i].R[k].transpose() * Q * blend.zones[j].R[k]).trace();
                s += (blend.zones[i].M[k].transpose() * P * blend.zones[j].M[k]).trace();
            }
            total += a * s;
        }
    return total;
}

std::pair<double, double> worst_case_peak(const BlendClm& blend) {
    blend.check_structure();
    double x_peak = 0.0, u_peak = 0.0;
    for (int i = 0; i < blend.N(); ++i) {
        const double width = blend.radii[i] - (i == 0 ? 0.0 : blend.radii[i - 1]);
        x_peak += width * peak_gain(blend.zones[i].r_concat());
        u_peak += width * peak_gain(blend.zones[i].m_concat());
    }
    return {x_peak, u_peak};
}

}  // namespace sls
