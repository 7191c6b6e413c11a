#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sls/disturbance.hpp"
#include "sls/fir_clm.hpp"
#include "sls/linear_system.hpp"
#include "sls/locality.hpp"
#include "sls/qp.hpp"

namespace sls {

// Box safety bounds that must hold for every disturbance with
// |w_t|_inf <= eta_max: sup_t |x_t| <= x_max, sup_t |u_t| <= u_max.
// Infinite bounds drop the corresponding constraint block.
struct SafetySpec {
    double x_max = kInf;
    double u_max = kInf;
    double eta_max = 1.0;
};

struct SynthesisOptions {
    int T = 10;
    std::vector<double> radii;  // eta_1 <= ... <= eta_N (= eta_max with finite safety)
    ProjectionKind projection = ProjectionKind::saturation;
    ClosureKind closure = ClosureKind::coupled;
    std::optional<LocalityMask> mask;

    // Optional zero-DC-gain constraint sum_k R_k[:, j] = 0 on selected zones
    // and state columns; makes those zones reject persistent disturbances
    // entering at those coordinates. Empty columns list = all columns.
    std::vector<int> dc_reject_zones;
    std::vector<int> dc_reject_columns;

    double validation_tol = 1e-6;
    QpOptions qp;
};

struct SynthesisResult {
    BlendClm blend;
    double objective = 0.0;      // exact cost of the returned blend
    AlphaMoments alpha;
    double state_peak = 0.0;     // certified sup_t |x_t| bound
    double input_peak = 0.0;     // certified sup_t |u_t| bound

    QpStatus status = QpStatus::optimal;
    int iterations = 0;
    bool polished = false;
    KktResiduals residuals;
    double qp_objective = 0.0;
    std::vector<std::string> active_constraints;

    // Kept for audits: the exact program that was solved and its solution.
    std::shared_ptr<const QpProblem> qp;
    Eigen::VectorXd qp_z, qp_y;
};

// Raised when the program is infeasible (or the solver gives up); names the
// constraint family with the largest violation at the best iterate.
class SynthesisError : public std::runtime_error {
public:
    SynthesisError(const std::string& msg, std::string family, QpStatus status)
        : std::runtime_error(msg), binding_family(std::move(family)), status(status) {}
    std::string binding_family;
    QpStatus status;
};

// Solves the N-zone blended constrained-LQR program: quadratic cost weighted
// by the zone moment matrix, per-zone FIR feasibility, peak-gain safety
// split across zones, optional support masks and DC-rejection rows.
SynthesisResult synthesize_blend(const LinearSystem& sys, const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& P, const DisturbanceModel& dist,
                                 const SafetySpec& safety, const SynthesisOptions& opts);

// The linear baseline: the same program with a single zone of radius eta_max.
SynthesisResult synthesize_linear(const LinearSystem& sys, const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& P, const DisturbanceModel& dist,
                                  const SafetySpec& safety, SynthesisOptions opts);

// Exact cost sum_{i,j} alpha_ij sum_k [tr(R_k^i' Q R_k^j) + tr(M_k^i' P M_k^j)].
double blend_cost(const BlendClm& blend, const AlphaMoments& alpha, const Eigen::MatrixXd& Q,
                  const Eigen::MatrixXd& P);

// Certified peak bounds sum_i (eta_i - eta_{i-1}) |[X_T ... X_1]|_inf for the
// state and input maps; upper bounds on sup_t |x_t|, sup_t |u_t| over all
// admissible disturbances.
std::pair<double, double> worst_case_peak(const BlendClm& blend);

// The exact QP handed to the solver, exposed so tests can referee it.
struct SynthesisQp {
    QpProblem problem;
    std::vector<std::string> eq_families;
    std::vector<std::string> in_families;
    int num_core_vars = 0;
};
SynthesisQp build_synthesis_qp(const LinearSystem& sys, const Eigen::MatrixXd& Q,
                               const Eigen::MatrixXd& P, const AlphaMoments& alpha,
                               const SafetySpec& safety, const SynthesisOptions& opts);

}  // namespace sls
