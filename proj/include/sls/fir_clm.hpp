#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sls/linear_system.hpp"
#include "sls/projection.hpp"

namespace sls {

// A linear FIR closed-loop map pair with horizon T:
//
//   x_t = sum_{k=1..min(t+1,T)} R_k w_{t+1-k}
//   u_t = sum_{k=1..min(t+1,T)} M_k w_{t+1-k}
//
// Feasibility for a plant (A, B):
//   R_1 = I,   R_{k+1} = A R_k + B M_k  (k = 1..T-1),   A R_T + B M_T = 0.
//
// The last condition ("coupled" closure) is what the recursion itself demands
// one step past the horizon. A stricter variant pins R_T = 0 and M_T = 0
// instead; it implies the coupled one and is selectable where it matters.
struct FirClm {
    int T = 0;
    std::vector<Eigen::MatrixXd> R;  // T matrices, n x n
    std::vector<Eigen::MatrixXd> M;  // T matrices, m x n

    int n() const { return R.empty() ? 0 : static_cast<int>(R.front().rows()); }
    int m() const { return M.empty() ? 0 : static_cast<int>(M.front().rows()); }

    // Row-wise concatenations [X_T, X_{T-1}, ..., X_1] used by peak bounds.
    Eigen::MatrixXd r_concat() const;
    Eigen::MatrixXd m_concat() const;
};

enum class ClosureKind { coupled, strict_zero };

// An N-zone blend: zone i acts on the disturbance piece
// (P_{eta_i} - P_{eta_{i-1}})(w) through its own FIR CLM.
struct BlendClm {
    std::vector<FirClm> zones;   // N zone CLMs sharing n, m, T
    std::vector<double> radii;   // eta_1 <= ... <= eta_N, eta_0 = 0 implicit
    ProjectionKind projection = ProjectionKind::saturation;

    int N() const { return static_cast<int>(zones.size()); }
    int n() const { return zones.empty() ? 0 : zones.front().n(); }
    int m() const { return zones.empty() ? 0 : zones.front().m(); }
    int T() const { return zones.empty() ? 0 : zones.front().T; }
    double eta_max() const { return radii.empty() ? 0.0 : radii.back(); }

    // Wraps a single linear CLM as a one-zone blend with radius eta.
    static BlendClm single(FirClm clm, double eta,
                           ProjectionKind kind = ProjectionKind::saturation);

    // Structural checks (shared dims, radii ordering); throws std::invalid_argument.
    void check_structure() const;
};

struct ValidationReport {
    double r1_residual = 0.0;                 // |R_1 - I|_max
    std::vector<double> recursion_residuals;  // |R_{k+1} - A R_k - B M_k|_max
    double closure_residual = 0.0;
    bool pass = false;
    double max_residual() const;
};

// Checks the feasibility conditions above entrywise against tol.
// Dimension mismatch with the plant throws std::invalid_argument.
ValidationReport validate_fir_clm(const FirClm& clm, const LinearSystem& sys,
                                  double tol = 1e-8,
                                  ClosureKind closure = ClosureKind::coupled);

// Applies the FIR convolution to a finite disturbance sequence; the output
// has the same length as w.
struct SignalPair {
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> u;
};
SignalPair clm_convolve(const FirClm& clm, const std::vector<Eigen::VectorXd>& w);

// Zone-decomposes each w_t, convolves each piece through its zone CLM and sums.
SignalPair blend_apply(const BlendClm& blend, const std::vector<Eigen::VectorXd>& w);

// Induced inf-norm: max absolute row sum. Equals sup over |w|_inf <= 1 of |X w|_inf.
double peak_gain(const Eigen::MatrixXd& concat);

}  // namespace sls
