#pragma once

#include <Eigen/Dense>
#include <random>
#include <utility>
#include <vector>

namespace sls {

// Scalar, centered, symmetric disturbance distribution with bounded support
// [-eta_max, eta_max]. Coordinates and time steps are i.i.d. copies of it.
//
// A model is a continuous density plus an optional list of symmetric point
// masses; "truncated-gaussian" renormalizes the density over the support,
// while "clipped-gaussian" keeps the untruncated density and piles the tail
// mass onto atoms at +-eta_max.
class DisturbanceModel {
public:
    enum class Family { uniform, truncated_gaussian, point_mass_list, clipped_gaussian };

    static DisturbanceModel uniform(double eta_max);
    static DisturbanceModel truncated_gaussian(double sigma, double eta_max);
    static DisturbanceModel clipped_gaussian(double sigma, double eta_max);
    // Atoms as (location, mass) pairs; must be symmetric about 0 and sum to 1.
    static DisturbanceModel point_masses(std::vector<std::pair<double, double>> atoms,
                                         double eta_max);

    Family family() const { return family_; }
    double eta_max() const { return eta_max_; }
    double sigma() const { return sigma_; }
    const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }

    // Continuous density part (zero for pure point-mass models).
    double density(double w) const;
    bool has_density() const { return family_ != Family::point_mass_list; }

    // E[w^2] and E[P_eta(w)^2] by quadrature plus atoms.
    double second_moment() const;
    double clipped_second_moment(double eta) const;

    double sample(std::mt19937_64& rng) const;

private:
    DisturbanceModel() = default;
    void check_normalization() const;

    Family family_ = Family::uniform;
    double eta_max_ = 1.0;
    double sigma_ = 0.0;
    std::vector<std::pair<double, double>> atoms_;
};

// alpha_{ij} = E[(P_{eta_i} - P_{eta_{i-1}})(w) (P_{eta_j} - P_{eta_{j-1}})(w)]
// for scalar w (eta_0 = 0). Symmetric PSD; entries sum to E[P_{eta_N}(w)^2].
struct AlphaMoments {
    Eigen::MatrixXd alpha;  // N x N
    int N() const { return static_cast<int>(alpha.rows()); }
    double telescoped_sum() const { return alpha.sum(); }
};

// Adaptive quadrature split at every +-eta_i breakpoint; absolute tolerance
// ~1e-10 per entry. Throws std::runtime_error if the error estimate exceeds
// the tolerance, std::domain_error for unsorted radii or eta_N > eta_max.
AlphaMoments alpha_moments(const DisturbanceModel& dist, const std::vector<double>& radii);

// Sigma_w = alpha (x) I_n and its symmetric square root, computed from the
// eigendecomposition of the small alpha matrix. Eigenvalues below -1e-10
// raise std::domain_error; tiny negatives are clipped to zero.
struct SigmaW {
    Eigen::MatrixXd full;  // (N n) x (N n)
    Eigen::MatrixXd sqrt;  // (N n) x (N n)
};
SigmaW build_sigma_w(const AlphaMoments& alpha, int n);

// Symmetric PSD square root of a small matrix (also used for Q^{1/2}, P^{1/2}).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S, double neg_tol = 1e-10);

}  // namespace sls
