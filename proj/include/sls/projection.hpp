#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sls {

// The two projection nonlinearities used to split disturbances into zones.
//
// Saturation acts coordinate-wise: each entry is clamped to [-eta, eta].
// Radial rescales the whole vector onto the inf-norm ball of radius eta
// when it lies outside, and leaves it untouched otherwise.
//
// Note on the scalar clamp: we use sat(w, eta) = sign(w) * min(|w|, eta).
// Written with max instead of min this would not be a projection (it would
// push small inputs outward), so min is the only reading under which the
// identity-inside-the-ball and zone-bound properties below hold.
enum class ProjectionKind { saturation, radial };

struct ProjectionSpec {
    ProjectionKind kind;
    double eta;  // >= 0
};

// Scalar clamp to [-eta, eta].
double sat(double w, double eta);

// P_eta(w). Throws std::domain_error for eta < 0. project(kind, 0, w) == 0.
Eigen::VectorXd project(ProjectionKind kind, double eta, const Eigen::VectorXd& w);

inline Eigen::VectorXd project(const ProjectionSpec& spec, const Eigen::VectorXd& w) {
    return project(spec.kind, spec.eta, w);
}

// Zone pieces d_i = (P_{eta_i} - P_{eta_{i-1}})(w), i = 1..N, with eta_0 = 0.
// Guarantees sum_i d_i = P_{eta_N}(w) and |d_i|_inf <= eta_i - eta_{i-1}.
// Radii must be nonnegative and nondecreasing (std::domain_error otherwise).
std::vector<Eigen::VectorXd> zone_decompose(const std::vector<double>& radii,
                                            ProjectionKind kind,
                                            const Eigen::VectorXd& w);

const char* to_string(ProjectionKind kind);
ProjectionKind projection_kind_from_string(const std::string& s);

}  // namespace sls
