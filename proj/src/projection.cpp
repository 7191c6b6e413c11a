#include "sls/projection.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sls {

double sat(double w, double eta) {
    return std::copysign(std::min(std::abs(w), eta), w);
}

Eigen::VectorXd project(ProjectionKind kind, double eta, const Eigen::VectorXd& w) {
    if (eta < 0.0) throw std::domain_error("project: eta must be nonnegative");
    switch (kind) {
        case ProjectionKind::saturation: {
            Eigen::VectorXd out(w.size());
            for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = sat(w[i], eta);
            return out;
        }
        case ProjectionKind::radial: {
            const double norm = w.lpNorm<Eigen::Infinity>();
            if (norm <= eta || norm == 0.0) return w;  // w = 0 covers the eta = 0 limit
            return (eta / norm) * w;
        }
    }
    throw std::logic_error("project: unknown kind");
}

std::vector<Eigen::VectorXd> zone_decompose(const std::vector<double>& radii,
                                            ProjectionKind kind,
                                            const Eigen::VectorXd& w) {
    double prev = 0.0;
    for (double eta : radii) {
        if (eta < prev) throw std::domain_error("zone_decompose: radii must be nondecreasing from 0");
        prev = eta;
    }
    std::vector<Eigen::VectorXd> pieces;
    pieces.reserve(radii.size());
    Eigen::VectorXd below = Eigen::VectorXd::Zero(w.size());
    for (double eta : radii) {
        Eigen::VectorXd cur = project(kind, eta, w);
        pieces.push_back(cur - below);
        below = std::move(cur);
    }
    return pieces;
}

const char* to_string(ProjectionKind kind) {
    return kind == ProjectionKind::saturation ? "saturation" : "radial";
}

ProjectionKind projection_kind_from_string(const std::string& s) {
    if (s == "saturation") return ProjectionKind::saturation;
    if (s == "radial") return ProjectionKind::radial;
    throw std::invalid_argument("unknown projection kind: " + s);
}

}  // namespace sls
