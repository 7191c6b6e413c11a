#include "sls/linear_system.hpp"

#include <stdexcept>

namespace sls {

LinearSystem LinearSystem::make(Eigen::MatrixXd A, Eigen::MatrixXd B) {
    if (A.rows() < 1 || A.rows() != A.cols())
        throw std::invalid_argument("LinearSystem: A must be square and nonempty");
    if (B.rows() != A.rows() || B.cols() < 1)
        throw std::invalid_argument("LinearSystem: B must be n x m with m >= 1");
    if (!A.allFinite() || !B.allFinite())
        throw std::invalid_argument("LinearSystem: matrices must be finite");
    return LinearSystem{std::move(A), std::move(B)};
}

double LinearSystem::spectral_radius() const {
    return A.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace sls
