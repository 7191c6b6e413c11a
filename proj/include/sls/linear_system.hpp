#pragma once

#include <Eigen/Dense>

namespace sls {

// Discrete-time linear plant  x_t = A x_{t-1} + B u_{t-1} + w_t,
// with the convention x_0 = w_0.
struct LinearSystem {
    Eigen::MatrixXd A;  // n x n state transition
    Eigen::MatrixXd B;  // n x m input map

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(B.cols()); }

    // Validates dimensions and finiteness; throws std::invalid_argument.
    static LinearSystem make(Eigen::MatrixXd A, Eigen::MatrixXd B);

    double spectral_radius() const;
};

}  // namespace sls
