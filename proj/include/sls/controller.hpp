#pragma once

#include <Eigen/Dense>
#include <deque>
#include <optional>
#include <vector>

#include "sls/fir_clm.hpp"
#include "sls/linear_system.hpp"

namespace sls {

// Common interface for closed-loop state machines driven by the simulator.
class ControllerBase {
public:
    virtual ~ControllerBase() = default;
    // Consumes the observed state x_t (strictly increasing t) and returns u_t.
    virtual Eigen::VectorXd step(const Eigen::VectorXd& x_t) = 0;
    virtual void reset() = 0;
    virtual int input_dim() const = 0;
    // Latest internal state for logging, if the controller keeps one.
    virtual std::optional<Eigen::VectorXd> internal_state() const { return std::nullopt; }
};

// Realization of a blend CLM as a dynamic controller with internal
// disturbance estimate w_hat:
//
//   w_hat_t = x_t - sum_i sum_{k=2..min(T,t+1)} R^i_k (P_i - P_{i-1})(w_hat_{t+1-k})
//   u_t     =       sum_i sum_{k=1..min(T,t+1)} M^i_k (P_i - P_{i-1})(w_hat_{t+1-k})
//
// with w_hat_0 = x_0. As long as |w_t|_inf stays within the outermost radius,
// the closed loop over the matching plant reproduces the CLM exactly and
// w_hat_t recovers w_t.
class SlController : public ControllerBase {
public:
    explicit SlController(BlendClm blend);

    Eigen::VectorXd step(const Eigen::VectorXd& x_t) override;
    void reset() override;
    int input_dim() const override { return blend_.m(); }
    std::optional<Eigen::VectorXd> internal_state() const override;

    const BlendClm& blend() const { return blend_; }
    int steps_taken() const { return t_; }
    const std::deque<Eigen::VectorXd>& what_history() const { return what_; }

    // Snapshot of everything needed to resume: the step counter and the
    // buffered estimates (newest first). Zone pieces and residuals are
    // recomputed on restore.
    struct State {
        int t = 0;
        std::vector<Eigen::VectorXd> what;
    };
    State save_state() const;
    void load_state(const State& state);

protected:
    // Hook for the anti-windup variant: extra term subtracted in the
    // w_hat update (zero here).
    virtual Eigen::VectorXd update_correction();
    virtual void after_update(const Eigen::VectorXd& what_t);

    // Rebuilds pieces_ (and, in subclasses, residual buffers) from what_.
    virtual void rebuild_buffers();

    BlendClm blend_;
    int t_ = 0;
    int history_len_ = 0;  // max(T, tau + 1) estimates kept
    // Newest first; what_[0] = w_hat_{t-1} when step() begins.
    std::deque<Eigen::VectorXd> what_;
    // Zone pieces of the buffered estimates, same ordering.
    std::vector<std::deque<Eigen::VectorXd>> pieces_;
};

// Anti-windup augmentation: the w_hat update additionally subtracts the
// open-loop propagation of past residuals w_hat - P_{eta_N}(w_hat),
//
//   sum_{k=2..tau+1} A^{k-1} (w_hat_{t+1-k} - P_{eta_N}(w_hat_{t+1-k})),
//
// which vanishes while every buffered estimate stays within eta_N. Under the
// input-saturated plant the internal estimate then obeys the autonomous
// recursion  w_hat_t = A^{tau+1}(w_hat_{t-tau-1} - P(w_hat_{t-tau-1})) + w_t.
class AntiWindupController : public SlController {
public:
    AntiWindupController(BlendClm blend, const LinearSystem& sys, int tau);

    void reset() override;
    int tau() const { return tau_; }

protected:
    Eigen::VectorXd update_correction() override;
    void after_update(const Eigen::VectorXd& what_t) override;
    void rebuild_buffers() override;

private:
    int tau_;
    std::vector<Eigen::MatrixXd> a_pow_;          // A^1 .. A^{tau+1}
    std::deque<Eigen::VectorXd> residuals_;       // newest first
};

// Smallest tau <= tau_max with |A^{tau+1}|_inf < 1, plus the achieved norm.
struct TauResult {
    int tau;
    double norm;
};
std::optional<TauResult> min_tau(const Eigen::MatrixXd& A, int tau_max);

// Direct simulation of the internal residual recursion
//   w_hat_t = A^{tau+1}(w_hat_{t-tau-1} - P_{eta_N}(w_hat_{t-tau-1})) + w_t
// with zero padding for negative indices.
std::vector<Eigen::VectorXd> internal_dynamics_sim(const Eigen::MatrixXd& A, int tau, double eta_N,
                                                   ProjectionKind kind,
                                                   const std::vector<Eigen::VectorXd>& w);

}  // namespace sls
