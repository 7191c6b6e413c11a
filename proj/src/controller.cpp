#include "sls/controller.hpp"

#include <stdexcept>

namespace sls {

SlController::SlController(BlendClm blend) : blend_(std::move(blend)) {
    blend_.check_structure();
    history_len_ = blend_.T();
    pieces_.resize(blend_.N());
}

Eigen::VectorXd SlController::update_correction() {
    return Eigen::VectorXd::Zero(blend_.n());
}

void SlController::after_update(const Eigen::VectorXd&) {}

Eigen::VectorXd SlController::step(const Eigen::VectorXd& x_t) {
    const int n = blend_.n();
    const int N = blend_.N();
    const int T = blend_.T();
    if (x_t.size() != n) throw std::invalid_argument("SlController: state dimension mismatch");

    // w_hat_t from the buffered history (taps k = 2..min(T, t+1)).
    Eigen::VectorXd what_t = x_t;
    const int kmax = std::min(T, t_ + 1);
    for (int k = 2; k <= kmax; ++k)
        for (int i = 0; i < N; ++i)
            what_t.noalias() -= blend_.zones[i].R[k - 1] * pieces_[i][k - 2];
    what_t -= update_correction();

    const auto piece_t = zone_decompose(blend_.radii, blend_.projection, what_t);

    Eigen::VectorXd u = Eigen::VectorXd::Zero(blend_.m());
    for (int i = 0; i < N; ++i) {
        u.noalias() += blend_.zones[i].M[0] * piece_t[i];
        for (int k = 2; k <= kmax; ++k) u.noalias() += blend_.zones[i].M[k - 1] * pieces_[i][k - 2];
    }

    after_update(what_t);
    what_.push_front(what_t);
    while (static_cast<int>(what_.size()) > history_len_) what_.pop_back();
    for (int i = 0; i < N; ++i) {
        pieces_[i].push_front(piece_t[i]);
        while (static_cast<int>(pieces_[i].size()) > std::max(T - 1, 0)) pieces_[i].pop_back();
    }
    ++t_;
    return u;
}

void SlController::reset() {
    t_ = 0;
    what_.clear();
    for (auto& q : pieces_) q.clear();
}

std::optional<Eigen::VectorXd> SlController::internal_state() const {
    if (what_.empty()) return std::nullopt;
    return what_.front();
}

SlController::State SlController::save_state() const {
    State s;
    s.t = t_;
    s.what.assign(what_.begin(), what_.end());
    return s;
}

void SlController::load_state(const State& state) {
    if (state.t < 0) throw std::invalid_argument("SlController: negative step counter");
    for (const auto& w : state.what)
        if (w.size() != blend_.n())
            throw std::invalid_argument("SlController: snapshot dimension mismatch");
    t_ = state.t;
    what_.assign(state.what.begin(), state.what.end());
    rebuild_buffers();
}

void SlController::rebuild_buffers() {
    const int T = blend_.T();
    for (auto& q : pieces_) q.clear();
    int count = 0;
    for (const auto& w : what_) {
        if (count >= T - 1) break;
        const auto piece = zone_decompose(blend_.radii, blend_.projection, w);
        for (int i = 0; i < blend_.N(); ++i) pieces_[i].push_back(piece[i]);
        ++count;
    }
}

AntiWindupController::AntiWindupController(BlendClm blend, const LinearSystem& sys, int tau)
    : SlController(std::move(blend)), tau_(tau) {
    if (tau < 0) throw std::invalid_argument("AntiWindupController: tau must be nonnegative");
    if (sys.n() != blend_.n() || sys.m() != blend_.m())
        throw std::invalid_argument("AntiWindupController: plant dimensions mismatch");
    history_len_ = std::max(blend_.T(), tau + 1);
    Eigen::MatrixXd p = sys.A;
    for (int k = 1; k <= tau + 1; ++k) {
        a_pow_.push_back(p);
        p = p * sys.A;
    }
}

Eigen::VectorXd AntiWindupController::update_correction() {
    Eigen::VectorXd corr = Eigen::VectorXd::Zero(blend_.n());
    const int kmax = std::min(tau_ + 1, t_ + 1);
    for (int k = 2; k <= kmax; ++k)
        corr.noalias() += a_pow_[k - 2] * residuals_[k - 2];  // A^{k-1} r_{t+1-k}
    return corr;
}

void AntiWindupController::after_update(const Eigen::VectorXd& what_t) {
    if (tau_ == 0) return;
    residuals_.push_front(what_t - project(blend_.projection, blend_.eta_max(), what_t));
    while (static_cast<int>(residuals_.size()) > tau_) residuals_.pop_back();
}

void AntiWindupController::reset() {
    SlController::reset();
    residuals_.clear();
}

void AntiWindupController::rebuild_buffers() {
    SlController::rebuild_buffers();
    residuals_.clear();
    int count = 0;
    for (const auto& w : what_) {
        if (count >= tau_) break;
        residuals_.push_back(w - project(blend_.projection, blend_.eta_max(), w));
        ++count;
    }
}

std::optional<TauResult> min_tau(const Eigen::MatrixXd& A, int tau_max) {
    if (tau_max < 0) throw std::invalid_argument("min_tau: tau_max must be nonnegative");
    Eigen::MatrixXd p = A;
    for (int tau = 0; tau <= tau_max; ++tau) {
        const double norm = p.cwiseAbs().rowwise().sum().maxCoeff();
        if (norm < 1.0) return TauResult{tau, norm};
        p = p * A;
    }
    return std::nullopt;
}

std::vector<Eigen::VectorXd> internal_dynamics_sim(const Eigen::MatrixXd& A, int tau, double eta_N,
                                                   ProjectionKind kind,
                                                   const std::vector<Eigen::VectorXd>& w) {
    if (tau < 0) throw std::invalid_argument("internal_dynamics_sim: tau must be nonnegative");
    Eigen::MatrixXd a_pow = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    for (int k = 0; k < tau + 1; ++k) a_pow = a_pow * A;

    std::vector<Eigen::VectorXd> what;
    what.reserve(w.size());
    const int lag = tau + 1;
    for (std::size_t t = 0; t < w.size(); ++t) {
        Eigen::VectorXd wt = w[t];
        if (static_cast<int>(t) - lag >= 0) {
            const Eigen::VectorXd& prev = what[t - lag];
            wt.noalias() += a_pow * (prev - project(kind, eta_N, prev));
        }
        what.push_back(std::move(wt));
    }
    return what;
}

}  // namespace sls
