#include "sls/fir_clm.hpp"

#include <stdexcept>

namespace sls {

namespace {

Eigen::MatrixXd concat_reversed(const std::vector<Eigen::MatrixXd>& taps) {
    if (taps.empty()) return {};
    const Eigen::Index rows = taps.front().rows();
    const Eigen::Index cols = taps.front().cols();
    Eigen::MatrixXd out(rows, cols * static_cast<Eigen::Index>(taps.size()));
    for (std::size_t k = 0; k < taps.size(); ++k)
        out.middleCols(static_cast<Eigen::Index>(k) * cols, cols) = taps[taps.size() - 1 - k];
    return out;
}

void check_clm_dims(const FirClm& clm) {
    if (clm.T < 1 || static_cast<int>(clm.R.size()) != clm.T ||
        static_cast<int>(clm.M.size()) != clm.T)
        throw std::invalid_argument("FirClm: need T >= 1 and exactly T taps in R and M");
    const int n = clm.n();
    const int m = clm.m();
    for (const auto& Rk : clm.R)
        if (Rk.rows() != n || Rk.cols() != n) throw std::invalid_argument("FirClm: R tap shape mismatch");
    for (const auto& Mk : clm.M)
        if (Mk.rows() != m || Mk.cols() != n) throw std::invalid_argument("FirClm: M tap shape mismatch");
}

}  // namespace

Eigen::MatrixXd FirClm::r_concat() const { return concat_reversed(R); }
Eigen::MatrixXd FirClm::m_concat() const { return concat_reversed(M); }

BlendClm BlendClm::single(FirClm clm, double eta, ProjectionKind kind) {
    BlendClm b;
    b.zones.push_back(std::move(clm));
    b.radii.push_back(eta);
    b.projection = kind;
    b.check_structure();
    return b;
}

void BlendClm::check_structure() const {
    if (zones.empty() || zones.size() != radii.size())
        throw std::invalid_argument("BlendClm: need one radius per zone");
    double prev = 0.0;
    for (double eta : radii) {
        if (!(eta >= prev)) throw std::invalid_argument("BlendClm: radii must be nondecreasing from 0");
        prev = eta;
    }
    for (const auto& z : zones) {
        check_clm_dims(z);
        if (z.n() != n() || z.m() != m() || z.T != T())
            throw std::invalid_argument("BlendClm: zones must share n, m, T");
    }
}

double ValidationReport::max_residual() const {
    double r = std::max(r1_residual, closure_residual);
    for (double v : recursion_residuals) r = std::max(r, v);
    return r;
}

ValidationReport validate_fir_clm(const FirClm& clm, const LinearSystem& sys, double tol,
                                  ClosureKind closure) {
    check_clm_dims(clm);
    if (clm.n() != sys.n() || clm.m() != sys.m())
        throw std::invalid_argument("validate_fir_clm: CLM dimensions do not match plant");

    ValidationReport rep;
    const int n = sys.n();
    rep.r1_residual = (clm.R[0] - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    rep.recursion_residuals.reserve(clm.T - 1);
    for (int k = 0; k + 1 < clm.T; ++k) {
        Eigen::MatrixXd res = clm.R[k + 1] - sys.A * clm.R[k] - sys.B * clm.M[k];
        rep.recursion_residuals.push_back(res.cwiseAbs().maxCoeff());
    }
    if (closure == ClosureKind::coupled) {
        rep.closure_residual = (sys.A * clm.R[clm.T - 1] + sys.B * clm.M[clm.T - 1]).cwiseAbs().maxCoeff();
    } else {
        rep.closure_residual = std::max(clm.R[clm.T - 1].cwiseAbs().maxCoeff(),
                                        clm.M[clm.T - 1].cwiseAbs().maxCoeff());
    }
    rep.pass = rep.max_residual() <= tol;
    return rep;
}

SignalPair clm_convolve(const FirClm& clm, const std::vector<Eigen::VectorXd>& w) {
    check_clm_dims(clm);
    const int n = clm.n();
    const int m = clm.m();
    SignalPair out;
    out.x.reserve(w.size());
    out.u.reserve(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) {
        if (w[t].size() != n) throw std::invalid_argument("clm_convolve: disturbance dimension mismatch");
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
        const int kmax = std::min<int>(static_cast<int>(t) + 1, clm.T);
        for (int k = 1; k <= kmax; ++k) {
            x.noalias() += clm.R[k - 1] * w[t + 1 - k];
            u.noalias() += clm.M[k - 1] * w[t + 1 - k];
        }
        out.x.push_back(std::move(x));
        out.u.push_back(std::move(u));
    }
    return out;
}

SignalPair blend_apply(const BlendClm& blend, const std::vector<Eigen::VectorXd>& w) {
    blend.check_structure();
    const int n = blend.n();
    const int m = blend.m();
    const int T = blend.T();
    const int N = blend.N();

    // Zone pieces per time step, then the same FIR convolution per zone.
    std::vector<std::vector<Eigen::VectorXd>> pieces(w.size());
    for (std::size_t t = 0; t < w.size(); ++t) {
        if (w[t].size() != n) throw std::invalid_argument("blend_apply: disturbance dimension mismatch");
        pieces[t] = zone_decompose(blend.radii, blend.projection, w[t]);
    }

    SignalPair out;
    out.x.assign(w.size(), Eigen::VectorXd::Zero(n));
    out.u.assign(w.size(), Eigen::VectorXd::Zero(m));
    for (std::size_t t = 0; t < w.size(); ++t) {
        const int kmax = std::min<int>(static_cast<int>(t) + 1, T);
        for (int i = 0; i < N; ++i) {
            for (int k = 1; k <= kmax; ++k) {
                out.x[t].noalias() += blend.zones[i].R[k - 1] * pieces[t + 1 - k][i];
                out.u[t].noalias() += blend.zones[i].M[k - 1] * pieces[t + 1 - k][i];
            }
        }
    }
    return out;
}

double peak_gain(const Eigen::MatrixXd& concat) {
    if (concat.size() == 0) throw std::invalid_argument("peak_gain: empty matrix");
    return concat.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace sls
