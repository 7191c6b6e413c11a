#include "sls/disturbance.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <stdexcept>

#include "sls/projection.hpp"

namespace sls {

namespace {

constexpr double kQuadTol = 1e-12;
constexpr double kEntryTol = 1e-10;

double std_normal_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Integrates f over [a, b] split at the given interior breakpoints, adaptive
// Gauss-Kronrod on each panel.
template <typename F>
double integrate_panels(F&& f, double a, double b, const std::vector<double>& breaks,
                        double* err_out) {
    std::vector<double> pts{a};
    for (double p : breaks)
        if (p > a && p < b) pts.push_back(p);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());

    double total = 0.0, err_total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i + 1] <= pts[i]) continue;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
            f, pts[i], pts[i + 1], 12, kQuadTol, &err);
        err_total += err;
    }
    if (err_out) *err_out = err_total;
    return total;
}

// Scalar zone piece (P_{hi} - P_{lo})(w); saturation and radial coincide in 1-D.
double zone_piece(double w, double lo, double hi) { return sat(w, hi) - sat(w, lo); }

}  // namespace

DisturbanceModel DisturbanceModel::uniform(double eta_max) {
    if (eta_max <= 0) throw std::domain_error("uniform: eta_max must be positive");
    DisturbanceModel d;
    d.family_ = Family::uniform;
    d.eta_max_ = eta_max;
    d.check_normalization();
    return d;
}

DisturbanceModel DisturbanceModel::truncated_gaussian(double sigma, double eta_max) {
    if (sigma <= 0 || eta_max <= 0)
        throw std::domain_error("truncated_gaussian: sigma and eta_max must be positive");
    DisturbanceModel d;
    d.family_ = Family::truncated_gaussian;
    d.sigma_ = sigma;
    d.eta_max_ = eta_max;
    d.check_normalization();
    return d;
}

DisturbanceModel DisturbanceModel::clipped_gaussian(double sigma, double eta_max) {
    if (sigma <= 0 || eta_max <= 0)
        throw std::domain_error("clipped_gaussian: sigma and eta_max must be positive");
    DisturbanceModel d;
    d.family_ = Family::clipped_gaussian;
    d.sigma_ = sigma;
    d.eta_max_ = eta_max;
    const double tail = std_normal_cdf(-eta_max / sigma);
    d.atoms_ = {{-eta_max, tail}, {eta_max, tail}};
    d.check_normalization();
    return d;
}

DisturbanceModel DisturbanceModel::point_masses(std::vector<std::pair<double, double>> atoms,
                                                double eta_max) {
    if (eta_max <= 0) throw std::domain_error("point_masses: eta_max must be positive");
    DisturbanceModel d;
    d.family_ = Family::point_mass_list;
    d.eta_max_ = eta_max;
    d.atoms_ = std::move(atoms);
    double mass = 0.0, mean = 0.0;
    for (auto [w, p] : d.atoms_) {
        if (p < 0 || std::abs(w) > eta_max + 1e-12)
            throw std::domain_error("point_masses: atoms must lie in the support with mass >= 0");
        mass += p;
        mean += p * w;
    }
    if (std::abs(mass - 1.0) > 1e-8) throw std::domain_error("point_masses: masses must sum to 1");
    if (std::abs(mean) > 1e-10) throw std::domain_error("point_masses: distribution must be centered");
    return d;
}

double DisturbanceModel::density(double w) const {
    if (std::abs(w) > eta_max_) return 0.0;
    switch (family_) {
        case Family::uniform:
            return 0.5 / eta_max_;
        case Family::truncated_gaussian: {
            const double z = 2.0 * std_normal_cdf(eta_max_ / sigma_) - 1.0;
            return std_normal_pdf(w / sigma_) / (sigma_ * z);
        }
        case Family::clipped_gaussian:
            return std_normal_pdf(w / sigma_) / sigma_;
        case Family::point_mass_list:
            return 0.0;
    }
    return 0.0;
}

void DisturbanceModel::check_normalization() const {
    double atom_mass = 0.0;
    for (auto [w, p] : atoms_) atom_mass += p;
    double total = atom_mass;
    if (has_density()) {
        total += integrate_panels([this](double w) { return density(w); }, -eta_max_, eta_max_,
                                  {0.0}, nullptr);
    }
    if (std::abs(total - 1.0) > 1e-8)
        throw std::runtime_error("DisturbanceModel: density does not integrate to 1");
}

double DisturbanceModel::second_moment() const { return clipped_second_moment(eta_max_); }

double DisturbanceModel::clipped_second_moment(double eta) const {
    if (eta < 0) throw std::domain_error("clipped_second_moment: eta must be nonnegative");
    double total = 0.0;
    if (has_density()) {
        total += integrate_panels(
            [this, eta](double w) {
                const double c = sat(w, eta);
                return c * c * density(w);
            },
            -eta_max_, eta_max_, {-eta, 0.0, eta}, nullptr);
    }
    for (auto [w, p] : atoms_) {
        const double c = sat(w, eta);
        total += p * c * c;
    }
    return total;
}

double DisturbanceModel::sample(std::mt19937_64& rng) const {
    switch (family_) {
        case Family::uniform: {
            std::uniform_real_distribution<double> u(-eta_max_, eta_max_);
            return u(rng);
        }
        case Family::truncated_gaussian: {
            std::normal_distribution<double> g(0.0, sigma_);
            for (;;) {
                const double w = g(rng);
                if (std::abs(w) <= eta_max_) return w;
            }
        }
        case Family::clipped_gaussian: {
            std::normal_distribution<double> g(0.0, sigma_);
            return sat(g(rng), eta_max_);
        }
        case Family::point_mass_list: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            double r = u(rng);
            for (auto [w, p] : atoms_) {
                if (r < p) return w;
                r -= p;
            }
            return atoms_.back().first;
        }
    }
    throw std::logic_error("sample: unknown family");
}

AlphaMoments alpha_moments(const DisturbanceModel& dist, const std::vector<double>& radii) {
    const int N = static_cast<int>(radii.size());
    if (N < 1) throw std::domain_error("alpha_moments: need at least one radius");
    double prev = 0.0;
    for (double eta : radii) {
        if (!(eta >= prev)) throw std::domain_error("alpha_moments: radii must be nondecreasing");
        prev = eta;
    }
    if (radii.back() > dist.eta_max() + 1e-12)
        throw std::domain_error("alpha_moments: eta_N must not exceed the support bound");

    std::vector<double> breaks{0.0};
    for (double eta : radii) {
        breaks.push_back(eta);
        breaks.push_back(-eta);
    }

    AlphaMoments out;
    out.alpha = Eigen::MatrixXd::Zero(N, N);
    for (int i = 0; i < N; ++i) {
        const double lo_i = i == 0 ? 0.0 : radii[i - 1];
        for (int j = i; j < N; ++j) {
            const double lo_j = j == 0 ? 0.0 : radii[j - 1];
            double val = 0.0;
            if (dist.has_density()) {
                double err = 0.0;
                val += integrate_panels(
                    [&](double w) {
                        return zone_piece(w, lo_i, radii[i]) * zone_piece(w, lo_j, radii[j]) *
                               dist.density(w);
                    },
                    -dist.eta_max(), dist.eta_max(), breaks, &err);
                if (err > kEntryTol)
                    throw std::runtime_error("alpha_moments: quadrature error estimate " +
                                             std::to_string(err) + " above tolerance");
            }
            for (auto [w, p] : dist.atoms())
                val += p * zone_piece(w, lo_i, radii[i]) * zone_piece(w, lo_j, radii[j]);
            out.alpha(i, j) = val;
            out.alpha(j, i) = val;
        }
    }
    return out;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S, double neg_tol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
    if (eig.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigendecomposition failed");
    Eigen::VectorXd vals = eig.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals[i] < -neg_tol) throw std::domain_error("psd_sqrt: matrix has a negative eigenvalue");
        vals[i] = std::sqrt(std::max(vals[i], 0.0));
    }
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

SigmaW build_sigma_w(const AlphaMoments& alpha, int n) {
    if (n < 1) throw std::domain_error("build_sigma_w: n must be positive");
    const Eigen::MatrixXd root = psd_sqrt(alpha.alpha);
    const int N = alpha.N();
    SigmaW out;
    out.full = Eigen::MatrixXd::Zero(N * n, N * n);
    out.sqrt = Eigen::MatrixXd::Zero(N * n, N * n);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            out.full.block(i * n, j * n, n, n) = alpha.alpha(i, j) * I;
            out.sqrt.block(i * n, j * n, n, n) = root(i, j) * I;
        }
    }
    return out;
}

}  // namespace sls
