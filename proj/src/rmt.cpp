#include "kacrice/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "kacrice/assumptions.hpp"
#include "kacrice/errors.hpp"

namespace kacrice {

EnsembleSpec EnsembleSpec::from_json(const nlohmann::json& j) {
    EnsembleSpec s;
    std::string tag = j.value("ensemble", j.value("tag", std::string("goe")));
    std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (tag == "goe") {
        s.tag = Ensemble::GOE;
    } else if (tag == "goi") {
        s.tag = Ensemble::GOI;
        s.c = j.value("c", 0.0);
    } else if (tag == "sgoi") {
        s.tag = Ensemble::SGOI;
        s.d1 = j.value("d1", 0.0);
        s.d2 = j.value("d2", 0.0);
        s.d3 = j.value("d3", 0.0);
    } else {
        throw std::invalid_argument("unknown ensemble: " + tag);
    }
    s.n = j.value("n", 1);
    if (s.n < 1) throw std::invalid_argument("ensemble size must be >= 1");
    return s;
}

nlohmann::json EnsembleSpec::to_json() const {
    switch (tag) {
        case Ensemble::GOE: return {{"ensemble", "goe"}, {"n", n}};
        case Ensemble::GOI: return {{"ensemble", "goi"}, {"n", n}, {"c", c}};
        case Ensemble::SGOI: return {{"ensemble", "sgoi"}, {"n", n}, {"d1", d1}, {"d2", d2}, {"d3", d3}};
    }
    return {};
}

bool EnsembleSpec::nondegenerate() const {
    switch (tag) {
        case Ensemble::GOE: return true;
        case Ensemble::GOI: return c > -1.0 / n;
        case Ensemble::SGOI: return n == 1 ? 1.0 + d1 + 2.0 * d2 + d3 > 0.0 : sgoi_nondeg(n, d1, d2, d3);
    }
    return false;
}

SgoiDecomposition default_decomposition(double d1, double d2) {
    if (d1 >= 0.0) return {(d1 * d1 + d1 * d2) / (1.0 + d1), 0.0};
    return {0.0, d1};
}

namespace {

void require_symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("eig_sym needs a square matrix");
    const double scale = m.norm();
    if ((m - m.transpose()).norm() > 1e-12 * std::max(scale, 1e-300))
        throw std::invalid_argument("eig_sym needs a symmetric matrix");
}

[[noreturn]] void solver_failure(const Eigen::MatrixXd& m) {
    std::ostringstream msg;
    msg << "symmetric eigensolver failed: size=" << m.rows() << " norm=" << m.norm()
        << " finite=" << (m.allFinite() ? "yes" : "no");
    throw NumericError(msg.str());
}

/// Square root of a positive semidefinite matrix: Cholesky when possible, else a clamped
/// eigen square root. Throws ConditionError when an eigenvalue is clearly negative.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov, const std::string& what) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) solver_failure(cov);
    const double tol = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues()(0) < -tol) {
        std::ostringstream msg;
        msg << what << ": covariance is not positive semidefinite (min eigenvalue " << es.eigenvalues()(0) << ")";
        throw ConditionError(msg.str());
    }
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

void fill_offdiagonal(Eigen::MatrixXd& m, RngStream& rng) {
    const double s = std::sqrt(0.5);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = i + 1; j < m.cols(); ++j) m(i, j) = m(j, i) = s * rng.normal();
}

Eigen::VectorXd normals(int k, RngStream& rng) {
    Eigen::VectorXd z(k);
    for (int i = 0; i < k; ++i) z(i) = rng.normal();
    return z;
}

}  // namespace

SymEig eig_sym(const Eigen::MatrixXd& m) {
    require_symmetric(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite()) solver_failure(m);
    return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::VectorXd eigvals_sym(const Eigen::MatrixXd& m) {
    require_symmetric(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite()) solver_failure(m);
    return es.eigenvalues();
}

Eigen::MatrixXd sample_goe(int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("matrix size must be >= 1");
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = rng.normal();
    fill_offdiagonal(m, rng);
    return m;
}

GoiSampler::GoiSampler(int n, double c) : n_(n), c_(c) {
    if (n < 1) throw std::invalid_argument("matrix size must be >= 1");
    if (!(c > -1.0 / n)) {
        std::ostringstream msg;
        msg << "degenerate ensemble: GOI(c) of size " << n << " needs c > " << -1.0 / n << ", got " << c;
        throw ConditionError(msg.str());
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(n, n, c);
    cov.diagonal().array() += 1.0;
    factor_ = psd_factor(cov, "GOI diagonal");
}

Eigen::MatrixXd GoiSampler::operator()(RngStream& rng) const {
    Eigen::MatrixXd m(n_, n_);
    m.diagonal() = factor_ * normals(n_, rng);
    fill_offdiagonal(m, rng);
    return m;
}

Eigen::MatrixXd sample_goi(int n, double c, RngStream& rng) { return GoiSampler(n, c)(rng); }

Eigen::MatrixXd sample_goi_shifted(int n, double c, RngStream& rng) {
    if (!(c > 0.0)) throw std::invalid_argument("the shifted GOE path needs c > 0");
    Eigen::MatrixXd m = sample_goe(n, rng);
    m.diagonal().array() += std::sqrt(c) * rng.normal();
    return m;
}

SgoiSampler::SgoiSampler(int n, double d1, double d2, double d3, std::optional<SgoiDecomposition> decomp)
    : n_(n), d1_(d1), d2_(d2), d3_(d3) {
    if (n < 1) throw std::invalid_argument("matrix size must be >= 1");
    EnsembleSpec spec{Ensemble::SGOI, n, 0.0, d1, d2, d3};
    if (!spec.nondegenerate()) {
        std::ostringstream msg;
        msg << "degenerate ensemble: SGOI(" << d1 << ", " << d2 << ", " << d3 << ") of size " << n;
        throw ConditionError(msg.str());
    }
    decomp_ = decomp.value_or(default_decomposition(d1, d2));
    if (n == 1) {
        factor_ = Eigen::MatrixXd::Constant(1, 1, std::sqrt(1.0 + d1 + 2.0 * d2 + d3));
        return;
    }
    factor_ = psd_factor(xi_matrix(n, d1, d2, d3, decomp_.varsigma, decomp_.vartheta), "SGOI decomposition");
}

Eigen::MatrixXd SgoiSampler::operator()(RngStream& rng) const {
    Eigen::MatrixXd m(n_, n_);
    if (n_ == 1) {
        m(0, 0) = factor_(0, 0) * rng.normal();
        return m;
    }
    // (zeta_1, zeta_2, GOE_11, ..., GOE_{n-1,n-1})
    const Eigen::VectorXd g = factor_ * normals(n_ + 1, rng);
    m(0, 0) = g(0);
    for (int i = 1; i < n_; ++i) m(i, i) = g(i + 1) + g(1);
    fill_offdiagonal(m, rng);
    return m;
}

Eigen::MatrixXd sample_sgoi(int n, double d1, double d2, double d3, RngStream& rng,
                            std::optional<SgoiDecomposition> decomp) {
    return SgoiSampler(n, d1, d2, d3, decomp)(rng);
}

SgoiDirectSampler::SgoiDirectSampler(int n, double d1, double d2, double d3) : n_(n) {
    EnsembleSpec spec{Ensemble::SGOI, n, 0.0, d1, d2, d3};
    if (!spec.nondegenerate()) throw ConditionError("degenerate ensemble: SGOI parameters");
    factor_ = psd_factor(theta_matrix(n, d1, d2, d3), "SGOI diagonal");
}

Eigen::MatrixXd SgoiDirectSampler::operator()(RngStream& rng) const {
    Eigen::MatrixXd m(n_, n_);
    m.diagonal() = factor_ * normals(n_, rng);
    fill_offdiagonal(m, rng);
    return m;
}

double sgoi_second_moment(double d1, double d2, double d3, int i, int j, int k, int l) {
    auto dl = [](int a, int b) { return a == b ? 1.0 : 0.0; };
    return 0.5 * (dl(i, k) * dl(j, l) + dl(i, l) * dl(j, k)) + d1 * dl(i, j) * dl(k, l) +
           d2 * (dl(i, 0) * dl(j, 0) * dl(k, l) + dl(k, 0) * dl(l, 0) * dl(i, j)) +
           d3 * dl(i, 0) * dl(j, 0) * dl(k, 0) * dl(l, 0);
}

double goi_eig_logdensity(double c, const Eigen::VectorXd& lambdas) {
    const int n = static_cast<int>(lambdas.size());
    if (n < 1) throw std::invalid_argument("need at least one eigenvalue");
    if (!(c > -1.0 / n)) throw ConditionError("degenerate ensemble: GOI density needs c > -1/n");
    for (int i = 1; i < n; ++i)
        if (lambdas(i) < lambdas(i - 1)) return -std::numeric_limits<double>::infinity();
    double logk = 0.5 * n * std::numbers::ln2;
    for (int i = 1; i <= n; ++i) logk += std::lgamma(0.5 * i);
    const double sum = lambdas.sum();
    double v = -logk - 0.5 * std::log1p(n * c) - 0.5 * lambdas.squaredNorm() + c * sum * sum / (2.0 * (1.0 + n * c));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) v += std::log(std::abs(lambdas(i) - lambdas(j)));
    return v;
}

namespace {

// Running mean and variance of a product of two coordinates.
struct Moment {
    double sum = 0.0, sumsq = 0.0;
    long count = 0;
    void add(double v) {
        sum += v;
        sumsq += v * v;
        ++count;
    }
    double mean() const { return sum / count; }
    double se() const {
        const double m = mean();
        const double var = std::max(sumsq / count - m * m, 0.0);
        return std::sqrt(var / count);
    }
    double z(double target) const {
        const double s = se();
        return s > 0.0 ? (mean() - target) / s : (mean() == target ? 0.0 : INFINITY);
    }
};

}  // namespace

bool CornerCheckReport::passed(double z) const {
    return std::abs(slope_z()) < z && residual_max_z < z && window_mean_max_z < z && window_cov_max_z < z;
}

nlohmann::json CornerCheckReport::to_json() const {
    return {{"n", n},
            {"d1", d1},
            {"d2", d2},
            {"d3", d3},
            {"y", y},
            {"samples", samples},
            {"window_samples", window_samples},
            {"c", c_theory},
            {"slope_theory", slope_theory},
            {"slope_estimate", slope_estimate},
            {"slope_se", slope_se},
            {"slope_z", slope_z()},
            {"residual_max_z", residual_max_z},
            {"residual_max_abs", residual_max_abs},
            {"window_mean_max_z", window_mean_max_z},
            {"window_cov_max_z", window_cov_max_z},
            {"passed", passed()}};
}

CornerCheckReport conditional_corner_check(int n, double d1, double d2, double d3, double y, long sample_count,
                                           std::uint64_t seed, double window) {
    if (n < 2) throw std::invalid_argument("the corner check needs n >= 2");
    if (sample_count < 100) throw std::invalid_argument("the corner check needs at least 100 samples");
    CornerCheckReport rep;
    rep.n = n;
    rep.d1 = d1;
    rep.d2 = d2;
    rep.d3 = d3;
    rep.y = y;
    rep.samples = sample_count;
    const double var1 = 1.0 + d1 + 2.0 * d2 + d3;
    if (!(var1 > 0.0)) throw ConditionError("the corner entry has nonpositive variance");
    rep.slope_theory = (d1 + d2) / var1;
    rep.c_theory = (d1 + d1 * d3 - d2 * d2) / var1;

    const SgoiSampler sampler(n, d1, d2, d3);
    const int m = n - 1;
    std::vector<std::pair<int, int>> entries;
    for (int a = 0; a < m; ++a)
        for (int b = a; b < m; ++b) entries.emplace_back(a, b);
    const int E = static_cast<int>(entries.size());

    std::vector<Moment> resid(E * E), win(E * E), win_mean(m), with_corner(E);
    double sxy = 0.0, sxx = 0.0;
    std::vector<double> xs, bs;
    xs.reserve(sample_count);
    bs.reserve(sample_count);
    const double centre = y * std::sqrt(var1), half = window * std::sqrt(var1);

    RngStream rng(seed, 0);
    Eigen::VectorXd r(E);
    for (long t = 0; t < sample_count; ++t) {
        const Eigen::MatrixXd M = sampler(rng);
        const double x = M(0, 0);
        const double bbar = M.bottomRightCorner(m, m).diagonal().mean();
        sxy += x * bbar;
        sxx += x * x;
        xs.push_back(x);
        bs.push_back(bbar);
        for (int e = 0; e < E; ++e) {
            const auto [a, b] = entries[e];
            r(e) = M(a + 1, b + 1) - (a == b ? rep.slope_theory * x : 0.0);
        }
        for (int e = 0; e < E; ++e) {
            with_corner[e].add(r(e) * x);
            for (int f = e; f < E; ++f) resid[e * E + f].add(r(e) * r(f));
        }
        if (std::abs(x - centre) <= half) {
            ++rep.window_samples;
            for (int e = 0; e < E; ++e) {
                if (entries[e].first == entries[e].second) win_mean[entries[e].first].add(r(e));
                for (int f = e; f < E; ++f) win[e * E + f].add(r(e) * r(f));
            }
        }
    }

    rep.slope_estimate = sxy / sxx;
    double rss = 0.0;
    for (size_t t = 0; t < xs.size(); ++t) {
        const double e = bs[t] - rep.slope_estimate * xs[t];
        rss += e * e;
    }
    rep.slope_se = std::sqrt(rss / (xs.size() - 1) / sxx);

    const double c = rep.c_theory;
    for (int e = 0; e < E; ++e) {
        rep.residual_max_z = std::max(rep.residual_max_z, std::abs(with_corner[e].z(0.0)));
        for (int f = e; f < E; ++f) {
            const auto [a, b] = entries[e];
            const auto [k, l] = entries[f];
            const double target = sgoi_second_moment(c, 0.0, 0.0, a, b, k, l);
            const Moment& all = resid[e * E + f];
            rep.residual_max_z = std::max(rep.residual_max_z, std::abs(all.z(target)));
            rep.residual_max_abs = std::max(rep.residual_max_abs, std::abs(all.mean() - target));
            if (win[e * E + f].count > 1)
                rep.window_cov_max_z = std::max(rep.window_cov_max_z, std::abs(win[e * E + f].z(target)));
        }
    }
    for (const auto& wm : win_mean)
        if (wm.count > 1) rep.window_mean_max_z = std::max(rep.window_mean_max_z, std::abs(wm.z(0.0)));
    return rep;
}

}  // namespace kacrice
