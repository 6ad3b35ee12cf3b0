#include "kacrice/rmt_verify.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "kacrice/assumptions.hpp"
#include "kacrice/quadrature.hpp"
#include "kacrice/special.hpp"

namespace kacrice {

nlohmann::json GofResult::to_json() const {
    nlohmann::json j{{"statistic", statistic}, {"p_value", p_value}, {"samples", samples}, {"passed", passed()}};
    if (dof > 0) j["dof"] = dof;
    return j;
}

nlohmann::json TensorCheck::to_json() const {
    return {{"samples", samples}, {"entries", entries}, {"max_abs_z", max_abs_z}, {"max_abs_diff", max_abs_diff},
            {"passed", passed()}};
}

nlohmann::json SignGridResult::to_json() const {
    return {{"tested", tested}, {"indeterminate", indeterminate}, {"disagreements", disagreements}};
}

double chi2_sf(double statistic, int dof) {
    if (dof < 1) throw std::invalid_argument("chi-squared needs dof >= 1");
    if (statistic <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

double kolmogorov_sf(double d, long n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lam = (sn + 0.12 + 0.11 / sn) * d;
    if (lam < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lam * lam);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

double goi2_cell_probability(double c, double a1, double b1, double a2, double b2) {
    const GaussRule& g = gauss_legendre(24);
    Eigen::VectorXd lam(2);
    double total = 0.0;
    const double h1 = 0.5 * (b1 - a1), m1 = 0.5 * (b1 + a1);
    for (size_t i = 0; i < g.nodes.size(); ++i) {
        const double x = m1 + h1 * g.nodes[i];
        const double lo = std::max(a2, x);
        if (lo >= b2) continue;
        const double h2 = 0.5 * (b2 - lo), m2 = 0.5 * (b2 + lo);
        double inner = 0.0;
        for (size_t j = 0; j < g.nodes.size(); ++j) {
            lam << x, m2 + h2 * g.nodes[j];
            inner += g.weights[j] * std::exp(goi_eig_logdensity(c, lam));
        }
        total += g.weights[i] * h2 * inner;
    }
    return h1 * total;
}

GofResult goi2_density_chi2(double c, long samples, std::uint64_t seed, int bins) {
    const double half = 4.5 * std::sqrt(1.0 + std::max(c, 0.0));
    const double width = 2.0 * half / bins;
    auto edge = [&](int i) { return -half + width * i; };

    std::vector<long> counts(bins * bins, 0);
    long outside = 0;
    const GoiSampler sampler(2, c);
    RngStream rng(seed, 0);
    for (long t = 0; t < samples; ++t) {
        const Eigen::VectorXd ev = eigvals_sym(sampler(rng));
        const int i = static_cast<int>(std::floor((ev(0) + half) / width));
        const int j = static_cast<int>(std::floor((ev(1) + half) / width));
        if (i < 0 || j < 0 || i >= bins || j >= bins)
            ++outside;
        else
            ++counts[i * bins + j];
    }

    double stat = 0.0, pooled_expected = 0.0, inside_prob = 0.0;
    long pooled_observed = outside;
    int cells = 0;
    for (int i = 0; i < bins; ++i) {
        for (int j = i; j < bins; ++j) {
            const double p = goi2_cell_probability(c, edge(i), edge(i + 1), edge(j), edge(j + 1));
            inside_prob += p;
            const double expected = p * samples;
            const long observed = counts[i * bins + j];
            if (expected < 5.0) {
                pooled_expected += expected;
                pooled_observed += observed;
                continue;
            }
            stat += (observed - expected) * (observed - expected) / expected;
            ++cells;
        }
        // the ordering puts nothing below the diagonal
        for (int j = 0; j < i; ++j) pooled_observed += counts[i * bins + j];
    }
    pooled_expected += std::max(1.0 - inside_prob, 0.0) * samples;
    if (pooled_expected > 0.0) {
        stat += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) / pooled_expected;
        ++cells;
    }
    GofResult res;
    res.statistic = stat;
    res.dof = cells - 1;
    res.samples = samples;
    res.p_value = chi2_sf(stat, res.dof);
    return res;
}

GofResult goi1_ks(double c, long samples, std::uint64_t seed) {
    const GoiSampler sampler(1, c);
    RngStream rng(seed, 0);
    std::vector<double> x(samples);
    for (long t = 0; t < samples; ++t) x[t] = sampler(rng)(0, 0);
    std::sort(x.begin(), x.end());
    const double sd = std::sqrt(1.0 + c);
    double d = 0.0;
    for (long t = 0; t < samples; ++t) {
        const double F = normal_cdf(x[t] / sd);
        d = std::max({d, F - static_cast<double>(t) / samples, static_cast<double>(t + 1) / samples - F});
    }
    GofResult res;
    res.statistic = d;
    res.samples = samples;
    res.p_value = kolmogorov_sf(d, samples);
    return res;
}

namespace {

template <class Sampler, class Target>
TensorCheck tensor_check(int n, long samples, RngStream& rng, Sampler&& draw, Target&& target) {
    std::vector<std::pair<int, int>> entries;
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) entries.emplace_back(a, b);
    const int E = static_cast<int>(entries.size());
    std::vector<double> sum(E * E, 0.0), sumsq(E * E, 0.0);
    Eigen::VectorXd v(E);
    for (long t = 0; t < samples; ++t) {
        const Eigen::MatrixXd M = draw(rng);
        for (int e = 0; e < E; ++e) v(e) = M(entries[e].first, entries[e].second);
        for (int e = 0; e < E; ++e)
            for (int f = e; f < E; ++f) {
                const double p = v(e) * v(f);
                sum[e * E + f] += p;
                sumsq[e * E + f] += p * p;
            }
    }
    TensorCheck res;
    res.samples = samples;
    for (int e = 0; e < E; ++e)
        for (int f = e; f < E; ++f) {
            const double mean = sum[e * E + f] / samples;
            const double var = std::max(sumsq[e * E + f] / samples - mean * mean, 0.0);
            const double se = std::sqrt(var / samples);
            const double tgt = target(entries[e].first, entries[e].second, entries[f].first, entries[f].second);
            res.max_abs_diff = std::max(res.max_abs_diff, std::abs(mean - tgt));
            res.max_abs_z = std::max(res.max_abs_z, se > 0.0 ? std::abs(mean - tgt) / se : (mean == tgt ? 0.0 : INFINITY));
            ++res.entries;
        }
    return res;
}

}  // namespace

TensorCheck sgoi_covariance_check(int n, double d1, double d2, double d3, long samples, std::uint64_t seed,
                                  SgoiPath path, std::optional<SgoiDecomposition> decomp) {
    RngStream rng(seed, 0);
    auto target = [&](int i, int j, int k, int l) { return sgoi_second_moment(d1, d2, d3, i, j, k, l); };
    if (path == SgoiPath::Direct) {
        const SgoiDirectSampler s(n, d1, d2, d3);
        return tensor_check(n, samples, rng, [&](RngStream& g) { return s(g); }, target);
    }
    const SgoiSampler s(n, d1, d2, d3, decomp);
    return tensor_check(n, samples, rng, [&](RngStream& g) { return s(g); }, target);
}

TensorCheck goi_invariance_check(int n, double c, long samples, std::uint64_t seed) {
    RngStream rot(seed, 1);
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) G(i, j) = rot.normal();
    const Eigen::MatrixXd V = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
    const GoiSampler s(n, c);
    RngStream rng(seed, 0);
    return tensor_check(
        n, samples, rng, [&](RngStream& g) { return Eigen::MatrixXd(V * s(g) * V.transpose()); },
        [&](int i, int j, int k, int l) { return sgoi_second_moment(c, 0.0, 0.0, i, j, k, l); });
}

SignGridResult sgoi_sign_grid(int count, std::uint64_t seed) {
    RngStream rng(seed, 0);
    SignGridResult res;
    for (int t = 0; t < count; ++t) {
        const int n = 2 + static_cast<int>(rng.uniform() * 5.0);
        const double d1 = -1.5 + 3.0 * rng.uniform();
        const double d2 = -1.5 + 3.0 * rng.uniform();
        const double d3 = -1.5 + 3.0 * rng.uniform();
        const Eigen::MatrixXd T = theta_matrix(n, d1, d2, d3);
        const double e = eigvals_sym(T)(0) / T.norm();
        ++res.tested;
        if (std::abs(e) < kIndeterminateBand || std::abs(sgoi_margin(n, d1, d2, d3)) < kIndeterminateBand) {
            ++res.indeterminate;
            continue;
        }
        if ((e > 0.0) != sgoi_nondeg(n, d1, d2, d3)) ++res.disagreements;
    }
    return res;
}

}  // namespace kacrice
