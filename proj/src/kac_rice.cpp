#include "kacrice/kac_rice.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "kacrice/assumptions.hpp"
#include "kacrice/errors.hpp"
#include "kacrice/local_params.hpp"
#include "kacrice/parallel.hpp"
#include "kacrice/quadrature.hpp"
#include "kacrice/rmt.hpp"
#include "kacrice/rng.hpp"
#include "kacrice/special.hpp"

namespace kacrice {

using nlohmann::json;
using Eigen::VectorXd;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTail = 8.0;           // Gaussian truncation in standard deviations
constexpr double kSingular = 1e-12;     // |lambda + shift| below this is a pathological sample
constexpr double kDiscardFraction = 1e-6;
constexpr int kHermiteNodes = 32;

double tail_mass() { return 2.0 * normal_sf(kTail); }

double parse_bound(const std::string& s, double infinite) {
    if (s.empty()) return infinite;
    std::string t = s;
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    if (t.empty()) return infinite;
    if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    if (t == "-inf" || t == "-infinity") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != t.size()) throw std::invalid_argument("bad interval bound '" + s + "'");
    return v;
}

json bound_json(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    return v;
}

// E(q - Z^2)^+ for standard normal Z
double excess_pos(double q) {
    if (q <= 0.0) return 0.0;
    const double t = std::sqrt(q);
    return (q - 1.0) * (1.0 - 2.0 * normal_sf(t)) + 2.0 * t * normal_pdf(t);
}

// E(Z^2 - q)^+
double excess_neg(double q) {
    if (q <= 0.0) return 1.0 - q;
    const double t = std::sqrt(q);
    if (t > 38.0) return 0.0;
    const double mills = std::sqrt(kPi / 2.0) * erfcx(t / std::numbers::sqrt2);
    return 2.0 * normal_pdf(t) * (t + (1.0 - q) * mills);
}

// E(t + eps)^+ = t Phi(t) + phi(t), stable in the left tail
double hinge(double t) {
    if (t > 0.0) return t + hinge(-t);
    const double a = -t;
    if (a > 30.0) {
        const double x = 1.0 / (a * a);
        return normal_pdf(a) * x * (1.0 - 3.0 * x + 15.0 * x * x - 105.0 * x * x * x);
    }
    if (a > 8.0) return normal_pdf(a) * (1.0 - a * std::sqrt(kPi / 2.0) * erfcx(a / std::numbers::sqrt2));
    return t * normal_cdf(t) + normal_pdf(t);
}

double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

// |P| b E(X^+), |P| b E(X^-) for X ~ N(Q/P, b^2); Q/P is never formed when P is tiny
std::pair<double, double> split_abs_normal(double Q, double P, double b) {
    const double t = Q / (P * b);
    if (!std::isfinite(t) || std::abs(t) > 1e8) {
        const double s = (P > 0 ? Q : -Q);
        return {std::max(s, 0.0), std::max(-s, 0.0)};
    }
    const double A = std::abs(P) * b;
    return {A * hinge(t), A * hinge(-t)};
}

double log_gamma_half(int N) { return std::lgamma(0.5 * N); }

// 2^{N/2} (-D''(0))^{(N-1)/2} / (Gamma(N/2) D'(0)^{N/2})
double shell_constant(int N, double Dp0, double Dpp0) {
    return std::exp(0.5 * N * std::log(2.0) + 0.5 * (N - 1) * std::log(-Dpp0) - log_gamma_half(N) -
                    0.5 * N * std::log(Dp0));
}

// (-2D''(0))^{N/2} / (pi^{(N+1)/2} D'(0)^{N/2}), per unit volume
double er_constant(int N, double Dp0, double Dpp0) {
    return std::exp(0.5 * N * std::log(-2.0 * Dpp0 / Dp0) - 0.5 * (N + 1) * std::log(kPi));
}

void require_field(const StructureFunction& f, int N) {
    if (N < 1) throw std::invalid_argument("dimension N must be >= 1");
    if (N > f.max_dimension())
        throw ConditionError("field '" + f.name() + "' is not a structure function on R^" + std::to_string(N) +
                             " (max dimension " + std::to_string(f.max_dimension()) + ")");
    const ConditionReport smooth = check_smoothness(f);
    if (!smooth.holds()) throw ConditionError("smoothness check failed: " + smooth.to_json().dump());
}

void require_shell(double R1, double R2) {
    if (!(R1 >= 0.0 && R2 > R1 && std::isfinite(R2)))
        throw std::invalid_argument("shell needs 0 <= R1 < R2 < inf");
}

std::vector<double> probe_radii(double R1, double R2) {
    std::vector<double> r;
    const double lo = R1 * R1, hi = R2 * R2;
    const int n = 40;
    for (int i = 0; i <= n; ++i) r.push_back(lo + (hi - lo) * i / n);
    if (R1 == 0.0) {
        r.erase(r.begin());
        for (int i = 0; i < 20; ++i) r.push_back(hi * std::pow(10.0, -6.0 + 6.0 * i / 20.0));
    }
    std::sort(r.begin(), r.end());
    return r;
}

void require_report(const ConditionReport& rep, const std::string& what) {
    if (rep.holds()) return;
    throw ConditionError(what + " " + to_string(rep.status) + " on the probed radii: " + rep.to_json().dump());
}

CountTable make_table(Method m, int N, const VectorXd& value, const VectorXd& error, const VectorXd& mc_se,
                      const CountDiagnostics& diag) {
    CountTable t;
    auto fill = [&](CountResult& r, int comp, std::optional<int> k) {
        r.method = m;
        r.N = N;
        r.index = k;
        r.estimate = std::max(value(comp), 0.0);
        const double qe = error.size() > comp ? error(comp) : 0.0;
        const double me = mc_se.size() > comp ? mc_se(comp) : 0.0;
        r.std_error = std::sqrt(qe * qe + me * me);
        r.diagnostics = diag;
        r.diagnostics.quad_error = qe;
        r.diagnostics.mc_std_error = me;
    };
    fill(t.total, 0, std::nullopt);
    t.by_index.resize(N + 1);
    for (int k = 0; k <= N; ++k) fill(t.by_index[k], k + 1, k);
    return t;
}

// ---------------------------------------------------------------------------
// Common random numbers shared by every quadrature node.

struct Batch {
    int n = 0;      // matrix size
    long size = 0;
    std::vector<double> u_uniform, u_normal, y_normal;
    std::vector<double> lambdas;  // size * n, ascending per sample
    std::vector<double> diag_mean;
    std::vector<double> z_sq;     // size * n

    const double* lam(long i) const { return lambdas.data() + i * n; }
    const double* zz(long i) const { return z_sq.data() + i * n; }
};

Batch make_batch(int n, long size, std::uint64_t seed, const Workers& workers) {
    Batch b;
    b.n = n;
    b.size = size;
    b.u_uniform.resize(size);
    b.u_normal.resize(size);
    b.y_normal.resize(size);
    b.lambdas.resize(size * n);
    b.diag_mean.resize(size);
    b.z_sq.resize(size * n);
    const long chunk = 4096;
    const long chunks = (size + chunk - 1) / chunk;
    workers.for_each(static_cast<std::size_t>(chunks), [&](std::size_t c) {
        for (long i = static_cast<long>(c) * chunk; i < std::min(size, static_cast<long>(c + 1) * chunk); ++i) {
            // one stream per sample: doubling the batch keeps the first half
            RngStream rng(seed, static_cast<std::uint64_t>(i));
            b.u_uniform[i] = rng.uniform();
            b.u_normal[i] = normal_quantile(b.u_uniform[i]);
            b.y_normal[i] = rng.normal();
            if (n > 0) {
                const Eigen::MatrixXd M = sample_goe(n, rng);
                b.diag_mean[i] = M.trace() / n;
                VectorXd ev;
                if (n == 1) {
                    ev = VectorXd::Constant(1, M(0, 0));
                } else if (n == 2) {
                    const double mid = 0.5 * (M(0, 0) + M(1, 1));
                    const double half = std::hypot(0.5 * (M(0, 0) - M(1, 1)), M(0, 1));
                    ev.resize(2);
                    ev << mid - half, mid + half;
                } else {
                    ev = eigvals_sym(M);
                }
                for (int j = 0; j < n; ++j) b.lambdas[i * n + j] = ev(j);
                for (int j = 0; j < n; ++j) {
                    const double z = rng.normal();
                    b.z_sq[i * n + j] = z * z;
                }
            }
        }
    });
    return b;
}

// u/sigma_Y for sample i inside [a, b] (standardized), given the uniform draw
struct Piece {
    double a, b, mass, cdf_a, sf_b;
    bool full;
};

std::vector<Piece> standard_pieces(const ValueSet& E, double sigma) {
    std::vector<Piece> out;
    for (const auto& iv : E.intervals()) {
        Piece p;
        p.a = iv.lo / sigma;
        p.b = iv.hi / sigma;
        p.full = std::isinf(iv.lo) && std::isinf(iv.hi);
        p.cdf_a = normal_cdf(p.a);
        p.sf_b = normal_sf(p.b);
        // mass computed on the side that keeps precision
        p.mass = p.a >= 0.0 ? normal_sf(p.a) - p.sf_b : normal_cdf(p.b) - p.cdf_a;
        if (p.mass > 0.0) out.push_back(p);
    }
    return out;
}

double piece_quantile(const Piece& p, double uniform, double normal) {
    if (p.full) return normal;
    if (p.a >= 0.0) {
        const double z = -normal_quantile(normal_sf(p.a) - uniform * p.mass);
        return std::clamp(z, p.a, p.b);
    }
    return std::clamp(normal_quantile(p.cdf_a + uniform * p.mass), p.a, p.b);
}

// layout of the vector integrand: [total, k=0..N] followed by the same per batch group
struct McLayout {
    int N, groups;
    int comps() const { return N + 2; }
    int size() const { return comps() * (1 + groups); }
};

struct McOutcome {
    VectorXd value, quad_error, mc_se;
    int evaluations = 0;
    bool converged = true;
    long samples = 0;
    bool target_met = true;
    long discarded = 0;
};

void finish_groups(const McLayout& L, const VectorXd& integral, VectorXd& se) {
    se = VectorXd::Zero(L.comps());
    const int G = L.groups;
    for (int c = 0; c < L.comps(); ++c) {
        double m = 0.0;
        for (int g = 0; g < G; ++g) m += integral((1 + g) * L.comps() + c);
        m /= G;
        double v = 0.0;
        for (int g = 0; g < G; ++g) {
            const double d = integral((1 + g) * L.comps() + c) - m;
            v += d * d;
        }
        se(c) = std::sqrt(v / (G - 1) / G);
    }
}

enum class ShellKind { GOI, GOE };

struct ShellJob {
    const StructureFunction* f;
    int N;
    ValueSet E;
    double R1, R2;
    Budget budget;
    ShellKind kind;
};

// Monte Carlo inner expectation at radius rho; u and y are drawn from the same batch
VectorXd shell_mc_node(const ShellJob& job, const Batch& batch, const McLayout& L, double rho,
                       std::atomic<long>& discarded) {
    const int N = job.N;
    const int n = N - 1;
    const LocalParams p = local_params(*job.f, rho, 0.0);
    const double s = std::sqrt(-p.Dpp0);
    const auto pieces = standard_pieces(job.E, p.sigmaY);
    VectorXd out = VectorXd::Zero(L.size());
    if (pieces.empty()) return out;

    const double kappa = n > 0 ? std::sqrt(1.0 + n * p.c) - 1.0 : 0.0;
    const double ysd_goi = std::sqrt(p.zeta1_variance());
    const double ysd_goe = std::sqrt((2.0 * s * s - p.beta * p.beta) / (4.0 * s * s));
    const double b = std::sqrt(p.b2);
    if (job.kind == ShellKind::GOE && !(p.b2 > 0.0 && ysd_goe > 0.0))
        throw ConditionError("radial conditions fail at rho=" + std::to_string(rho) + " (b^2=" + std::to_string(p.b2) + ")");

    std::vector<double> x(std::max(n, 1)), pre(n + 1), suf(n + 1);
    VectorXd acc = VectorXd::Zero(L.comps());
    const long B = batch.size;
    long bad = 0;
    for (long i = 0; i < B; ++i) {
        const int g = static_cast<int>((i * L.groups) / B);
        const double* lam = batch.lam(i);
        const double* z2 = batch.zz(i);
        for (const Piece& pc : pieces) {
            const double u = p.sigmaY * piece_quantile(pc, batch.u_uniform[i], batch.u_normal[i]);
            double total = 0.0;
            int k_plus = 0;
            double v_plus = 0.0, v_minus = 0.0;
            bool singular = false;
            if (job.kind == ShellKind::GOI) {
                const double y = ysd_goi * batch.y_normal[i];
                const double a = p.m1_per_u * u + 2.0 * s * y;
                const double shift = p.m3(u, y) + kappa * batch.diag_mean[i];
                int below = 0;
                for (int j = 0; j < n; ++j) {
                    x[j] = lam[j] + shift;
                    if (std::abs(x[j]) < kSingular) singular = true;
                    below += x[j] < 0.0;
                }
                if (singular) {
                    ++bad;
                    continue;
                }
                pre[0] = 1.0;
                for (int j = 0; j < n; ++j) pre[j + 1] = pre[j] * x[j];
                suf[n] = 1.0;
                for (int j = n - 1; j >= 0; --j) suf[j] = suf[j + 1] * x[j];
                double Q = a * pre[n];
                double eta = a;
                for (int l = 0; l < n; ++l) {
                    Q -= s * z2[l] * pre[l] * suf[l + 1];
                    eta -= s * z2[l] / x[l];
                }
                total = std::abs(Q);
                k_plus = below + (eta < 0.0 ? 1 : 0);
                v_plus = total;
            } else {
                const double y = -p.m2_per_u * u / (2.0 * s) + ysd_goe * batch.y_normal[i];
                const double abar = p.abar(u, y);
                int below = 0;
                for (int j = 0; j < n; ++j) {
                    x[j] = lam[j] - y;
                    if (std::abs(x[j]) < kSingular) singular = true;
                    below += x[j] < 0.0;
                }
                if (singular) {
                    ++bad;
                    continue;
                }
                pre[0] = 1.0;
                for (int j = 0; j < n; ++j) pre[j + 1] = pre[j] * x[j];
                suf[n] = 1.0;
                for (int j = n - 1; j >= 0; --j) suf[j] = suf[j + 1] * x[j];
                double Q = abar * pre[n];
                for (int l = 0; l < n; ++l) Q -= s * z2[l] * pre[l] * suf[l + 1];
                const auto [plus, minus] = split_abs_normal(Q, pre[n], b);
                total = plus + minus;
                k_plus = below;
                v_plus = plus;
                v_minus = minus;
            }
            const double w = pc.mass;
            acc(0) += w * total;
            acc(1 + k_plus) += w * v_plus;
            if (v_minus != 0.0) acc(2 + k_plus) += w * v_minus;
            const int base = (1 + g) * L.comps();
            out(base) += w * total;
            out(base + 1 + k_plus) += w * v_plus;
            if (v_minus != 0.0) out(base + 2 + k_plus) += w * v_minus;
        }
    }
    if (bad > kDiscardFraction * B)
        throw NumericError("too many singular samples (" + std::to_string(bad) + " of " + std::to_string(B) +
                           ") at rho=" + std::to_string(rho));
    discarded += bad;
    out.head(L.comps()) = acc / static_cast<double>(B);
    for (int g = 0; g < L.groups; ++g) {
        const long lo = (g * B + L.groups - 1) / L.groups;
        const long hi = ((g + 1) * B + L.groups - 1) / L.groups;
        out.segment((1 + g) * L.comps(), L.comps()) /= static_cast<double>(std::max(hi - lo, 1L));
    }
    const double scale = shell_constant(N, p.Dp0, p.Dpp0) * std::pow(rho, N - 1);
    return out * scale;
}

McOutcome run_shell_mc(const ShellJob& job) {
    const Workers workers{std::max(job.budget.threads, 1)};
    McLayout L{job.N, std::max(job.budget.batches, 2)};
    McOutcome res;
    long B = std::max<long>(job.budget.mc_samples, 2L * L.groups);
    while (true) {
        const Batch batch = make_batch(job.N - 1, B, job.budget.seed, workers);
        std::atomic<long> discarded{0};
        QuadOptions opt;
        opt.rel_tol = job.budget.rel_tol;
        opt.control_components = L.comps();
        opt.workers = &workers;
        const QuadResult q = integrate_gk15(
            [&](double rho) { return shell_mc_node(job, batch, L, rho, discarded); }, job.R1, job.R2, opt);
        res.value = q.value.head(L.comps());
        res.quad_error = q.error.head(L.comps());
        finish_groups(L, q.value, res.mc_se);
        res.evaluations = q.evaluations;
        res.converged = q.converged;
        res.samples = B;
        res.discarded = discarded.load();
        res.target_met = res.mc_se(0) <= job.budget.rel_tol * std::abs(res.value(0)) / 3.0;
        if (res.target_met || 2 * B > job.budget.mc_max_samples) break;
        B *= 2;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Deterministic inner expectations for N <= 2.

// last argument: relative tolerance for the innermost integral
using InnerFn = std::function<VectorXd(const LocalParams&, double u, double y, double tol)>;

// nodes deep in a Gaussian tail carry little weight, so their inner integrals may be coarser
double relaxed(double tol, double standardized) {
    return std::min(0.05, tol * std::exp(0.5 * standardized * standardized));
}

// GOI form, N = 1: the Hessian is the scalar m1 + 2 s y
VectorXd goi_inner_n1(const LocalParams& p, double u, double y) {
    const double a = p.m1_per_u * u + 2.0 * std::sqrt(-p.Dpp0) * y;
    VectorXd v(3);
    v << std::abs(a), std::max(a, 0.0), std::max(-a, 0.0);
    return v;
}

// GOI form, N = 2: x = lambda + m3 ~ N(m3, 1 + c), Q = a x - s Z^2
VectorXd goi_inner_n2(const LocalParams& p, double u, double y, double tol) {
    const double s = std::sqrt(-p.Dpp0);
    const double a = p.m1_per_u * u + 2.0 * s * y;
    const double mean = p.m3(u, y);
    const double sd = std::sqrt(1.0 + p.c);
    auto side = [&](double lo, double hi, bool positive) {
        VectorXd acc = VectorXd::Zero(4);
        if (!(lo < hi)) return acc;
        QuadOptions opt;
        opt.rel_tol = tol;
        opt.max_intervals = 100;
        opt.control_components = 1;
        const QuadResult r = integrate_gk15(
            [&](double x) {
                const double w = normal_pdf((x - mean) / sd) / sd;
                const double q = a * x / s;
                const double plus = s * excess_pos(q), minus = s * excess_neg(q);
                VectorXd v = VectorXd::Zero(4);
                v(0) = w * (plus + minus);
                // eta' = (a x - s Z^2) / x; for x < 0 the block already has one negative eigenvalue
                if (positive) {
                    v(1) = w * plus;
                    v(2) = w * minus;
                } else {
                    v(3) = w * plus;
                    v(2) = w * minus;
                }
                return v;
            },
            lo, hi, opt);
        return VectorXd(r.value);
    };
    const double lo = mean - kTail * sd, hi = mean + kTail * sd;
    return side(lo, std::min(hi, 0.0), false) + side(std::max(lo, 0.0), hi, true);
}

// GOE form, N = 1: X ~ N(abar, b^2)
VectorXd goe_inner_n1(const LocalParams& p, double u, double y) {
    const double b = std::sqrt(p.b2);
    const double t = p.abar(u, y) / b;
    VectorXd v(3);
    v << b * (hinge(t) + hinge(-t)), b * hinge(t), b * hinge(-t);
    return v;
}

// GOE form, N = 2: lambda ~ N(0, 1), Z ~ N(0, 1). With p = lambda - y the Hessian corner times p is
// A - s Z^2, A ~ N(abar p, p^2 b^2); Z is integrated in closed form, the Gaussian part of A by Hermite.
VectorXd goe_inner_n2(const LocalParams& p, double u, double y, double tol) {
    const double s = std::sqrt(-p.Dpp0);
    const double b = std::sqrt(p.b2);
    const double abar = p.abar(u, y);
    const GaussRule& gh = gauss_hermite_normal(kHermiteNodes);
    auto side = [&](double lo, double hi, bool above) {
        VectorXd acc = VectorXd::Zero(4);
        if (!(lo < hi)) return acc;
        QuadOptions opt;
        opt.rel_tol = tol;
        opt.max_intervals = 100;
        opt.control_components = 1;
        const QuadResult r = integrate_gk15(
            [&](double lam) {
                const double P = lam - y;
                double pos = 0.0, neg = 0.0;
                for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
                    const double q = (abar * P + std::abs(P) * b * gh.nodes[i]) / s;
                    pos += gh.weights[i] * excess_pos(q);
                    neg += gh.weights[i] * excess_neg(q);
                }
                // a positive corner times p: for p < 0 the roles swap
                const double plus = s * (above ? pos : neg), minus = s * (above ? neg : pos);
                const double w = normal_pdf(lam);
                VectorXd v = VectorXd::Zero(4);
                v(0) = w * (plus + minus);
                const int L = above ? 0 : 1;
                v(1 + L) = w * plus;
                v(2 + L) = w * minus;
                return v;
            },
            lo, hi, opt);
        return VectorXd(r.value);
    };
    return side(-kTail, std::min(y, kTail), false) + side(std::max(y, -kTail), kTail, true);
}

struct DetOutcome {
    VectorXd value, error;
    int evaluations = 0;
    bool converged = true;
};

DetOutcome run_shell_det(const ShellJob& job) {
    const int N = job.N;
    const int comps = N + 2;
    const double tol = job.budget.rel_tol;
    const double tol_u = tol / 4.0, tol_y = tol / 8.0, tol_x = std::max(tol / 16.0, 1e-10);
    InnerFn inner;
    if (job.kind == ShellKind::GOI)
        inner = N == 1 ? InnerFn([](const LocalParams& p, double u, double y, double) { return goi_inner_n1(p, u, y); })
                       : InnerFn(goi_inner_n2);
    else
        inner = N == 1 ? InnerFn([](const LocalParams& p, double u, double y, double) { return goe_inner_n1(p, u, y); })
                       : InnerFn(goe_inner_n2);

    const Workers workers{std::max(job.budget.threads, 1)};
    auto rho_integrand = [&](double rho) -> VectorXd {
        const LocalParams p = local_params(*job.f, rho, 0.0);
        const double s = std::sqrt(-p.Dpp0);
        double ysd;
        if (job.kind == ShellKind::GOI) {
            ysd = std::sqrt(p.zeta1_variance());
        } else {
            if (!(p.b2 > 0.0))
                throw ConditionError("radial conditions fail at rho=" + std::to_string(rho) + " (b^2=" + std::to_string(p.b2) + ")");
            ysd = std::sqrt((2.0 * s * s - p.beta * p.beta) / (4.0 * s * s));
        }
        VectorXd sum = VectorXd::Zero(comps);
        for (const auto& iv : job.E.intervals()) {
            const double a = std::max(iv.lo / p.sigmaY, -kTail), b = std::min(iv.hi / p.sigmaY, kTail);
            if (!(a < b)) continue;
            QuadOptions ou;
            ou.rel_tol = tol_u;
            ou.max_intervals = 100;
            ou.control_components = 1;
            const QuadResult ru = integrate_gk15(
                [&](double v) {
                    const double u = p.sigmaY * v;
                    const double ymean = job.kind == ShellKind::GOI ? 0.0 : -p.m2_per_u * u / (2.0 * s);
                    QuadOptions oy;
                    oy.rel_tol = relaxed(tol_y, v);
                    oy.max_intervals = 100;
                    oy.control_components = 1;
                    const QuadResult ry = integrate_gk15(
                        [&](double w) {
                            return VectorXd(normal_pdf(w) * inner(p, u, ymean + ysd * w, relaxed(tol_x, std::hypot(v, w))));
                        }, -kTail, kTail, oy);
                    return VectorXd(normal_pdf(v) * ry.value);
                },
                a, b, ou);
            sum += ru.value;
        }
        return sum * (shell_constant(N, p.Dp0, p.Dpp0) * std::pow(rho, N - 1));
    };
    QuadOptions opt;
    opt.rel_tol = tol;
    opt.control_components = comps;
    opt.workers = &workers;
    const QuadResult q = integrate_gk15(rho_integrand, job.R1, job.R2, opt);
    return {q.value, q.error, q.evaluations, q.converged};
}

CountTable run_shell(const ShellJob& job, Method method) {
    const int N = job.N;
    CountDiagnostics diag;
    diag.truncation_sigmas = kTail;
    if (job.E.empty()) {
        diag.inner = "empty value set";
        return make_table(method, N, VectorXd::Zero(N + 2), VectorXd::Zero(N + 2), VectorXd(), diag);
    }
    if (N <= 2 && !job.budget.force_mc) {
        const DetOutcome d = run_shell_det(job);
        diag.inner = "quadrature";
        diag.evaluations = d.evaluations;
        diag.quad_converged = d.converged;
        diag.neglected_mass = 3.0 * tail_mass();  // u, y and the innermost variable
        return make_table(method, N, d.value, d.error, VectorXd(), diag);
    }
    const McOutcome m = run_shell_mc(job);
    diag.inner = "monte-carlo";
    diag.evaluations = m.evaluations;
    diag.quad_converged = m.converged;
    diag.mc_samples = m.samples;
    diag.mc_target_met = m.target_met;
    diag.discarded_samples = m.discarded;
    diag.truncation_sigmas = 0.0;  // u and y are sampled, not truncated
    return make_table(method, N, m.value, m.quad_error, m.mc_se, diag);
}

// ---------------------------------------------------------------------------
// ER through the ordered GOI(1/2) density: integrating y out of the GOE form gives
// sqrt(pi) E_{GOI(1/2)}[prod |mu_j| 1{exactly k of the mu_j are negative}].

double ordered_goi_half(int n, int k, double tol) {
    const double edge = 16.0;
    VectorXd mu(n);
    std::function<double(int, double)> level = [&](int j, double prev) -> double {
        if (j == n) {
            double prod = 1.0;
            for (int i = 0; i < n; ++i) prod *= std::abs(mu(i));
            return prod * std::exp(goi_eig_logdensity(0.5, mu));
        }
        const double lo = j < k ? std::max(prev, -edge) : std::max(prev, 0.0);
        const double hi = j < k ? 0.0 : edge;
        if (!(lo < hi)) return 0.0;
        return integrate_gk15_scalar(
            [&](double v) {
                mu(j) = v;
                return level(j + 1, v);
            },
            lo, hi, tol, 0.0, 400);
    };
    return level(0, -edge);
}

}  // namespace

// ---------------------------------------------------------------------------

ValueSet ValueSet::real_line() {
    ValueSet v;
    v.add(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    return v;
}

void ValueSet::add(double lo, double hi) {
    if (std::isnan(lo) || std::isnan(hi)) throw std::invalid_argument("interval bound is NaN");
    if (!(lo < hi)) {
        if (lo == hi) return;
        throw std::invalid_argument("interval with lo > hi");
    }
    parts_.push_back({lo, hi});
    std::sort(parts_.begin(), parts_.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> merged;
    for (const auto& iv : parts_) {
        if (!merged.empty() && iv.lo <= merged.back().hi)
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        else
            merged.push_back(iv);
    }
    parts_ = std::move(merged);
}

bool ValueSet::is_real_line() const {
    return parts_.size() == 1 && std::isinf(parts_[0].lo) && parts_[0].lo < 0 && std::isinf(parts_[0].hi);
}

ValueSet ValueSet::parse(const std::string& text) {
    std::string t = text;
    t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char ch) { return std::isspace(ch); }), t.end());
    if (t == "all" || t == "R" || t == "real") return real_line();
    ValueSet v;
    if (t == "none" || t.empty()) return v;
    std::stringstream ss(t);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        const auto colon = piece.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("value-set piece '" + piece + "' needs lo:hi");
        v.add(parse_bound(piece.substr(0, colon), -std::numeric_limits<double>::infinity()),
              parse_bound(piece.substr(colon + 1), std::numeric_limits<double>::infinity()));
    }
    return v;
}

ValueSet ValueSet::from_json(const json& j) {
    if (j.is_string()) return parse(j.get<std::string>());
    if (!j.is_array()) throw std::invalid_argument("value set must be a string or an array of [lo, hi]");
    ValueSet v;
    auto bound = [](const json& b, double inf) {
        if (b.is_null()) return inf;
        if (b.is_string()) return parse_bound(b.get<std::string>(), inf);
        if (b.is_number()) return b.get<double>();
        throw std::invalid_argument("bad interval bound in value set");
    };
    for (const auto& iv : j) {
        if (!iv.is_array() || iv.size() != 2) throw std::invalid_argument("value set entries are [lo, hi]");
        v.add(bound(iv[0], -std::numeric_limits<double>::infinity()), bound(iv[1], std::numeric_limits<double>::infinity()));
    }
    return v;
}

json ValueSet::to_json() const {
    json a = json::array();
    for (const auto& iv : parts_) a.push_back({bound_json(iv.lo), bound_json(iv.hi)});
    return a;
}

std::string ValueSet::to_string() const {
    if (is_real_line()) return "all";
    if (parts_.empty()) return "none";
    std::string out;
    for (const auto& iv : parts_) {
        if (!out.empty()) out += ",";
        auto b = [](double x) {
            if (std::isinf(x)) return std::string(x > 0 ? "inf" : "-inf");
            std::ostringstream o;
            o.precision(17);
            o << x;
            return o.str();
        };
        out += b(iv.lo) + ":" + b(iv.hi);
    }
    return out;
}

std::string to_string(Method m) {
    switch (m) {
        case Method::ShellGOI: return "shell-goi";
        case Method::ER: return "er";
        case Method::ShellGOE: return "shell-goe";
        case Method::ClosedFormN2: return "closed-form-n2";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    std::string t;
    for (char ch : s)
        if (ch != '-' && ch != '_') t += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (t == "shellgoi") return Method::ShellGOI;
    if (t == "er") return Method::ER;
    if (t == "shellgoe") return Method::ShellGOE;
    if (t == "closedformn2" || t == "closedform") return Method::ClosedFormN2;
    throw std::invalid_argument("unknown method '" + s + "' (shell-goi, er, shell-goe, closed-form-n2)");
}

json Budget::to_json() const {
    return {{"rel_tol", rel_tol}, {"mc_samples", mc_samples}, {"mc_max_samples", mc_max_samples},
            {"batches", batches}, {"seed", seed}, {"threads", threads}, {"force_mc", force_mc}};
}

Budget Budget::from_json(const json& j) { return from_json(j, Budget{}); }

Budget Budget::from_json(const json& j, Budget b) {
    if (!j.is_object()) throw std::invalid_argument("budget must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k == "rel_tol") b.rel_tol = it->get<double>();
        else if (k == "mc_samples") b.mc_samples = it->get<long>();
        else if (k == "mc_max_samples") b.mc_max_samples = it->get<long>();
        else if (k == "batches") b.batches = it->get<int>();
        else if (k == "seed") b.seed = it->get<std::uint64_t>();
        else if (k == "threads") b.threads = it->get<int>();
        else if (k == "force_mc") b.force_mc = it->get<bool>();
        else throw std::invalid_argument("unknown budget key '" + k + "'");
    }
    if (!(b.rel_tol > 0.0 && b.rel_tol < 1.0)) throw std::invalid_argument("rel_tol must be in (0, 1)");
    if (b.mc_samples < 100) throw std::invalid_argument("mc_samples must be >= 100");
    if (b.batches < 2) throw std::invalid_argument("batches must be >= 2");
    b.mc_max_samples = std::max(b.mc_max_samples, b.mc_samples);
    return b;
}

json CountDiagnostics::to_json() const {
    json j{{"inner", inner}, {"quad_error", quad_error}, {"evaluations", evaluations}, {"quad_converged", quad_converged}};
    if (mc_samples > 0) {
        j["mc_samples"] = mc_samples;
        j["mc_std_error"] = mc_std_error;
        j["mc_target_met"] = mc_target_met;
        j["discarded_samples"] = discarded_samples;
    }
    if (truncation_sigmas > 0.0) {
        j["truncation_sigmas"] = truncation_sigmas;
        j["neglected_mass"] = neglected_mass;
    }
    return j;
}

json CountResult::to_json() const {
    return {{"method", kacrice::to_string(method)},
            {"N", N},
            {"index", index ? json(*index) : json("total")},
            {"estimate", estimate},
            {"std_error", std_error},
            {"diagnostics", diagnostics.to_json()}};
}

const CountResult& CountTable::pick(std::optional<int> k) const {
    if (!k) return total;
    if (*k < 0 || *k >= static_cast<int>(by_index.size()))
        throw std::invalid_argument("index must lie in 0.." + std::to_string(by_index.size() - 1));
    return by_index[*k];
}

json CountTable::to_json() const {
    json idx = json::array();
    for (const auto& r : by_index) idx.push_back(r.to_json());
    return {{"total", total.to_json()}, {"by_index", idx}};
}

double shell_volume(int N, double R1, double R2) {
    require_shell(R1, R2);
    const double unit = std::exp(0.5 * N * std::log(kPi) - std::lgamma(0.5 * N + 1.0));
    return unit * (std::pow(R2, N) - std::pow(R1, N));
}

CountTable crt_er_all(const StructureFunction& f, int N, double volume, const Budget& budget) {
    require_field(f, N);
    if (!(volume > 0.0 && std::isfinite(volume))) throw std::invalid_argument("volume must be positive and finite");
    const double Dp0 = f.eval(0.0, 1), Dpp0 = f.eval(0.0, 2);
    const double pref = er_constant(N, Dp0, Dpp0) * volume * std::sqrt(kPi);
    CountDiagnostics diag;
    VectorXd value = VectorXd::Zero(N + 2), error = VectorXd::Zero(N + 2), mc_se;

    if (N <= 3 && !budget.force_mc) {
        diag.inner = "quadrature";
        const double tol = std::min(1e-8, budget.rel_tol * 1e-3);
        for (int k = 0; k <= N; ++k) {
            value(k + 1) = pref * ordered_goi_half(N, k, tol);
            error(k + 1) = tol * value(k + 1);
        }
        value(0) = value.tail(N + 1).sum();
        error(0) = tol * value(0);
        return make_table(Method::ER, N, value, error, VectorXd(), diag);
    }

    // Monte Carlo: y ~ N(0, 1/2) and GOE(N) eigenvalues from one batch
    const Workers workers{std::max(budget.threads, 1)};
    McLayout L{N, std::max(budget.batches, 2)};
    long B = std::max<long>(budget.mc_samples, 2L * L.groups);
    while (true) {
        const Batch batch = make_batch(N, B, budget.seed, workers);
        VectorXd sums = VectorXd::Zero(L.size());
        for (long i = 0; i < B; ++i) {
            const double y = batch.y_normal[i] / std::numbers::sqrt2;
            const double* lam = batch.lam(i);
            double prod = 1.0;
            int below = 0;
            for (int j = 0; j < N; ++j) {
                const double m = lam[j] + y;
                prod *= std::abs(m);
                below += m < 0.0;
            }
            const int g = static_cast<int>((i * L.groups) / B);
            sums(0) += prod;
            sums(1 + below) += prod;
            sums((1 + g) * L.comps()) += prod;
            sums((1 + g) * L.comps() + 1 + below) += prod;
        }
        sums.head(L.comps()) /= static_cast<double>(B);
        for (int g = 0; g < L.groups; ++g) {
            const long lo = (g * B + L.groups - 1) / L.groups;
            const long hi = ((g + 1) * B + L.groups - 1) / L.groups;
            sums.segment((1 + g) * L.comps(), L.comps()) /= static_cast<double>(std::max(hi - lo, 1L));
        }
        sums *= pref;
        finish_groups(L, sums, mc_se);
        value = sums.head(L.comps());
        diag.mc_samples = B;
        diag.mc_target_met = mc_se(0) <= budget.rel_tol * value(0) / 3.0;
        if (diag.mc_target_met || 2 * B > budget.mc_max_samples) break;
        B *= 2;
    }
    diag.inner = "monte-carlo";
    return make_table(Method::ER, N, value, VectorXd::Zero(N + 2), mc_se, diag);
}

CountResult crt_total_er(const StructureFunction& f, int N, double volume, const Budget& budget) {
    return crt_er_all(f, N, volume, budget).total;
}

CountResult crt_index_er(const StructureFunction& f, int N, int k, double volume, const Budget& budget) {
    if (k < 0 || k > N) throw std::invalid_argument("index must lie in 0..N");
    return crt_er_all(f, N, volume, budget).by_index[k];
}

CountTable crt_shell_goi_all(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                             const Budget& budget) {
    require_field(f, N);
    require_shell(R1, R2);
    require_report(check_nondeg(f, N, probe_radii(R1, R2)), "nondegeneracy");
    return run_shell(ShellJob{&f, N, E, R1, R2, budget, ShellKind::GOI}, Method::ShellGOI);
}

CountResult crt_shell_goi(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                          std::optional<int> k, const Budget& budget) {
    if (k && (*k < 0 || *k > N)) throw std::invalid_argument("index must lie in 0..N");
    return crt_shell_goi_all(f, N, E, R1, R2, budget).pick(k);
}

CountTable crt_shell_goe_all(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                             const Budget& budget) {
    require_field(f, N);
    require_shell(R1, R2);
    require_report(check_assumption3(f, probe_radii(R1, R2)), "radial GOE conditions");
    return run_shell(ShellJob{&f, N, E, R1, R2, budget, ShellKind::GOE}, Method::ShellGOE);
}

CountResult crt_shell_goe(const StructureFunction& f, int N, const ValueSet& E, double R1, double R2,
                          std::optional<int> k, const Budget& budget) {
    if (k && (*k < 0 || *k > N)) throw std::invalid_argument("index must lie in 0..N");
    return crt_shell_goe_all(f, N, E, R1, R2, budget).pick(k);
}

std::array<double, 3> closed_form_n2(const StructureFunction& f) {
    require_field(f, 2);
    const double ratio = -f.eval(0.0, 2) / (std::sqrt(3.0) * kPi * f.eval(0.0, 1));
    return {ratio, 2.0 * ratio, ratio};
}

CountTable crt_closed_form_n2(const StructureFunction& f, double volume) {
    if (!(volume > 0.0 && std::isfinite(volume))) throw std::invalid_argument("volume must be positive and finite");
    const auto v = closed_form_n2(f);
    VectorXd value(4);
    value << (v[0] + v[1] + v[2]) * volume, v[0] * volume, v[1] * volume, v[2] * volume;
    CountDiagnostics diag;
    diag.inner = "closed-form";
    return make_table(Method::ClosedFormN2, 2, value, VectorXd::Zero(4), VectorXd(), diag);
}

double eta_prime(double m1, double y, double m3, const VectorXd& lambdas, const VectorXd& Z, double Dpp0) {
    if (lambdas.size() != Z.size()) throw std::invalid_argument("lambdas and Z differ in length");
    if (!(Dpp0 < 0.0)) throw std::domain_error("D''(0) must be negative");
    const double s = std::sqrt(-Dpp0);
    double v = m1 + 2.0 * s * y;
    for (Eigen::Index l = 0; l < lambdas.size(); ++l) {
        const double x = lambdas(l) + m3;
        if (std::abs(x) < kSingular)
            throw NumericError("singular sample: |lambda + m3| = " + std::to_string(std::abs(x)));
        v -= s * Z(l) * Z(l) / x;
    }
    return v;
}

double shell_goi_bracket(double m1, double y, double m3, const VectorXd& lambdas, const VectorXd& Z, double Dpp0) {
    if (lambdas.size() != Z.size()) throw std::invalid_argument("lambdas and Z differ in length");
    if (!(Dpp0 < 0.0)) throw std::domain_error("D''(0) must be negative");
    const double s = std::sqrt(-Dpp0);
    const Eigen::Index n = lambdas.size();
    double all = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) all *= lambdas(j) + m3;
    double v = (m1 + 2.0 * s * y) * all;
    for (Eigen::Index l = 0; l < n; ++l) {
        double others = 1.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != l) others *= lambdas(j) + m3;
        v -= s * Z(l) * Z(l) * others;
    }
    return v;
}

CountRequest CountRequest::from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("count request must be a JSON object");
    CountRequest r;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const json& v = *it;
        if (k == "field") {
            r.field = v.is_string() ? lookup(v.get<std::string>()) : StructureFunction::from_json(v);
        } else if (k == "N") {
            r.N = v.get<int>();
        } else if (k == "method") {
            r.method = parse_method(v.get<std::string>());
        } else if (k == "volume") {
            r.volume = v.get<double>();
        } else if (k == "shell") {
            if (!v.is_array() || v.size() != 2) throw std::invalid_argument("shell is [R1, R2]");
            r.shell = std::array<double, 2>{v[0].get<double>(), v[1].get<double>()};
        } else if (k == "E") {
            r.E = ValueSet::from_json(v);
        } else if (k == "index") {
            if (v.is_string() && v.get<std::string>() == "total")
                r.index.reset();
            else
                r.index = v.get<int>();
        } else if (k == "budget") {
            r.budget = Budget::from_json(v, r.budget);
        } else if (k == "schema") {
            if (v.get<int>() != 1) throw std::invalid_argument("unsupported request schema");
        } else {
            throw std::invalid_argument("unknown request key '" + k + "'");
        }
    }
    if (!j.contains("field")) throw std::invalid_argument("request needs a field");
    return r;
}

json CountRequest::to_json() const {
    json j{{"schema", 1},
           {"field", field.descriptor()},
           {"N", N},
           {"method", kacrice::to_string(method)},
           {"E", E.to_json()},
           {"index", index ? json(*index) : json("total")},
           {"budget", budget.to_json()}};
    if (volume) j["volume"] = *volume;
    if (shell) j["shell"] = {(*shell)[0], (*shell)[1]};
    return j;
}

CountTable evaluate(const CountRequest& r) {
    if (r.index && (*r.index < 0 || *r.index > r.N)) throw std::invalid_argument("index must lie in 0..N");
    switch (r.method) {
        case Method::ER:
        case Method::ClosedFormN2: {
            if (!r.E.is_real_line()) throw std::invalid_argument(to_string(r.method) + " needs E = all reals");
            double vol;
            if (r.volume)
                vol = *r.volume;
            else if (r.shell)
                vol = shell_volume(r.N, (*r.shell)[0], (*r.shell)[1]);
            else
                throw std::invalid_argument("request needs a volume or a shell");
            if (r.method == Method::ClosedFormN2) {
                if (r.N != 2) throw std::invalid_argument("closed-form-n2 needs N = 2");
                return crt_closed_form_n2(r.field, vol);
            }
            return crt_er_all(r.field, r.N, vol, r.budget);
        }
        case Method::ShellGOI:
        case Method::ShellGOE: {
            if (!r.shell) throw std::invalid_argument(to_string(r.method) + " needs a shell [R1, R2]");
            if (r.volume) throw std::invalid_argument("shell methods take a shell, not a volume");
            const auto [R1, R2] = *r.shell;
            return r.method == Method::ShellGOI ? crt_shell_goi_all(r.field, r.N, r.E, R1, R2, r.budget)
                                                : crt_shell_goe_all(r.field, r.N, r.E, R1, R2, r.budget);
        }
    }
    throw std::invalid_argument("unknown method");
}

}  // namespace kacrice
