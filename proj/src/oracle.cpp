#include "kacrice/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kacrice/errors.hpp"
#include "kacrice/parallel.hpp"

namespace kacrice {

using Eigen::VectorXd;
using nlohmann::json;

Lattice Lattice::covering(int N, double half_width, double h, double angle) {
    if (N != 1 && N != 2) throw std::invalid_argument("simulation supports N = 1 or 2");
    if (!(h > 0.0) || !(half_width > 0.0)) throw std::invalid_argument("lattice needs h > 0 and a positive width");
    Lattice l;
    l.N = N;
    l.h = h;
    l.m = static_cast<int>(std::ceil(half_width / h - 1e-9));
    l.angle = angle;
    return l;
}

long Lattice::size() const { return N == 1 ? per_axis() : static_cast<long>(per_axis()) * per_axis(); }

VectorXd Lattice::coords(long index) const {
    VectorXd x(N);
    const int n = per_axis();
    x(0) = (index % n - m) * h;
    if (N == 2) x(1) = (index / n - m) * h;
    return x;
}

VectorXd Lattice::to_physical(const VectorXd& p) const {
    if (N == 1 || angle == 0.0) return p;
    const double c = std::cos(angle), s = std::sin(angle);
    VectorXd q(2);
    q << c * p(0) - s * p(1), s * p(0) + c * p(1);
    return q;
}

VectorXd Lattice::position(long index) const { return to_physical(coords(index)); }

FieldSample FieldSample::subsample(int step) const {
    if (step < 1) throw std::invalid_argument("subsample step must be >= 1");
    FieldSample out = *this;
    out.lattice.h = lattice.h * step;
    out.lattice.m = lattice.m / step;
    const int n = lattice.per_axis(), k = out.lattice.per_axis();
    out.values.assign(out.lattice.size(), 0.0);
    auto src = [&](int i) { return lattice.m + (i - out.lattice.m) * step; };
    if (lattice.N == 1) {
        for (int i = 0; i < k; ++i) out.values[i] = values[src(i)];
    } else {
        for (int j = 0; j < k; ++j)
            for (int i = 0; i < k; ++i) out.values[i + k * j] = values[src(i) + static_cast<long>(n) * src(j)];
    }
    return out;
}

FieldSample tabulate(const Lattice& lattice, const std::function<double(const VectorXd&)>& fn) {
    FieldSample s;
    s.lattice = lattice;
    s.values.resize(lattice.size());
    for (long i = 0; i < lattice.size(); ++i) s.values[i] = fn(lattice.position(i));
    return s;
}

double pinned_covariance(const StructureFunction& f, const VectorXd& x, const VectorXd& y) {
    return 0.5 * (f.eval(x.squaredNorm()) + f.eval(y.squaredNorm()) - f.eval((x - y).squaredNorm()));
}

FieldSampler::FieldSampler(const StructureFunction& f, const Lattice& lattice) : lattice_(lattice) {
    if (lattice.N > f.max_dimension())
        throw ConditionError("field '" + f.name() + "' is not a structure function on R^" + std::to_string(lattice.N));
    std::vector<VectorXd> pts;
    for (long i = 0; i < lattice.size(); ++i) {
        VectorXd p = lattice.position(i);
        if (p.squaredNorm() > 0.0) {
            active_.push_back(i);
            pts.push_back(std::move(p));
        }
    }
    const long n = static_cast<long>(active_.size());
    Eigen::MatrixXd K(n, n);
    std::vector<double> Dnorm(n);
    for (long i = 0; i < n; ++i) Dnorm[i] = f.eval(pts[i].squaredNorm());
    for (long j = 0; j < n; ++j)
        for (long i = j; i < n; ++i) {
            const double v = 0.5 * (Dnorm[i] + Dnorm[j] - f.eval((pts[i] - pts[j]).squaredNorm()));
            K(i, j) = v;
            K(j, i) = v;
        }
    const double scale = K.trace() / n;
    for (double rel : {0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10}) {
        Eigen::LLT<Eigen::MatrixXd> llt(K.rows());
        Eigen::MatrixXd A = K;
        A.diagonal().array() += rel * scale;
        llt.compute(A);
        if (llt.info() == Eigen::Success) {
            chol_ = llt.matrixL();
            jitter_ = rel;
            return;
        }
    }
    const double worst = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K, Eigen::EigenvaluesOnly).eigenvalues()(0);
    throw ConditionError("lattice kernel is not positive semidefinite within jitter 1e-10: smallest eigenvalue " +
                         std::to_string(worst) + " (mean diagonal " + std::to_string(scale) + ")");
}

FieldSample FieldSampler::draw(RngStream& rng) const {
    FieldSample s;
    s.lattice = lattice_;
    s.seed = rng.seed();
    s.realization = rng.stream_id();
    VectorXd xi(chol_.rows());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
    const VectorXd v = chol_.triangularView<Eigen::Lower>() * xi;
    s.values.assign(lattice_.size(), 0.0);
    for (std::size_t i = 0; i < active_.size(); ++i) s.values[active_[i]] = v(static_cast<Eigen::Index>(i));
    return s;
}

FieldSample FieldSampler::draw(std::uint64_t seed, std::uint64_t realization) const {
    RngStream rng(seed, realization);
    return draw(rng);
}

FieldSample sample_field(const StructureFunction& f, int N, double half_width, double h, RngStream& rng) {
    return FieldSampler(f, Lattice::covering(N, half_width, h)).draw(rng);
}

json CriticalPoint::to_json() const {
    json loc = json::array();
    for (Eigen::Index i = 0; i < location.size(); ++i) loc.push_back(location(i));
    return {{"location", loc}, {"value", value}, {"index", index}, {"residual", residual}};
}

namespace {

// cubic Hermite basis on [0, 1] and its first two derivatives
struct Hermite {
    double A[2], B[2], dA[2], dB[2], ddA[2], ddB[2];
    explicit Hermite(double t) {
        const double t2 = t * t, t3 = t2 * t;
        A[0] = 2 * t3 - 3 * t2 + 1, A[1] = -2 * t3 + 3 * t2;
        B[0] = t3 - 2 * t2 + t, B[1] = t3 - t2;
        dA[0] = 6 * t2 - 6 * t, dA[1] = -6 * t2 + 6 * t;
        dB[0] = 3 * t2 - 4 * t + 1, dB[1] = 3 * t2 - 2 * t;
        ddA[0] = 12 * t - 6, ddA[1] = -12 * t + 6;
        ddB[0] = 6 * t - 4, ddB[1] = 6 * t - 2;
    }
};

struct Local {
    double value;
    VectorXd grad;
    Eigen::MatrixXd hess;
};

// Piecewise cubic (N = 1) or bicubic Hermite (N = 2) interpolant in lattice coordinates, with
// node derivatives from fourth-order central differences.
class Interpolant {
public:
    explicit Interpolant(const FieldSample& s) : s_(s), n_(s.lattice.per_axis()), h_(s.lattice.h) {
        const long size = s.lattice.size();
        fx_.assign(size, 0.0);
        fy_.assign(size, 0.0);
        fxy_.assign(size, 0.0);
        const int N = s.lattice.N;
        auto d4 = [&](const std::vector<double>& f, long i, long stride) {
            return (-f[i + 2 * stride] + 8 * f[i + stride] - 8 * f[i - stride] + f[i - 2 * stride]) / (12.0 * h_);
        };
        for (long i = 0; i < size; ++i) {
            if (!inner(i, 2)) continue;
            fx_[i] = d4(s.values, i, 1);
            if (N == 2) fy_[i] = d4(s.values, i, n_);
        }
        if (N == 2)
            for (long i = 0; i < size; ++i)
                if (inner(i, 4)) fxy_[i] = d4(fx_, i, n_);
    }

    int N() const { return s_.lattice.N; }
    double h() const { return h_; }
    int n() const { return n_; }
    double fx(long i) const { return fx_[i]; }
    double fy(long i) const { return fy_[i]; }

    // node i has `margin` neighbours on each side along every axis
    bool inner(long i, int margin) const {
        const int a = static_cast<int>(i % n_);
        if (a < margin || a >= n_ - margin) return false;
        if (N() == 2) {
            const int b = static_cast<int>(i / n_);
            if (b < margin || b >= n_ - margin) return false;
        }
        return true;
    }

    // lowest-corner cell containing lattice point p, or -1 outside the interpolation region
    long cell_of(const VectorXd& p) const {
        const int m = s_.lattice.m;
        long id = 0, stride = 1;
        for (int d = 0; d < N(); ++d) {
            const double u = p(d) / h_ + m;
            const int c = static_cast<int>(std::floor(u));
            if (c < kMargin || c >= n_ - 1 - kMargin) return -1;
            id += c * stride;
            stride *= n_;
        }
        return id;
    }

    Local eval(const VectorXd& p, long cell) const {
        const int m = s_.lattice.m;
        Local out{0.0, VectorXd::Zero(N()), Eigen::MatrixXd::Zero(N(), N())};
        const double tx = p(0) / h_ + m - static_cast<double>(cell % n_);
        const Hermite X(tx);
        if (N() == 1) {
            const long i0 = cell, i1 = cell + 1;
            const double f[2] = {s_.values[i0], s_.values[i1]}, g[2] = {fx_[i0] * h_, fx_[i1] * h_};
            for (int a = 0; a < 2; ++a) {
                out.value += f[a] * X.A[a] + g[a] * X.B[a];
                out.grad(0) += (f[a] * X.dA[a] + g[a] * X.dB[a]) / h_;
                out.hess(0, 0) += (f[a] * X.ddA[a] + g[a] * X.ddB[a]) / (h_ * h_);
            }
            return out;
        }
        const double ty = p(1) / h_ + m - static_cast<double>(cell / n_);
        const Hermite Y(ty);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const long i = cell + a + static_cast<long>(b) * n_;
                const double f = s_.values[i], gx = fx_[i] * h_, gy = fy_[i] * h_, gxy = fxy_[i] * h_ * h_;
                // value and derivatives in cell units, then rescaled
                const double v = f * X.A[a] * Y.A[b] + gx * X.B[a] * Y.A[b] + gy * X.A[a] * Y.B[b] + gxy * X.B[a] * Y.B[b];
                const double vx = f * X.dA[a] * Y.A[b] + gx * X.dB[a] * Y.A[b] + gy * X.dA[a] * Y.B[b] + gxy * X.dB[a] * Y.B[b];
                const double vy = f * X.A[a] * Y.dA[b] + gx * X.B[a] * Y.dA[b] + gy * X.A[a] * Y.dB[b] + gxy * X.B[a] * Y.dB[b];
                const double vxx = f * X.ddA[a] * Y.A[b] + gx * X.ddB[a] * Y.A[b] + gy * X.ddA[a] * Y.B[b] + gxy * X.ddB[a] * Y.B[b];
                const double vyy = f * X.A[a] * Y.ddA[b] + gx * X.B[a] * Y.ddA[b] + gy * X.A[a] * Y.ddB[b] + gxy * X.B[a] * Y.ddB[b];
                const double vxy = f * X.dA[a] * Y.dA[b] + gx * X.dB[a] * Y.dA[b] + gy * X.dA[a] * Y.dB[b] + gxy * X.dB[a] * Y.dB[b];
                out.value += v;
                out.grad(0) += vx / h_;
                out.grad(1) += vy / h_;
                out.hess(0, 0) += vxx / (h_ * h_);
                out.hess(1, 1) += vyy / (h_ * h_);
                out.hess(0, 1) += vxy / (h_ * h_);
            }
        out.hess(1, 0) = out.hess(0, 1);
        return out;
    }

    // cells need every corner to carry the cross derivative
    static constexpr int kMargin = 4;

private:
    const FieldSample& s_;
    int n_;
    double h_;
    std::vector<double> fx_, fy_, fxy_;
};

}  // namespace

std::vector<CriticalPoint> count_critical(const FieldSample& sample, double R1, double R2, const CountOptions& opt) {
    const Interpolant I(sample);
    const int N = I.N();
    const int n = I.n();
    const int m = sample.lattice.m;
    const double h = I.h();
    const int M = Interpolant::kMargin;

    // gradient scale for the residual test
    double g2 = 0.0;
    long cnt = 0;
    for (long i = 0; i < sample.lattice.size(); ++i)
        if (I.inner(i, M)) {
            g2 += I.fx(i) * I.fx(i) + I.fy(i) * I.fy(i);
            ++cnt;
        }
    const double gscale = cnt > 0 && g2 > 0.0 ? std::sqrt(g2 / cnt) : 1.0;

    auto cell_candidates = [&] {
        std::vector<long> cells;
        const long cells_per_axis = n - 1;
        const long total = N == 1 ? cells_per_axis : cells_per_axis * cells_per_axis;
        for (long c = 0; c < total; ++c) {
            const int a = static_cast<int>(c % cells_per_axis);
            const int b = N == 2 ? static_cast<int>(c / cells_per_axis) : M;
            if (a < M || a >= n - 1 - M || b < M || b >= n - 1 - M) continue;
            const long base = a + static_cast<long>(b) * (N == 2 ? n : 0);
            bool px = false, nx = false, py = false, ny = false;
            const int corners = N == 1 ? 2 : 4;
            for (int k = 0; k < corners; ++k) {
                const long i = base + (k & 1) + (k >> 1) * static_cast<long>(n);
                px |= I.fx(i) >= 0.0, nx |= I.fx(i) <= 0.0;
                py |= I.fy(i) >= 0.0, ny |= I.fy(i) <= 0.0;
            }
            if (px && nx && (N == 1 || (py && ny))) cells.push_back(base);
        }
        return cells;
    };

    std::vector<CriticalPoint> found;
    for (long cell : cell_candidates()) {
        VectorXd p(N);
        p(0) = (static_cast<double>(cell % n) - m + 0.5) * h;
        if (N == 2) p(1) = (static_cast<double>(cell / n) - m + 0.5) * h;
        long where = cell;
        Local L = I.eval(p, where);
        double res = L.grad.norm();
        for (int it = 0; it < opt.max_newton && res > 1e-13 * gscale; ++it) {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(L.hess);
            if (!lu.isInvertible()) break;
            VectorXd step = -lu.solve(L.grad);
            // keep steps local: a critical point of this cell is at most a cell away
            const double cap = 2.0 * h;
            if (step.norm() > cap) step *= cap / step.norm();
            bool moved = false;
            for (int damp = 0; damp < 30; ++damp) {
                const VectorXd q = p + step;
                const long c2 = I.cell_of(q);
                if (c2 >= 0) {
                    const Local L2 = I.eval(q, c2);
                    if (L2.grad.norm() < res) {
                        p = q, where = c2, L = L2, res = L2.grad.norm();
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (!(res <= opt.residual_tol * gscale)) continue;

        const VectorXd x = sample.lattice.to_physical(p);
        const double radius = x.norm();
        if (!(radius > R1 && radius < R2)) continue;
        bool dup = false;
        for (const auto& c : found)
            if ((c.location - x).norm() < 0.5 * h) dup = true;
        if (dup) continue;

        CriticalPoint cp;
        cp.location = x;
        cp.value = L.value;
        cp.residual = res;
        const VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(L.hess, Eigen::EigenvaluesOnly).eigenvalues();
        const double band = opt.borderline * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
        if ((ev.array().abs() < band).any())
            cp.index = -1;
        else
            cp.index = static_cast<int>((ev.array() < 0.0).count());
        found.push_back(std::move(cp));
    }
    return found;
}

json OracleBudget::to_json() const { return {{"h", h}, {"seed", seed}, {"threads", threads}, {"angle", angle}}; }

json OracleResult::to_json() const {
    json idx = json::array();
    for (std::size_t k = 0; k < mean.size(); ++k) idx.push_back({{"index", k}, {"mean", mean[k]}, {"std_error", se[k]}});
    return {{"N", N},
            {"reps", reps},
            {"total", {{"mean", total_mean}, {"std_error", total_se}}},
            {"by_index", idx},
            {"unclassified_mean", unclassified_mean},
            {"relative_jitter", relative_jitter}};
}

OracleResult mc_crt(const StructureFunction& f, int N, double R1, double R2, const ValueSet& E, int reps,
                    const OracleBudget& budget) {
    if (!(R1 >= 0.0 && R2 > R1 && std::isfinite(R2))) throw std::invalid_argument("shell needs 0 <= R1 < R2 < inf");
    if (reps < 2) throw std::invalid_argument("mc_crt needs at least 2 realizations");
    // margin: derivative stencils and the interpolation band need a few nodes beyond the shell
    const Lattice lattice = Lattice::covering(N, R2 + (Interpolant::kMargin + 2) * budget.h, budget.h, budget.angle);
    const FieldSampler sampler(f, lattice);

    OracleResult res;
    res.N = N;
    res.reps = reps;
    res.relative_jitter = sampler.relative_jitter();
    res.per_rep.assign(reps, std::vector<int>(N + 2, 0));  // last slot: unclassified
    const Workers workers{std::max(budget.threads, 1)};
    workers.for_each(static_cast<std::size_t>(reps), [&](std::size_t r) {
        const FieldSample s = sampler.draw(budget.seed, r);
        for (const auto& cp : count_critical(s, R1, R2)) {
            bool inside = false;
            for (const auto& iv : E.intervals()) inside |= cp.value > iv.lo && cp.value <= iv.hi;
            if (!inside) continue;
            ++res.per_rep[r][cp.index < 0 ? N + 1 : cp.index];
        }
    });

    res.mean.assign(N + 1, 0.0);
    res.se.assign(N + 1, 0.0);
    auto stats = [&](auto value, double& mean, double& se) {
        double s = 0.0, s2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            const double v = value(r);
            s += v;
            s2 += v * v;
        }
        mean = s / reps;
        se = std::sqrt(std::max(s2 / reps - mean * mean, 0.0) * reps / (reps - 1.0) / reps);
    };
    for (int k = 0; k <= N; ++k) stats([&](int r) { return res.per_rep[r][k]; }, res.mean[k], res.se[k]);
    stats(
        [&](int r) {
            int t = 0;
            for (int k = 0; k <= N + 1; ++k) t += res.per_rep[r][k];
            return t;
        },
        res.total_mean, res.total_se);
    double dummy = 0.0;
    stats([&](int r) { return res.per_rep[r][N + 1]; }, res.unclassified_mean, dummy);
    return res;
}

}  // namespace kacrice
