#include "kacrice/quadrature.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <queue>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace kacrice {

namespace {

// Golub-Welsch: eigen-decompose the Jacobi matrix of the three-term recurrence.
GaussRule golub_welsch(const std::vector<double>& diag, const std::vector<double>& offdiag, double mu0) {
    const int n = static_cast<int>(diag.size());
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) jacobi(i, i) = diag[i];
    for (int i = 0; i + 1 < n; ++i) jacobi(i, i + 1) = jacobi(i + 1, i) = offdiag[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

template <class Build>
const GaussRule& cached(std::map<int, GaussRule>& cache, std::mutex& m, int n, Build&& build) {
    if (n < 1) throw std::invalid_argument("Gauss rule needs at least one node");
    std::lock_guard lock(m);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build(n)).first;
    return it->second;  // std::map nodes are stable
}

GaussRule build_legendre(int n) {
    std::vector<double> a(n, 0.0), b(std::max(n - 1, 0));
    for (int i = 1; i < n; ++i) b[i - 1] = i / std::sqrt(4.0 * i * i - 1.0);
    GaussRule rule = golub_welsch(a, b, 2.0);
    // symmetrize to remove eigen-solver noise
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
        const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
        rule.nodes[i] = -x;
        rule.nodes[j] = x;
        rule.weights[i] = rule.weights[j] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

GaussRule build_hermite(int n) {
    std::vector<double> a(n, 0.0), b(std::max(n - 1, 0));
    for (int i = 1; i < n; ++i) b[i - 1] = std::sqrt(static_cast<double>(i));
    return golub_welsch(a, b, 1.0);
}

GaussRule build_laguerre(int n) {
    std::vector<double> a(n), b(std::max(n - 1, 0));
    for (int i = 0; i < n; ++i) a[i] = 2.0 * i + 1.0;
    for (int i = 1; i < n; ++i) b[i - 1] = i;
    return golub_welsch(a, b, 1.0);
}

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b;
    Eigen::VectorXd value, error;
    double score;
};

Panel gk15_panel(const VectorIntegrand& f, double a, double b, const Workers* workers, int control) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double xs[15];
    for (int k = 0; k < 7; ++k) {
        xs[2 * k] = center - half * kXgk[k];
        xs[2 * k + 1] = center + half * kXgk[k];
    }
    xs[14] = center;
    std::vector<Eigen::VectorXd> fx(15);
    if (workers && workers->threads > 1) {
        workers->for_each(15, [&](std::size_t i) { fx[i] = f(xs[i]); });
    } else {
        for (int i = 0; i < 15; ++i) fx[i] = f(xs[i]);
    }
    const Eigen::Index m = fx[14].size();
    for (const auto& v : fx)
        if (v.size() != m) throw std::runtime_error("integrand returned vectors of different sizes");
    Eigen::VectorXd kron = kWgk[7] * fx[14];
    Eigen::VectorXd gauss = kWg[3] * fx[14];
    for (int k = 0; k < 7; ++k) {
        const Eigen::VectorXd pair = fx[2 * k] + fx[2 * k + 1];
        kron += kWgk[k] * pair;
        if (k % 2 == 1) gauss += kWg[k / 2] * pair;
    }
    Panel p{a, b, half * kron, (half * (kron - gauss)).cwiseAbs(), 0.0};
    const Eigen::Index c = control > 0 ? std::min<Eigen::Index>(control, m) : m;
    p.score = c > 0 ? p.error.head(c).maxCoeff() : 0.0;
    return p;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex m;
    return cached(cache, m, n, build_legendre);
}

const GaussRule& gauss_hermite_normal(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex m;
    return cached(cache, m, n, build_hermite);
}

const GaussRule& gauss_laguerre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex m;
    return cached(cache, m, n, build_laguerre);
}

QuadResult integrate_gk15(const VectorIntegrand& f, double a, double b, const QuadOptions& options) {
    if (!(std::isfinite(a) && std::isfinite(b))) throw std::invalid_argument("integrate_gk15 needs finite limits");
    const int control = options.control_components;
    auto cmp = [](const Panel& x, const Panel& y) { return x.score < y.score; };
    std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> heap(cmp);

    QuadResult out;
    Panel first = gk15_panel(f, a, b, options.workers, control);
    out.evaluations = 15;
    out.value = first.value;
    out.error = first.error;
    heap.push(std::move(first));

    auto done = [&] {
        const Eigen::Index m = out.value.size();
        const Eigen::Index c = control > 0 ? std::min<Eigen::Index>(control, m) : m;
        if (c == 0) return true;
        const double target = std::max(options.abs_tol, options.rel_tol * out.value.head(c).cwiseAbs().maxCoeff());
        return out.error.head(c).maxCoeff() <= target;
    };

    int intervals = 1;
    while (!done()) {
        if (intervals >= options.max_intervals) break;
        Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {  // cannot split further
            heap.push(std::move(worst));
            break;
        }
        Panel left = gk15_panel(f, worst.a, mid, options.workers, control);
        Panel right = gk15_panel(f, mid, worst.b, options.workers, control);
        out.evaluations += 30;
        out.value += left.value + right.value - worst.value;
        out.error += left.error + right.error - worst.error;
        heap.push(std::move(left));
        heap.push(std::move(right));
        ++intervals;
        // Recompute sums every so often to avoid drift from incremental updates.
        if (intervals % 64 == 0) {
            auto copy = heap;
            out.value.setZero();
            out.error.setZero();
            while (!copy.empty()) {
                out.value += copy.top().value;
                out.error += copy.top().error;
                copy.pop();
            }
        }
    }
    // Final exact resummation in a fixed order (by left endpoint) so the result is reproducible.
    std::vector<Panel> panels;
    while (!heap.empty()) {
        panels.push_back(heap.top());
        heap.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    out.value.setZero();
    out.error.setZero();
    for (const auto& p : panels) {
        out.value += p.value;
        out.error += p.error;
    }
    out.intervals = intervals;
    out.converged = done();
    return out;
}

double integrate_gk15_scalar(const std::function<double(double)>& f, double a, double b, double rel_tol,
                             double abs_tol, int max_intervals, double* error_estimate) {
    QuadOptions opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = abs_tol;
    opt.max_intervals = max_intervals;
    auto r = integrate_gk15([&](double x) { return Eigen::VectorXd::Constant(1, f(x)); }, a, b, opt);
    if (error_estimate) *error_estimate = r.error(0);
    return r.value(0);
}

double richardson_derivative(const std::function<double(double)>& f, double x, int levels, double h) {
    if (h <= 0.0) h = std::max(1e-4, 1e-4 * std::abs(x));
    std::vector<std::vector<double>> table(levels);
    for (int i = 0; i < levels; ++i) {
        const double step = h / std::pow(2.0, i);
        table[i].resize(i + 1);
        table[i][0] = (f(x + step) - f(x - step)) / (2.0 * step);
        double factor = 4.0;
        for (int j = 1; j <= i; ++j) {
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
            factor *= 4.0;
        }
    }
    return table.back().back();
}

}  // namespace kacrice
