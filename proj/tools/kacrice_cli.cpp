#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "kacrice/acceptance.hpp"
#include "kacrice/assumptions.hpp"
#include "kacrice/errors.hpp"
#include "kacrice/kac_rice.hpp"
#include "kacrice/oracle.hpp"
#include "kacrice/rmt.hpp"
#include "kacrice/rmt_verify.hpp"
#include "kacrice/structure_function.hpp"

using nlohmann::json;
using namespace kacrice;

namespace {

enum Exit { kOk = 0, kUsage = 1, kCondition = 2, kIndeterminate = 3, kNumeric = 4 };

int default_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("KACRICE_SEED");
    if (!s || !*s) return std::nullopt;
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument("KACRICE_SEED is not an integer");
    return v;
}

// inline JSON if it looks like an object, otherwise a file path
json read_json_arg(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) return json::parse(text);
    std::ifstream in(text);
    if (!in) throw std::invalid_argument("cannot open '" + text + "'");
    return json::parse(in);
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw std::invalid_argument("cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

std::array<double, 2> parse_pair(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("expected R1,R2 but got '" + s + "'");
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
}

struct Sweep {
    double a = 0.0, b = 0.0;
    int n = 0;
};

// u0=a..b:n
Sweep parse_sweep(const std::string& s) {
    const std::string prefix = "u0=";
    const auto dots = s.find("..");
    const auto colon = s.rfind(':');
    if (s.rfind(prefix, 0) != 0 || dots == std::string::npos || colon == std::string::npos || colon < dots)
        throw std::invalid_argument("sweep must look like u0=a..b:n");
    Sweep w;
    w.a = std::stod(s.substr(prefix.size(), dots - prefix.size()));
    w.b = std::stod(s.substr(dots + 2, colon - dots - 2));
    w.n = std::stoi(s.substr(colon + 1));
    if (w.n < 1 || !(w.b >= w.a)) throw std::invalid_argument("sweep needs n >= 1 and a <= b");
    return w;
}

// ---- catalog

int run_catalog(const std::string& out_path) {
    json fields = json::array();
    for (const auto& f : catalog())
        fields.push_back({{"name", f.name()}, {"max_dimension", f.max_dimension()}, {"descriptor", f.descriptor()}});
    Output(out_path).stream() << json{{"schema", 1}, {"config", {{"subcommand", "catalog"}}}, {"fields", fields}}.dump(2)
                              << '\n';
    return kOk;
}

// ---- check

struct CheckArgs {
    std::string field;
    int N = 2;
    std::string r_grid = "default";
    std::string output;
};

int run_check(const CheckArgs& a) {
    const auto f = lookup(a.field);
    const auto grid = parse_r_grid(a.r_grid);
    // gating conditions first, informational ones after
    std::vector<std::pair<ConditionReport, bool>> reports;
    reports.emplace_back(check_smoothness(f), true);
    reports.emplace_back(check_nondeg(f, a.N, grid), true);
    reports.emplace_back(check_assumption3(f, grid), true);
    reports.emplace_back(check_c_positive(f, grid), false);
    reports.emplace_back(check_nondeg_dimfree(f, grid), false);
    if (f.kind() == Kind::BernsteinExponential) {
        reports.emplace_back(check_bernstein_inequality1(f, grid), false);
        reports.emplace_back(check_bernstein_inequality2(f, grid), false);
        reports.emplace_back(check_mean_value(f, grid), false);
    }
    json arr = json::array();
    bool fails = false, indeterminate = false;
    for (const auto& [rep, gating] : reports) {
        json j = rep.to_json();
        j["required"] = gating;
        arr.push_back(j);
        if (!gating) continue;
        fails |= rep.status == ConditionStatus::Fails;
        indeterminate |= rep.status == ConditionStatus::Indeterminate;
    }
    json out{{"schema", 1},
             {"config", {{"subcommand", "check"}, {"field", f.descriptor()}, {"N", a.N}, {"r_grid", a.r_grid}}},
             {"reports", arr}};
    Output(a.output).stream() << out.dump(2) << '\n';
    if (fails) return kCondition;
    if (indeterminate) return kIndeterminate;
    return kOk;
}

// ---- count

struct CountArgs {
    std::string request, field, method, E, shell, sweep, output, format = "json";
    std::optional<int> N, k;
    std::optional<double> volume, rel_tol;
    std::optional<long> mc_samples;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool force_mc = false;
};

CountRequest resolve_request(const CountArgs& a) {
    CountRequest r;
    r.budget.threads = default_threads();
    if (!a.request.empty()) {
        // a bare request, an emitted config, or a whole earlier output
        json j = read_json_arg(a.request);
        if (j.contains("config") && j.contains("result")) j = j["config"];
        if (j.contains("subcommand")) {
            if (j["subcommand"] != "count") throw std::invalid_argument("config is not for the count subcommand");
            j.erase("subcommand");
        }
        r = CountRequest::from_json(j);
        // a request without its own thread count uses the machine
        if (!j.contains("budget") || !j["budget"].contains("threads")) r.budget.threads = default_threads();
    } else if (a.field.empty()) {
        throw std::invalid_argument("count needs --request or --field");
    }
    if (!a.field.empty()) r.field = lookup(a.field);
    if (a.N) r.N = *a.N;
    if (!a.method.empty()) r.method = parse_method(a.method);
    if (a.volume) r.volume = *a.volume;
    if (!a.shell.empty()) r.shell = parse_pair(a.shell);
    if (!a.E.empty()) r.E = ValueSet::parse(a.E);
    if (a.k) r.index = *a.k;
    if (a.rel_tol) r.budget.rel_tol = *a.rel_tol;
    if (a.mc_samples) r.budget.mc_samples = *a.mc_samples;
    if (const auto s = env_seed()) r.budget.seed = *s;
    if (a.seed) r.budget.seed = *a.seed;
    if (a.threads) r.budget.threads = *a.threads;
    if (a.force_mc) r.budget.force_mc = true;
    // run the validation in Budget::from_json
    r.budget = Budget::from_json(r.budget.to_json());
    return r;
}

int run_count(const CountArgs& a) {
    if (a.format != "json" && a.format != "csv") throw std::invalid_argument("--format is json or csv");
    CountRequest req = resolve_request(a);
    Output out(a.output);
    if (!a.sweep.empty()) {
        const Sweep w = parse_sweep(a.sweep);
        if (!req.E.is_real_line()) throw std::invalid_argument("--sweep sets E itself; drop --E");
        auto& os = out.stream();
        os.precision(17);
        os << "u0,estimate,std_error\n";
        for (int i = 0; i < w.n; ++i) {
            const double u0 = w.n == 1 ? w.a : w.a + (w.b - w.a) * i / (w.n - 1);
            CountRequest r = req;
            r.E = ValueSet::none();
            r.E.add(u0, std::numeric_limits<double>::infinity());
            const CountResult res = evaluate(r).pick(r.index);
            os << u0 << ',' << res.estimate << ',' << res.std_error << '\n';
        }
        return kOk;
    }
    const CountTable table = evaluate(req);
    const CountResult& res = table.pick(req.index);
    if (a.format == "csv") {
        auto& os = out.stream();
        os.precision(17);
        os << "index,estimate,std_error,inner,mc_samples\n";
        auto row = [&](const CountResult& r) {
            os << (r.index ? std::to_string(*r.index) : std::string("total")) << ',' << r.estimate << ',' << r.std_error
               << ',' << r.diagnostics.inner << ',' << r.diagnostics.mc_samples << '\n';
        };
        row(table.total);
        for (const auto& r : table.by_index) row(r);
        return kOk;
    }
    json cfg = req.to_json();
    cfg["subcommand"] = "count";
    out.stream() << json{{"schema", 1}, {"config", cfg}, {"result", res.to_json()}, {"table", table.to_json()}}.dump(2)
                 << '\n';
    return kOk;
}

// ---- simulate

struct SimArgs {
    std::string field, shell = "0.5,1.5", E = "all", csv, output;
    int N = 2, reps = 100;
    double h = 0.06, angle = 0.0;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

int run_simulate(const SimArgs& a) {
    const auto f = lookup(a.field);
    const auto sh = parse_pair(a.shell);
    const ValueSet E = ValueSet::parse(a.E);
    OracleBudget b;
    b.h = a.h;
    b.angle = a.angle;
    b.threads = a.threads.value_or(default_threads());
    if (const auto s = env_seed()) b.seed = *s;
    if (a.seed) b.seed = *a.seed;
    if (a.reps < 1) throw std::invalid_argument("--reps must be >= 1");
    const OracleResult res = mc_crt(f, a.N, sh[0], sh[1], E, a.reps, b);
    if (!a.csv.empty()) {
        Output c(a.csv);
        auto& os = c.stream();
        os << "realization";
        for (int k = 0; k <= a.N; ++k) os << ",index_" << k;
        os << ",unclassified,total\n";
        for (std::size_t r = 0; r < res.per_rep.size(); ++r) {
            os << r;
            int total = 0;
            for (int v : res.per_rep[r]) {
                os << ',' << v;
                total += v;
            }
            os << ',' << total << '\n';
        }
    }
    json cfg{{"subcommand", "simulate"}, {"field", f.descriptor()}, {"N", a.N}, {"shell", {sh[0], sh[1]}},
             {"E", E.to_json()}, {"reps", a.reps}, {"budget", b.to_json()}};

    Output(a.output).stream() << json{{"schema", 1}, {"config", cfg}, {"result", res.to_json()}}.dump(2) << '\n';
    return kOk;
}

// ---- rmt-sample

struct RmtSampleArgs {
    std::string spec, output;
    long count = 1000;
    std::optional<std::uint64_t> seed;
};

int run_rmt_sample(const RmtSampleArgs& a) {
    const EnsembleSpec spec = EnsembleSpec::from_json(read_json_arg(a.spec));
    if (a.count < 1) throw std::invalid_argument("--count must be >= 1");
    std::uint64_t seed = 20240917;
    if (const auto s = env_seed()) seed = *s;
    if (a.seed) seed = *a.seed;
    std::function<Eigen::MatrixXd(RngStream&)> draw;
    switch (spec.tag) {
        case Ensemble::GOE: draw = [n = spec.n](RngStream& g) { return sample_goe(n, g); }; break;
        case Ensemble::GOI: draw = GoiSampler(spec.n, spec.c); break;
        case Ensemble::SGOI: draw = SgoiSampler(spec.n, spec.d1, spec.d2, spec.d3); break;
    }
    Output out(a.output);
    auto& os = out.stream();
    os.precision(17);
    os << "# " << json{{"schema", 1}, {"subcommand", "rmt-sample"}, {"spec", spec.to_json()}, {"count", a.count}, {"seed", seed}}.dump()
       << '\n';
    os << "sample";
    for (int i = 1; i <= spec.n; ++i) os << ",lambda_" << i;
    os << '\n';
    for (long s = 0; s < a.count; ++s) {
        RngStream rng(seed, static_cast<std::uint64_t>(s));
        const Eigen::VectorXd ev = eigvals_sym(draw(rng));
        os << s;
        for (int i = 0; i < ev.size(); ++i) os << ',' << ev(i);
        os << '\n';
    }
    return kOk;
}

// ---- rmt-verify

struct RmtVerifyArgs {
    long samples = 100000;
    std::optional<std::uint64_t> seed;
    std::string output;
};

int run_rmt_verify(const RmtVerifyArgs& a) {
    std::uint64_t seed = 20240917;
    if (const auto s = env_seed()) seed = *s;
    if (a.seed) seed = *a.seed;
    json out{{"schema", 1}, {"config", {{"subcommand", "rmt-verify"}, {"samples", a.samples}, {"seed", seed}}}};
    bool ok = true;
    std::uint64_t s = seed;
    for (double c : {0.0, 0.5, -0.4}) {
        const auto chi = goi2_density_chi2(c, a.samples, ++s);
        const auto ks = goi1_ks(c, a.samples, ++s);
        const auto inv = goi_invariance_check(2, c, a.samples, ++s);
        ok &= chi.passed() && ks.passed() && inv.passed();
        out["goi"].push_back({{"c", c}, {"density_chi2", chi.to_json()}, {"ks_1x1", ks.to_json()},
                              {"invariance", inv.to_json()}});
    }
    for (auto [d1, d2, d3] : {std::array<double, 3>{0.4, 0.2, 0.3}, {-0.2, 0.1, 0.2}}) {
        const auto blk = sgoi_covariance_check(3, d1, d2, d3, a.samples, ++s);
        const auto dir = sgoi_covariance_check(3, d1, d2, d3, a.samples, ++s, SgoiPath::Direct);
        const auto corner = conditional_corner_check(3, d1, d2, d3, 0.3, a.samples, ++s);
        ok &= blk.passed() && dir.passed() && corner.passed();
        out["sgoi"].push_back({{"d", {d1, d2, d3}}, {"block", blk.to_json()}, {"direct", dir.to_json()},
                               {"corner", corner.to_json()}});
    }
    const auto grid = sgoi_sign_grid(1000, ++s);
    ok &= grid.disagreements == 0;
    out["sign_grid"] = grid.to_json();
    out["passed"] = ok;
    Output(a.output).stream() << out.dump(2) << '\n';
    return ok ? kOk : kCondition;
}

// ---- verify-all

int run_verify_all(AcceptanceOptions opt, const std::optional<std::uint64_t>& seed, const std::string& report) {
    if (const auto s = env_seed()) opt.seed = *s;
    if (seed) opt.seed = *seed;
    std::cout << "seed " << opt.seed << ", threads " << opt.threads << '\n';
    int failed = 0;
    const auto results = run_acceptance(opt, [&](const CriterionResult& r) {
        std::cout << format_line(r) << std::endl;
        failed += !r.passed;
    });
    if (!report.empty()) {
        json j{{"schema", 1}, {"config", {{"subcommand", "verify-all"}, {"seed", opt.seed}, {"threads", opt.threads}}}};
        for (const auto& r : results) j["criteria"].push_back(r.to_json());
        Output(report).stream() << j.dump(2) << '\n';
    }
    std::cout << (results.size() - failed) << "/" << results.size() << " passed\n";
    return failed == 0 ? kOk : kCondition;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Expected critical-point counts of locally isotropic Gaussian fields"};
    app.require_subcommand(1);

    auto* cat = app.add_subcommand("catalog", "list the built-in structure functions");
    std::string cat_out;
    cat->add_option("-o,--output", cat_out);

    CheckArgs ck;
    auto* chk = app.add_subcommand("check", "check the conditions the count formulas rely on");
    chk->add_option("--field", ck.field, "catalog name or JSON descriptor")->required();
    chk->add_option("--N", ck.N)->check(CLI::PositiveNumber);
    chk->add_option("--r-grid", ck.r_grid, "default | log:lo:hi:n | lin:lo:hi:n | r1,r2,...");
    chk->add_option("-o,--output", ck.output);

    CountArgs ct;
    auto* cnt = app.add_subcommand("count", "expected number of critical points");
    cnt->add_option("--request", ct.request, "request JSON, inline or a file");
    cnt->add_option("--field", ct.field);
    cnt->add_option("--N", ct.N);
    cnt->add_option("--method", ct.method, "er | shell-goi | shell-goe | closed-form-n2");
    cnt->add_option("--volume", ct.volume);
    cnt->add_option("--shell", ct.shell, "R1,R2");
    cnt->add_option("--E", ct.E, "critical values, e.g. -inf:0,1:inf");
    cnt->add_option("--k", ct.k, "Hessian index; total when omitted");
    cnt->add_option("--rel-tol", ct.rel_tol);
    cnt->add_option("--mc-samples", ct.mc_samples);
    cnt->add_option("--seed", ct.seed);
    cnt->add_option("--threads", ct.threads)->check(CLI::PositiveNumber);
    cnt->add_flag("--force-mc", ct.force_mc);
    cnt->add_option("--sweep", ct.sweep, "u0=a..b:n, CSV of counts with values above u0");
    cnt->add_option("--format", ct.format, "json | csv");
    cnt->add_option("-o,--output", ct.output);

    SimArgs sm;
    auto* sim = app.add_subcommand("simulate", "count critical points of sampled fields");
    sim->set_help_flag("--help", "Print this help message and exit");
    sim->add_option("--field", sm.field)->required();
    sim->add_option("--N", sm.N)->check(CLI::Range(1, 2));
    sim->add_option("--shell", sm.shell, "R1,R2");
    sim->add_option("--reps", sm.reps);
    sim->add_option("--h", sm.h, "lattice spacing")->check(CLI::PositiveNumber);
    sim->add_option("--angle", sm.angle, "lattice rotation (N = 2)");
    sim->add_option("--E", sm.E);
    sim->add_option("--seed", sm.seed);
    sim->add_option("--threads", sm.threads)->check(CLI::PositiveNumber);
    sim->add_option("--csv", sm.csv, "per-realization counts");
    sim->add_option("-o,--output", sm.output);

    RmtSampleArgs rs;
    auto* rsm = app.add_subcommand("rmt-sample", "eigenvalues of sampled ensemble matrices as CSV");
    rsm->add_option("--spec", rs.spec, R"(e.g. {"ensemble":"goi","n":3,"c":0.5})")->required();
    rsm->add_option("--count", rs.count);
    rsm->add_option("--seed", rs.seed);
    rsm->add_option("-o,--output", rs.output);

    RmtVerifyArgs rv;
    auto* rvf = app.add_subcommand("rmt-verify", "moment and density checks of the samplers");
    rvf->add_option("--samples", rv.samples);
    rvf->add_option("--seed", rv.seed);
    rvf->add_option("-o,--output", rv.output);

    AcceptanceOptions ao;
    ao.threads = default_threads();
    std::optional<std::uint64_t> va_seed;
    std::string va_report;
    auto* va = app.add_subcommand("verify-all", "run the acceptance suite");
    va->add_option("--seed", va_seed);
    va->add_option("--threads", ao.threads)->check(CLI::PositiveNumber);
    va->add_option("--only", ao.only)->delimiter(',')->check(CLI::Range(1, 9));
    va->add_option("--report", va_report, "JSON report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (cat->parsed()) return run_catalog(cat_out);
        if (chk->parsed()) return run_check(ck);
        if (cnt->parsed()) return run_count(ct);
        if (sim->parsed()) return run_simulate(sm);
        if (rsm->parsed()) return run_rmt_sample(rs);
        if (rvf->parsed()) return run_rmt_verify(rv);
        if (va->parsed()) return run_verify_all(ao, va_seed, va_report);
    } catch (const ConditionError& e) {
        std::cerr << "condition error: " << e.what() << '\n';
        return kCondition;
    } catch (const std::domain_error& e) {
        std::cerr << "condition error: " << e.what() << '\n';
        return kCondition;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const json::exception& e) {
        std::cerr << "bad JSON: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumeric;
    }
    return kUsage;
}
