#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "kacrice/assumptions.hpp"
#include "kacrice/errors.hpp"
#include "kacrice/kac_rice.hpp"
#include "kacrice/oracle.hpp"
#include "kacrice/rmt.hpp"
#include "kacrice/structure_function.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace kacrice;

// JSON crosses the boundary as text; the Python side wraps it with json.loads/dumps.
PYBIND11_MODULE(_core, m) {
    m.doc() = "expected critical-point counts of locally isotropic Gaussian fields";

    py::register_exception<ConditionError>(m, "ConditionError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

    m.def("catalog", [] {
        json out = json::array();
        for (const auto& f : catalog())
            out.push_back({{"name", f.name()}, {"max_dimension", f.max_dimension()}, {"descriptor", f.descriptor()}});
        return out.dump();
    });

    m.def("eval_structure", [](const std::string& field, double r, int order) { return lookup(field).eval(r, order); },
          py::arg("field"), py::arg("r"), py::arg("order") = 0);

    m.def("evaluate", [](const std::string& request) {
        const CountRequest r = CountRequest::from_json(json::parse(request));
        CountTable t;
        {
            py::gil_scoped_release release;
            t = evaluate(r);
        }
        return json{{"config", r.to_json()}, {"result", t.pick(r.index).to_json()}, {"table", t.to_json()}}.dump();
    });

    m.def("closed_form_n2", [](const std::string& field) { return closed_form_n2(lookup(field)); });

    m.def("check", [](const std::string& field, int N, const std::string& grid_spec) {
        const auto f = lookup(field);
        const auto grid = parse_r_grid(grid_spec);
        json out = json::array();
        out.push_back(check_smoothness(f).to_json());
        out.push_back(check_nondeg(f, N, grid).to_json());
        out.push_back(check_assumption3(f, grid).to_json());
        return out.dump();
    });

    m.def("simulate",
          [](const std::string& field, int N, double R1, double R2, int reps, double h, std::uint64_t seed,
             const std::string& E, int threads) {
              OracleBudget b;
              b.h = h;
              b.seed = seed;
              b.threads = threads;
              const auto f = lookup(field);
              const ValueSet values = ValueSet::parse(E);
              OracleResult res;
              {
                  py::gil_scoped_release release;
                  res = mc_crt(f, N, R1, R2, values, reps, b);
              }
              return res.to_json().dump();
          },
          py::arg("field"), py::arg("N"), py::arg("R1"), py::arg("R2"), py::arg("reps"), py::arg("h") = 0.06,
          py::arg("seed") = 20240917, py::arg("E") = "all", py::arg("threads") = 1);

    m.def("rmt_sample", [](const std::string& spec_json, long count, std::uint64_t seed) {
        const EnsembleSpec spec = EnsembleSpec::from_json(json::parse(spec_json));
        Eigen::MatrixXd out(count, spec.n);
        std::function<Eigen::MatrixXd(RngStream&)> draw;
        switch (spec.tag) {
            case Ensemble::GOE: draw = [n = spec.n](RngStream& g) { return sample_goe(n, g); }; break;
            case Ensemble::GOI: draw = GoiSampler(spec.n, spec.c); break;
            case Ensemble::SGOI: draw = SgoiSampler(spec.n, spec.d1, spec.d2, spec.d3); break;
        }
        for (long s = 0; s < count; ++s) {
            RngStream rng(seed, static_cast<std::uint64_t>(s));
            out.row(s) = eigvals_sym(draw(rng)).transpose();
        }
        return out;
    });

    m.def("eta_prime", &eta_prime, py::arg("m1"), py::arg("y"), py::arg("m3"), py::arg("lambdas"), py::arg("Z"),
          py::arg("Dpp0"));
}
