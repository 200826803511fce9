#include "kamwb/errors.hpp"
#include "kamwb/io.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace kamwb;

namespace {

py::dict sim_dict(const SimResult& r)
{
    py::list rows;
    for (auto& row : r.rows)
        rows.append(py::make_tuple(row.t, row.x, row.v, row.energy, row.sup_so_far));
    py::dict d;
    d["rows"] = rows;
    d["section"] = r.section;
    d["sup_abs_x"] = r.sup_abs_x;
    d["energy0"] = r.energy0;
    d["max_energy_drift"] = r.max_energy_drift;
    d["amplitude_slope"] = amplitude_slope(r);
    d["steps"] = r.steps;
    return d;
}

} // namespace

PYBIND11_MODULE(_kamwb, m)
{
    m.doc() = "numerical KAM workbench";
    m.attr("__version__") = KAMWB_VERSION;

    static py::exception<Error> err(m, "KamwbError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(err, py::make_tuple(e.what(), e.kind(), e.is_gate()));
        }
    });

    m.def("weight", &weight, py::arg("A"), py::arg("rho_w") = 3.0);

    py::class_<ApproxFunction>(m, "ApproxFunction")
        .def_static("default_kind", &ApproxFunction::default_kind)
        .def_static("power_exp", &ApproxFunction::power_exp, py::arg("sigma"))
        .def_static("unit", &ApproxFunction::unit)
        .def_static("table", &ApproxFunction::table, py::arg("nodes"))
        .def("__call__", &ApproxFunction::operator())
        .def("log_value", &ApproxFunction::log_value)
        .def_property_readonly("name", &ApproxFunction::name);
    m.def("gamma0", [](const ApproxFunction& d, double mu) { return gamma0(d, mu); }, py::arg("delta"), py::arg("mu"));
    m.def("gamma1", [](const ApproxFunction& d, double rho) { return gamma1(d, rho); }, py::arg("delta"),
          py::arg("rho"));

    m.def("period", &period, py::arg("l"));
    py::class_<GenTrig>(m, "GenTrig")
        .def(py::init<int>(), py::arg("l"))
        .def_property_readonly("l", &GenTrig::l)
        .def_property_readonly("period", &GenTrig::period)
        .def("__call__", &GenTrig::eval, py::arg("t"))
        .def("C", &GenTrig::C)
        .def("S", &GenTrig::S)
        .def(
            "verify",
            [](const GenTrig& g, double tol) {
                auto c = g.verify(tol);
                py::dict d;
                d["periodicity"] = c.periodicity;
                d["table"] = c.table;
                d["derivative"] = c.derivative;
                d["energy"] = c.energy;
                d["parity"] = c.parity;
                d["worst"] = c.worst();
                return d;
            },
            py::arg("tol") = 1e-10);

    py::class_<ActionAngleChart>(m, "ActionAngleChart")
        .def(py::init<int, double, double>(), py::arg("l"), py::arg("action_lo") = 0.1, py::arg("action_hi") = 10.0)
        .def_readonly("c1", &ActionAngleChart::c1)
        .def_property_readonly("period", &ActionAngleChart::period)
        .def("forward", &ActionAngleChart::forward, py::arg("rho"), py::arg("phi"))
        .def("inverse", &ActionAngleChart::inverse, py::arg("u"), py::arg("v"))
        .def("energy", &ActionAngleChart::energy)
        .def("jacobian_det", &ActionAngleChart::jacobian_det, py::arg("rho"), py::arg("phi"),
             py::arg("step") = 1e-5);
    m.def("omega_tilde", &omega_tilde, py::arg("chart"), py::arg("rho0"));
    m.def("action_of_frequency", &action_of_frequency, py::arg("chart"), py::arg("wt"));

    // config-driven operations take the configuration as JSON text

    m.def(
        "measure",
        [](const std::string& text, double alpha, std::size_t samples, std::uint64_t seed, int threads) {
            auto cfg = parse_config(text);
            ProductStructure S(structure_from_json(cfg), cfg.value("n", 1));
            MeasureResult r;
            {
                py::gil_scoped_release nogil;
                r = measure_estimate(frequency_from_json(cfg), S, delta_from_json(cfg), alpha, box_from_json(cfg),
                                     caps_from_json(cfg), samples, seed, threads);
            }
            py::dict d;
            d["alpha"] = r.alpha;
            d["fraction"] = r.fraction;
            d["ci_lo"] = r.ci_lo;
            d["ci_hi"] = r.ci_hi;
            d["union_bound"] = r.union_bound;
            d["samples"] = r.samples;
            d["hits"] = r.hits;
            return d;
        },
        py::arg("config"), py::arg("alpha"), py::arg("samples") = 100000, py::arg("seed") = 1,
        py::arg("threads") = 1);

    m.def(
        "build_hamiltonian",
        [](const std::string& text, bool check_gate) {
            auto cfg = parse_config(text);
            auto sched = schedule_from_json(cfg);
            auto ho = hamiltonian_options_from_json(cfg);
            ho.check_gate = check_gate;
            auto b = build_hamiltonian(forcing_from_json(cfg), chart_from_json(cfg), rho0_from_json(cfg), sched, ho);
            py::dict d;
            d["s"] = b.s;
            d["omega_tilde"] = b.omega_tilde;
            d["P_norm"] = b.P_norm;
            d["C_star"] = b.C_star;
            d["truncation_tail"] = b.truncation_tail;
            d["gate_lhs"] = b.gate_lhs;
            d["gate_rhs"] = b.gate_rhs;
            d["gate_ok"] = b.gate_ok;
            d["modes"] = b.H.P.mode_count();
            return d;
        },
        py::arg("config"), py::arg("check_gate") = true);

    m.def(
        "kam_run",
        [](const std::string& text, int jmax) {
            auto cfg = parse_config(text);
            const json& kc = cfg.contains("kam") ? cfg.at("kam") : json::object();
            double alpha = kc.value("alpha", 2.0);
            if (!(alpha > 0))
                throw ConfigError("kam.alpha must be positive");
            const double lam = 2.0 / alpha;
            auto sched = schedule_from_json(cfg);
            auto b = build_hamiltonian(forcing_from_json(cfg), chart_from_json(cfg), rho0_from_json(cfg), sched,
                                       hamiltonian_options_from_json(cfg));
            sched.s = b.s;
            RunOptions ro;
            ro.j_max = jmax >= 0 ? jmax : kc.value("jmax", 8);
            ro.stop_rel = kc.value("stop_rel", ro.stop_rel);
            KamRunResult res;
            {
                py::gil_scoped_release nogil;
                res = kam_run(lam == 1.0 ? b.H : scale_time(b.H, lam), sched, ro);
            }
            py::list rows;
            for (auto& r : res.rows) {
                py::dict d;
                d["j"] = r.j;
                d["m"] = r.m;
                d["r"] = r.r;
                d["s"] = r.s;
                d["h"] = r.h;
                d["E"] = r.E;
                d["measured_norm"] = r.measured_norm / lam;
                d["bound_rhs"] = r.bound_rhs / lam;
                d["homolog_residual"] = r.homolog_residual;
                d["sympl_residual"] = r.sympl_residual;
                d["freq_shift"] = r.freq_shift / lam;
                d["gate_ok"] = r.gate_ok;
                rows.append(d);
            }
            py::dict out;
            out["rows"] = rows;
            out["entry_lhs"] = res.entry_lhs;
            out["E0"] = res.E0;
            out["final_gate_ok"] = res.final_gate_ok;
            return out;
        },
        py::arg("config"), py::arg("jmax") = -1);

    m.def(
        "simulate",
        [](const std::string& text, double T, bool original) {
            auto cfg = parse_config(text);
            auto spec = forcing_from_json(cfg);
            auto opt = sim_options_from_json(cfg);
            const json& sc = cfg.contains("simulate") ? cfg.at("simulate") : json::object();
            double Tf = T > 0 ? T : sc.value("T", 1000.0);
            auto sys = original ? original_system(spec) : rescale(spec);
            SimResult r;
            {
                py::gil_scoped_release nogil;
                r = simulate(sys, sc.value("x0", 1.0), sc.value("v0", 0.0), Tf, opt);
            }
            return sim_dict(r);
        },
        py::arg("config"), py::arg("T") = -1.0, py::arg("original") = false);
}
