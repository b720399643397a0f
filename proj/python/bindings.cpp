#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dualcast/analysis.hpp"
#include "dualcast/sim.hpp"

namespace py = pybind11;
using namespace dualcast;

namespace {

DigraphSpec family_spec(const std::string& family, int n) {
  DigraphSpec s = parse_family(family);
  s.n = n;
  return s;
}

py::list reports_to_py(const std::vector<CheckReport>& rs) {
  py::list out;
  for (const auto& r : rs) {
    py::dict d;
    d["property"] = r.property;
    d["verdict"] = to_string(r.verdict);
    d["detail"] = r.detail;
    if (r.locator) d["events"] = py::make_tuple(r.locator->first, r.locator->second);
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_dualcast, m) {
  m.doc() = "Dual-digraph atomic broadcast simulator";

  py::register_exception<InvalidSpec>(m, "InvalidSpec", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<Scenario>(m, "Scenario")
      .def(py::init<>())
      .def_static("parse", &parse_scenario_text, py::arg("text"))
      .def_static("load", &load_scenario, py::arg("path"))
      .def("set", &apply_setting, py::arg("key"), py::arg("value"))
      .def("validate", [](const Scenario& s) { validate(s); })
      .def("__str__", &to_text)
      .def_readwrite("n", &Scenario::n)
      .def_readwrite("f", &Scenario::f)
      .def_readwrite("rounds", &Scenario::rounds)
      .def_readwrite("seed", &Scenario::seed)
      .def_readwrite("payload", &Scenario::payload)
      .def_readwrite("uniform", &Scenario::uniform)
      .def_readwrite("partition", &Scenario::partition)
      .def_readwrite("reliable_only", &Scenario::reliable_only);

  py::class_<SimResult>(m, "Result")
      .def_property_readonly("outcome", [](const SimResult& r) { return to_string(r.outcome); })
      .def_readonly("violation", &SimResult::violation)
      .def_property_readonly("trace_hash", [](const SimResult& r) { return r.trace.hash(); })
      .def_property_readonly("end_time_us", [](const SimResult& r) { return r.trace.end_time; })
      .def_property_readonly("crashed", [](const SimResult& r) {
        std::vector<ServerId> out;
        for (ServerId s = 0; s < r.trace.n; ++s)
          if (r.trace.faulty(s)) out.push_back(s);
        return out;
      })
      .def_property_readonly("transitions",
                             [](const SimResult& r) {
                               std::map<std::string, std::uint64_t> out;
                               for (const auto& [t, c] : r.trace.transition_counts) out[to_string(t)] = c;
                               return out;
                             })
      .def("log", [](const SimResult& r, ServerId s) {
        py::list out;
        for (const auto& d : r.trace.logs.at(s)) {
          py::dict e;
          e["epoch"] = d.epoch;
          e["round"] = d.round;
          e["time_us"] = d.time;
          e["reliable"] = d.reliable;
          e["count"] = d.count;
          e["digest"] = d.digest;
          out.append(e);
        }
        return out;
      }, py::arg("server"))
      .def("trace_tsv", [](const SimResult& r) {
        std::ostringstream o;
        r.trace.write_tsv(o);
        return o.str();
      })
      .def("checks", [](const SimResult& r) { return reports_to_py(check_all(r.trace)); })
      .def("uniformity", [](const SimResult& r) { return reports_to_py({check_uniformity(r.trace)}); })
      .def("metrics_csv", [](const SimResult& r) {
        std::ostringstream o;
        write_metrics_csv(o, summarize(r.trace, false));
        return o.str();
      });

  m.def("run", [](const Scenario& s) { return run(s); }, py::arg("scenario"),
        py::call_guard<py::gil_scoped_release>());

  m.def("edges", [](const std::string& family, int n) { return build_overlay(family_spec(family, n)).edges(); },
        py::arg("family"), py::arg("n"));
  m.def("vertex_connectivity",
        [](int n, const std::vector<std::pair<ServerId, ServerId>>& edges) {
          std::vector<ServerId> vs(n);
          for (int i = 0; i < n; ++i) vs[i] = i;
          Digraph g(vs);
          for (auto [u, v] : edges) g.add_edge(u, v);
          return vertex_connectivity(g);
        },
        py::arg("n"), py::arg("edges"));

  m.def("expected_performance",
        [](double du, double dr, double lambda) {
          const auto p = expected_performance({du, dr, lambda});
          return py::make_tuple(p.latency, p.throughput);
        },
        py::arg("delta_u"), py::arg("delta_r"), py::arg("lam"));
  m.def("worst_case_latency",
        [](double du, double dr, const std::string& variant, std::optional<double> dr_bar) {
          WorstCase v = WorstCase::baseline;
          if (variant == "rerun")
            v = WorstCase::rerun_reliably;
          else if (variant == "merged")
            v = WorstCase::merged;
          else if (variant != "baseline")
            throw DomainError("unknown variant " + variant);
          return worst_case_latency({du, dr, 0}, v, dr_bar);
        },
        py::arg("delta_u"), py::arg("delta_r"), py::arg("variant") = "baseline", py::arg("delta_r_bar") = py::none());
}
