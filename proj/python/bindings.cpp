#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mlc/belief_grid.hpp"
#include "mlc/io.hpp"
#include "mlc/metrics.hpp"
#include "mlc/scenario.hpp"
#include "mlc/sim_engine.hpp"

namespace py = pybind11;
using namespace mlc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

BeliefGrid grid_from_arrays(const Array& resolution, const Array& obs_time, const Array& fire, double cell_size) {
  if (resolution.ndim() != 2) throw ConfigError("arrays must be 2-D (height, width)");
  const auto h = resolution.shape(0), w = resolution.shape(1);
  for (const Array* a : {&obs_time, &fire}) {
    if (a->ndim() != 2 || a->shape(0) != h || a->shape(1) != w) throw ConfigError("array shapes differ");
  }
  BeliefGrid g(static_cast<int>(w), static_cast<int>(h), cell_size);
  const double *r = resolution.data(), *t = obs_time.data(), *f = fire.data();
  for (std::size_t i = 0; i < g.cells().size(); ++i) g[i] = MetaCell{r[i], t[i], f[i]};
  return g;
}

py::tuple grid_to_arrays(const BeliefGrid& g) {
  const std::vector<py::ssize_t> shape{g.height(), g.width()};
  Array r(shape), t(shape), f(shape);
  double *pr = r.mutable_data(), *pt = t.mutable_data(), *pf = f.mutable_data();
  for (std::size_t i = 0; i < g.cells().size(); ++i) {
    pr[i] = g[i].resolution;
    pt[i] = g[i].obs_time;
    pf[i] = g[i].fire;
  }
  return py::make_tuple(r, t, f);
}

py::dict record_dict(const TraceRecord& r) {
  py::dict d;
  d["t"] = r.t;
  d["n_agents"] = r.n_agents;
  d["main_cluster_ratio"] = r.main_cluster_ratio;
  d["avg_links"] = r.avg_links;
  d["max_links"] = r.max_links;
  d["avg_link_dist"] = r.avg_link_dist;
  d["max_link_dist"] = r.max_link_dist;
  d["avg_data_rate"] = r.avg_data_rate;
  d["max_data_rate"] = r.max_data_rate;
  d["miss_ratio"] = r.miss_ratio;
  return d;
}

py::list trace_list(const std::vector<TraceRecord>& trace) {
  py::list out;
  for (const TraceRecord& r : trace) out.append(record_dict(r));
  return out;
}

py::dict summary_dict(const MissionSummary& s) {
  py::dict d;
  d["records"] = s.records;
  d["fire_records"] = s.fire_records;
  d["mean_agents"] = s.mean_agents;
  d["mean_main_cluster_ratio"] = s.mean_main_cluster_ratio;
  d["mean_links"] = s.mean_links;
  d["max_links"] = s.max_links;
  d["mean_link_dist"] = s.mean_link_dist;
  d["max_link_dist"] = s.max_link_dist;
  d["mean_data_rate"] = s.mean_data_rate;
  d["max_data_rate"] = s.max_data_rate;
  d["mission_miss_ratio"] = s.mission_miss_ratio;
  return d;
}

py::dict result_dict(const RunResult& r) {
  py::dict d;
  d["trace"] = trace_list(r.trace);
  d["summary"] = summary_dict(r.summary);
  d["violations"] = r.violations;
  py::list topo;
  for (const TreeEdge& e : r.final_topology) topo.append(py::make_tuple(e.child, e.parent, e.level));
  d["topology"] = topo;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-level clustering swarm simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InvariantViolation>(m, "InvariantViolation", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<AggregationPolicy>(m, "AggregationPolicy")
      .def_static("age", &AggregationPolicy::age)
      .def_static("resolution", &AggregationPolicy::resolution)
      .def_static("meta_score", &AggregationPolicy::meta_score, py::arg("weight"))
      .def_readonly("score_weight", &AggregationPolicy::score_weight)
      .def_property_readonly("kind", [](const AggregationPolicy& p) { return to_string(p.kind); });

  py::class_<BeliefGrid>(m, "BeliefGrid")
      .def(py::init<int, int, double>(), py::arg("width"), py::arg("height"), py::arg("cell_size") = 25.0)
      .def_static("from_arrays", &grid_from_arrays, py::arg("resolution"), py::arg("obs_time"), py::arg("fire"),
                  py::arg("cell_size") = 25.0, "Build from three (height, width) arrays; unobserved cells have obs_time -inf.")
      .def("to_arrays", &grid_to_arrays, "(resolution, obs_time, fire) as (height, width) arrays")
      .def_property_readonly("width", &BeliefGrid::width)
      .def_property_readonly("height", &BeliefGrid::height)
      .def_property_readonly("cell_size", &BeliefGrid::cell_size)
      .def("observed_count", &BeliefGrid::observed_count)
      .def("cell",
           [](const BeliefGrid& g, int x, int y) {
             if (!g.shape().contains(x, y)) throw py::index_error("cell out of range");
             const MetaCell& c = g.at(x, y);
             return py::make_tuple(c.resolution, c.obs_time, c.fire);
           })
      .def("set_cell",
           [](BeliefGrid& g, int x, int y, double resolution, double obs_time, double fire) {
             if (!g.shape().contains(x, y)) throw py::index_error("cell out of range");
             g.at(x, y) = MetaCell{resolution, obs_time, fire};
           })
      .def(py::self == py::self);

  m.def("aggregate", py::overload_cast<const BeliefGrid&, const BeliefGrid&, const AggregationPolicy&, double>(&aggregate),
        py::arg("a"), py::arg("b"), py::arg("policy") = AggregationPolicy::age(), py::arg("now") = 0.0);
  m.def("compress", py::overload_cast<const BeliefGrid&, double>(&compress), py::arg("grid"), py::arg("factor"));
  m.def("subtract", py::overload_cast<const BeliefGrid&, const BeliefGrid&, const AggregationPolicy&, double>(&subtract),
        py::arg("b_j"), py::arg("b_i"), py::arg("policy") = AggregationPolicy::age(), py::arg("now") = 0.0,
        "Cells of b_j that would win against b_i.");
  m.def("data_amount", py::overload_cast<const BeliefGrid&>(&data_amount));

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_static("from_json", &parse_scenario, py::arg("text"))
      .def_static("load", &load_scenario, py::arg("path"))
      .def("to_json", &scenario_to_json)
      .def("validate", &ScenarioConfig::validate)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("sim_time", &ScenarioConfig::sim_time)
      .def_readwrite("dt", &ScenarioConfig::dt)
      .def_readwrite("max_agents", &ScenarioConfig::max_agents)
      .def_readwrite("battery", &ScenarioConfig::battery)
      .def_readwrite("spawn_duration", &ScenarioConfig::spawn_duration)
      .def_readwrite("belief_sharing", &ScenarioConfig::belief_sharing)
      .def_readwrite("strict", &ScenarioConfig::strict)
      .def_property(
          "max_cluster_size", [](const ScenarioConfig& c) { return c.protocol.max_cluster_size; },
          [](ScenarioConfig& c, int k) { c.protocol.max_cluster_size = k; })
      .def_property(
          "data_compression", [](const ScenarioConfig& c) { return c.propagation.data_compression; },
          [](ScenarioConfig& c, double v) { c.propagation.data_compression = v; })
      .def_property(
          "time_compression", [](const ScenarioConfig& c) { return c.propagation.time_compression; },
          [](ScenarioConfig& c, double v) { c.propagation.time_compression = v; })
      .def_property(
          "motion", [](const ScenarioConfig& c) { return to_string(c.motion.mode); },
          [](ScenarioConfig& c, const std::string& s) { c.motion.mode = parse_motion_mode(s); })
      .def_property(
          "communication", [](const ScenarioConfig& c) { return to_string(c.communication); },
          [](ScenarioConfig& c, const std::string& s) { c.communication = parse_comm_mode(s); });

  py::class_<Simulation>(m, "Simulation")
      .def(py::init<ScenarioConfig>(), py::arg("config"))
      .def("step", &Simulation::step)
      .def("run", &Simulation::run, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("finished", &Simulation::finished)
      .def_property_readonly("now", &Simulation::now)
      .def_property_readonly("tick", &Simulation::tick)
      .def_property_readonly("n_agents", [](const Simulation& s) { return s.registry().size(); })
      .def_property_readonly("trace", [](const Simulation& s) { return trace_list(s.trace()); })
      .def_property_readonly("violations", &Simulation::violations)
      .def("topology",
           [](const Simulation& s) {
             py::list out;
             for (const TreeEdge& e : tree_edges(s.registry())) out.append(py::make_tuple(e.child, e.parent, e.level));
             return out;
           })
      .def("main_cluster_ratio", [](const Simulation& s) { return main_cluster_ratio(s.registry()); })
      .def("world_belief", [](const Simulation& s) { return s.world_belief(); })
      .def("burning", [](const Simulation& s) {
        const GridShape& g = s.config().grid;
        py::array_t<bool> out({g.height, g.width});
        auto v = out.mutable_unchecked<2>();
        for (int y = 0; y < g.height; ++y) {
          for (int x = 0; x < g.width; ++x) v(y, x) = s.fire().burning(x, y);
        }
        return out;
      });

  m.def(
      "run_scenario",
      [](const ScenarioConfig& c) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(c);
        }
        return result_dict(r);
      },
      py::arg("config"));
  m.def(
      "run_direct_baseline",
      [](const ScenarioConfig& c) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_direct_baseline(c);
        }
        return result_dict(r);
      },
      py::arg("config"));
  m.def("normalized_miss", &normalized_miss, py::arg("miss"), py::arg("baseline_miss"));
}
