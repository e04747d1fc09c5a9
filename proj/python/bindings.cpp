#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "otmap/applications.hpp"
#include "otmap/baryproj.hpp"
#include "otmap/config_util.hpp"
#include "otmap/experiments.hpp"
#include "otmap/ot_core.hpp"
#include "otmap/smoothing.hpp"
#include "otmap/synthetic.hpp"

namespace py = pybind11;
using namespace otmap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// A 1-D array is a cloud of scalars; a 2-D array has one row per point.
PointSet to_points(const Array& a) {
  if (a.ndim() == 1) return PointSet(std::vector<double>(a.data(), a.data() + a.shape(0)), 1);
  if (a.ndim() != 2) throw py::value_error("expected a 1-D or 2-D array of points");
  const auto n = static_cast<std::size_t>(a.shape(0)), d = static_cast<std::size_t>(a.shape(1));
  return PointSet(std::vector<double>(a.data(), a.data() + n * d), d);
}

DiscreteMeasure to_measure(const Array& pts, const std::optional<Array>& w) {
  auto p = to_points(pts);
  if (!w) return DiscreteMeasure::uniform(std::move(p));
  if (w->ndim() != 1) throw py::value_error("weights must be a 1-D array");
  return DiscreteMeasure::normalized(std::move(p), std::vector<double>(w->data(), w->data() + w->shape(0)));
}

py::array_t<double> to_array(const PointSet& p) {
  py::array_t<double> out({p.size(), p.dim()});
  std::copy(p.coords().begin(), p.coords().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::object parse_json(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

class Problem {
 public:
  explicit Problem(const std::string& spec) : p_(problem_from_json(nlohmann::json::parse(spec))) {}
  const SyntheticProblem& get() const { return p_; }

  py::array_t<double> transport(const Array& x) const { return to_array(p_.push_forward(to_points(x))); }
  py::array_t<double> sample(std::size_t n, std::uint64_t seed) const {
    Rng rng = make_rng(seed);
    return to_array(p_.sample_source(n, rng));
  }

 private:
  SyntheticProblem p_;
};

}  // namespace

PYBIND11_MODULE(_otmap, m) {
  m.doc() = "Plug-in optimal transport map estimators";
  py::register_exception<Error>(m, "OtmapError", PyExc_ValueError);

  m.def(
      "solve_ot",
      [](const Array& x, const Array& y, std::optional<Array> wx, std::optional<Array> wy) {
        const auto plan = solve_ot(to_measure(x, wx), to_measure(y, wy));
        py::array_t<double> entries({plan.entries.size(), std::size_t{3}});
        auto e = entries.mutable_unchecked<2>();
        for (std::size_t k = 0; k < plan.entries.size(); ++k) {
          e(k, 0) = static_cast<double>(plan.entries[k].source);
          e(k, 1) = static_cast<double>(plan.entries[k].target);
          e(k, 2) = plan.entries[k].mass;
        }
        py::dict out;
        out["cost"] = plan.cost;
        out["plan"] = entries;
        out["psi"] = to_array(plan.duals.psi);
        out["psi_star"] = to_array(plan.duals.psi_star);
        return out;
      },
      py::arg("x"), py::arg("y"), py::arg("wx") = py::none(), py::arg("wy") = py::none(),
      "Exact OT for squared Euclidean cost. Returns cost, plan rows (i, j, mass) and potentials.");

  m.def(
      "w2_squared",
      [](const Array& x, const Array& y, std::optional<Array> wx, std::optional<Array> wy) {
        return w2_squared(to_measure(x, wx), to_measure(y, wy));
      },
      py::arg("x"), py::arg("y"), py::arg("wx") = py::none(), py::arg("wy") = py::none());

  m.def(
      "barycentric_projection",
      [](const Array& x, const Array& y, std::optional<Array> wx, std::optional<Array> wy) {
        return to_array(barycentric_projection(solve_ot(to_measure(x, wx), to_measure(y, wy))).images);
      },
      py::arg("x"), py::arg("y"), py::arg("wx") = py::none(), py::arg("wy") = py::none(),
      "Image of every source atom under the barycentric projection of the optimal plan.");

  m.def(
      "kernel_moments",
      [](int s) { return kernel_moments(hermite_kernel(s)).moments; }, py::arg("s"),
      "Moments j = 0..2s+2 of the order-(2s+2) kernel.");
  m.def(
      "kernel",
      [](int s, const Array& u) {
        const auto k = hermite_kernel(s);
        py::array_t<double> out(u.size());
        for (py::ssize_t i = 0; i < u.size(); ++i) out.mutable_data()[i] = k(u.data()[i]);
        return out;
      },
      py::arg("s"), py::arg("u"));
  m.def("bandwidth", &bandwidth, py::arg("n"), py::arg("d"), py::arg("s"));

  py::class_<Problem>(m, "_Problem")
      .def(py::init<const std::string&>())
      .def_property_readonly("dim", [](const Problem& p) { return p.get().dim(); })
      .def_property_readonly("lipschitz", [](const Problem& p) { return p.get().lipschitz(); })
      .def_property_readonly("true_w2sq", [](const Problem& p) { return p.get().true_w2sq(); })
      .def("transport", &Problem::transport, py::arg("x"))
      .def("sample", &Problem::sample, py::arg("n"), py::arg("seed"));

  m.def(
      "_run_estimator",
      [](const Problem& p, const std::string& estimator, std::size_t m_, std::size_t n, std::uint64_t seed) {
        std::vector<std::string> errors;
        const auto cfg = estimator_from_json(nlohmann::json::parse(estimator), errors);
        if (!errors.empty()) throw Error(join_errors(errors));
        const auto r = run_estimator(cfg, p.get(), m_, n, seed);
        py::dict out;
        out["map_error"] = r.map_error;
        out["w2_error"] = r.w2_error;
        out["w2sq_estimate"] = r.w2sq_estimate;
        out["w2sq_true"] = r.w2sq_true;
        out["atoms"] = r.atoms;
        return out;
      },
      py::arg("problem"), py::arg("estimator"), py::arg("m"), py::arg("n"), py::arg("seed"));

  m.def(
      "_run_rates",
      [](const Problem& p, const std::string& estimator, std::vector<std::size_t> n_grid, std::size_t reps,
         std::uint64_t seed, unsigned threads) {
        std::vector<std::string> errors;
        RateConfig c;
        c.estimator = estimator_from_json(nlohmann::json::parse(estimator), errors);
        if (!errors.empty()) throw Error(join_errors(errors));
        c.n_grid = std::move(n_grid);
        c.reps = reps;
        c.seed = seed;
        c.threads = threads;
        RateReport report;
        {
          py::gil_scoped_release release;
          report = run_rate_experiment(c, p.get());
        }
        return parse_json(rate_summary_json(report));
      },
      py::arg("problem"), py::arg("estimator"), py::arg("n_grid"), py::arg("reps"), py::arg("seed"),
      py::arg("threads"));

  m.def(
      "stability_sweep",
      [](std::size_t instances, std::uint64_t seed, unsigned threads) {
        StabilitySweepConfig c;
        c.instances = instances;
        c.seed = seed;
        c.threads = threads;
        const auto sweep = run_stability_sweep(c);
        return py::make_tuple(sweep.holds, sweep.cases.size());
      },
      py::arg("instances") = 100, py::arg("seed") = 1, py::arg("threads") = 0,
      "Returns (holds, instances) for the stability inequality over random problems.");

  m.def(
      "plugin_barycenter",
      [](const Array& x, const Array& y, std::optional<Array> wx, std::optional<Array> wy) {
        const auto b = plugin_barycenter(to_measure(x, wx), to_measure(y, wy));
        return py::make_tuple(to_array(b.atoms), to_array(b.weights));
      },
      py::arg("x"), py::arg("y"), py::arg("wx") = py::none(), py::arg("wy") = py::none());

  m.def(
      "indep_test",
      [](const Array& x, const Array& y, double alpha, std::size_t null_draws, std::uint64_t seed,
         bool use_cache, unsigned threads) {
        IndepConfig c;
        c.null_draws = null_draws;
        c.use_cache = use_cache;
        c.threads = threads;
        const auto px = to_points(x), py_ = to_points(y);
        IndepTestResult r;
        {
          py::gil_scoped_release release;
          r = indep_test(px, py_, alpha, c, seed);
        }
        return parse_json(r.to_json());
      },
      py::arg("x"), py::arg("y"), py::arg("alpha") = 0.05, py::arg("null_draws") = 1000, py::arg("seed") = 1,
      py::arg("use_cache") = true, py::arg("threads") = 0);

  m.def(
      "gaussian_copula_sample",
      [](std::size_t n, std::size_t d1, std::size_t d2, double rho, std::uint64_t seed) {
        auto [x, y] = gaussian_copula_sample(n, d1, d2, rho, seed);
        return py::make_tuple(to_array(x), to_array(y));
      },
      py::arg("n"), py::arg("d1"), py::arg("d2"), py::arg("rho"), py::arg("seed"));
}
