#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cgan/baselines.hpp"
#include "cgan/checkpoint.hpp"
#include "cgan/cohort.hpp"
#include "cgan/estimators.hpp"
#include "cgan/simgen.hpp"
#include "cgan/trainer.hpp"
#include "cgan/weights.hpp"

namespace py = pybind11;
using namespace cgan;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() == 1) {
    return Tensor(static_cast<std::size_t>(a.shape(0)), 1, std::vector<double>(a.data(), a.data() + a.size()));
  }
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  return Tensor(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  return Array({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())}, t.values().data());
}

// The (count, ptr) constructor comes back with a zero stride here, so spell out the shape.
Array to_array(std::span<const double> v) {
  return Array(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())}, v.data());
}

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

StudyArm make_arm(const Array& features, std::optional<Array> outcomes, std::optional<std::vector<std::string>> labels,
                  std::string id) {
  StudyArm arm;
  arm.id = std::move(id);
  arm.features = to_tensor(features);
  arm.feature_names = default_feature_names(arm.dim());
  for (std::size_t i = 0; i < arm.size(); ++i) arm.unit_ids.push_back(arm.id + "_" + std::to_string(i));
  if (outcomes) arm.outcomes = to_vector(*outcomes);
  arm.labels = std::move(labels);
  arm.validate();
  return arm;
}

py::dict weights_dict(const WeightVector& w) {
  py::dict d;
  d["arm"] = w.arm;
  d["raw"] = to_array(w.raw);
  d["weights"] = to_array(w.weights);
  return d;
}

}  // namespace

PYBIND11_MODULE(cgan, m) {
  m.doc() = "Counterfactual chi-GAN weighting for observational studies";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::class_<StudyArm>(m, "StudyArm")
      .def(py::init(&make_arm), py::arg("features"), py::arg("outcomes") = std::nullopt,
           py::arg("labels") = std::nullopt, py::arg("id") = "arm")
      .def_readwrite("id", &StudyArm::id)
      .def_readwrite("unit_ids", &StudyArm::unit_ids)
      .def_readwrite("feature_names", &StudyArm::feature_names)
      .def_property_readonly("features", [](const StudyArm& a) { return to_array(a.features); })
      .def_property_readonly("outcomes",
                             [](const StudyArm& a) -> py::object {
                               if (!a.outcomes) return py::none();
                               return to_array(*a.outcomes);
                             })
      .def_readonly("labels", &StudyArm::labels)
      .def("__len__", &StudyArm::size)
      .def_property_readonly("dim", &StudyArm::dim);

  m.def("read_cohort_csv", &read_cohort_csv, py::arg("path"), py::arg("arm_id"));
  m.def("write_cohort_csv", &write_cohort_csv, py::arg("path"), py::arg("arm"));

  m.def(
      "simulate",
      [](std::uint64_t seed, std::size_t d, std::size_t n_sub, double kappa0, double nu0) {
        SimSpec spec;
        spec.seed = seed;
        spec.dim = d;
        spec.n_sub = n_sub;
        spec.kappa0 = kappa0;
        spec.nu0 = nu0;
        SimPopulations pops = simulate(spec);
        return py::make_tuple(std::move(pops.arm1), std::move(pops.arm2));
      },
      py::arg("seed") = 0, py::arg("d") = 10, py::arg("n_sub") = 2000, py::arg("kappa0") = 0.1, py::arg("nu0") = 0.0,
      "Two-arm mixture study: arm 1 = A + B, arm 2 = A + C, with outcomes and subpopulation labels.");

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("max_iterations", &TrainConfig::max_iterations)
      .def_readwrite("disc_steps", &TrainConfig::disc_steps)
      .def_readwrite("lr_generator", &TrainConfig::lr_generator)
      .def_readwrite("lr_discriminator", &TrainConfig::lr_discriminator)
      .def_readwrite("lr_decay", &TrainConfig::lr_decay)
      .def_readwrite("decay_period", &TrainConfig::decay_period)
      .def_readwrite("recenter_period", &TrainConfig::recenter_period)
      .def_readwrite("convergence_window", &TrainConfig::convergence_window)
      .def_readwrite("convergence_tol", &TrainConfig::convergence_tol)
      .def_readwrite("noise_dim", &TrainConfig::noise_dim)
      .def_readwrite("hidden", &TrainConfig::hidden)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<TrainedModel>(m, "TrainedModel")
      .def_property_readonly("arm_count", &TrainedModel::arm_count)
      .def_property_readonly("dim", &TrainedModel::dim)
      .def_property_readonly("trace",
                             [](const TrainedModel& model) {
                               std::vector<double> totals;
                               for (const TraceRow& r : model.trace) totals.push_back(r.total);
                               return to_array(totals);
                             })
      .def(
          "weights",
          [](const TrainedModel& model, std::size_t arm, const StudyArm& data) {
            return weights_dict(extract_weights(model, arm, data));
          },
          py::arg("arm"), py::arg("data"))
      .def(
          "sample",
          [](const TrainedModel& model, std::size_t count, std::uint64_t seed) {
            Rng rng(seed);
            const Tensor x = model.generator.sample(count, rng);
            // Back to the original feature scale.
            Tensor out = x;
            for (std::size_t r = 0; r < out.rows(); ++r) {
              for (std::size_t c = 0; c < out.cols(); ++c) {
                out(r, c) = x(r, c) * model.stats.stddev[c] + model.stats.mean[c];
              }
            }
            return to_array(out);
          },
          py::arg("count"), py::arg("seed") = 0)
      .def("save", [](const TrainedModel& model, const std::filesystem::path& p) { save_checkpoint(p, model); })
      .def_static("load", &load_checkpoint);

  m.def(
      "train",
      [](const std::vector<StudyArm>& arms, const TrainConfig& config) {
        py::gil_scoped_release release;
        return train(arms, config);
      },
      py::arg("arms"), py::arg("config") = TrainConfig{});

  m.def(
      "normalize", [](const Array& r) { return weights_dict(normalize(to_vector(r))); }, py::arg("ratios"));
  m.def(
      "kish_ess", [](const Array& w) { return kish_ess(to_vector(w)); }, py::arg("weights"));
  m.def(
      "weighted_ate",
      [](const Array& y1, const Array& w1, const Array& y2, const Array& w2) {
        WeightVector a;
        a.weights = to_vector(w1);
        WeightVector b;
        b.weights = to_vector(w2);
        return weighted_ate(to_vector(y1), a, to_vector(y2), b);
      },
      py::arg("y1"), py::arg("w1"), py::arg("y2"), py::arg("w2"));
  m.def(
      "asdm",
      [](const Array& x1, const Array& w1, const Array& x2, const Array& w2) {
        const BalanceReport r = asdm(to_tensor(x1), to_vector(w1), to_tensor(x2), to_vector(w2));
        py::dict d;
        d["asdm"] = to_array(r.asdm);
        d["skipped"] = r.skipped;
        d["mean"] = r.mean_asdm;
        return d;
      },
      py::arg("x1"), py::arg("w1"), py::arg("x2"), py::arg("w2"));
  m.def(
      "chi2_from_ratios", [](const Array& r) { return chi2_from_ratios(to_vector(r)); }, py::arg("ratios"));
  m.def(
      "analytic_gaussian_chi2",
      [](double mp, double vp, double mq, double vq) { return analytic_gaussian_chi2({mp, vp}, {mq, vq}); },
      py::arg("mean_p"), py::arg("var_p"), py::arg("mean_q"), py::arg("var_q"));

  py::class_<PropensityModel>(m, "PropensityModel")
      .def_readonly("coef", &PropensityModel::coef)
      .def_readonly("intercept", &PropensityModel::intercept)
      .def_readonly("converged", &PropensityModel::converged)
      .def_readonly("separation_warning", &PropensityModel::separation_warning)
      .def("scores", [](const PropensityModel& pm, const Array& x) { return to_array(pm.scores(to_tensor(x))); });

  m.def(
      "fit_logistic_propensity",
      [](const Array& x, const std::vector<int>& treated) { return fit_logistic_propensity(to_tensor(x), treated); },
      py::arg("x"), py::arg("treated"));
  m.def(
      "ipw_weights",
      [](const Array& scores, const std::vector<int>& treated) {
        const auto [w1, w0] = ipw_weights(to_vector(scores), treated);
        return py::make_tuple(to_array(w1.weights), to_array(w0.weights));
      },
      py::arg("scores"), py::arg("treated"));
  m.def(
      "clip_percentile",
      [](const Array& s, double lo, double hi) { return to_array(clip_percentile(to_vector(s), lo, hi)); },
      py::arg("scores"), py::arg("lower_pct") = 10.0, py::arg("upper_pct") = 90.0);
  m.def(
      "percentile", [](const Array& v, double pct) { return percentile(to_vector(v), pct); }, py::arg("values"),
      py::arg("pct"));
}
