// Python bindings: numpy arrays in and out, library errors mapped to
// Python exception classes.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "mpts/acquisition.hpp"
#include "mpts/config.hpp"
#include "mpts/dataio.hpp"
#include "mpts/error.hpp"
#include "mpts/experiment.hpp"
#include "mpts/gradcheck.hpp"
#include "mpts/mmd.hpp"
#include "mpts/model.hpp"
#include "mpts/pool.hpp"
#include "mpts/trainer.hpp"

namespace py = pybind11;
using namespace mpts;

namespace {

using InArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const InArray& a) {
  if (a.ndim() == 1) {
    Matrix m(1, static_cast<std::size_t>(a.shape(0)));
    std::memcpy(m.data().data(), a.data(), m.size() * sizeof(double));
    return m;
  }
  if (a.ndim() != 2) throw DimensionError("expected a 1-D or 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  if (m.size() > 0) std::memcpy(m.data().data(), a.data(), m.size() * sizeof(double));
  return m;
}

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  if (m.size() > 0) std::memcpy(out.mutable_data(), m.data().data(), m.size() * sizeof(double));
  return out;
}

KernelSpec kernel_from(const std::vector<double>& bandwidths) { return KernelSpec(bandwidths); }

std::shared_ptr<Dataset> dataset_from(const InArray& x, const std::vector<int>& y) {
  auto d = std::make_shared<Dataset>();
  d->name = "python";
  d->features = to_matrix(x);
  d->labels = y;
  int top = -1;
  for (int v : y) top = std::max(top, v);
  d->class_count = static_cast<std::size_t>(top + 1);
  d->validate();
  return d;
}

py::tuple dataset_tuple(const Dataset& d) {
  return py::make_tuple(to_numpy(d.features), py::array(py::cast(d.labels)), d.class_count);
}

py::dict history_dict(const std::vector<EpochStats>& h) {
  std::vector<double> ce, mmd, lr;
  for (const auto& e : h) {
    ce.push_back(e.mean_ce);
    mmd.push_back(e.mean_mmd2);
    lr.push_back(e.lr);
  }
  py::dict d;
  d["mean_ce"] = ce;
  d["mean_mmd2"] = mmd;
  d["lr"] = lr;
  return d;
}

}  // namespace

PYBIND11_MODULE(pympts, m) {
  m.doc() = "Active learning with MMD-regularized training and trajectory-averaged acquisition";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DivergedError>(m, "DivergedError", base.ptr());

  // Kernel two-sample machinery.
  m.def("rbf_kernel", [](const InArray& a, const InArray& b, const std::vector<double>& bw) {
    return to_numpy(rbf_kernel(to_matrix(a), to_matrix(b), kernel_from(bw)));
  }, py::arg("a"), py::arg("b"), py::arg("bandwidths"));
  m.def("mmd2", [](const InArray& a, const InArray& b, const std::vector<double>& bw) {
    return mmd2_biased(to_matrix(a), to_matrix(b), kernel_from(bw));
  }, py::arg("a"), py::arg("b"), py::arg("bandwidths"),
        "Biased MMD^2 with an RBF kernel averaged over the given bandwidths.");
  m.def("mmd2_grad", [](const InArray& a, const InArray& b, const std::vector<double>& bw) {
    const MmdGrads g = mmd2_grad(to_matrix(a), to_matrix(b), kernel_from(bw));
    return py::make_tuple(to_numpy(g.dza), to_numpy(g.dzb));
  }, py::arg("a"), py::arg("b"), py::arg("bandwidths"));
  m.def("median_heuristic", [](const InArray& z) { return median_heuristic(to_matrix(z)); });

  // Acquisition scoring.
  m.def("entropy_scores", [](const InArray& p) { return entropy_scores(to_matrix(p)); });
  m.def("bald_scores", [](const std::vector<InArray>& passes) {
    std::vector<Matrix> ms;
    for (const auto& p : passes) ms.push_back(to_matrix(p));
    return bald_scores(ms);
  });
  m.def("select_top_k", [](const std::vector<double>& s, std::size_t k) { return select_top_k(s, k); },
        py::arg("scores"), py::arg("k"));

  // Learning-rate schedule.
  m.def("cyclic_lr",
        [](std::size_t step, std::size_t spe, std::size_t epochs, std::size_t n, double base_lr,
           double floor_ratio) {
          TrainConfig c;
          c.epochs = epochs;
          c.n_checkpoints = n;
          c.base_lr = base_lr;
          c.lr_floor_ratio = floor_ratio;
          c.validate();
          return cyclic_lr(step, spe, c);
        },
        py::arg("step"), py::arg("steps_per_epoch"), py::arg("epochs") = 100,
        py::arg("n_checkpoints") = 5, py::arg("base_lr") = 1e-3, py::arg("lr_floor_ratio") = 0.1);
  m.def("checkpoint_steps",
        [](std::size_t spe, std::size_t epochs, std::size_t n) {
          TrainConfig c;
          c.epochs = epochs;
          c.n_checkpoints = n;
          c.validate();
          return checkpoint_steps(spe, c);
        },
        py::arg("steps_per_epoch"), py::arg("epochs") = 100, py::arg("n_checkpoints") = 5);

  // Data.
  m.def("synth_blobs", [](std::size_t classes, std::size_t per_class, std::size_t dim, double sep,
                          std::uint64_t seed) {
    Rng rng(seed);
    return dataset_tuple(synth_blobs(classes, per_class, dim, sep, rng));
  }, py::arg("classes"), py::arg("per_class"), py::arg("dim"), py::arg("separation"),
        py::arg("seed") = 0, "Returns (X, y, class_count).");
  m.def("load_mnist_idx", [](const std::filesystem::path& images, const std::filesystem::path& labels) {
    return dataset_tuple(load_mnist_idx(images, labels));
  });
  m.def("load_csv", [](const std::filesystem::path& path, const std::string& label) {
    const Dataset d = load_csv(path, LabelColumn{label});
    return py::make_tuple(to_numpy(d.features), py::array(py::cast(d.labels)), d.label_names);
  }, py::arg("path"), py::arg("label_column") = "");

  // Model.
  py::class_<MlpParams>(m, "Mlp")
      .def_static("init",
                  [](const std::vector<std::size_t>& sizes, std::size_t split, double dropout,
                     std::uint64_t seed) {
                    Rng rng(seed);
                    return init_mlp({sizes, split, dropout}, rng);
                  },
                  py::arg("layer_sizes"), py::arg("split_index") = 1, py::arg("dropout") = 0.0,
                  py::arg("seed") = 0)
      .def("predict_proba", [](const MlpParams& p, const InArray& x) {
        return to_numpy(predict_proba(p, to_matrix(x)));
      })
      .def("features", [](const MlpParams& p, const InArray& x) {
        return to_numpy(extract_features(p, to_matrix(x)));
      })
      .def_property_readonly("weights", [](const MlpParams& p) {
        py::list out;
        for (const auto& l : p.layers) out.append(py::make_tuple(to_numpy(l.w), l.b));
        return out;
      })
      .def_readonly("split_index", &MlpParams::split_index)
      .def_readonly("dropout_rate", &MlpParams::dropout_rate)
      .def("save", [](const MlpParams& p, const std::filesystem::path& path) { save_params(p, path); })
      .def_static("load", &load_params, py::arg("path"), py::arg("split_index"),
                  py::arg("dropout") = 0.0);

  m.def("train_round",
        [](const InArray& x, const std::vector<int>& y, const std::vector<std::size_t>& labeled,
           const std::vector<std::size_t>& unlabeled, const std::vector<std::size_t>& layer_sizes,
           std::size_t split_index, std::size_t epochs, double base_lr, std::size_t batch_size,
           double lambda, double weight_decay, std::size_t n_checkpoints, std::uint64_t seed) {
          auto data = dataset_from(x, y);
          const PoolState pool(data, labeled, unlabeled, {});
          TrainConfig c;
          c.epochs = epochs;
          c.base_lr = base_lr;
          c.batch_size = batch_size;
          c.lambda = lambda;
          c.weight_decay = weight_decay;
          c.n_checkpoints = n_checkpoints;
          c.seed = seed;
          TrainResult r;
          {
            py::gil_scoped_release release;
            r = train_round(pool, {layer_sizes, split_index, 0.0}, c);
          }
          py::dict out;
          out["params"] = r.final_params;
          py::list traj;
          for (const auto& s : r.trajectory) traj.append(s.restore());
          out["trajectory"] = traj;
          out["snapshot_steps"] = r.snapshot_steps;
          out["history"] = history_dict(r.history);
          out["bandwidths"] = r.kernel.bandwidths();
          return out;
        },
        py::arg("x"), py::arg("y"), py::arg("labeled"), py::arg("unlabeled"),
        py::arg("layer_sizes"), py::arg("split_index") = 1, py::arg("epochs") = 100,
        py::arg("base_lr") = 1e-3, py::arg("batch_size") = 64, py::arg("lambda_") = 0.1,
        py::arg("weight_decay") = 1e-4, py::arg("n_checkpoints") = 5, py::arg("seed") = 0);

  m.def("avg_predict", [](const std::vector<MlpParams>& trajectory, const InArray& x) {
    CheckpointSet set;
    for (const auto& p : trajectory) set.push_back(snapshot(p));
    return to_numpy(avg_predict(set, to_matrix(x)));
  }, "Mean class probabilities over a list of checkpoints.");

  // Experiments.
  m.def("run_experiment",
        [](const std::string& config_json, std::size_t jobs) {
          const ExperimentConfig cfg = parse_config_text(config_json);
          RunOptions opts;
          opts.jobs = jobs;
          std::vector<RoundLog> logs;
          {
            py::gil_scoped_release release;
            logs = run_experiment(cfg, opts);
          }
          py::list out;
          for (const auto& l : logs) {
            py::dict d;
            d["method"] = l.method;
            d["repeat"] = l.repeat;
            d["round"] = l.round;
            d["labeled_count"] = l.labeled_count;
            d["accuracy"] = l.test_accuracy;
            out.append(d);
          }
          return out;
        },
        py::arg("config_json"), py::arg("jobs") = 1,
        "Run a full experiment from a JSON config string; returns one dict per round.");
  m.def("resolve_config", [](const std::string& text) { return config_to_json(parse_config_text(text)); });

  m.def("gradcheck", [](std::uint64_t seed) {
    py::list out;
    for (const auto& s : run_gradcheck(seed)) {
      py::dict d;
      d["name"] = s.name;
      d["instances"] = s.instances;
      d["max_rel_error"] = s.max_rel_error;
      d["passed"] = s.passed;
      out.append(d);
    }
    return out;
  }, py::arg("seed") = 0);
}
