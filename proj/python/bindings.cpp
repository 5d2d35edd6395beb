#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deeprec/activation.hpp"
#include "deeprec/architecture.hpp"
#include "deeprec/checkpoint.hpp"
#include "deeprec/cli.hpp"
#include "deeprec/data.hpp"
#include "deeprec/loss.hpp"
#include "deeprec/model.hpp"
#include "deeprec/synthetic.hpp"
#include "deeprec/training.hpp"

#include <sstream>

namespace py = pybind11;

namespace deeprec::python {

using Model = Autoencoder<float>;
using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

void define_module(py::module_& m) {
  py::enum_<Activation>(m, "Activation")
      .value("SIGMOID", Activation::Sigmoid)
      .value("TANH", Activation::Tanh)
      .value("RELU", Activation::Relu)
      .value("RELU6", Activation::Relu6)
      .value("ELU", Activation::Elu)
      .value("LRELU", Activation::LRelu)
      .value("SELU", Activation::Selu)
      .value("LINEAR", Activation::Linear);

  py::class_<ActivationKind>(m, "ActivationKind")
      .def(py::init<Activation, double, double>(), py::arg("variant"), py::arg("lrelu_slope") = 0.01,
           py::arg("elu_alpha") = 1.0)
      .def_readonly("variant", &ActivationKind::variant)
      .def_readonly("lrelu_slope", &ActivationKind::lrelu_slope)
      .def_readonly("elu_alpha", &ActivationKind::elu_alpha)
      .def("__repr__", [](const ActivationKind& k) { return "ActivationKind(" + to_string(k) + ")"; });

  m.def("parse_activation", &parse_activation);
  m.def("activation_apply", [](const ActivationKind& k, double x) { return activation_apply(k, x); });
  m.def("activation_derivative", [](const ActivationKind& k, double x) { return activation_derivative(k, x); });

  py::class_<ArchitectureSpec>(m, "ArchitectureSpec")
      .def_readwrite("encoder_dims", &ArchitectureSpec::encoder_dims)
      .def_readwrite("decoder_dims", &ArchitectureSpec::decoder_dims)
      .def_readwrite("dropout_prob", &ArchitectureSpec::dropout_prob)
      .def_readwrite("activation", &ArchitectureSpec::activation)
      .def_readwrite("tied", &ArchitectureSpec::tied)
      .def("__str__", &serialize_architecture);
  m.def("parse_architecture", [](const std::string& s) { return parse_architecture(s); });
  m.def("serialize_architecture", &serialize_architecture);
  m.def("parameter_count", &parameter_count, py::arg("spec"), py::arg("n_items"));

  m.def("masked_mse", &masked_mse<double>, py::arg("predicted"), py::arg("target"), py::arg("mask"));
  m.def("masked_mse_gradient", &masked_mse_gradient<double>, py::arg("predicted"), py::arg("target"),
        py::arg("mask"));
  m.def("rmse_from_mmse", &rmse_from_mmse);

  py::class_<Model>(m, "Autoencoder")
      .def(py::init([](const std::string& arch, std::size_t n_items, const std::string& activation,
                       bool tied, std::uint64_t seed) {
             auto spec = parse_architecture(arch);
             spec.activation = parse_activation(activation);
             spec.tied = tied;
             return Model(spec, n_items, seed);
           }),
           py::arg("arch"), py::arg("n_items"), py::arg("activation") = "selu", py::arg("tied") = false,
           py::arg("seed") = 1)
      .def_property_readonly("n_items", &Model::n_items)
      .def_property_readonly("architecture", [](const Model& mdl) { return serialize_architecture(mdl.spec()); })
      .def("parameter_count", &Model::parameter_count)
      .def("predict", [](const Model& mdl, const MatrixF& x) { return mdl.predict(x); })
      .def("layer_weight", &Model::layer_weight);

  py::class_<RatingDataset>(m, "RatingDataset")
      .def_property_readonly("n_users", &RatingDataset::n_users)
      .def_property_readonly("n_items", &RatingDataset::n_items)
      .def_property_readonly("n_ratings", &RatingDataset::n_ratings)
      .def("find_user", &RatingDataset::find_user)
      .def("user_vector", [](const RatingDataset& d, std::uint32_t u) {
        const auto v = d.user_vector(u);
        return py::make_tuple(v.indices, v.values);
      });
  m.def("load_ratings", [](const std::string& path) {
    return RatingDataset::from_records(read_ratings_file(path));
  });

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("refeed_count", &TrainConfig::refeed_count)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("eval_every", &TrainConfig::eval_every);

  m.def(
      "fit",
      [](Model& model, const std::string& train_path, const std::string& eval_path, const TrainConfig& config) {
        const auto train = RatingDataset::from_records(read_ratings_file(train_path));
        std::optional<EvalSet> eval;
        if (!eval_path.empty()) eval = make_eval_set(train, read_ratings_file(eval_path));
        FitResult<float> result;
        {
          py::gil_scoped_release release;
          result = fit(model, train, eval ? &*eval : nullptr, config);
        }
        py::list history;
        for (const auto& h : result.history) {
          py::dict row;
          row["epoch"] = h.epoch;
          row["train_mmse"] = h.train_mmse;
          row["train_rmse"] = h.train_rmse;
          row["refeed_mmse"] = h.refeed_mmse;
          row["valid_rmse"] = h.valid_rmse;
          history.append(row);
        }
        py::dict out;
        out["history"] = history;
        out["diverged"] = result.diverged;
        out["best_epoch"] = result.best ? result.best->epoch : -1;
        out["best_eval_rmse"] = result.best ? result.best->eval_rmse : NAN;
        return out;
      },
      py::arg("model"), py::arg("train_path"), py::arg("eval_path") = "", py::arg("config") = TrainConfig{});

  m.def(
      "run",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_subcommand(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      "Run a deeprec subcommand in-process; returns (exit_code, stdout, stderr).");
}

}  // namespace deeprec::python

PYBIND11_MODULE(_deeprec, m) {  // NOLINT
  m.doc() = "Deep autoencoder collaborative filtering";
  deeprec::python::define_module(m);
}
