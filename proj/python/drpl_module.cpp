#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "drpl/io.hpp"
#include "drpl/noise.hpp"
#include "drpl/synthetic.hpp"

namespace py = pybind11;
using namespace drpl;

namespace {

Dataset make_dataset(const Matrix& features, const std::vector<int>& observed,
                     int num_classes) {
    Dataset ds;
    ds.features = features;
    ds.observed = observed;
    ds.true_labels = observed;
    ds.clean.assign(features.rows(), 1);
    ds.num_classes = num_classes;
    ds.ids.resize(features.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) ds.ids[i] = i;
    ds.validate();
    return ds;
}

}  // namespace

PYBIND11_MODULE(_drpl, m) {
    m.doc() = "Label-noise detection and robust training pipeline";

    py::class_<Dataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("features"), py::arg("observed"),
             py::arg("num_classes"))
        .def_readwrite("features", &Dataset::features)
        .def_readwrite("observed", &Dataset::observed)
        .def_readwrite("true_labels", &Dataset::true_labels)
        .def_property(
            "clean",
            [](const Dataset& ds) {
                return std::vector<bool>(ds.clean.begin(), ds.clean.end());
            },
            [](Dataset& ds, const std::vector<bool>& v) {
                ds.clean.assign(v.begin(), v.end());
            })
        .def_readwrite("num_classes", &Dataset::num_classes)
        .def("__len__", [](const Dataset& ds) { return ds.size(); });

    py::class_<TransitionMatrix>(m, "TransitionMatrix")
        .def(py::init([](const Matrix& rows) {
                 TransitionMatrix t{rows, {}};
                 t.validate();
                 return t;
             }),
             py::arg("rows"))
        .def_readonly("rows", &TransitionMatrix::rows)
        .def_readonly("uniform_fallback_rows", &TransitionMatrix::uniform_fallback_rows);

    py::class_<OodPool>(m, "OodPool")
        .def(py::init([](const Matrix& features, const std::vector<int>& source_class,
                         int num_classes) {
                 OodPool p{features, source_class, num_classes};
                 p.validate();
                 return p;
             }),
             py::arg("features"), py::arg("source_class"), py::arg("num_classes"));

    py::class_<BetaMixture>(m, "BetaMixture")
        .def_readonly("weight1", &BetaMixture::weight1)
        .def_readonly("weight2", &BetaMixture::weight2)
        .def_readonly("alpha1", &BetaMixture::alpha1)
        .def_readonly("beta1", &BetaMixture::beta1)
        .def_readonly("alpha2", &BetaMixture::alpha2)
        .def_readonly("beta2", &BetaMixture::beta2)
        .def_readonly("degenerate", &BetaMixture::degenerate)
        .def_property_readonly("mean1", &BetaMixture::mean1)
        .def_property_readonly("mean2", &BetaMixture::mean2)
        .def("to_json", &mixture_to_json);

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("warmup_epochs", &RunConfig::warmup_epochs)
        .def_readwrite("stage1_epochs", &RunConfig::stage1_epochs)
        .def_readwrite("stage2_epochs", &RunConfig::stage2_epochs)
        .def_readwrite("final_epochs", &RunConfig::final_epochs)
        .def_readwrite("learning_rate", &RunConfig::learning_rate)
        .def_readwrite("lambda1", &RunConfig::lambda_entropy)
        .def_readwrite("lambda2", &RunConfig::lambda_balance)
        .def_readwrite("gamma1", &RunConfig::gamma1)
        .def_readwrite("gamma2", &RunConfig::gamma2)
        .def_readwrite("mixup_alpha", &RunConfig::mixup_alpha)
        .def_readwrite("batch_size", &RunConfig::batch_size)
        .def_readwrite("seed", &RunConfig::seed)
        .def_property(
            "mode", [](const RunConfig& c) { return to_string(c.mode); },
            [](RunConfig& c, const std::string& s) { c.mode = parse_run_mode(s); });

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("best_test_accuracy", &RunReport::best_test_accuracy)
        .def_readonly("last_test_accuracy", &RunReport::last_test_accuracy)
        .def_readonly("best_epoch", &RunReport::best_epoch)
        .def("to_json", &report_to_json)
        .def_property_readonly("stage1_posteriors",
                               [](const RunReport& r) {
                                   return r.stage1 ? r.stage1->noisy_posterior : Vector();
                               })
        .def_property_readonly("stage2_posteriors", [](const RunReport& r) {
            return r.stage2 ? r.stage2->noisy_posterior : Vector();
        });

    m.def(
        "generate_synthetic",
        [](int classes, int per_class, int dims, double separation, int ood_classes,
           int ood_per_class, std::uint64_t seed,
           std::optional<std::uint64_t> means_seed) {
            SyntheticData d = generate_synthetic(
                {classes, per_class, dims, separation, ood_classes, ood_per_class},
                seed, means_seed);
            return py::make_tuple(d.dataset, d.pool);
        },
        py::arg("classes") = 4, py::arg("per_class") = 500, py::arg("dims") = 16,
        py::arg("separation") = 6.0, py::arg("ood_classes") = 0,
        py::arg("ood_per_class") = 0, py::arg("seed") = 0,
        py::arg("means_seed") = py::none());

    m.def(
        "inject_uniform_id",
        [](const Dataset& ds, double rate, std::uint64_t seed) {
            Rng rng = make_rng(seed, "noise");
            return inject_uniform_id(ds, rate, rng);
        },
        py::arg("dataset"), py::arg("rate"), py::arg("seed") = 0);
    m.def(
        "inject_nonuniform_id",
        [](const Dataset& ds, const TransitionMatrix& t, double rate,
           std::uint64_t seed) {
            Rng rng = make_rng(seed, "noise");
            return inject_nonuniform_id(ds, t, rate, rng);
        },
        py::arg("dataset"), py::arg("transition"), py::arg("rate"), py::arg("seed") = 0);
    m.def(
        "inject_uniform_ood",
        [](const Dataset& ds, const OodPool& pool, double rate, std::uint64_t seed) {
            Rng rng = make_rng(seed, "noise");
            return inject_uniform_ood(ds, pool, rate, rng);
        },
        py::arg("dataset"), py::arg("pool"), py::arg("rate"), py::arg("seed") = 0);

    m.def("normalize_losses", &normalize_losses, py::arg("raw"));
    m.def("fit_beta_mixture", &fit_beta_mixture, py::arg("losses"),
          py::arg("iterations") = 10);
    m.def(
        "noisy_posterior",
        [](const BetaMixture& bmm, const Vector& losses) {
            return posterior(bmm, losses).noisy_probability;
        },
        py::arg("mixture"), py::arg("losses"));

    m.def(
        "roc_auc",
        [](const Vector& scores, const std::vector<bool>& is_noisy, double threshold) {
            DetectionOutcome outcome;
            outcome.scores = scores;
            outcome.is_noisy.assign(is_noisy.begin(), is_noisy.end());
            outcome.threshold = threshold;
            RocResult r = roc(outcome);
            return py::make_tuple(r.auc, r.operating_tpr, r.operating_fpr);
        },
        py::arg("scores"), py::arg("is_noisy"), py::arg("threshold") = 0.5);

    m.def(
        "run_pipeline",
        [](const Dataset& train, const Dataset& test, const RunConfig& cfg) {
            return run_pipeline(train, test, cfg).report;
        },
        py::arg("train"), py::arg("test"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
}
