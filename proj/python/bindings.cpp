#include "mergemeter/conflict_metrics.hpp"
#include "mergemeter/error.hpp"
#include "mergemeter/merge_engine.hpp"
#include "mergemeter/repr_diag.hpp"
#include "mergemeter/stats.hpp"
#include "mergemeter/tensor_store.hpp"
#include "mergemeter/theory.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace mergemeter;

namespace {

Checkpoint checkpoint_from_dict(const py::dict & tensors, const py::dict & dtypes) {
    std::vector<TensorEntry> entries;
    for (const auto & item : tensors) {
        TensorEntry e;
        e.name = py::cast<std::string>(item.first);
        const auto arr = py::cast<py::array_t<float, py::array::c_style | py::array::forcecast>>(item.second);
        e.shape.assign(arr.shape(), arr.shape() + arr.ndim());
        e.values.assign(arr.data(), arr.data() + arr.size());
        if (dtypes.contains(item.first)) {
            e.dtype = dtype_from_name(py::cast<std::string>(dtypes[item.first]));
        }
        entries.push_back(std::move(e));
    }
    return make_checkpoint(std::move(entries));
}

py::dict checkpoint_to_dict(const Checkpoint & ckpt) {
    py::dict out;
    for (const auto & e : ckpt.entries) {
        std::vector<py::ssize_t> shape(e.shape.begin(), e.shape.end());
        if (shape.empty()) {
            shape.push_back(1);
        }
        py::array_t<float> arr(shape);
        std::copy(e.values.begin(), e.values.end(), arr.mutable_data());
        out[py::str(e.name)] = arr;
    }
    return out;
}

py::array_t<float> activations_to_array(const ActivationSet & acts) {
    py::array_t<float> arr({static_cast<py::ssize_t>(acts.n_models()),
                            static_cast<py::ssize_t>(acts.n_datapoints()),
                            static_cast<py::ssize_t>(acts.hidden_dim)});
    std::copy(acts.data.begin(), acts.data.end(), arr.mutable_data());
    return arr;
}

ActivationSet activations_from_array(std::vector<std::string> model_ids,
                                     std::vector<std::string> datapoint_ids,
                                     const py::array_t<float, py::array::c_style | py::array::forcecast> & data) {
    if (data.ndim() != 3) {
        fail_validation("activations must be a (models, datapoints, hidden_dim) array");
    }
    ActivationSet acts;
    acts.model_ids = std::move(model_ids);
    acts.datapoint_ids = std::move(datapoint_ids);
    acts.hidden_dim = static_cast<int64_t>(data.shape(2));
    acts.data.assign(data.data(), data.data() + data.size());
    acts.validate();
    if (acts.n_models() != static_cast<size_t>(data.shape(0)) ||
        acts.n_datapoints() != static_cast<size_t>(data.shape(1))) {
        fail_validation("activation array shape does not match the id lists");
    }
    return acts;
}

py::array_t<double> matrix_to_array(const SimilarityMatrix & m) {
    const py::ssize_t n = static_cast<py::ssize_t>(m.size());
    py::array_t<double> arr({n, n});
    std::copy(m.values.begin(), m.values.end(), arr.mutable_data());
    return arr;
}

} // namespace

PYBIND11_MODULE(_mergemeter, m) {
    m.doc() = "checkpoint merging and mergeability diagnostics";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const error & e) {
            switch (e.kind()) {
                case errc::validation:
                    PyErr_SetString(PyExc_ValueError, e.what());
                    break;
                case errc::io:
                    PyErr_SetString(PyExc_OSError, e.what());
                    break;
                case errc::numeric:
                    PyErr_SetString(PyExc_RuntimeError, e.what());
                    break;
            }
        }
    });

    // ---- containers ----
    py::class_<Checkpoint>(m, "Checkpoint")
        .def(py::init([](const py::dict & tensors, const py::dict & dtypes) {
                 return checkpoint_from_dict(tensors, dtypes);
             }),
             py::arg("tensors"), py::arg("dtypes") = py::dict())
        .def("to_dict", &checkpoint_to_dict)
        .def("digest", &checkpoint_digest)
        .def("__eq__", [](const Checkpoint & a, const Checkpoint & b) { return a == b; })
        .def("__len__", [](const Checkpoint & c) { return c.entries.size(); });

    py::class_<TaskVector>(m, "TaskVector")
        .def_property_readonly("base_digest", [](const TaskVector & t) { return t.base_digest; })
        .def("to_dict", [](const TaskVector & t) {
            return checkpoint_to_dict(Checkpoint{t.entries});
        });

    m.def("read_container", &read_container, py::arg("path"));
    m.def("write_container", &write_container, py::arg("checkpoint"), py::arg("path"));
    m.def("read_task_vector", &read_task_vector, py::arg("path"));
    m.def("write_task_vector", &write_task_vector, py::arg("task_vector"), py::arg("path"));

    m.def("task_vector", &task_vector, py::arg("theta_t"), py::arg("theta_0"));
    m.def("apply_task_vector", &apply_task_vector, py::arg("theta_0"), py::arg("tau"), py::arg("scale"),
          py::arg("override_digest") = false);

    // ---- merge engine ----
    m.def(
        "merge_linear_average",
        [](const std::vector<TaskVector> & taus, const std::optional<std::vector<double>> & weights) {
            std::optional<std::span<const double>> w;
            if (weights) {
                w = std::span<const double>(*weights);
            }
            return merge_linear_average(taus, w);
        },
        py::arg("taus"), py::arg("weights") = py::none());
    m.def(
        "merge_task_arithmetic",
        [](const std::vector<TaskVector> & taus, double lam) { return merge_task_arithmetic(taus, lam); },
        py::arg("taus"), py::arg("scale_lambda"));
    m.def(
        "merge_ties",
        [](const std::vector<TaskVector> & taus, double keep, double lam) {
            return merge_ties(taus, keep, lam);
        },
        py::arg("taus"), py::arg("trim_keep_fraction"), py::arg("scale_lambda"));
    m.def(
        "merge_dare",
        [](const std::vector<TaskVector> & taus, double p, uint64_t seed, const std::string & combiner,
           double lam, double keep) {
            return merge_dare(taus, p, seed, merge_method_from_name(combiner), lam, keep);
        },
        py::arg("taus"), py::arg("drop_probability"), py::arg("seed"), py::arg("combiner") = "TA",
        py::arg("scale_lambda") = 1.0, py::arg("trim_keep_fraction") = 0.2);
    m.def(
        "merge_slerp",
        [](const std::vector<TaskVector> & taus, double t) { return merge_slerp(taus, t); },
        py::arg("taus"), py::arg("slerp_t"));

    // ---- conflict metrics ----
    py::class_<ConflictReport>(m, "ConflictReport")
        .def_readonly("magnitude_change_ratio", &ConflictReport::magnitude_change_ratio)
        .def_readonly("sign_change_ratio", &ConflictReport::sign_change_ratio)
        .def_readonly("conflicting_magnitude_ratio", &ConflictReport::conflicting_magnitude_ratio)
        .def_readonly("avg_cosine_similarity", &ConflictReport::avg_cosine_similarity)
        .def_readonly("n_positions", &ConflictReport::n_positions);

    const auto gran = [](const std::string & g) {
        if (g == "global") {
            return CosineGranularity::global;
        }
        if (g == "per_tensor") {
            return CosineGranularity::per_tensor;
        }
        fail_validation("granularity must be 'global' or 'per_tensor'");
    };
    m.def("magnitude_change_ratio", &magnitude_change_ratio);
    m.def("sign_change_ratio", &sign_change_ratio);
    m.def("conflicting_magnitude_ratio", &conflicting_magnitude_ratio);
    m.def(
        "avg_cosine_similarity",
        [gran](const TaskVector & a, const TaskVector & b, const std::string & g) {
            return avg_cosine_similarity(a, b, gran(g));
        },
        py::arg("tau_a"), py::arg("tau_b"), py::arg("granularity") = "per_tensor");
    m.def(
        "conflict_report",
        [gran](const TaskVector & a, const TaskVector & b, const std::string & g) {
            return conflict_report(a, b, gran(g));
        },
        py::arg("tau_a"), py::arg("tau_b"), py::arg("granularity") = "per_tensor");

    // ---- representation diagnostics ----
    py::class_<ActivationSet>(m, "ActivationSet")
        .def(py::init(&activations_from_array), py::arg("model_ids"), py::arg("datapoint_ids"),
             py::arg("data"))
        .def_readonly("model_ids", &ActivationSet::model_ids)
        .def_readonly("datapoint_ids", &ActivationSet::datapoint_ids)
        .def_readonly("hidden_dim", &ActivationSet::hidden_dim)
        .def("to_array", &activations_to_array);

    m.def("load_activation_set", &load_activation_set, py::arg("path"));
    m.def("save_activation_set", &save_activation_set, py::arg("acts"), py::arg("path"));

    py::class_<SimilarityMatrix>(m, "SimilarityMatrix")
        .def_property_readonly("kind",
                               [](const SimilarityMatrix & s) {
                                   return s.kind == SimKind::distance ? "distance" : "hiddensim";
                               })
        .def_readonly("labels", &SimilarityMatrix::labels)
        .def("to_array", &matrix_to_array);

    m.def(
        "pairwise_hidden_distance",
        [](const ActivationSet & acts, const std::string & norm) {
            return pairwise_hidden_distance(acts, normalization_from_name(norm));
        },
        py::arg("acts"), py::arg("normalization") = "per_dim");
    m.def("hiddensim", &hiddensim, py::arg("distances"));
    m.def("mds", &mds, py::arg("sim"));
    m.def("merging_loss", &merging_loss, py::arg("merged_perf"), py::arg("finetuned_perf"));
    m.def(
        "average_merging_loss",
        [](const std::vector<double> & losses) { return average_merging_loss(losses); },
        py::arg("losses"));
    m.def("best_merging_loss", &best_merging_loss, py::arg("per_technique_losses"));

    // ---- theory ----
    py::class_<ReprEnsemble>(m, "ReprEnsemble")
        .def_readonly("points", &ReprEnsemble::points)
        .def_readonly("labels", &ReprEnsemble::labels)
        .def_property_readonly("n_models", &ReprEnsemble::n_models)
        .def_property_readonly("ambient_dim", &ReprEnsemble::ambient_dim)
        .def_property_readonly("effective_dim", &ReprEnsemble::effective_dim);

    m.def(
        "make_ensemble",
        [](const ActivationSet & acts, const std::string & norm) {
            return make_ensemble(acts, normalization_from_name(norm));
        },
        py::arg("acts"), py::arg("normalization") = "none");

    py::class_<DiameterResult>(m, "DiameterResult")
        .def_readonly("delta", &DiameterResult::delta)
        .def_readonly("i", &DiameterResult::i)
        .def_readonly("j", &DiameterResult::j);
    m.def("diameter", &diameter, py::arg("ens"));

    py::class_<BallResult>(m, "BallResult")
        .def_readonly("center", &BallResult::center)
        .def_readonly("radius", &BallResult::radius)
        .def_readonly("support", &BallResult::support)
        .def_readonly("alpha", &BallResult::alpha)
        .def_property_readonly("method",
                               [](const BallResult & b) {
                                   return b.method == BallMethod::exact_welzl ? "exact_welzl" : "core_set";
                               });
    m.def(
        "min_enclosing_ball",
        [](const ReprEnsemble & ens, double tol) {
            MebOptions opts;
            opts.tol = tol;
            return min_enclosing_ball(ens, opts);
        },
        py::arg("ens"), py::arg("tol") = 1e-9);
    m.def(
        "min_enclosing_ball_points",
        [](const Eigen::MatrixXd & points, double tol) {
            MebOptions opts;
            opts.tol = tol;
            return min_enclosing_ball_points(points, opts);
        },
        py::arg("points"), py::arg("tol") = 1e-9);

    py::class_<AchievabilityResult>(m, "AchievabilityResult")
        .def_readonly("alpha", &AchievabilityResult::alpha)
        .def_readonly("delta_max", &AchievabilityResult::delta_max);
    m.def("achievability_merge", &achievability_merge, py::arg("ens"));

    py::class_<ConverseResult>(m, "ConverseResult")
        .def_readonly("delta_max", &ConverseResult::delta_max)
        .def_readonly("passes", &ConverseResult::passes);
    m.def("converse_check", &converse_check, py::arg("ens"), py::arg("candidate"), py::arg("tol") = 1e-9);

    m.def("rate_lower_bound", &rate_lower_bound, py::arg("distortion"), py::arg("ens"));

    py::class_<DistortionReport>(m, "DistortionReport")
        .def_readonly("diameter_sq", &DistortionReport::diameter_sq)
        .def_readonly("lower_bound", &DistortionReport::lower_bound)
        .def_readonly("upper_bound", &DistortionReport::upper_bound)
        .def_readonly("upper_bound_ambient", &DistortionReport::upper_bound_ambient)
        .def_readonly("approx_half_bound", &DistortionReport::approx_half_bound)
        .def_readonly("d_star", &DistortionReport::d_star)
        .def_readonly("delta_max", &DistortionReport::delta_max)
        .def_readonly("effective_dim", &DistortionReport::effective_dim)
        .def_readonly("ambient_dim", &DistortionReport::ambient_dim)
        .def_readonly("budget", &DistortionReport::budget)
        .def_readonly("budget_verdict", &DistortionReport::budget_verdict);
    m.def(
        "distortion_report",
        [](const ReprEnsemble & ens, const std::optional<double> & budget) {
            return distortion_report(ens, budget);
        },
        py::arg("ens"), py::arg("budget") = py::none());
    m.def("mergeability_test", &mergeability_test, py::arg("ens"), py::arg("budget"));

    py::class_<LmcLinearEnsemble>(m, "LmcLinearEnsemble")
        .def_readonly("base_params", &LmcLinearEnsemble::base_params)
        .def_readonly("minima", &LmcLinearEnsemble::minima)
        .def_property_readonly("n_models", &LmcLinearEnsemble::n_models)
        .def_property_readonly("param_dim", &LmcLinearEnsemble::param_dim)
        .def_property_readonly("hidden_dim", &LmcLinearEnsemble::hidden_dim)
        .def_property_readonly("n_datapoints", &LmcLinearEnsemble::n_datapoints);
    m.def("synth_lmc_ensemble", &synth_lmc_ensemble, py::arg("seed"), py::arg("n_models"),
          py::arg("param_dim"), py::arg("hidden_dim"), py::arg("n_datapoints"), py::arg("spread"));
    m.def(
        "merged_hidden_states",
        [](const LmcLinearEnsemble & ens, const std::vector<double> & alpha) {
            return merged_hidden_states(ens, alpha);
        },
        py::arg("ens"), py::arg("alpha"));

    // ---- statistics ----
    m.def("regularized_incomplete_beta", &regularized_incomplete_beta, py::arg("a"), py::arg("b"),
          py::arg("x"));

    py::class_<CorrelationResult>(m, "CorrelationResult")
        .def_readonly("r", &CorrelationResult::r)
        .def_readonly("n", &CorrelationResult::n)
        .def_readonly("t_stat", &CorrelationResult::t_stat)
        .def_readonly("p_two_sided", &CorrelationResult::p_two_sided);
    m.def(
        "pearson",
        [](const std::vector<double> & x, const std::vector<double> & y) { return pearson(x, y); },
        py::arg("x"), py::arg("y"));

    py::class_<AnovaResult>(m, "AnovaResult")
        .def_readonly("f_stat", &AnovaResult::f_stat)
        .def_readonly("df_between", &AnovaResult::df_between)
        .def_readonly("df_within", &AnovaResult::df_within)
        .def_readonly("p", &AnovaResult::p)
        .def_readonly("degenerate", &AnovaResult::degenerate);
    m.def("anova_oneway", &anova_oneway, py::arg("groups"));
}
