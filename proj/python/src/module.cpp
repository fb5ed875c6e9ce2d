/*
 * Copyright 2026 The sgformer-cpp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Python bindings: thin wrappers over the engine. Arrays cross as float64
// numpy arrays; datasets and checkpoints stay on disk in their native formats.

#include <sgf/attention.hpp>
#include <sgf/bench.hpp>
#include <sgf/error.hpp>
#include <sgf/kernels.hpp>
#include <sgf/model.hpp>
#include <sgf/sbm.hpp>
#include <sgf/train.hpp>
#include <sgf/verify.hpp>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>

namespace py = pybind11;
using namespace sgf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix<double> to_matrix(const Array& a) {
    if (a.ndim() != 2) {
        throw ShapeError("expected a 2-D array");
    }
    Matrix<double> m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::memcpy(m.data(), a.data(), m.size() * sizeof(double));
    return m;
}

template <typename T>
py::array_t<double> to_array(const Matrix<T>& m) {
    py::array_t<double> a({m.rows(), m.cols()});
    double* out = a.mutable_data();
    for (std::size_t i = 0; i < m.size(); ++i) {
        out[i] = static_cast<double>(m.data()[i]);
    }
    return a;
}

py::dict epoch_dict(const EpochRecord& r) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["loss"] = r.loss;
    d["train"] = r.train;
    d["valid"] = r.valid;
    d["test"] = r.test;
    d["ms"] = r.ms;
    return d;
}

template <typename T>
py::dict run_training(const NodeDataset& ds, const RunConfig& cfg,
                      const std::optional<std::string>& checkpoint, bool timing) {
    TrainResult<T> r;
    {
        py::gil_scoped_release release;
        r = train<T>(ds, cfg, {}, timing);
    }
    if (checkpoint) {
        save_checkpoint(r.params, *checkpoint);
    }
    py::list epochs;
    for (const auto& e : r.metrics.epochs) {
        epochs.append(epoch_dict(e));
    }
    py::dict out;
    out["epochs"] = epochs;
    out["best_epoch"] = r.metrics.best_epoch;
    out["best_valid"] = r.metrics.best_valid;
    out["best_test"] = r.metrics.best_test;
    out["peak_bytes"] = r.metrics.peak_bytes;
    out["skipped_batches"] = r.metrics.skipped_batches;
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SGFormer engine bindings";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.def("set_num_threads", &set_num_threads, py::arg("n"));
    m.def("num_threads", &num_threads);

    m.def(
        "attention_linear",
        [](const Array& q, const Array& k, const Array& v) {
            return to_array(attention_linear(to_matrix(q), to_matrix(k), to_matrix(v)));
        },
        py::arg("q"), py::arg("k"), py::arg("v"),
        "All-pair attention in O(N d^2); returns Z (N x dv).");
    m.def(
        "attention_explicit",
        [](const Array& q, const Array& k, const Array& v) {
            auto r = attention_explicit(to_matrix(q), to_matrix(k), to_matrix(v));
            return py::make_tuple(to_array(r.z), to_array(r.c));
        },
        py::arg("q"), py::arg("k"), py::arg("v"),
        "Quadratic reference form; returns (Z, C).");

    m.def(
        "synth",
        [](const std::string& out, std::size_t nodes, std::size_t classes, double p_in,
           double p_out, double sep, std::size_t feat_dim, std::uint64_t seed) {
            SbmOptions o;
            o.nodes = nodes;
            o.classes = classes;
            o.p_in = p_in;
            o.p_out = p_out;
            o.sep = sep;
            o.feat_dim = feat_dim;
            o.seed = seed;
            save_dataset(generate_sbm(o), out);
        },
        py::arg("out"), py::arg("nodes") = 1000, py::arg("classes") = 2, py::arg("p_in") = 0.01,
        py::arg("p_out") = 0.001, py::arg("sep") = 1.0, py::arg("feat_dim") = 16,
        py::arg("seed") = 0, "Write a stochastic-block-model dataset directory.");

    m.def(
        "load_dataset",
        [](const std::string& dir) {
            const NodeDataset ds = load_dataset(dir);
            py::list edges;
            for (const Edge& e : ds.graph.undirected_edges()) {
                edges.append(py::make_tuple(e.src, e.dst, e.weight));
            }
            py::dict d;
            d["num_nodes"] = ds.graph.num_nodes();
            d["edges"] = edges;
            d["features"] = to_array(ds.features);
            d["task"] = to_string(ds.labels.task);
            d["num_outputs"] = ds.labels.num_outputs;
            if (ds.labels.task == Task::Multiclass) {
                d["labels"] = ds.labels.classes;
            } else {
                d["labels"] = to_array(ds.labels.binary);
            }
            d["train"] = ds.split.train;
            d["valid"] = ds.split.valid;
            d["test"] = ds.split.test;
            return d;
        },
        py::arg("path"));

    m.def(
        "train",
        [](const std::string& data, double lr, double weight_decay, double dropout,
           std::size_t hidden, std::size_t gcn_depth, double alpha, std::size_t epochs,
           std::size_t batch_size, std::uint64_t seed, const std::string& precision,
           std::optional<std::string> checkpoint, bool timing) {
            RunConfig c;
            c.lr = lr;
            c.weight_decay = weight_decay;
            c.dropout = dropout;
            c.hidden = hidden;
            c.gcn_depth = gcn_depth;
            c.alpha = alpha;
            c.epochs = epochs;
            c.batch_size = batch_size;
            c.seed = seed;
            c.precision = precision_from_string(precision);
            c.validate();
            const NodeDataset ds = load_dataset(data);
            return c.precision == Precision::F64 ? run_training<double>(ds, c, checkpoint, timing)
                                                 : run_training<float>(ds, c, checkpoint, timing);
        },
        py::arg("data"), py::arg("lr") = 0.01, py::arg("weight_decay") = 5e-4,
        py::arg("dropout") = 0.5, py::arg("hidden") = 64, py::arg("gcn_depth") = 2,
        py::arg("alpha") = 0.5, py::arg("epochs") = 300, py::arg("batch_size") = 0,
        py::arg("seed") = 0, py::arg("precision") = "f32", py::arg("checkpoint") = py::none(),
        py::arg("timing") = true,
        "Train on a dataset directory. batch_size 0 means full graph.");

    m.def(
        "evaluate",
        [](const std::string& data, const std::string& checkpoint,
           std::optional<std::size_t> batch_size, std::uint64_t seed) {
            const NodeDataset ds = load_dataset(data);
            const auto p = load_checkpoint(checkpoint);
            if (p.config.in_dim != ds.features.cols() ||
                p.config.out_dim != ds.labels.num_outputs) {
                throw DataError("checkpoint and dataset dimensions differ");
            }
            const auto logits = predict_full_graph(p, ds, batch_size, seed);
            return py::make_tuple(evaluate(logits, ds.labels, ds.split.valid),
                                  evaluate(logits, ds.labels, ds.split.test));
        },
        py::arg("data"), py::arg("checkpoint"), py::arg("batch_size") = py::none(),
        py::arg("seed") = 0, "Returns (valid, test) scores from full-graph inference.");

    m.def(
        "verify",
        [](std::uint64_t seed, std::size_t trials) {
            VerifyOptions o;
            o.seed = seed;
            o.trials = trials;
            VerifyReport r;
            {
                py::gil_scoped_release release;
                r = run_verify(o);
            }
            return py::make_tuple(r.ok(), r.text());
        },
        py::arg("seed") = 0, py::arg("trials") = 10, "Returns (ok, report_text).");

    m.def(
        "run_scaling",
        [](std::vector<std::size_t> n_values, double avg_degree, std::size_t hidden,
           std::size_t explicit_cap, std::uint64_t seed, bool timing) {
            ScalingOptions o;
            o.n_values = std::move(n_values);
            o.avg_degree = avg_degree;
            o.hidden = hidden;
            o.explicit_cap = explicit_cap;
            o.seed = seed;
            o.timing = timing;
            std::vector<BenchPoint> pts;
            {
                py::gil_scoped_release release;
                pts = run_scaling(o);
            }
            return bench_csv(pts);
        },
        py::arg("n_values"), py::arg("avg_degree") = 10.0, py::arg("hidden") = 256,
        py::arg("explicit_cap") = 20000, py::arg("seed") = 0, py::arg("timing") = true,
        "Runs the scaling benchmark and returns the CSV text.");
}
