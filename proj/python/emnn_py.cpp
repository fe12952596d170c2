#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "emnn/data.hpp"
#include "emnn/experiment.hpp"
#include "emnn/wavegeom.hpp"

namespace py = pybind11;
namespace ex = emnn::experiment;

namespace {

ex::ExperimentConfig with_overrides(ex::ExperimentConfig cfg, const py::kwargs& overrides) {
    for (const auto& [key, value] : overrides) {
        ex::set_key(cfg, py::str(key).cast<std::string>(), py::str(value).cast<std::string>());
    }
    return cfg;
}

// Runs a command with the GIL released and returns (exit status, log text).
template <class F>
std::pair<int, std::string> run_command(F&& command) {
    std::ostringstream log;
    int status = 0;
    {
        py::gil_scoped_release release;
        status = command(log);
    }
    return {status, log.str()};
}

}  // namespace

PYBIND11_MODULE(pyemnn, m) {
    m.doc() = "Distributed electromagnetic neural network simulator";
    m.attr("__version__") = EMNN_VERSION;

    py::register_exception<ex::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<emnn::data::IdxError>(m, "IdxError", PyExc_IOError);

    py::class_<ex::ExperimentConfig>(m, "Config")
        .def(py::init([](const py::kwargs& kw) { return with_overrides({}, kw); }))
        .def_static("from_text", &ex::parse_config_text, py::arg("text"))
        .def_static("from_file", &ex::parse_config, py::arg("path"))
        .def("set", [](ex::ExperimentConfig& c, const std::string& key, const std::string& value) {
            ex::set_key(c, key, value);
        })
        .def("replace", [](const ex::ExperimentConfig& c, const py::kwargs& kw) { return with_overrides(c, kw); })
        .def("as_dict", [](const ex::ExperimentConfig& c) {
            py::dict d;
            for (const auto& k : ex::describe(c)) d[py::str(k.key)] = k.value;
            return d;
        })
        .def("__repr__", [](const ex::ExperimentConfig& c) {
            return "Config(K=" + std::to_string(c.num_sims) + ", L=" + std::to_string(c.num_layers) + ", " +
                   std::to_string(c.n_row) + "x" + std::to_string(c.n_col) + ")";
        });

    m.def(
        "diffraction_coefficient",
        [](double distance, std::optional<double> layer_gap, double wavelength, double atom_area) {
            emnn::wavegeom::SimGeometry g;
            g.wavelength = wavelength;
            g.atom_area = atom_area;
            g.num_layers = 2;
            g.thickness = layer_gap.value_or(distance);
            return emnn::wavegeom::diffraction_coefficient(g, distance);
        },
        py::arg("distance"), py::arg("layer_gap") = py::none(), py::arg("wavelength") = 1e-3,
        py::arg("atom_area") = 1e-6, "Coupling between two atoms `distance` apart across a gap of `layer_gap` (default: on-axis).");

    m.def(
        "steering_vector",
        [](double eta_x, double eta_y, int m_x, int m_y) {
            return emnn::CVector(emnn::wavegeom::steering_vector({eta_x, eta_y}, m_x, m_y));
        },
        py::arg("eta_x"), py::arg("eta_y"), py::arg("m_x"), py::arg("m_y"));

    m.def(
        "interlayer_matrix",
        [](const ex::ExperimentConfig& cfg) { return emnn::CMatrix(emnn::model::make_propagation(ex::resolve(cfg).geometry).w); },
        py::arg("config"), "Layer-to-layer diffraction matrix W for the configured SIM geometry.");

    m.def(
        "realize_channel",
        [](const ex::ExperimentConfig& cfg, std::optional<std::uint64_t> seed) {
            const auto chan = ex::make_channel(ex::resolve(cfg), seed.value_or(cfg.resolved_channel_seed()));
            return chan.h;
        },
        py::arg("config"), py::arg("seed") = py::none(), "One M x N channel matrix per SIM.");

    m.def(
        "load_idx",
        [](const std::filesystem::path& images, const std::filesystem::path& labels) {
            const auto set = emnn::data::load_idx(images, labels);
            const py::ssize_t n = static_cast<py::ssize_t>(set.size());
            const py::ssize_t rows = n ? set.front().image.rows : 0;
            const py::ssize_t cols = n ? set.front().image.cols : 0;
            py::array_t<double> pixels({n, rows, cols});
            py::array_t<int> y(n);
            auto px = pixels.mutable_unchecked<3>();
            auto lab = y.mutable_unchecked<1>();
            for (py::ssize_t i = 0; i < n; ++i) {
                lab(i) = set[i].label;
                for (py::ssize_t r = 0; r < rows; ++r) {
                    for (py::ssize_t c = 0; c < cols; ++c) px(i, r, c) = set[i].image.at(r, c);
                }
            }
            return py::make_tuple(pixels, y);
        },
        py::arg("images"), py::arg("labels"), "Pixels scaled to [0, 1] as an (n, rows, cols) array, plus labels.");

    m.def(
        "train", [](const ex::ExperimentConfig& cfg) { return run_command([&](std::ostream& log) { return ex::cmd_train(cfg, log); }); },
        py::arg("config"), "Trains and writes metrics.csv, checkpoints and manifest.json; returns (status, log).");
    m.def(
        "evaluate",
        [](const ex::ExperimentConfig& cfg, const std::filesystem::path& checkpoint) {
            return run_command([&](std::ostream& log) { return ex::cmd_eval(cfg, checkpoint, log); });
        },
        py::arg("config"), py::arg("checkpoint"));
    m.def(
        "sweep",
        [](const ex::ExperimentConfig& cfg, const std::string& axis, const std::vector<double>& values) {
            return run_command([&](std::ostream& log) { return ex::cmd_sweep(cfg, axis, values, log); });
        },
        py::arg("config"), py::arg("axis"), py::arg("values"));
    m.def(
        "power_dump",
        [](const ex::ExperimentConfig& cfg, const std::filesystem::path& checkpoint, int sample) {
            return run_command([&](std::ostream& log) { return ex::cmd_power_dump(cfg, checkpoint, sample, log); });
        },
        py::arg("config"), py::arg("checkpoint"), py::arg("sample"));
}
