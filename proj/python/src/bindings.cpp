// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "lumen/commands.hpp"
#include "lumen/dataset.hpp"
#include "lumen/relight.hpp"
#include "lumen/renderer.hpp"
#include "lumen/scene_io.hpp"
#include "lumen/shading.hpp"

namespace py = pybind11;
using namespace lumen;

namespace {

py::array_t<Real> image_array(const std::vector<Real>& v, int h, int w, int c) {
    std::vector<py::ssize_t> shape = {h, w};
    if (c > 1) shape.push_back(c);
    py::array_t<Real> a(shape);
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

py::dict render_dict(const RenderOutput& out, bool decomposition) {
    py::dict d;
    const int h = out.height, w = out.width;
    d["rgb"] = image_array(out.rgb, h, w, 3);
    d["depth"] = image_array(out.depth, h, w, 1);
    d["normal"] = image_array(out.normal, h, w, 3);
    d["alpha"] = image_array(out.alpha, h, w, 1);
    if (decomposition) {
        d["albedo"] = image_array(out.albedo, h, w, 3);
        d["diffuse"] = image_array(out.diffuse, h, w, 3);
        d["specular"] = image_array(out.specular, h, w, 3);
    }
    return d;
}

template <int N>
py::array_t<Real> field(const SceneModel& s, auto get) {
    std::vector<py::ssize_t> shape = {py::ssize_t(s.splats.size())};
    if (N > 1) shape.push_back(N);
    py::array_t<Real> a(shape);
    Real* p = a.mutable_data();
    for (const Splat& sp : s.splats) {
        const auto v = get(sp);
        if constexpr (N == 1)
            *p++ = v;
        else
            for (int k = 0; k < N; ++k) *p++ = v[k];
    }
    return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Relightable Gaussian splatting for endoscopy";

    py::register_exception<SceneFormatError>(m, "SceneFormatError", PyExc_ValueError);
    py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);
    py::register_exception<OverrideError>(m, "OverrideError", PyExc_ValueError);

    py::class_<Camera>(m, "Camera")
        .def(py::init<>())
        .def(py::init([](const Mat3& rotation, const Vec3& translation, Real fx, Real fy, Real cx, Real cy, int width,
                         int height) {
                 Camera c;
                 c.rotation = rotation;
                 c.translation = translation;
                 c.fx = fx;
                 c.fy = fy;
                 c.cx = cx;
                 c.cy = cy;
                 c.width = width;
                 c.height = height;
                 c.validate();
                 return c;
             }),
             py::arg("rotation"), py::arg("translation"), py::arg("fx"), py::arg("fy"), py::arg("cx"), py::arg("cy"),
             py::arg("width"), py::arg("height"))
        .def_static("look_at", &Camera::look_at, py::arg("eye"), py::arg("target"), py::arg("up"), py::arg("fx"),
                    py::arg("fy"), py::arg("width"), py::arg("height"))
        .def_readwrite("rotation", &Camera::rotation)
        .def_readwrite("translation", &Camera::translation)
        .def_readwrite("fx", &Camera::fx)
        .def_readwrite("fy", &Camera::fy)
        .def_readwrite("cx", &Camera::cx)
        .def_readwrite("cy", &Camera::cy)
        .def_readwrite("width", &Camera::width)
        .def_readwrite("height", &Camera::height)
        .def("center", &Camera::center);

    py::class_<LightRig>(m, "LightRig")
        .def(py::init<>())
        .def_readwrite("offset", &LightRig::offset)
        .def_readwrite("intensity", &LightRig::intensity)
        .def_readwrite("atten_coeffs", &LightRig::atten_coeffs)
        .def_readwrite("spot_inner", &LightRig::spot_inner)
        .def_readwrite("spot_outer", &LightRig::spot_outer);

    py::class_<SceneModel>(m, "Scene")
        .def_static("load", &load_scene, py::arg("path"))
        .def("save", [](const SceneModel& s, const std::filesystem::path& p) { save_scene(s, p); }, py::arg("path"))
        .def_static("from_bytes",
                    [](py::bytes b) {
                        const std::string s = b;
                        return decode_scene(std::vector<std::uint8_t>(s.begin(), s.end()));
                    })
        .def("to_bytes",
             [](const SceneModel& s) {
                 const auto v = encode_scene(s);
                 return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
             })
        .def("__len__", [](const SceneModel& s) { return s.splats.size(); })
        .def_readwrite("light", &SceneModel::light)
        .def_property_readonly("has_hash_grid", [](const SceneModel& s) { return s.hash.has_value(); })
        .def("bounding_box", &SceneModel::bounding_box)
        .def("arrays", [](const SceneModel& s) {
            py::dict d;
            d["position"] = field<3>(s, [](const Splat& sp) { return sp.position; });
            d["rotation"] = field<4>(s, [](const Splat& sp) { return sp.rotation; });
            d["scale"] = field<3>(s, [](const Splat& sp) { return sp.scale(); });
            d["opacity"] = field<1>(s, [](const Splat& sp) { return sp.opacity(); });
            d["albedo"] = field<3>(s, [](const Splat& sp) { return sp.albedo(); });
            d["roughness"] = field<1>(s, [](const Splat& sp) { return sp.roughness(); });
            d["f0"] = field<1>(s, [](const Splat& sp) { return sp.f0(); });
            return d;
        });

    m.def(
        "render",
        [](const SceneModel& scene, const Camera& camera, bool decomposition, bool use_mlp, int threads) {
            RenderOptions o;
            o.decomposition = decomposition;
            o.use_mlp = use_mlp;
            o.raster.threads = threads;
            RenderOutput out;
            {
                py::gil_scoped_release release;
                out = render_view(scene, camera, o);
            }
            return render_dict(out, decomposition);
        },
        py::arg("scene"), py::arg("camera"), py::arg("decomposition") = false, py::arg("use_mlp") = true,
        py::arg("threads") = 0);

    m.def("load_poses", &load_poses, py::arg("path"));

    m.def("ggx_d", &ggx_d, py::arg("n_dot_h"), py::arg("roughness"));
    m.def("fresnel_schlick", &fresnel_schlick, py::arg("h_dot_c"), py::arg("f0"));
    m.def("geometry_schlick_beckmann", &geometry_schlick_beckmann, py::arg("n_dot_l"), py::arg("n_dot_c"),
          py::arg("roughness"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
