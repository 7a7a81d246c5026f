#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dbar/evaluation.hpp"
#include "dbar/io.hpp"
#include "dbar/pipeline.hpp"

namespace py = pybind11;
using namespace dbar;

namespace {

// Masked, valid pixels as a boolean n×n array indexed [iy, ix].
py::array_t<bool> mask_array(const std::vector<std::uint8_t>& m, int n) {
  py::array_t<bool> a({n, n});
  auto v = a.mutable_unchecked<2>();
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) v(iy, ix) = m[ix + n * iy] != 0;
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "D-bar EIT reconstruction core";
  m.attr("__version__") = DBAR_VERSION;

  static py::exception<Error> dbar_error(m, "DbarError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = dbar_error;
      py::object inst = err(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      inst.attr("is_validation") = e.is_validation();
      PyErr_SetObject(err.ptr(), inst.ptr());
    }
  });

  py::class_<geometry::BoundaryGeometry>(m, "BoundaryGeometry")
      .def(py::init([](std::vector<Complex> c) { return geometry::BoundaryGeometry(std::move(c)); }),
           py::arg("coeffs"))
      .def_static("circle", &geometry::BoundaryGeometry::circle, py::arg("radius"))
      .def_static("oval", &geometry::BoundaryGeometry::oval, py::arg("a"), py::arg("b"))
      .def_static("chest", &geometry::BoundaryGeometry::chest)
      .def_static("alternative", &geometry::BoundaryGeometry::alternative, py::arg("radius") = 0.15)
      .def("radius", &geometry::BoundaryGeometry::radius)
      .def("point", &geometry::BoundaryGeometry::point)
      .def("contains", &geometry::BoundaryGeometry::contains)
      .def_property_readonly("perimeter", &geometry::BoundaryGeometry::perimeter)
      .def_property_readonly("enclosing_radius", &geometry::BoundaryGeometry::enclosing_radius)
      .def_property_readonly("area", &geometry::BoundaryGeometry::area)
      .def_property_readonly("coeffs", [](const geometry::BoundaryGeometry& b) {
        return std::vector<Complex>(b.coeffs().begin(), b.coeffs().end());
      });

  py::class_<geometry::ElectrodeLayout>(m, "ElectrodeLayout")
      .def_readonly("boundary", &geometry::ElectrodeLayout::boundary)
      .def_readonly("angles", &geometry::ElectrodeLayout::angles)
      .def_readonly("centers", &geometry::ElectrodeLayout::centers)
      .def_readonly("width", &geometry::ElectrodeLayout::width)
      .def_readonly("height", &geometry::ElectrodeLayout::height)
      .def_readonly("physical", &geometry::ElectrodeLayout::physical)
      .def_property_readonly("count", &geometry::ElectrodeLayout::count)
      .def("on_boundary", [](const geometry::ElectrodeLayout& l, const geometry::BoundaryGeometry& b) {
        return geometry::on_boundary(l, b);
      })
      .def("shifted", [](const geometry::ElectrodeLayout& l, double shift) {
        return geometry::perturb_angles(l, geometry::PerturbMode::uniform_shift, shift, 0);
      });

  m.def("place_electrodes", &geometry::place_electrodes, py::arg("boundary"), py::arg("count"), py::arg("width"),
        py::arg("height"), py::arg("offset") = 0.0, py::arg("require_physical") = false);

  py::class_<forward::Phantom>(m, "Phantom")
      .def(py::init([](Complex background) { return forward::Phantom::homogeneous(background); }),
           py::arg("background"))
      .def("add_ellipse",
           [](forward::Phantom& p, Complex center, double a, double b, double angle, Complex value, std::string name) {
             p.inclusions.push_back({forward::Ellipse{center, a, b, angle}, value, std::move(name)});
           },
           py::arg("center"), py::arg("a"), py::arg("b"), py::arg("angle"), py::arg("value"), py::arg("name") = "")
      .def("value_at", &forward::Phantom::value_at)
      .def_readwrite("background", &forward::Phantom::background);

  m.def("heart_and_lungs", &forward::heart_and_lungs, py::arg("R"), py::arg("heart") = Complex(0.75),
        py::arg("lung") = Complex(0.24), py::arg("background") = Complex(0.424));

  py::class_<forward::MeasurementFrame>(m, "MeasurementFrame")
      .def_readonly("voltages", &forward::MeasurementFrame::voltages)
      .def_property_readonly("patterns", [](const forward::MeasurementFrame& f) { return f.patterns.matrix; })
      .def_readonly("layout", &forward::MeasurementFrame::layout)
      .def_readonly("label", &forward::MeasurementFrame::label)
      .def_readonly("provenance", &forward::MeasurementFrame::provenance)
      .def("is_real", &forward::MeasurementFrame::is_real, py::arg("tol") = 1e-12)
      .def("__eq__", [](const forward::MeasurementFrame& a, const forward::MeasurementFrame& b) { return a == b; });

  m.def(
      "simulate",
      [](const geometry::ElectrodeLayout& layout, const forward::Phantom& phantom, double amplitude, double noise,
         std::uint64_t seed, double mesh_size) {
        forward::SimulationOptions o;
        o.noise_level = noise;
        o.seed = seed;
        o.mesh_size = mesh_size;
        py::gil_scoped_release release;
        return forward::simulate_frame(layout, phantom, forward::trig_patterns(layout.count(), amplitude), o);
      },
      py::arg("layout"), py::arg("phantom"), py::arg("amplitude") = 0.002, py::arg("noise") = 0.0,
      py::arg("seed") = 0, py::arg("mesh_size") = 0.0);

  m.def("write_dataset", &io::write_dataset);
  m.def("read_dataset", &io::read_dataset);

  py::class_<pipeline::ReconstructionConfig>(m, "ReconstructionConfig")
      .def(py::init([](const std::string& method, const std::string& mode, int N, double h_k, double R,
                       double threshold, int z_n, double z_extent, double tol, int max_iter) {
             pipeline::ReconstructionConfig c;
             c.method = parse_method(method);
             c.mode = parse_mode(mode);
             c.kgrid = {N, h_k, R, threshold};
             c.z_n = z_n;
             c.z_extent = z_extent;
             c.solver.tolerance = tol;
             c.solver.max_iterations = max_iter;
             c.validate();
             return c;
           }),
           py::arg("method") = "approach2", py::arg("mode") = "absolute", py::arg("N") = 5, py::arg("h_k") = 0.4706,
           py::arg("R") = 4.0, py::arg("threshold") = 0.4, py::arg("z_n") = 64, py::arg("z_extent") = 1.05,
           py::arg("tol") = 1e-6, py::arg("max_iter") = 200)
      .def_property_readonly("method", [](const pipeline::ReconstructionConfig& c) { return std::string(to_string(c.method)); })
      .def_property_readonly("mode", [](const pipeline::ReconstructionConfig& c) { return std::string(to_string(c.mode)); });

  py::class_<recovery::AdmittivityImage>(m, "Image")
      .def_property_readonly("values",
                             [](const recovery::AdmittivityImage& im) {
                               // numpy convention: rows are y, columns are x.
                               Eigen::MatrixXcd v = im.values.matrix().transpose();
                               return v;
                             })
      .def_property_readonly("mask", [](const recovery::AdmittivityImage& im) { return mask_array(im.grid.mask, im.grid.n); })
      .def_property_readonly("valid", [](const recovery::AdmittivityImage& im) { return mask_array(im.valid, im.grid.n); })
      .def_property_readonly("n", [](const recovery::AdmittivityImage& im) { return im.grid.n; })
      .def_property_readonly("extent", [](const recovery::AdmittivityImage& im) { return im.grid.extent; })
      .def_readonly("gamma0", &recovery::AdmittivityImage::gamma0)
      .def_readonly("scale_radius", &recovery::AdmittivityImage::scale_radius)
      .def_readonly("variant_disagreement", &recovery::AdmittivityImage::variant_disagreement)
      .def("rotated", &evaluation::rotate_image);

  m.def(
      "reconstruct",
      [](const forward::MeasurementFrame& target, const pipeline::ReconstructionConfig& cfg,
         std::optional<forward::MeasurementFrame> reference, std::optional<geometry::ElectrodeLayout> working) {
        py::gil_scoped_release release;
        return pipeline::reconstruct(target, cfg, reference ? &*reference : nullptr, working).image;
      },
      py::arg("frame"), py::arg("config") = pipeline::ReconstructionConfig{}, py::arg("reference") = py::none(),
      py::arg("working") = py::none());

  m.def("dynamic_range",
        py::overload_cast<double, double, double, double>(&evaluation::dynamic_range), py::arg("recon_max"),
        py::arg("recon_min"), py::arg("true_max"), py::arg("true_min"));
  m.def("rotation_estimate", &evaluation::rotation_estimate);
}
