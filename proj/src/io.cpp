#include "dbar/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dbar::io {

namespace {

json complex_to_json(Complex c) { return json::array({c.real(), c.imag()}); }

Complex complex_from_json(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw Error(ErrorCode::Validation, "expected a number or a [re, im] pair");
}

json real_matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd real_matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw Error(ErrorCode::Validation, std::string(what) + " must be a non-empty array of rows");
  const auto rows = j.size(), cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw Error(ErrorCode::Validation, std::string(what) + " has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw Error(ErrorCode::Validation, std::string(what) + " has non-numeric entries");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
  return parts;
}

}  // namespace

// ---------------------------------------------------------------- datasets

json boundary_to_json(const geometry::BoundaryGeometry& b) {
  json coeffs = json::array();
  for (Complex c : b.coeffs()) coeffs.push_back(complex_to_json(c));
  return {{"preset", std::string(geometry::to_string(b.preset()))}, {"coeffs", coeffs}, {"perimeter", b.perimeter()}};
}

geometry::BoundaryGeometry boundary_from_json(const json& j) {
  if (!j.is_object() || !j.contains("coeffs")) throw Error(ErrorCode::Validation, "boundary needs fourier coeffs");
  std::vector<Complex> coeffs;
  for (const auto& c : j.at("coeffs")) coeffs.push_back(complex_from_json(c));
  auto preset = geometry::parse_preset(j.value("preset", std::string("custom")));
  return geometry::BoundaryGeometry(std::move(coeffs), preset);
}

json layout_to_json(const geometry::ElectrodeLayout& l) {
  return {{"angles", l.angles}, {"width", l.width}, {"height", l.height}};
}

geometry::ElectrodeLayout layout_from_json_on(const json& j, const geometry::BoundaryGeometry& boundary) {
  if (!j.is_object() || !j.contains("angles")) throw Error(ErrorCode::Validation, "layout needs electrode angles");
  geometry::ElectrodeLayout base{boundary, {}, {}, j.at("width").get<double>(), j.at("height").get<double>(), true};
  auto angles = j.at("angles").get<std::vector<double>>();
  if (angles.empty() || angles.size() % 2 != 0)
    throw Error(ErrorCode::OddElectrodeCount, "electrode count must be positive and even");
  return geometry::with_angles(base, std::move(angles));
}

geometry::ElectrodeLayout layout_from_json(const json& j) {
  return layout_from_json_on(j, boundary_from_json(j.at("boundary")));
}

json frame_to_json(const forward::MeasurementFrame& f) {
  return {
      {"version", dataset_version},
      {"boundary", boundary_to_json(f.layout.boundary)},
      {"layout", layout_to_json(f.layout)},
      {"patterns",
       {{"basis", std::string(forward::to_string(f.patterns.basis))},
        {"amplitude", f.patterns.amplitude},
        {"matrix", real_matrix_to_json(f.patterns.matrix)}}},
      {"voltages", {{"re", real_matrix_to_json(f.voltages.real())}, {"im", real_matrix_to_json(f.voltages.imag())}}},
      {"frequency", f.frequency},
      {"contact_impedance", f.contact_impedance},
      {"label", f.label},
      {"provenance", f.provenance},
  };
}

forward::MeasurementFrame frame_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("version")) throw Error(ErrorCode::Validation, "dataset has no version field");
    if (j.at("version").get<int>() != dataset_version)
      throw Error(ErrorCode::Validation, "unsupported dataset version " + j.at("version").dump());
    forward::MeasurementFrame f;
    auto boundary = boundary_from_json(j.at("boundary"));
    f.layout = layout_from_json_on(j.at("layout"), boundary);
    const auto& p = j.at("patterns");
    f.patterns.basis = forward::parse_basis(p.value("basis", std::string("custom")));
    f.patterns.amplitude = p.value("amplitude", 1.0);
    f.patterns.matrix = real_matrix_from_json(p.at("matrix"), "patterns.matrix");
    const auto& v = j.at("voltages");
    Eigen::MatrixXd re = real_matrix_from_json(v.at("re"), "voltages.re");
    Eigen::MatrixXd im = v.contains("im") ? real_matrix_from_json(v.at("im"), "voltages.im")
                                          : Eigen::MatrixXd::Zero(re.rows(), re.cols());
    if (im.rows() != re.rows() || im.cols() != re.cols())
      throw Error(ErrorCode::Validation, "voltages.re and voltages.im differ in shape");
    f.voltages.resize(re.rows(), re.cols());
    f.voltages.real() = re;
    f.voltages.imag() = im;
    f.frequency = j.value("frequency", 0.0);
    f.contact_impedance = j.value("contact_impedance", 2.4e-7);
    f.label = j.value("label", std::string());
    if (j.contains("provenance")) f.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    if (f.layout.count() != f.electrodes())
      throw Error(ErrorCode::Validation, "layout and voltage matrix disagree on the electrode count");
    f.validate();
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("malformed dataset: ") + e.what());
  }
}

json region_to_json(const forward::Region& r) {
  if (const auto* e = std::get_if<forward::Ellipse>(&r))
    return {{"ellipse",
             {{"center", {e->center.real(), e->center.imag()}}, {"a", e->a}, {"b", e->b}, {"angle", e->angle}}}};
  const auto& p = std::get<forward::Polygon>(r);
  json v = json::array();
  for (Complex z : p.vertices) v.push_back({z.real(), z.imag()});
  return {{"polygon", v}};
}

forward::Region region_from_json(const json& j) {
  if (j.contains("ellipse")) {
    const auto& e = j.at("ellipse");
    return forward::Ellipse{complex_from_json(e.at("center")), e.at("a").get<double>(), e.at("b").get<double>(),
                            e.value("angle", 0.0)};
  }
  if (j.contains("polygon")) {
    forward::Polygon p;
    for (const auto& v : j.at("polygon")) p.vertices.push_back(complex_from_json(v));
    if (p.vertices.size() < 3) throw Error(ErrorCode::Validation, "polygon needs at least three vertices");
    return p;
  }
  throw Error(ErrorCode::Validation, "region needs an 'ellipse' or 'polygon' entry");
}

json phantom_to_json(const forward::Phantom& p) {
  json inc = json::array();
  for (const auto& i : p.inclusions) {
    json e = region_to_json(i.region);
    e["value"] = complex_to_json(i.value);
    e["name"] = i.name;
    inc.push_back(std::move(e));
  }
  return {{"background", complex_to_json(p.background)}, {"inclusions", inc}};
}

forward::Phantom phantom_from_json(const json& j) {
  try {
    forward::Phantom p;
    p.background = complex_from_json(j.at("background"));
    if (j.contains("inclusions")) {
      const auto& inc = j.at("inclusions");
      auto add = [&](const json& e, std::string name) {
        p.inclusions.push_back({region_from_json(e), complex_from_json(e.at("value")), e.value("name", name)});
      };
      if (inc.is_array())
        for (const auto& e : inc) add(e, "");
      else
        for (const auto& [name, e] : inc.items()) add(e, name);
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("malformed phantom: ") + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Validation, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Validation, "cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Validation, path.string() + ": " + e.what());
  }
}

void write_dataset(const fs::path& path, const forward::MeasurementFrame& frame) {
  frame.validate();
  write_json(path, frame_to_json(frame));
}

forward::MeasurementFrame read_dataset(const fs::path& path) {
  try {
    return frame_from_json(read_json(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

// ---------------------------------------------------------------- config

namespace {

// Line of the first `"key"` at or after `from`, walking a dotted path.
void index_lines(const json& j, const std::string& text, const std::string& prefix, std::size_t from,
                 std::map<std::string, int>& lines) {
  auto line_at = [&](std::size_t pos) { return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n')); };
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      std::size_t pos = text.find('"' + key + '"', from);
      if (pos == std::string::npos) pos = from;
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      lines[path] = line_at(pos);
      index_lines(value, text, path, pos, lines);
    }
  } else if (j.is_array()) {
    std::size_t i = 0;
    for (const auto& value : j) {
      const std::string path = prefix + "." + std::to_string(i++);
      lines[path] = line_at(from);
      index_lines(value, text, path, from, lines);
    }
  }
}

}  // namespace

Config Config::from_json(json j, std::string source) {
  if (!j.is_object()) throw Error(ErrorCode::Validation, source + ":1: configuration must be an object");
  Config c;
  c.root_ = std::move(j);
  c.source_ = std::move(source);
  return c;
}

Config Config::parse(const std::string& text, std::string source) {
  Config c;
  c.source_ = std::move(source);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      c.root_ = json::parse(text);
    } catch (const json::parse_error& e) {
      const auto byte = std::min<std::size_t>(e.byte, text.size());
      const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + byte - (byte > 0), '\n'));
      throw Error(ErrorCode::Validation, c.source_ + ":" + std::to_string(line) + ": " + e.what());
    }
    if (!c.root_.is_object()) throw Error(ErrorCode::Validation, c.source_ + ":1: configuration must be an object");
    index_lines(c.root_, text, "", 0, c.lines_);
    return c;
  }
  std::stringstream ss(text);
  int lineno = 0;
  for (std::string line; std::getline(ss, line);) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    const std::string at = c.source_ + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw Error(ErrorCode::Validation, at + "expected 'key = value'");
    std::string key = trim(line.substr(0, eq)), raw = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::Validation, at + "empty key");
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &c.root_;
    const auto parts = split_path(key);
    std::string path;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].empty()) throw Error(ErrorCode::Validation, at + "malformed key '" + key + "'");
      path += (i ? "." : "") + parts[i];
      if (!node->is_object() && !node->is_null())
        throw Error(ErrorCode::Validation, at + "'" + path + "' is both a value and a section");
      node = &(*node)[parts[i]];
      if (!c.lines_.count(path)) c.lines_[path] = lineno;
    }
    if (!node->is_null()) throw Error(ErrorCode::Validation, at + "duplicate key '" + key + "'");
    *node = std::move(value);
    c.lines_[key] = lineno;
  }
  return c;
}

Config Config::load(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Validation, "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str(), path.string());
}

const json* Config::find(const std::string& path) const {
  const json* node = &root_;
  for (const auto& part : split_path(path)) {
    if (node->is_object()) {
      auto it = node->find(part);
      if (it == node->end()) return nullptr;
      node = &*it;
    } else if (node->is_array() && !part.empty() && std::all_of(part.begin(), part.end(), ::isdigit)) {
      std::size_t i = std::stoul(part);
      if (i >= node->size()) return nullptr;
      node = &(*node)[i];
    } else {
      return nullptr;
    }
  }
  return node;
}

bool Config::has(const std::string& path) const { return find(path) != nullptr; }

std::string Config::where(const std::string& path) const {
  for (std::string p = path;;) {
    if (auto it = lines_.find(p); it != lines_.end()) return source_ + ":" + std::to_string(it->second);
    auto dot = p.rfind('.');
    if (dot == std::string::npos) return source_;
    p.erase(dot);
  }
}

void Config::fail(const std::string& path, const std::string& message, ErrorCode code) const {
  throw Error(code, where(path) + ": " + path + ": " + message);
}

double Config::number(const std::string& path, double fallback) const {
  const json* v = find(path);
  if (!v) return fallback;
  if (!v->is_number()) fail(path, "expected a number, got " + v->dump());
  return v->get<double>();
}

int Config::integer(const std::string& path, int fallback) const {
  const json* v = find(path);
  if (!v) return fallback;
  if (v->is_number_integer()) return v->get<int>();
  if (v->is_number_float() && std::floor(v->get<double>()) == v->get<double>())
    return static_cast<int>(v->get<double>());
  fail(path, "expected an integer, got " + v->dump());
}

std::string Config::string(const std::string& path, const std::string& fallback) const {
  const json* v = find(path);
  if (!v) return fallback;
  if (!v->is_string()) fail(path, "expected a string, got " + v->dump());
  return v->get<std::string>();
}

bool Config::boolean(const std::string& path, bool fallback) const {
  const json* v = find(path);
  if (!v) return fallback;
  if (!v->is_boolean()) fail(path, "expected true or false, got " + v->dump());
  return v->get<bool>();
}

Complex Config::complex(const std::string& path, Complex fallback) const {
  const json* v = find(path);
  if (!v) return fallback;
  return at(path, [&] { return complex_from_json(*v); });
}

std::string config_hash(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

namespace {

geometry::BoundaryGeometry boundary_from_config(const Config& c, const std::string& key) {
  return c.at(key, [&] {
    if (c.has(key + ".coeffs")) return boundary_from_json(*c.find(key));
    const std::string preset = c.string(key + ".preset", "circle");
    switch (geometry::parse_preset(preset)) {
      case geometry::BoundaryPreset::circle:
        return geometry::BoundaryGeometry::circle(c.number(key + ".radius", 0.15));
      case geometry::BoundaryPreset::oval:
        return geometry::BoundaryGeometry::oval(c.number(key + ".a", 0.17), c.number(key + ".b", 0.13));
      case geometry::BoundaryPreset::chest:
        return geometry::BoundaryGeometry::chest();
      case geometry::BoundaryPreset::alternative:
        return geometry::BoundaryGeometry::alternative(c.number(key + ".radius", 0.15));
      case geometry::BoundaryPreset::custom:
        break;
    }
    c.fail(key, "custom boundary needs 'coeffs'");
  });
}

std::optional<std::pair<double, double>> bounds(const Config& c, const std::string& key) {
  const json* v = c.find(key);
  if (!v) return std::nullopt;
  if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
    c.fail(key, "expected [lo, hi]");
  double lo = (*v)[0].get<double>(), hi = (*v)[1].get<double>();
  if (!(hi > lo)) c.fail(key, "upper bound must exceed lower bound");
  return std::pair{lo, hi};
}

}  // namespace

RunConfig run_config(const Config& c) {
  static const char* known[] = {"method", "mode", "kgrid", "zgrid", "solver", "reference_dataset", "reference",
                                "output", "working_boundary", "perturb", "seed", "color_scale", "regions",
                                // simulation keys share the file
                                "boundary", "electrodes", "patterns", "phantom", "contact_impedance", "frequency",
                                "noise", "mesh_size", "label", "truth", "stem", "scenario"};
  for (const auto& [key, _] : c.root().items())
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) c.fail(key, "unknown key");

  RunConfig rc;
  auto& r = rc.reconstruction;
  r.method = c.at("method", [&] { return parse_method(c.string("method", "approach2")); });
  r.mode = c.at("mode", [&] { return parse_mode(c.string("mode", "absolute")); });
  r.kgrid.N = c.integer("kgrid.N", r.kgrid.N);
  r.kgrid.step = c.number("kgrid.h_k", r.kgrid.step);
  r.kgrid.cutoff = c.number("kgrid.R", r.kgrid.cutoff);
  r.kgrid.threshold = c.number("kgrid.threshold", r.kgrid.threshold);
  c.at("kgrid", [&] { r.kgrid.validate(); });
  r.z_n = c.integer("zgrid.n", r.z_n);
  r.z_extent = c.number("zgrid.extent", r.z_extent);
  r.solver.tolerance = c.number("solver.tol", r.solver.tolerance);
  r.solver.max_iterations = c.integer("solver.max_iter", r.solver.max_iterations);
  r.solver.threads = c.integer("solver.threads", r.solver.threads);
  r.reference_mesh_size = c.number("reference.mesh_size", 0.0);
  if (r.z_n < 3) c.fail("zgrid.n", "must be >= 3");
  if (!(r.z_extent > 0)) c.fail("zgrid.extent", "must be positive");
  if (!(r.solver.tolerance > 0)) c.fail("solver.tol", "must be positive");
  if (r.solver.max_iterations < 1) c.fail("solver.max_iter", "must be >= 1");
  if (r.solver.threads < 0) c.fail("solver.threads", "must be >= 0");
  if (!(r.reference_mesh_size >= 0)) c.fail("reference.mesh_size", "must be >= 0");

  rc.reference_dataset = c.string("reference_dataset", "");
  rc.output = c.string("output", rc.output);
  if (c.has("working_boundary")) rc.working_boundary = boundary_from_config(c, "working_boundary");
  if (c.has("perturb")) {
    rc.perturb_mode = c.at("perturb.mode", [&] {
      return geometry::parse_perturb_mode(c.string("perturb.mode", "uniform_shift"));
    });
    rc.perturb_magnitude = c.number("perturb.magnitude", 0.0);
    if (!(rc.perturb_magnitude >= 0)) c.fail("perturb.magnitude", "must be >= 0");
  }
  const double seed = c.number("seed", 0.0);
  if (seed < 0 || std::floor(seed) != seed) c.fail("seed", "must be a non-negative integer");
  rc.seed = static_cast<std::uint64_t>(seed);
  rc.color_re = bounds(c, "color_scale.re");
  rc.color_im = bounds(c, "color_scale.im");
  if (const json* regions = c.find("regions")) {
    if (regions->is_array()) {
      for (std::size_t i = 0; i < regions->size(); ++i) {
        const std::string key = "regions." + std::to_string(i);
        rc.regions.emplace_back(c.string(key + ".name", "region" + std::to_string(i)),
                                c.at(key, [&] { return region_from_json((*regions)[i]); }));
      }
    } else if (regions->is_object()) {
      for (const auto& [name, shape] : regions->items())
        rc.regions.emplace_back(name, c.at("regions." + name, [&] { return region_from_json(shape); }));
    } else {
      c.fail("regions", "expected a list or a table of shapes");
    }
  }
  return rc;
}

SimulationScenario simulation_scenario(const Config& c) {
  SimulationScenario s;
  auto boundary = boundary_from_config(c, "boundary");
  const int L = c.integer("electrodes.count", 32);
  const double width = c.number("electrodes.width", 0.0254);
  const double height = c.number("electrodes.height", 0.3);
  const double offset = c.number("electrodes.offset", 0.0);
  s.layout = c.at("electrodes.count", [&] {
    return geometry::place_electrodes(boundary, L, width, height, offset, true);
  });
  const double amplitude = c.number("patterns.amplitude", 0.002);
  if (!(amplitude > 0)) c.fail("patterns.amplitude", "must be positive");
  const std::string basis = c.string("patterns.basis", "trig");
  s.patterns = c.at("patterns.basis", [&] {
    switch (forward::parse_basis(basis)) {
      case forward::PatternBasis::trig:
        return forward::trig_patterns(L, amplitude);
      case forward::PatternBasis::adjacent:
        return forward::adjacent_patterns(L, amplitude);
      case forward::PatternBasis::custom:
        break;
    }
    throw Error(ErrorCode::Validation, "custom patterns cannot be simulated from a config");
  });

  const std::string preset = c.string("phantom.preset", "");
  const double R = boundary.enclosing_radius();
  s.phantom = c.at("phantom", [&] {
    if (preset == "heart_and_lungs")
      return forward::heart_and_lungs(R, c.complex("phantom.heart", 0.75), c.complex("phantom.lung", 0.24),
                                      c.complex("phantom.background", 0.424));
    if (!preset.empty() && preset != "homogeneous")
      throw Error(ErrorCode::Validation, "unknown phantom preset '" + preset + "'");
    if (!c.has("phantom")) return forward::Phantom::homogeneous(0.424);
    json pj = *c.find("phantom");
    pj.erase("preset");
    if (!pj.contains("background")) pj["background"] = 0.424;
    return phantom_from_json(pj);
  });

  auto& o = s.options;
  o.contact_impedance = c.number("contact_impedance", o.contact_impedance);
  o.frequency = c.number("frequency", 0.0);
  o.noise_level = c.number("noise", 0.0);
  o.mesh_size = c.number("mesh_size", 0.0);
  o.label = c.string("label", "");
  const double seed = c.number("seed", 0.0);
  if (seed < 0 || std::floor(seed) != seed) c.fail("seed", "must be a non-negative integer");
  o.seed = static_cast<std::uint64_t>(seed);
  if (!(o.contact_impedance > 0)) c.fail("contact_impedance", "must be positive");
  if (!(o.noise_level >= 0)) c.fail("noise", "must be >= 0");
  if (!(o.mesh_size >= 0)) c.fail("mesh_size", "must be >= 0");
  s.truth_n = c.integer("truth.n", c.integer("zgrid.n", 64));
  s.truth_extent = c.number("truth.extent", c.number("zgrid.extent", 1.05));
  if (s.truth_n < 3) c.fail("truth.n", "must be >= 3");
  if (!(s.truth_extent > 0)) c.fail("truth.extent", "must be positive");
  s.output = c.string("output", s.output);
  s.stem = c.string("stem", s.stem);
  return s;
}

// ---------------------------------------------------------------- images

void write_grid_csv(const fs::path& path, const Eigen::ArrayXXd& plane) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Validation, "cannot write " + path.string());
  os << std::setprecision(17);
  for (int iy = 0; iy < plane.cols(); ++iy) {
    for (int ix = 0; ix < plane.rows(); ++ix) os << (ix ? "," : "") << plane(ix, iy);
    os << '\n';
  }
}

Eigen::ArrayXXd read_grid_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Validation, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  for (std::string line; std::getline(is, line);) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(ErrorCode::Validation, path.string() + ":" + std::to_string(rows.size() + 1) + ": bad number");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(ErrorCode::GridMismatch, path.string() + ": ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::GridMismatch, path.string() + ": empty grid");
  Eigen::ArrayXXd a(rows.front().size(), rows.size());
  for (std::size_t iy = 0; iy < rows.size(); ++iy)
    for (std::size_t ix = 0; ix < rows[iy].size(); ++ix) a(ix, iy) = rows[iy][ix];
  return a;
}

void write_complex_csv(const fs::path& stem, const Eigen::ArrayXXcd& values) {
  write_grid_csv(stem.string() + "_re.csv", values.real());
  write_grid_csv(stem.string() + "_im.csv", values.imag());
}

void write_pgm(const fs::path& path, const Eigen::ArrayXXd& plane, const std::vector<std::uint8_t>& mask,
               ColorScale scale) {
  if (!(scale.hi > scale.lo)) throw Error(ErrorCode::Validation, "color scale needs hi > lo");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Validation, "cannot write " + path.string());
  const int nx = static_cast<int>(plane.rows()), ny = static_cast<int>(plane.cols());
  os << "P5\n" << nx << ' ' << ny << "\n255\n";
  for (int iy = ny - 1; iy >= 0; --iy)
    for (int ix = 0; ix < nx; ++ix) {
      double g = 0;
      if (mask.empty() || mask[ix + nx * iy]) g = std::round(255.0 * (plane(ix, iy) - scale.lo) / (scale.hi - scale.lo));
      os.put(static_cast<char>(static_cast<unsigned char>(std::clamp(g, 0.0, 255.0))));
    }
}

namespace {

json mask_to_json(const std::vector<std::uint8_t>& m, int n) {
  json rows = json::array();
  for (int iy = 0; iy < n; ++iy) {
    std::string row(n, '0');
    for (int ix = 0; ix < n; ++ix) row[ix] = m[ix + n * iy] ? '1' : '0';
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::uint8_t> mask_from_json(const json& j, int n) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw Error(ErrorCode::GridMismatch, "mask has wrong size");
  std::vector<std::uint8_t> m(static_cast<std::size_t>(n) * n);
  for (int iy = 0; iy < n; ++iy) {
    const auto row = j[iy].get<std::string>();
    if (static_cast<int>(row.size()) != n) throw Error(ErrorCode::GridMismatch, "mask row has wrong size");
    for (int ix = 0; ix < n; ++ix) m[ix + n * iy] = row[ix] == '1';
  }
  return m;
}

ColorScale auto_scale(const Eigen::ArrayXXd& plane, const std::vector<std::uint8_t>& valid) {
  double lo = INFINITY, hi = -INFINITY;
  for (Eigen::Index i = 0; i < plane.size(); ++i)
    if (valid.empty() || valid[i]) lo = std::min(lo, plane(i)), hi = std::max(hi, plane(i));
  if (!(hi >= lo)) return {0, 1};
  if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) return {lo - 0.5, hi + 0.5};
  return {lo, hi};
}

}  // namespace

ImageFiles write_image(const fs::path& stem, const recovery::AdmittivityImage& image, std::optional<ColorScale> re_scale,
                       std::optional<ColorScale> im_scale, const json& extra) {
  const int n = image.grid.n;
  if (image.values.rows() != n || image.values.cols() != n)
    throw Error(ErrorCode::GridMismatch, "image values do not match the grid");
  const std::string s = stem.string();
  ImageFiles files{s + ".json", s + "_re.csv", s + "_im.csv", s + "_re.pgm", s + "_im.pgm", s + "_pgm.json"};
  write_grid_csv(files.re_csv, image.values.real());
  write_grid_csv(files.im_csv, image.values.imag());
  std::vector<std::uint8_t> shown(image.grid.mask);
  for (std::size_t i = 0; i < shown.size() && i < image.valid.size(); ++i) shown[i] = shown[i] && image.valid[i];
  const ColorScale rs = re_scale.value_or(auto_scale(image.values.real(), shown));
  const ColorScale is = im_scale.value_or(auto_scale(image.values.imag(), shown));
  write_pgm(files.re_pgm, image.values.real(), image.grid.mask, rs);
  write_pgm(files.im_pgm, image.values.imag(), image.grid.mask, is);
  write_json(files.sidecar,
             {{"mapping", "gray = round(255*(v - lo)/(hi - lo)), clamped to [0, 255]; pixels outside the domain are 0; "
                          "top row is the largest y"},
              {"re", {{"file", files.re_pgm.filename().string()}, {"lo", rs.lo}, {"hi", rs.hi}}},
              {"im", {{"file", files.im_pgm.filename().string()}, {"lo", is.lo}, {"hi", is.hi}}},
              {"units", "S/m"}});
  json meta = {
      {"version", dataset_version},
      {"n", n},
      {"extent", image.grid.extent},
      {"scale_radius", image.scale_radius},
      {"mode", std::string(to_string(image.mode))},
      {"method", std::string(to_string(image.method))},
      {"gamma0", complex_to_json(image.gamma0)},
      {"variant_disagreement", image.variant_disagreement},
      {"layout", "row j holds y = -extent + j*h, column i holds x = -extent + i*h, h = 2*extent/(n-1); "
                 "physical coordinates are these times scale_radius"},
      {"files",
       {{"re", files.re_csv.filename().string()},
        {"im", files.im_csv.filename().string()},
        {"pgm_sidecar", files.sidecar.filename().string()}}},
      {"mask", mask_to_json(image.grid.mask, n)},
      {"valid", mask_to_json(image.valid.empty() ? image.grid.mask : image.valid, n)},
  };
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  write_json(files.meta, meta);
  return files;
}

recovery::AdmittivityImage read_image(const fs::path& meta_path) {
  const json meta = read_json(meta_path);
  try {
    recovery::AdmittivityImage img;
    const int n = meta.at("n").get<int>();
    img.grid = recovery::ZGrid::unmasked(n, meta.at("extent").get<double>());
    img.grid.mask = mask_from_json(meta.at("mask"), n);
    img.valid = mask_from_json(meta.at("valid"), n);
    img.scale_radius = meta.at("scale_radius").get<double>();
    img.mode = parse_mode(meta.at("mode").get<std::string>());
    img.method = parse_method(meta.at("method").get<std::string>());
    img.gamma0 = complex_from_json(meta.at("gamma0"));
    img.variant_disagreement = meta.value("variant_disagreement", 0.0);
    const fs::path dir = meta_path.parent_path();
    Eigen::ArrayXXd re = read_grid_csv(dir / meta.at("files").at("re").get<std::string>());
    Eigen::ArrayXXd im = read_grid_csv(dir / meta.at("files").at("im").get<std::string>());
    if (re.rows() != n || re.cols() != n || im.rows() != n || im.cols() != n)
      throw Error(ErrorCode::GridMismatch, "image planes do not match n");
    img.values.resize(n, n);
    img.values.real() = re;
    img.values.imag() = im;
    return img;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, meta_path.string() + ": malformed image metadata: " + e.what());
  }
}

recovery::AdmittivityImage truth_image(const forward::Phantom& phantom, const geometry::BoundaryGeometry& boundary,
                                       int n, double extent) {
  const double r = boundary.enclosing_radius();
  recovery::AdmittivityImage img;
  img.grid = recovery::ZGrid::make(n, extent, boundary, r);
  img.scale_radius = r;
  img.gamma0 = phantom.background;
  img.values = Eigen::ArrayXXcd::Constant(n, n, phantom.background);
  img.valid = img.grid.mask;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      if (img.grid.inside(ix, iy)) img.values(ix, iy) = phantom.value_at(img.grid.point(ix, iy) * r);
  return img;
}

void write_diagnostics_csv(const fs::path& path, const solver::CGOField& field) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Validation, "cannot write " + path.string());
  os << "ix,iy,x,y,inside,converged,iterations,residual\n" << std::setprecision(10);
  const auto& g = field.grid;
  for (int iy = 0; iy < g.n; ++iy)
    for (int ix = 0; ix < g.n; ++ix) {
      const auto& s = field.at(ix, iy);
      const Complex z = g.point(ix, iy);
      os << ix << ',' << iy << ',' << z.real() << ',' << z.imag() << ',' << int(g.inside(ix, iy)) << ','
         << int(s.converged) << ',' << s.iterations << ',' << s.residual << '\n';
    }
}

// ---------------------------------------------------------------- metrics

namespace {

json stats_to_json(const evaluation::RegionStats& s) {
  auto part = [](const evaluation::PartStats& p) { return json{{"avg", p.avg}, {"max", p.max}, {"min", p.min}}; };
  return {{"name", s.name}, {"pixels", s.pixels}, {"re", part(s.re)}, {"im", part(s.im)}};
}

}  // namespace

json metrics_to_json(const Metrics& m) {
  json regions = json::array();
  for (std::size_t i = 0; i < m.regions.size(); ++i) {
    json r = stats_to_json(m.regions[i]);
    if (i < m.truth.size()) r["truth"] = stats_to_json(m.truth[i]);
    regions.push_back(std::move(r));
  }
  json j = {{"regions", regions},
            {"dynamic_range_percent", m.dynamic_range},
            {"true_max", m.true_max},
            {"true_min", m.true_min}};
  j["rotation_rad"] = m.rotation ? json(*m.rotation) : json(nullptr);
  return j;
}

void write_metrics_csv(const fs::path& path, const Metrics& m, const std::string& method,
                       const std::string& scenario) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Validation, "cannot write " + path.string());
  os << "method,scenario,region,part,true_avg,avg,max,min\n" << std::setprecision(10);
  for (int part = 0; part < 2; ++part)
    for (std::size_t i = 0; i < m.regions.size(); ++i) {
      const auto& s = m.regions[i];
      const auto& p = part ? s.im : s.re;
      os << method << ',' << scenario << ',' << s.name << ',' << (part ? "im" : "re") << ',';
      if (i < m.truth.size()) os << (part ? m.truth[i].im.avg : m.truth[i].re.avg);
      os << ',' << p.avg << ',' << p.max << ',' << p.min << '\n';
    }
}

}  // namespace dbar::io
