#include <fracelast/scenario.hpp>

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "raw float64 exports assume a little endian host");

namespace fracelast {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError("scenario: " + where + ": " + what);
}

const json& member(const json& obj, const std::string& where, const std::string& key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where, "missing key '" + key + "'");
  return *it;
}

double number(const json& obj, const std::string& where, const std::string& key) {
  const json& v = member(obj, where, key);
  if (!v.is_number()) fail(where, "'" + key + "' must be a number");
  return v.get<double>();
}

double number_or(const json& obj, const std::string& where, const std::string& key,
                 double fallback) {
  if (!obj.contains(key)) return fallback;
  return number(obj, where, key);
}

long integer(const json& obj, const std::string& where, const std::string& key) {
  const json& v = member(obj, where, key);
  if (!v.is_number_integer()) fail(where, "'" + key + "' must be an integer");
  return v.get<long>();
}

void check_keys(const json& obj, const std::string& where,
                const std::vector<std::string>& allowed, bool strict) {
  if (!strict) return;
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const std::string& k : allowed) known = known || item.key() == k;
    if (!known) fail(where, "unknown key '" + item.key() + "'");
  }
}

std::array<double, 2> point(const json& v, const std::string& where, int dim) {
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    fail(where, "expected an array of " + std::to_string(dim) + " coordinates");
  std::array<double, 2> p{{0.0, 0.0}};
  for (int i = 0; i < dim; ++i) {
    if (!v[static_cast<size_t>(i)].is_number()) fail(where, "coordinates must be numbers");
    p[static_cast<size_t>(i)] = v[static_cast<size_t>(i)].get<double>();
  }
  return p;
}

Region parse_region(const json& obj, const std::string& where, int dim, bool strict) {
  if (!obj.is_object()) fail(where, "a region is an object with 'box' or 'ball'");
  check_keys(obj, where, {"box", "ball"}, strict);
  if (obj.contains("box") == obj.contains("ball"))
    fail(where, "exactly one of 'box' or 'ball' is required");
  if (obj.contains("box")) {
    const json& b = obj["box"];
    if (dim == 1) {
      const std::array<double, 2> iv = point(b, where + ".box", 2);
      if (!(iv[0] < iv[1])) fail(where + ".box", "needs lo < hi");
      return Region::box1(iv[0], iv[1]);
    }
    if (!b.is_array() || b.size() != 2) fail(where + ".box", "expected one [lo, hi] per axis");
    const std::array<double, 2> ix = point(b[0], where + ".box[0]", 2);
    const std::array<double, 2> iy = point(b[1], where + ".box[1]", 2);
    if (!(ix[0] < ix[1]) || !(iy[0] < iy[1])) fail(where + ".box", "needs lo < hi");
    return Region::box2(ix[0], ix[1], iy[0], iy[1]);
  }
  const json& b = obj["ball"];
  if (!b.is_object()) fail(where + ".ball", "expected an object");
  check_keys(b, where + ".ball", {"center", "radius"}, strict);
  const std::array<double, 2> c = point(member(b, where + ".ball", "center"),
                                        where + ".ball.center", dim);
  const double r = number(b, where + ".ball", "radius");
  if (!(r > 0.0)) fail(where + ".ball", "radius must be positive");
  return Region::ball(c[0], c[1], r);
}

std::vector<BumpSpec> parse_bumps(const json& arr, const std::string& where, int dim,
                                  bool strict) {
  if (!arr.is_array()) fail(where, "expected an array");
  std::vector<BumpSpec> out;
  for (size_t k = 0; k < arr.size(); ++k) {
    const std::string at = where + "[" + std::to_string(k) + "]";
    const json& b = arr[k];
    if (!b.is_object()) fail(at, "a bump is an object");
    check_keys(b, at, {"channel", "center", "radius", "amplitude"}, strict);
    BumpSpec bs;
    const json& ch = member(b, at, "channel");
    if (ch == "L")
      bs.param = 0;
    else if (ch == "M")
      bs.param = 1;
    else
      fail(at, "'channel' must be \"L\" or \"M\"");
    bs.center = point(member(b, at, "center"), at + ".center", dim);
    bs.radius = number(b, at, "radius");
    bs.amplitude = number(b, at, "amplitude");
    if (!(bs.radius > 0.0)) fail(at, "radius must be positive");
    out.push_back(bs);
  }
  return out;
}

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) fail(where, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string atomic_write(const std::string& path, const std::string& bytes) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::filesystem::path tmp = p.string() + ".tmp~";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os.flush()) throw std::runtime_error("short write on " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
  return path;
}

ManifestOutput record(const std::string& path, const std::string& bytes) {
  ManifestOutput mo;
  mo.file = path;
  mo.bytes = bytes.size();
  mo.hash = hex64(fnv1a64(bytes.data(), bytes.size()));
  return mo;
}

std::string pack_doubles_rowmajor(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  std::string bytes(static_cast<size_t>(m.size()) * sizeof(double), '\0');
  char* out = bytes.data();
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) {
      const double x = m(i, j);
      std::memcpy(out, &x, sizeof(double));
      out += sizeof(double);
    }
  return bytes;
}

}  /* namespace */

Scenario parse_scenario(const std::string& text, bool strict) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("scenario: top level must be an object");
  check_keys(doc, "top level",
             {"dimension", "halfWidth", "pointsPerAxis", "s", "regions", "lame", "solver",
              "forward", "reduce", "runge", "invert", "gauge1d", "verify"},
             strict);

  Scenario sc;
  const long dim = integer(doc, "top level", "dimension");
  if (dim != 1 && dim != 2) fail("top level", "'dimension' must be 1 or 2");
  sc.grid.dim = static_cast<int>(dim);
  sc.grid.half_width = number(doc, "top level", "halfWidth");
  sc.grid.n = static_cast<int>(integer(doc, "top level", "pointsPerAxis"));
  sc.s = number(doc, "top level", "s");
  if (!(sc.s > 0.0 && sc.s < 1.0)) fail("top level", "'s' must lie in (0, 1)");

  const json& reg = member(doc, "top level", "regions");
  if (!reg.is_object()) fail("regions", "expected an object");
  check_keys(reg, "regions", {"omega", "w1", "w2"}, strict);
  sc.regions.omega = parse_region(member(reg, "regions", "omega"), "regions.omega",
                                  sc.grid.dim, strict);
  sc.regions.w1 = parse_region(member(reg, "regions", "w1"), "regions.w1", sc.grid.dim,
                               strict);
  sc.regions.w2 = parse_region(member(reg, "regions", "w2"), "regions.w2", sc.grid.dim,
                               strict);

  const json& lame = member(doc, "top level", "lame");
  if (!lame.is_object()) fail("lame", "expected an object");
  check_keys(lame, "lame", {"L0", "M0", "bumps"}, strict);
  sc.L0 = number(lame, "lame", "L0");
  sc.M0 = number(lame, "lame", "M0");
  if (lame.contains("bumps"))
    sc.bumps = parse_bumps(lame["bumps"], "lame.bumps", sc.grid.dim, strict);

  if (doc.contains("solver")) {
    const json& sol = doc["solver"];
    if (!sol.is_object()) fail("solver", "expected an object");
    check_keys(sol, "solver", {"cgTol", "pad"}, strict);
    sc.cg_tol = number_or(sol, "solver", "cgTol", sc.cg_tol);
    if (sol.contains("pad")) sc.pad = static_cast<int>(integer(sol, "solver", "pad"));
    if (!(sc.cg_tol > 0.0)) fail("solver", "'cgTol' must be positive");
    if (sc.pad < 2) fail("solver", "'pad' must be at least 2");
  }

  if (doc.contains("forward")) {
    const json& f = doc["forward"];
    if (!f.is_object()) fail("forward", "expected an object");
    check_keys(f, "forward", {"window", "component", "center", "radius", "amplitude"},
               strict);
    Scenario::Forward fw;
    fw.window = static_cast<int>(f.contains("window") ? integer(f, "forward", "window") : 1);
    fw.component =
        static_cast<int>(f.contains("component") ? integer(f, "forward", "component") : 0);
    if (f.contains("center")) {
      fw.center = point(f["center"], "forward.center", sc.grid.dim);
      fw.centered = false;
    }
    fw.radius = number_or(f, "forward", "radius", fw.radius);
    fw.amplitude = number_or(f, "forward", "amplitude", fw.amplitude);
    if (fw.window != 1 && fw.window != 2) fail("forward", "'window' must be 1 or 2");
    if (fw.component < 0 || fw.component >= sc.grid.dim)
      fail("forward", "'component' out of range");
    if (!(fw.radius > 0.0)) fail("forward", "'radius' must be positive");
    sc.forward = fw;
  }

  if (doc.contains("reduce")) {
    const json& r = doc["reduce"];
    if (!r.is_object()) fail("reduce", "expected an object");
    check_keys(r, "reduce", {"resolutions", "center", "radius", "amplitude"}, strict);
    Scenario::Reduce rd;
    if (r.contains("resolutions")) {
      rd.resolutions.clear();
      for (double x : number_list(r["resolutions"], "reduce.resolutions"))
        rd.resolutions.push_back(static_cast<int>(x));
    }
    if (r.contains("center")) rd.center = point(r["center"], "reduce.center", sc.grid.dim);
    rd.radius = number_or(r, "reduce", "radius", rd.radius);
    rd.amplitude = number_or(r, "reduce", "amplitude", rd.amplitude);
    if (!(rd.radius > 0.0)) fail("reduce", "'radius' must be positive");
    sc.reduce = rd;
  }

  if (doc.contains("runge")) {
    const json& r = doc["runge"];
    if (!r.is_object()) fail("runge", "expected an object");
    check_keys(r, "runge", {"window", "component", "center", "radius", "amplitude", "alphas"},
               strict);
    Scenario::Runge rg;
    rg.window = static_cast<int>(r.contains("window") ? integer(r, "runge", "window") : 1);
    rg.component =
        static_cast<int>(r.contains("component") ? integer(r, "runge", "component") : 0);
    if (r.contains("center")) rg.center = point(r["center"], "runge.center", sc.grid.dim);
    rg.radius = number_or(r, "runge", "radius", rg.radius);
    rg.amplitude = number_or(r, "runge", "amplitude", rg.amplitude);
    if (r.contains("alphas")) rg.alphas = number_list(r["alphas"], "runge.alphas");
    for (double a : rg.alphas)
      if (!(a > 0.0)) fail("runge", "'alphas' must be positive");
    if (rg.window != 1 && rg.window != 2) fail("runge", "'window' must be 1 or 2");
    if (rg.component < 0 || rg.component >= sc.grid.dim)
      fail("runge", "'component' out of range");
    if (!(rg.radius > 0.0)) fail("runge", "'radius' must be positive");
    sc.runge = rg;
  }

  if (doc.contains("invert")) {
    const json& iv = doc["invert"];
    if (!iv.is_object()) fail("invert", "expected an object");
    check_keys(iv, "invert",
               {"nu", "beta", "maxIter", "center", "radius", "amplitude", "noise", "seed"},
               strict);
    Scenario::Invert in;
    in.nu = number_or(iv, "invert", "nu", in.nu);
    in.beta = number_or(iv, "invert", "beta", in.beta);
    if (iv.contains("maxIter"))
      in.max_iter = static_cast<int>(integer(iv, "invert", "maxIter"));
    if (iv.contains("center")) in.center = point(iv["center"], "invert.center", sc.grid.dim);
    in.radius = number_or(iv, "invert", "radius", in.radius);
    in.amplitude = number_or(iv, "invert", "amplitude", in.amplitude);
    in.noise = number_or(iv, "invert", "noise", in.noise);
    if (iv.contains("seed")) {
      const json& sd = iv["seed"];
      if (!sd.is_number_integer() || sd.get<long long>() < 0)
        fail("invert", "'seed' must be a non-negative integer");
      in.seed = sd.get<std::uint64_t>();
    }
    if (in.max_iter < 0) fail("invert", "'maxIter' must be non-negative");
    if (!(in.beta >= 0.0)) fail("invert", "'beta' must be non-negative");
    if (!(in.noise >= 0.0)) fail("invert", "'noise' must be non-negative");
    if (!(in.radius > 0.0)) fail("invert", "'radius' must be positive");
    if (!(in.nu > -1.0) || (sc.grid.dim > 1 && in.nu >= 1.0 / (sc.grid.dim - 1)))
      fail("invert", "'nu' out of the admissible range");
    sc.invert = in;
  }

  if (doc.contains("gauge1d")) {
    const json& gd = doc["gauge1d"];
    if (!gd.is_object()) fail("gauge1d", "expected an object");
    check_keys(gd, "gauge1d", {"K", "mValues", "KContrast"}, strict);
    Scenario::Gauge1d g1;
    g1.k = number_or(gd, "gauge1d", "K", g1.k);
    g1.k_contrast = number_or(gd, "gauge1d", "KContrast", g1.k_contrast);
    if (gd.contains("mValues")) g1.m_values = number_list(gd["mValues"], "gauge1d.mValues");
    for (double m : g1.m_values)
      if (!(m > 0.0 && g1.k - 2.0 * m > 0.0))
        fail("gauge1d", "each M needs 0 < M and 0 < K - 2M");
    sc.gauge1d = g1;
  }

  if (doc.contains("verify")) {
    const json& vf = doc["verify"];
    if (!vf.is_object()) fail("verify", "expected an object");
    check_keys(vf, "verify", {"checks", "corruptLambda"}, strict);
    Scenario::Verify v;
    if (vf.contains("checks")) {
      v.all = false;
      const json& cl = vf["checks"];
      if (!cl.is_array()) fail("verify", "'checks' must be an array of names");
      for (const json& c : cl) {
        if (!c.is_string()) fail("verify", "'checks' must be an array of names");
        v.checks.push_back(c.get<std::string>());
      }
    }
    if (vf.contains("corruptLambda")) {
      if (!vf["corruptLambda"].is_boolean()) fail("verify", "'corruptLambda' must be a bool");
      v.corrupt_lambda = vf["corruptLambda"].get<bool>();
    }
    sc.verify = v;
  }

  /* construct the physical setup once so bad data fails at load time */
  try {
    const RegionMasks masks = scenario_masks(sc);
    (void)scenario_lame(sc, masks);
    if (sc.reduce)
      for (int n : sc.reduce->resolutions) (void)scenario_masks(sc, n);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }

  sc.input_hash = fnv1a64(text.data(), text.size());
  return sc;
}

Scenario load_scenario(const std::string& path, bool strict) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("scenario: cannot read " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  Scenario sc = parse_scenario(buf.str(), strict);
  sc.source_path = path;
  return sc;
}

RegionMasks scenario_masks(const Scenario& sc, int n_override) {
  GridSpec g = sc.grid;
  if (n_override > 0) g.n = n_override;
  return RegionMasks::build(g, sc.regions);
}

LameField scenario_lame(const Scenario& sc, const RegionMasks& masks) {
  return make_lame_field(masks.grid, masks, sc.L0, sc.M0, sc.bumps);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

const char* version_tag() { return "0.1.0"; }

void RunManifest::save(const std::string& path) const {
  json doc;
  doc["command"] = command;
  doc["version"] = version;
  doc["inputHash"] = input_hash;
  doc["seed"] = seed;
  json tm = json::object();
  for (const auto& [stage, sec] : timings) tm[stage] = sec;
  doc["timings"] = tm;
  json outs = json::array();
  for (const ManifestOutput& mo : outputs)
    outs.push_back({{"file", mo.file}, {"bytes", mo.bytes}, {"hash", mo.hash}});
  doc["outputs"] = outs;
  doc["constants"] = constants;
  doc["tolerances"] = tolerances;
  atomic_write(path, doc.dump(2) + "\n");
}

std::vector<ManifestOutput> write_field(const std::string& path, const GridFunction& f) {
  const std::string bytes = pack_doubles_rowmajor(f.v.matrix());
  atomic_write(path, bytes);
  json side;
  side["kind"] = "field";
  side["scalar"] = "float64-le";
  side["order"] = "row-major";
  side["shape"] = {f.v.rows(), f.v.cols()};
  side["dimension"] = f.grid.dim;
  side["halfWidth"] = f.grid.half_width;
  side["pointsPerAxis"] = f.grid.n;
  side["rank"] = f.rank;
  side["pair"] = f.pair;
  const std::string stext = side.dump(2) + "\n";
  atomic_write(path + ".json", stext);
  return {record(path, bytes), record(path + ".json", stext)};
}

std::vector<ManifestOutput> write_matrix(const std::string& path, const Eigen::MatrixXd& m,
                                         const std::map<std::string, std::string>& extra) {
  const std::string bytes = pack_doubles_rowmajor(m);
  atomic_write(path, bytes);
  json side;
  side["kind"] = "matrix";
  side["scalar"] = "float64-le";
  side["order"] = "row-major";
  side["shape"] = {m.rows(), m.cols()};
  for (const auto& [k, v] : extra) side[k] = v;
  const std::string stext = side.dump(2) + "\n";
  atomic_write(path + ".json", stext);
  return {record(path, bytes), record(path + ".json", stext)};
}

std::vector<ManifestOutput> write_csv(const std::string& path,
                                      const std::vector<std::string>& columns,
                                      const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  for (size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c];
  os << "\n";
  char cell[32];
  for (const std::vector<double>& row : rows) {
    if (row.size() != columns.size())
      throw std::runtime_error("csv row width does not match the header");
    for (size_t c = 0; c < row.size(); ++c) {
      std::snprintf(cell, sizeof cell, "%.17g", row[c]);
      os << (c ? "," : "") << cell;
    }
    os << "\n";
  }
  const std::string bytes = os.str();
  atomic_write(path, bytes);
  json side;
  side["kind"] = "table";
  side["columns"] = columns;
  side["rows"] = rows.size();
  const std::string stext = side.dump(2) + "\n";
  atomic_write(path + ".json", stext);
  return {record(path, bytes), record(path + ".json", stext)};
}

}  /* namespace fracelast */
