#pragma once

/*
 * Experiment descriptions parsed from JSON, run manifests, and raw
 * export of fields, matrices and tables.
 *
 * A scenario file fixes the grid, the regions, the fractional order
 * and the coefficient fields, plus optional per-command blocks.  Every
 * physical field is constructed once at load time so geometry and
 * positivity violations surface as configuration errors, not mid-run
 * failures.
 *
 * Exports are raw little-endian float64 payloads, row-major, each with
 * a JSON sidecar describing its shape, and are written to a temporary
 * name then renamed, so readers never observe partial files.
 */

#include <fracelast/grid.hpp>

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fracelast {

/* bad scenario text, schema violations, invalid physical data */
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct Scenario {
  GridSpec grid;
  RegionSet regions;
  double s = 0.5;
  double L0 = 1.0, M0 = 1.0;
  std::vector<BumpSpec> bumps;
  double cg_tol = 1e-12;
  int pad = 8;

  struct Forward {
    int window = 1;      /* which measurement set carries the data */
    int component = 0;
    std::array<double, 2> center{{0.0, 0.0}};
    bool centered = true;  /* default: bump sits at the window's center */
    double radius = 0.4;
    double amplitude = 1.0;
  };
  struct Reduce {
    std::vector<int> resolutions{256, 512};
    std::array<double, 2> center{{-0.2, 0.0}};
    double radius = 0.9;
    double amplitude = 1.0;
  };
  struct Runge {
    int window = 1;
    int component = 0;
    std::array<double, 2> center{{0.0, 0.0}};
    double radius = 0.95;
    double amplitude = 1.0;
    std::vector<double> alphas{1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  };
  struct Invert {
    double nu = 0.5;
    double beta = 1e-8;
    int max_iter = 8;
    std::array<double, 2> center{{0.0, 0.0}};
    double radius = 0.5;
    double amplitude = 0.4;
    double noise = 0.0;
    std::uint64_t seed = 2026;
  };
  struct Gauge1d {
    double k = 3.0;
    std::vector<double> m_values{1.0, 0.5, 1.25};
    double k_contrast = 3.5;
  };
  struct Verify {
    std::vector<std::string> checks;  /* empty list given explicitly: no checks */
    bool all = true;                  /* no list given: run everything */
    bool corrupt_lambda = false;      /* fault injection for the round-trip check */
  };

  std::optional<Forward> forward;
  std::optional<Reduce> reduce;
  std::optional<Runge> runge;
  std::optional<Invert> invert;
  std::optional<Gauge1d> gauge1d;
  std::optional<Verify> verify;

  std::string source_path;
  std::uint64_t input_hash = 0;
};

/* parse + validate; strict mode rejects unknown keys instead of ignoring them */
Scenario load_scenario(const std::string& path, bool strict = false);
Scenario parse_scenario(const std::string& text, bool strict = false);

/* rebuild the physical setup, optionally at another resolution */
RegionMasks scenario_masks(const Scenario& sc, int n_override = 0);
LameField scenario_lame(const Scenario& sc, const RegionMasks& masks);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hex64(std::uint64_t value);

/* one exported file, as listed in the manifest */
struct ManifestOutput {
  std::string file;
  std::uint64_t bytes = 0;
  std::string hash;
};

struct RunManifest {
  std::string command;
  std::string version;
  std::string input_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> timings;  /* stage, seconds */
  std::vector<ManifestOutput> outputs;
  std::map<std::string, double> constants;   /* fitted values, e.g. cstar */
  std::map<std::string, double> tolerances;  /* achieved residuals */

  void save(const std::string& path) const;
};

const char* version_tag();

/* all writers are atomic (temporary name, then rename) and return the
 * manifest rows for the payload and its sidecar */
std::vector<ManifestOutput> write_field(const std::string& path, const GridFunction& f);
std::vector<ManifestOutput> write_matrix(
    const std::string& path, const Eigen::MatrixXd& m,
    const std::map<std::string, std::string>& extra = {});
std::vector<ManifestOutput> write_csv(const std::string& path,
                                      const std::vector<std::string>& columns,
                                      const std::vector<std::vector<double>>& rows);

}  /* namespace fracelast */
