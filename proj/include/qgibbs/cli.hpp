#pragma once
// Experiment harness: declarative key=value configs, deterministic sweep
// execution over a worker pool, CSV/JSON result emission, named presets, and
// a machine-readable self-check suite for the generator/bound machinery.
//
// Determinism contract: a run is a pure function of the config (master seed
// included) — repeated runs produce bitwise-identical result files no matter
// how many workers execute the sweep. Trajectories and sweep points draw from
// counter-keyed substreams, work items are reduced in a fixed order, and no
// accumulation order depends on scheduling.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qgibbs::cli {

// Malformed or inconsistent configuration (process exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Refusal to start a run whose dense state space exceeds the guard
// (process exit code 2).
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One sweep axis: config key (e.g. "theta_sweep") plus its value list.
// Axes are kept in config order; the result grid iterates the first axis
// outermost.
struct SweepAxis {
  std::string key;
  std::vector<double> values;
  bool operator==(const SweepAxis&) const = default;
};

// Full experiment description. Optional fields are derivable ("auto" in the
// config file): they are resolved per sweep point from the scenario rules,
// so a swept dependency (e.g. beta) re-derives them at every point.
struct ExperimentConfig {
  std::string scenario;  // single-spin | ising2d | fermion-chain | oracle-suite | scaling-sweep
  std::string base;      // scaling-sweep only: scenario that produces the grid

  // Model.
  double g = 1.0;        // transverse field / level splitting
  double j = 1.0;        // coupling strength (Ising bond / hopping)
  int lx = 3, ly = 3;    // ising2d lattice extents
  bool periodic = true;  // ising2d boundary conditions
  int n_sites = 100;     // fermion chain length

  // Protocol. "auto" fields derive per point: h from the model couplings,
  // t_reset as a scenario multiple of 1/a (a = sqrt(4h/beta)), theta from the
  // scenario rule, n_cycles from theta.
  std::optional<double> theta;
  std::optional<double> h;
  std::optional<double> t_reset;
  std::optional<int> n_cycles;
  double beta = 1.0;
  double delta = 0.05;
  double lambda = 0.0;
  int n_bath = 1;
  std::string coupling_op = "y";       // y | z | zy
  std::string coupling_mode = "fixed"; // fixed | random
  double rewind_fraction = 0.0;

  // Execution.
  std::uint64_t seed = 1;
  int trajectories = 0;    // ising2d: 0 = dense channel, > 0 = sampled
  int measurements = 4;    // sampled: recorded snapshots per trajectory
  int sample_stride = 10;  // sampled: cycles between snapshots
  double tol = 1e-9;       // solver residual tolerance
  std::string output = "results.csv";
  bool json_mirror = false;
  bool subtract_ground_coherence = false;  // drop degenerate ground coherence
  bool emit_covariance_profile = false;    // fermion: binned mode-space errors
  double filter_width_scale = 1.0;         // oracle-suite corruption knob

  std::vector<SweepAxis> sweeps;

  bool operator==(const ExperimentConfig&) const = default;
};

// Scenario defaults (throws ConfigError for an unknown scenario name).
ExperimentConfig default_config(const std::string& scenario);

// Parse from text / file. Errors carry origin:line and the offending key.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin = "<config>");
ExperimentConfig parse_config_file(const std::string& path);

// Canonical serialization; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// One observable at one sweep point.
struct ResultRow {
  std::string scenario;
  std::vector<double> sweep_values;  // aligned with RunResult::sweep_columns
  std::string observable;
  double value = 0.0;
  double std_error = 0.0;  // 0 for deterministic rows, NaN when undefined
  std::uint64_t seed = 0;
  long long cycles = 0;
};

struct RunResult {
  std::vector<std::string> sweep_columns;  // axis keys minus "_sweep"
  std::vector<ResultRow> rows;
};

// Execute the config's sweep. Worker count: QGIBBS_THREADS when set (>= 1),
// else the hardware concurrency; the result is identical either way.
RunResult run_scenario(const ExperimentConfig& cfg);

// Column contract: scenario,<swept params in config order>,observable,value,
// stderr,seed,cycles.
std::string to_csv(const RunResult& result);
std::string to_json(const RunResult& result);

// ---- Self-check suite -------------------------------------------------------

struct OracleCheck {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound - measured; negative = violated
  bool pass = false;
};

struct OracleSuiteReport {
  std::vector<OracleCheck> checks;
  bool all_pass = false;
};

// Invariant battery over the generator machinery: filter normalization,
// special-function branch agreement, the detailed-balance relation of the
// jump operators, Gibbs stationarity of the balance generator, the QDB
// element condition, cross-validation of the two Lamb-shift computations,
// the discrete-vs-continuous replacement bound, the norm-bound certificates,
// and (for lambda > 2) the coherence-bound cover. filter_width_scale != 1
// corrupts the filter/jump width so deliberate breakage is detectable.
OracleSuiteReport run_oracle_suite(const ExperimentConfig& cfg);

// CSV: check,measured,bound,margin,pass.
std::string oracle_report_csv(const OracleSuiteReport& report);

// ---- Presets ----------------------------------------------------------------

// (name, path) pairs from the first preset directory that exists:
// $QGIBBS_PRESETS, ./presets, <exe dir>/presets walking up two levels, then
// the compiled-in source presets directory.
std::vector<std::pair<std::string, std::string>> list_presets();

// Resolve a name ("ising-observables") or path ("cfg/my.cfg") to a file path.
std::string resolve_preset(const std::string& name);

// Entry point behind main(): subcommands run / oracle-suite / list-presets /
// validate. Returns the process exit code (0 ok, 1 config error, 2 resource
// guard, 3 self-check failure).
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace qgibbs::cli
