#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsmf/detector.hpp"
#include "fsmf/errors.hpp"
#include "fsmf/output.hpp"
#include "fsmf/scenario.hpp"

namespace {

using namespace fsmf;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAbort = 2;
constexpr const char* kOutEnv = "FSMF_OUT_DIR";

struct RunArgs {
  std::string config;
  std::optional<double> tol;
  std::optional<std::string> out;
  bool dump_sdp = false;
  bool no_recovery = false;
  std::optional<std::vector<int>> snapshots;
};

std::filesystem::path output_dir(const RunArgs& a, const ScenarioConfig& cfg) {
  if (a.out) return *a.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return cfg.output_dir;
}

int run(const RunArgs& a) {
  ScenarioConfig cfg;
  try {
    cfg = load_scenario(a.config);
    if (a.tol) cfg.tol = *a.tol;
    if (a.no_recovery) cfg.recovery = false;
    if (a.snapshots) cfg.snapshots = *a.snapshots;
    cfg.validate();
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  const std::filesystem::path dir = output_dir(a, cfg);
  RunResult result;
  int code = kExitOk;
  try {
    CsvRunWriter writer(dir);
    RunOptions opt;
    opt.sink = &writer;
    if (a.dump_sdp) opt.dump_dir = dir / "sdp";
    try {
      result = run_detection(cfg, opt);
    } catch (const IoFailure&) {
      throw;
    } catch (const Error& e) {
      // Records already streamed stay on disk.
      writer.flush();
      result.aborted = true;
      result.abort_reason = e.what();
    }
    writer.flush();
    if (result.aborted) {
      code = kExitAbort;
      std::cerr << "run aborted: " << result.abort_reason << '\n';
    }
    SummaryInfo info{cfg.name, a.config, cfg.horizon, static_cast<int>(cfg.agents.size()),
                     cfg.recovery, cfg.tol, code};
    write_summary(dir / "summary.json", info, result);
    write_ellipses(dir / "ellipses.csv", snapshot_steps(cfg.snapshots, result), result);
    write_consensus(dir / "consensus.csv", result);
  } catch (const IoFailure& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitConfig;
  }

  int alarms = 0;
  for (const auto& s : result.steps) alarms += s.step3_alarm + s.step6_alarm;
  std::cout << cfg.name << ": " << result.completed_steps << " steps, " << alarms << " alarms, "
            << result.fallbacks << " solver fallbacks -> " << dir.string() << '\n';
  return code;
}

int validate(const std::string& path) {
  try {
    const ScenarioConfig cfg = load_scenario(path);
    std::cout << "ok: " << cfg.name << ", " << cfg.agents.size() << " agents, horizon "
              << cfg.horizon << ", attack " << to_string(cfg.attack.kind) << '\n';
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

int oracle_intersect(const std::string& p1, const std::string& p2) {
  try {
    const EllipsoidD e1 = load_ellipsoid_json(p1), e2 = load_ellipsoid_json(p2);
    const auto m = overlap_margin(e1, e2);
    nlohmann::ordered_json j;
    j["intersects"] = intersects(e1, e2);
    j["k_min"] = m.k_min;
    j["lambda"] = m.lambda;
    if (e1.dim() == 2) j["grid_oracle_400"] = grid_overlap_oracle(e1, e2, 400);
    std::cout << j.dump(2) << '\n';
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuzzy set-membership filtering and attack detection for leader-following agents"};
  app.require_subcommand(1);

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write its outputs");
  run_cmd->add_option("config", ra.config, "Scenario file (.cfg/.yaml or .json)")->required();
  run_cmd->add_option("--tol", ra.tol, "Solver tolerance")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", ra.out, std::string("Output directory (overrides ") + kOutEnv + ")");
  run_cmd->add_flag("--dump-sdp", ra.dump_sdp, "Write every SDP in SDPA format under <out>/sdp");
  run_cmd->add_flag("--no-recovery", ra.no_recovery, "Detect only; skip the rollback steps");
  run_cmd->add_option("--snapshots", ra.snapshots, "Steps whose sets are plotted")->delimiter(',');

  std::string vpath;
  auto* val_cmd = app.add_subcommand("validate", "Parse and check a scenario file");
  val_cmd->add_option("config", vpath)->required();

  std::string e1, e2;
  auto* ora_cmd = app.add_subcommand("oracle-intersect", "Overlap test for two ellipsoids");
  ora_cmd->add_option("e1", e1, "JSON file {\"center\": [...], \"shape\": [[...]]}")->required();
  ora_cmd->add_option("e2", e2, "Second ellipsoid, same format")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (*run_cmd) return run(ra);
  if (*val_cmd) return validate(vpath);
  return oracle_intersect(e1, e2);
}
