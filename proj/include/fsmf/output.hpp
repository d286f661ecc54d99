#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "fsmf/detector.hpp"

namespace fsmf {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

/// Streams steps.csv and detections.csv as the loop produces records, so a
/// run that stops early still leaves every completed step on disk.
class CsvRunWriter final : public RecordSink {
 public:
  /// Throws IoFailure.
  explicit CsvRunWriter(const std::filesystem::path& dir);
  ~CsvRunWriter() override;

  void step(const StepRecord& r) override;
  void detection(const DetectionRecord& d) override;
  void flush() override;

 private:
  std::filesystem::path dir_;
  std::ofstream steps_, detections_;
  bool header_written_ = false;
};

struct SummaryInfo {
  std::string scenario;
  std::string config_path;
  int horizon = 0;
  int agents = 0;
  bool recovery = true;
  double tol = 0;
  int exit_code = 0;
};

void write_summary(const std::filesystem::path& file, const SummaryInfo& info, const RunResult& r);

/// Steps whose sets are plotted: the requested ones plus every alarm step.
std::set<int> snapshot_steps(const std::vector<int>& requested, const RunResult& r);

/// 256 boundary points of X(k|k), X(k+1|k), X(k+1|k+1) and U(k) per agent and snapshot.
void write_ellipses(const std::filesystem::path& file, const std::set<int>& steps,
                    const RunResult& r, int points = 256);

/// |x_i(k) - x^l(k)| and the leader-set quadratic form per step.
void write_consensus(const std::filesystem::path& file, const RunResult& r);

}  // namespace fsmf
