#pragma once

// validate -> a-priori track -> engine -> consistency -> report -> bounds,
// with artifacts written to an output directory.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "contmeas/entropics.hpp"

namespace contmeas {

enum class EngineMode { Enumerate, Sample };
enum class PipelineAction { Validate, Run, Check };

struct RunConfig {
  std::optional<std::string> model_path;
  std::optional<std::string> scenario;
  std::uint64_t scenario_seed = 7;
  std::optional<int> horizon;
  std::optional<std::vector<int>> grid;
  std::optional<std::vector<int>> refs;  // defaults to the grid
  EngineMode mode = EngineMode::Enumerate;
  std::size_t samples = 100000;
  std::uint64_t seed = 42;
  Real tolerance = kBoundTol;
  Units units = Units::Nats;
  std::string out_dir = ".";
  bool dump_trajectories = false;
  unsigned threads = 1;
  std::size_t leaf_budget = 10'000'000;
  /// Consistency checks materialize the outcome tree; skipped above this size.
  std::size_t consistency_budget = 200'000;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kValidation = 1;
inline constexpr int kViolation = 2;
inline constexpr int kIo = 3;
}  // namespace exit_code

struct PipelineResult {
  int exit_code = exit_code::kOk;
  std::vector<std::string> diagnostics;
  std::optional<MeasurementModel> model;
  ValidationReport validation;
  ConsistencyReport consistency;
  std::optional<EntropyReport> report;
  std::optional<BoundReport> bounds;
};

/// Loads the model named by the config (file or built-in scenario) and
/// applies the horizon override.
MeasurementModel load_model(const RunConfig& cfg);

PipelineResult run_pipeline(const RunConfig& cfg, PipelineAction action);

}  // namespace contmeas
