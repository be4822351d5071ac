#pragma once

// Discrete-time measurement models: ensemble of letter states plus a schedule
// of instruments, one per time step. Outcome strings of length t play the
// role of the measurement record on (0, t]; the reference measures are the
// uniform ones, so the engine works directly with probabilities.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "contmeas/check_report.hpp"
#include "contmeas/quantum.hpp"

namespace contmeas {

struct Ensemble {
  std::vector<Real> prior;
  std::vector<DensityOperator> states;

  std::size_t letters() const { return prior.size(); }
  std::vector<EnsembleMember> members() const;
  DensityOperator average() const;
};

struct MeasurementModel {
  Eigen::Index dim = 0;
  int horizon = 0;
  Ensemble ensemble;
  /// schedule[k] acts on step k + 1; size == horizon.
  std::vector<Instrument> schedule;
  /// Serialize as a single instrument object instead of a per-step array.
  bool homogeneous = true;

  const Instrument& instrument_at_step(int step) const { return schedule.at(step - 1); }

  /// Single Kraus operator per outcome and rank-one letter states: a
  /// syntactic sufficient condition for pure a-posteriori states.
  bool pure_preserving() const;

  /// Same model with a new horizon. Homogeneous schedules extend freely;
  /// per-step schedules may only be truncated.
  MeasurementModel with_horizon(int horizon) const;
};

/// Ordered time points used by reports. reference_times index the
/// conditioning on outcomes after s; record_times index everything else.
struct TimeGrid {
  std::vector<int> reference_times;
  std::vector<int> record_times;

  static TimeGrid full(int horizon);
  static TimeGrid make(int horizon, std::vector<int> record_times, std::vector<int> reference_times);

  bool is_record(int t) const;
  bool is_reference(int s) const;
  std::size_t record_index(int t) const;
  std::size_t reference_index(int s) const;
  int horizon() const { return record_times.back(); }
};

MeasurementModel parse_model(std::string_view text);
std::string serialize_model(const MeasurementModel& model);

using ValidationReport = CheckReport;

ValidationReport validate_model(const MeasurementModel& model);

std::vector<std::string> builtin_scenario_names();
MeasurementModel builtin_scenario(std::string_view name, int horizon = 2, std::uint64_t seed = 7);

struct RandomModelParams {
  std::uint64_t seed = 1;
  Eigen::Index dim = 2;
  std::size_t outcomes = 2;
  std::size_t kraus_per_outcome = 1;
  std::size_t letters = 2;
  int horizon = 2;
  bool pure_letters = false;
};

MeasurementModel random_model(const RandomModelParams& params);

/// (d*m*k) x d isometry from a seeded complex Gaussian matrix, sliced into
/// m outcomes of k Kraus operators each.
Instrument random_instrument(std::uint64_t seed, Eigen::Index dim, std::size_t outcomes,
                             std::size_t kraus_per_outcome);
DensityOperator random_density(std::uint64_t seed, Eigen::Index dim, bool pure = false);

}  // namespace contmeas
