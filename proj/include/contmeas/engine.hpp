#pragma once

// Trajectory engine. Walks the outcome tree depth first (or samples paths
// under the physical law) and attaches, at every record time t:
//   - the log probability of (letter, x_1..x_t),
//   - the a-posteriori state rho_t and its entropy,
//   - for every reference time s <= t, the state conditioned only on the
//     increments x_{s+1..t} (started from the a-priori state eta_s), the log
//     probability of those increments, and its entropy.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "contmeas/check_report.hpp"
#include "contmeas/model.hpp"

namespace contmeas {

struct APrioriTrack {
  std::vector<DensityOperator> eta;  // eta[t], t = 0..horizon

  const DensityOperator& at(int t) const { return eta.at(static_cast<std::size_t>(t)); }
};

APrioriTrack compute_a_priori(const MeasurementModel& model, const TimeGrid& grid);

struct ConditionedState {
  bool present = false;  // record time >= reference time
  Matrix state;
  Real log_prob = 0;  // log P(increments)
  Real entropy = 0;
};

struct TrajectoryRecord {
  std::size_t letter = 0;
  std::vector<std::size_t> outcomes;  // indices into each step's instrument
  Real prob = 0;                      // P(letter, full outcome string)

  // indexed by position in TimeGrid::record_times
  std::vector<Real> log_prob;
  std::vector<Matrix> aposteriori;
  std::vector<Real> entropy;

  // [reference index][record index]
  std::vector<std::vector<ConditionedState>> conditioned;

  const ConditionedState& cond(std::size_t ref, std::size_t rec) const {
    return conditioned[ref][rec];
  }
};

struct EngineOptions {
  std::size_t leaf_budget = 10'000'000;
  unsigned threads = 1;
  /// Branches whose mass falls below this fraction of the parent are dropped.
  Real prune = 1e-14;
};

using RecordVisitor = std::function<void(const TrajectoryRecord&)>;
/// Receives records tagged with their task index; records of one task arrive
/// sequentially from a single thread.
using TaskVisitor = std::function<void(std::size_t task, const TrajectoryRecord&)>;

/// n_letters * prod_k m_k, saturating.
double leaf_count(const MeasurementModel& model);
/// Top-level partition: one task per (letter, first outcome).
std::size_t subtree_count(const MeasurementModel& model);

void enumerate_subtrees(const MeasurementModel& model, const TimeGrid& grid,
                        const APrioriTrack& track, const TaskVisitor& visit,
                        const EngineOptions& options = {});

/// Serial streaming enumeration; returns the number of emitted records.
std::size_t enumerate(const MeasurementModel& model, const TimeGrid& grid,
                      const APrioriTrack& track, const RecordVisitor& visit,
                      const EngineOptions& options = {});

std::vector<TrajectoryRecord> enumerate_all(const MeasurementModel& model, const TimeGrid& grid,
                                            const APrioriTrack& track,
                                            const EngineOptions& options = {});

inline constexpr std::size_t kSampleBlock = 1024;

/// Sampling is split into blocks of kSampleBlock draws; block b uses its own
/// generator seeded from (seed, b), so results do not depend on threads.
std::size_t sample_block_count(std::size_t n);

void sample_blocks(const MeasurementModel& model, const TimeGrid& grid, const APrioriTrack& track,
                   std::size_t n, std::uint64_t seed, const TaskVisitor& visit,
                   const EngineOptions& options = {});

std::vector<TrajectoryRecord> sample(const MeasurementModel& model, const TimeGrid& grid,
                                     const APrioriTrack& track, std::size_t n,
                                     std::uint64_t seed, const EngineOptions& options = {});

using ConsistencyReport = CheckReport;

inline constexpr Real kConsistencyTol = 1e-9;

/// Martingale, marginal, composition and telescoping identities on an
/// enumerated table.
ConsistencyReport consistency_checks(const MeasurementModel& model, const TimeGrid& grid,
                                     const APrioriTrack& track,
                                     const std::vector<TrajectoryRecord>& records,
                                     Real tolerance = kConsistencyTol);

/// Trajectory dump: letter, outcome string (labels joined by '.'), prob,
/// then S(rho_t) for every record time.
std::string trajectory_csv_header(const TimeGrid& grid);
std::string trajectory_csv_line(const MeasurementModel& model, const TrajectoryRecord& record);

}  // namespace contmeas
