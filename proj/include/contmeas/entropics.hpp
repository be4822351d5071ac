#pragma once

// Information functionals of a continual measurement, estimated from
// trajectory records, and the inequalities relating them.
//
// Every quantity is an expectation under the physical law of a per-record
// term, so the same accumulator serves exhaustive enumeration (weights =
// record probabilities, exact sums) and Monte-Carlo sampling (equal weights,
// standard errors from the sample variance).

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "contmeas/engine.hpp"

namespace contmeas {

enum class EstimatorKind { Exact, MonteCarlo };

struct Estimate {
  ExtendedReal value;
  Real se = 0;
};

/// Weighted sum (exact) or running mean/variance (Monte Carlo) of one term.
class MeanAccumulator {
 public:
  void add(Real weight, ExtendedReal term);
  void merge(const MeanAccumulator& other);
  Estimate finish(EstimatorKind kind) const;

 private:
  Real weighted_sum_ = 0;
  Real count_ = 0;
  Real mean_ = 0;
  Real m2_ = 0;
  bool infinite_ = false;
};

using PairKey = std::pair<int, int>;
using TripleKey = std::tuple<int, int, int>;

struct EntropyReport {
  TimeGrid grid;
  EstimatorKind estimator = EstimatorKind::Exact;
  std::size_t records = 0;

  std::map<PairKey, Estimate> classical_info;      // I_c(r, t), r a reference time
  std::map<PairKey, Estimate> mean_chi;            // chi_bar(s, t), s a reference time
  std::map<int, Estimate> chi_at;                  // chi{P, rho_t}
  std::map<PairKey, Estimate> quantum_gain;        // I_q(s, t)
  std::map<TripleKey, Estimate> quantum_gain_cond; // I_q(r; s, t)
  std::map<PairKey, Estimate> joint_mutual;        // S(sigma_s | q_r sigma^r_s), matrix route

  ExtendedReal chi_initial;  // chi of the letter ensemble
  bool pure_preserving = false;
  Real max_aposteriori_entropy = 0;

  const Estimate& Ic(int r, int t) const;
  const Estimate& chi_bar(int s, int t) const;
  const Estimate& chi(int t) const;
  const Estimate& Iq(int s, int t) const;
  const Estimate& Iq_cond(int r, int s, int t) const;
  const Estimate& joint(int r, int s) const;
};

// Per-record terms; indices refer to the grid the records were built on.
Real classical_info_term(const TrajectoryRecord& rec, const TimeGrid& grid, int r, int t);
ExtendedReal mean_chi_term(const TrajectoryRecord& rec, const TimeGrid& grid, int s, int t);
ExtendedReal chi_term(const TrajectoryRecord& rec, const TimeGrid& grid, const APrioriTrack& track,
                      int t);
Real quantum_gain_term(const TrajectoryRecord& rec, const TimeGrid& grid, int s, int t);
Real quantum_gain_cond_term(const TrajectoryRecord& rec, const TimeGrid& grid, int r, int s, int t);
/// Tr{sigma_s (log sigma_s - log(q_r sigma^r_s))} / P(a, x<=s) with the
/// unnormalized matrices built from the record.
ExtendedReal joint_mutual_term(const TrajectoryRecord& rec, const TimeGrid& grid, int r, int s);

/// E_P[log P(a,x<=t) - log P(a,x<=r) - log P(x_{r+1..t})]
Estimate classical_information(std::span<const TrajectoryRecord> records, const TimeGrid& grid,
                               int r, int t, EstimatorKind kind = EstimatorKind::Exact);
/// E_P[S_q(rho_t | varrho^s_t)]
Estimate mean_chi(std::span<const TrajectoryRecord> records, const TimeGrid& grid, int s, int t,
                  EstimatorKind kind = EstimatorKind::Exact);
/// E_P[S_q(rho_s) - S_q(rho_t)]
Estimate quantum_info_gain(std::span<const TrajectoryRecord> records, const TimeGrid& grid, int s,
                           int t, EstimatorKind kind = EstimatorKind::Exact);
/// E_P[S_q(varrho^r_s) - S_q(varrho^r_t)]
Estimate quantum_info_gain_cond(std::span<const TrajectoryRecord> records, const TimeGrid& grid,
                                int r, int s, int t, EstimatorKind kind = EstimatorKind::Exact);

/// Streaming builder; per-task instances merge associatively.
class ReportAccumulator {
 public:
  ReportAccumulator(const TimeGrid& grid, const APrioriTrack& track, EstimatorKind kind);

  void add(const TrajectoryRecord& rec);
  void merge(const ReportAccumulator& other);
  EntropyReport finish(const MeasurementModel& model) const;

 private:
  const TimeGrid* grid_;
  const APrioriTrack* track_;
  EstimatorKind kind_;
  std::size_t records_ = 0;
  Real max_entropy_ = 0;

  std::vector<PairKey> ref_pairs_;      // (s, t): s reference, t record, s <= t
  std::vector<PairKey> record_pairs_;   // (s, t): both record times, s <= t
  std::vector<TripleKey> triples_;      // (r, s, t): r reference, r <= s <= t

  std::vector<MeanAccumulator> ic_, chi_bar_, joint_, iq_, iq_cond_, chi_at_;
};

EntropyReport build_report(const MeasurementModel& model, const TimeGrid& grid,
                           const APrioriTrack& track, std::span<const TrajectoryRecord> records,
                           EstimatorKind kind = EstimatorKind::Exact);

struct BoundRow {
  std::string id;
  std::string times;
  Real lhs;
  Real rhs;
  Real margin;  // minimum slack; may be +/-inf
  bool pass;
};

struct BoundReport {
  std::vector<BoundRow> rows;

  bool pass() const;
  const BoundRow* first_failure() const;
  const BoundRow* find(std::string_view id, std::string_view times) const;
  Real min_margin(std::string_view id) const;
};

inline constexpr Real kBoundTol = 1e-9;

/// Evaluates every inequality on the report's grid. For Monte-Carlo reports
/// the tolerance of each row grows by three standard errors of the entries
/// involved.
BoundReport check_bounds(const EntropyReport& report, Real tol = kBoundTol);

enum class Units { Nats, Bits };

std::string report_json(const EntropyReport& report, Units units = Units::Nats);
std::string bounds_csv(const BoundReport& bounds, Units units = Units::Nats);

}  // namespace contmeas
