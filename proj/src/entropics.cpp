#include "contmeas/entropics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace contmeas {

// ---------------------------------------------------------------- accumulator

void MeanAccumulator::add(Real weight, ExtendedReal term) {
  if (weight == 0) return;
  if (term.is_infinite()) {
    infinite_ = true;
    count_ += 1;
    return;
  }
  const Real f = term.value();
  weighted_sum_ += weight * f;
  count_ += 1;
  const Real delta = f - mean_;
  mean_ += delta / count_;
  m2_ += delta * (f - mean_);
}

void MeanAccumulator::merge(const MeanAccumulator& other) {
  weighted_sum_ += other.weighted_sum_;
  infinite_ = infinite_ || other.infinite_;
  const Real n = count_ + other.count_;
  if (n > 0) {
    const Real delta = other.mean_ - mean_;
    mean_ += delta * other.count_ / n;
    m2_ += other.m2_ + delta * delta * count_ * other.count_ / n;
  }
  count_ = n;
}

Estimate MeanAccumulator::finish(EstimatorKind kind) const {
  if (infinite_) return {ExtendedReal::infinity(), 0};
  if (kind == EstimatorKind::Exact) return {weighted_sum_, 0};
  const Real se = count_ > 1 ? std::sqrt(std::max<Real>(0, m2_) / (count_ - 1) / count_) : 0;
  return {mean_, se};
}

// ---------------------------------------------------------------- report lookups

namespace {

template <typename Map, typename Key>
const Estimate& lookup(const Map& map, const Key& key, const char* what) {
  auto it = map.find(key);
  if (it == map.end()) throw Error(ErrorKind::GridMiss, std::string(what) + ": times not in grid");
  return it->second;
}

}  // namespace

const Estimate& EntropyReport::Ic(int r, int t) const {
  return lookup(classical_info, PairKey{r, t}, "I_c");
}
const Estimate& EntropyReport::chi_bar(int s, int t) const {
  return lookup(mean_chi, PairKey{s, t}, "chi_bar");
}
const Estimate& EntropyReport::chi(int t) const { return lookup(chi_at, t, "chi"); }
const Estimate& EntropyReport::Iq(int s, int t) const {
  return lookup(quantum_gain, PairKey{s, t}, "I_q");
}
const Estimate& EntropyReport::Iq_cond(int r, int s, int t) const {
  return lookup(quantum_gain_cond, TripleKey{r, s, t}, "I_q(r;s,t)");
}
const Estimate& EntropyReport::joint(int r, int s) const {
  return lookup(joint_mutual, PairKey{r, s}, "joint mutual entropy");
}

// ---------------------------------------------------------------- per-record terms

namespace {

void require_order(std::initializer_list<int> times) {
  int prev = std::numeric_limits<int>::min();
  for (int t : times) {
    if (t < prev) throw Error(ErrorKind::InvalidParameters, "times must be non-decreasing");
    prev = t;
  }
}

Real ic_at(const TrajectoryRecord& rec, std::size_t ri, std::size_t jr, std::size_t jt) {
  return rec.log_prob[jt] - rec.log_prob[jr] - rec.cond(ri, jt).log_prob;
}

ExtendedReal chi_bar_at(const TrajectoryRecord& rec, std::size_t si, std::size_t jt) {
  return relative_entropy_psd(rec.aposteriori[jt], rec.cond(si, jt).state);
}

ExtendedReal joint_at(const TrajectoryRecord& rec, std::size_t ri, std::size_t jr, std::size_t js) {
  const Real p_s = std::exp(rec.log_prob[js]);
  const ConditionedState& c = rec.cond(ri, js);
  const Matrix sigma = p_s * rec.aposteriori[js];
  const Matrix reference = std::exp(rec.log_prob[jr] + c.log_prob) * c.state;
  const ExtendedReal atom = relative_entropy_psd(sigma, reference);
  return atom.is_infinite() ? atom : ExtendedReal(atom.value() / p_s);
}

Real weight_of(const TrajectoryRecord& rec, EstimatorKind kind) {
  return kind == EstimatorKind::Exact ? rec.prob : 1.0;
}

template <typename Term>
Estimate expectation(std::span<const TrajectoryRecord> records, EstimatorKind kind, Term&& term) {
  MeanAccumulator acc;
  for (const auto& rec : records) acc.add(weight_of(rec, kind), term(rec));
  return acc.finish(kind);
}

}  // namespace

Real classical_info_term(const TrajectoryRecord& rec, const TimeGrid& grid, int r, int t) {
  require_order({r, t});
  return ic_at(rec, grid.reference_index(r), grid.record_index(r), grid.record_index(t));
}

ExtendedReal mean_chi_term(const TrajectoryRecord& rec, const TimeGrid& grid, int s, int t) {
  require_order({s, t});
  return chi_bar_at(rec, grid.reference_index(s), grid.record_index(t));
}

ExtendedReal chi_term(const TrajectoryRecord& rec, const TimeGrid& grid, const APrioriTrack& track,
                      int t) {
  return relative_entropy_psd(rec.aposteriori[grid.record_index(t)], track.at(t).matrix());
}

Real quantum_gain_term(const TrajectoryRecord& rec, const TimeGrid& grid, int s, int t) {
  require_order({s, t});
  return rec.entropy[grid.record_index(s)] - rec.entropy[grid.record_index(t)];
}

Real quantum_gain_cond_term(const TrajectoryRecord& rec, const TimeGrid& grid, int r, int s,
                            int t) {
  require_order({r, s, t});
  const std::size_t ri = grid.reference_index(r);
  return rec.cond(ri, grid.record_index(s)).entropy - rec.cond(ri, grid.record_index(t)).entropy;
}

ExtendedReal joint_mutual_term(const TrajectoryRecord& rec, const TimeGrid& grid, int r, int s) {
  require_order({r, s});
  return joint_at(rec, grid.reference_index(r), grid.record_index(r), grid.record_index(s));
}

Estimate classical_information(std::span<const TrajectoryRecord> records, const TimeGrid& grid,
                               int r, int t, EstimatorKind kind) {
  return expectation(records, kind, [&](const auto& rec) {
    return ExtendedReal(classical_info_term(rec, grid, r, t));
  });
}

Estimate mean_chi(std::span<const TrajectoryRecord> records, const TimeGrid& grid, int s, int t,
                  EstimatorKind kind) {
  return expectation(records, kind, [&](const auto& rec) { return mean_chi_term(rec, grid, s, t); });
}

Estimate quantum_info_gain(std::span<const TrajectoryRecord> records, const TimeGrid& grid, int s,
                           int t, EstimatorKind kind) {
  return expectation(records, kind, [&](const auto& rec) {
    return ExtendedReal(quantum_gain_term(rec, grid, s, t));
  });
}

Estimate quantum_info_gain_cond(std::span<const TrajectoryRecord> records, const TimeGrid& grid,
                                int r, int s, int t, EstimatorKind kind) {
  return expectation(records, kind, [&](const auto& rec) {
    return ExtendedReal(quantum_gain_cond_term(rec, grid, r, s, t));
  });
}

// ---------------------------------------------------------------- report builder

ReportAccumulator::ReportAccumulator(const TimeGrid& grid, const APrioriTrack& track,
                                     EstimatorKind kind)
    : grid_(&grid), track_(&track), kind_(kind) {
  for (int s : grid.reference_times) {
    for (int t : grid.record_times) {
      if (t >= s) ref_pairs_.emplace_back(s, t);
    }
  }
  for (int s : grid.record_times) {
    for (int t : grid.record_times) {
      if (t >= s) record_pairs_.emplace_back(s, t);
    }
  }
  for (int r : grid.reference_times) {
    for (const auto& [s, t] : record_pairs_) {
      if (s >= r) triples_.emplace_back(r, s, t);
    }
  }
  ic_.resize(ref_pairs_.size());
  chi_bar_.resize(ref_pairs_.size());
  joint_.resize(ref_pairs_.size());
  iq_.resize(record_pairs_.size());
  iq_cond_.resize(triples_.size());
  chi_at_.resize(grid.record_times.size());
}

void ReportAccumulator::add(const TrajectoryRecord& rec) {
  const TimeGrid& g = *grid_;
  const Real w = weight_of(rec, kind_);
  ++records_;
  for (Real s : rec.entropy) max_entropy_ = std::max(max_entropy_, s);

  for (std::size_t k = 0; k < ref_pairs_.size(); ++k) {
    const auto [s, t] = ref_pairs_[k];
    const std::size_t si = g.reference_index(s);
    const std::size_t js = g.record_index(s);
    const std::size_t jt = g.record_index(t);
    ic_[k].add(w, ic_at(rec, si, js, jt));
    chi_bar_[k].add(w, chi_bar_at(rec, si, jt));
    joint_[k].add(w, joint_at(rec, si, js, jt));
  }
  for (std::size_t k = 0; k < record_pairs_.size(); ++k) {
    const auto [s, t] = record_pairs_[k];
    iq_[k].add(w, rec.entropy[g.record_index(s)] - rec.entropy[g.record_index(t)]);
  }
  for (std::size_t k = 0; k < triples_.size(); ++k) {
    const auto [r, s, t] = triples_[k];
    const std::size_t ri = g.reference_index(r);
    iq_cond_[k].add(w, rec.cond(ri, g.record_index(s)).entropy - rec.cond(ri, g.record_index(t)).entropy);
  }
  for (std::size_t j = 0; j < g.record_times.size(); ++j) {
    chi_at_[j].add(w, relative_entropy_psd(rec.aposteriori[j], track_->at(g.record_times[j]).matrix()));
  }
}

void ReportAccumulator::merge(const ReportAccumulator& other) {
  auto merge_all = [](std::vector<MeanAccumulator>& into, const std::vector<MeanAccumulator>& from) {
    for (std::size_t k = 0; k < into.size(); ++k) into[k].merge(from[k]);
  };
  merge_all(ic_, other.ic_);
  merge_all(chi_bar_, other.chi_bar_);
  merge_all(joint_, other.joint_);
  merge_all(iq_, other.iq_);
  merge_all(iq_cond_, other.iq_cond_);
  merge_all(chi_at_, other.chi_at_);
  records_ += other.records_;
  max_entropy_ = std::max(max_entropy_, other.max_entropy_);
}

EntropyReport ReportAccumulator::finish(const MeasurementModel& model) const {
  EntropyReport rep;
  rep.grid = *grid_;
  rep.estimator = kind_;
  rep.records = records_;
  for (std::size_t k = 0; k < ref_pairs_.size(); ++k) {
    rep.classical_info[ref_pairs_[k]] = ic_[k].finish(kind_);
    rep.mean_chi[ref_pairs_[k]] = chi_bar_[k].finish(kind_);
    rep.joint_mutual[ref_pairs_[k]] = joint_[k].finish(kind_);
  }
  for (std::size_t k = 0; k < record_pairs_.size(); ++k) {
    rep.quantum_gain[record_pairs_[k]] = iq_[k].finish(kind_);
  }
  for (std::size_t k = 0; k < triples_.size(); ++k) {
    rep.quantum_gain_cond[triples_[k]] = iq_cond_[k].finish(kind_);
  }
  for (std::size_t j = 0; j < grid_->record_times.size(); ++j) {
    rep.chi_at[grid_->record_times[j]] = chi_at_[j].finish(kind_);
  }
  const auto members = model.ensemble.members();
  rep.chi_initial = chi_quantity(members);
  rep.pure_preserving = model.pure_preserving();
  rep.max_aposteriori_entropy = max_entropy_;
  return rep;
}

EntropyReport build_report(const MeasurementModel& model, const TimeGrid& grid,
                           const APrioriTrack& track, std::span<const TrajectoryRecord> records,
                           EstimatorKind kind) {
  ReportAccumulator acc(grid, track, kind);
  for (const auto& rec : records) acc.add(rec);
  return acc.finish(model);
}

// ---------------------------------------------------------------- bounds

bool BoundReport::pass() const { return first_failure() == nullptr; }

const BoundRow* BoundReport::first_failure() const {
  for (const auto& row : rows) {
    if (!row.pass) return &row;
  }
  return nullptr;
}

const BoundRow* BoundReport::find(std::string_view id, std::string_view times) const {
  for (const auto& row : rows) {
    if (row.id == id && row.times == times) return &row;
  }
  return nullptr;
}

Real BoundReport::min_margin(std::string_view id) const {
  Real m = std::numeric_limits<Real>::infinity();
  for (const auto& row : rows) {
    if (row.id == id) m = std::min(m, row.margin);
  }
  return m;
}

namespace {

constexpr Real kInf = std::numeric_limits<Real>::infinity();

/// a - b in the extended reals; inf - inf is indeterminate (NaN).
Real ext_diff(ExtendedReal a, ExtendedReal b) {
  if (a.is_infinite() && b.is_infinite()) return std::numeric_limits<Real>::quiet_NaN();
  if (a.is_infinite()) return kInf;
  if (b.is_infinite()) return -kInf;
  return a.value() - b.value();
}

/// Smallest slack; indeterminate slacks are not evaluated.
Real min_slack(std::initializer_list<Real> slacks) {
  Real m = kInf;
  for (Real s : slacks) {
    if (!std::isnan(s)) m = std::min(m, s);
  }
  return m;
}

std::string key(std::initializer_list<int> times) {
  std::string out;
  for (int t : times) out += (out.empty() ? "" : ",") + std::to_string(t);
  return out;
}

class BoundWriter {
 public:
  BoundWriter(BoundReport& out, Real tol) : out_(out), tol_(tol) {}

  void add(std::string id, std::string times, Real lhs, Real rhs, Real margin,
           std::initializer_list<const Estimate*> involved, bool widen = true) {
    Real allowance = tol_;
    if (widen) {
      for (const Estimate* e : involved) allowance += 3 * e->se;
    }
    out_.rows.push_back({std::move(id), std::move(times), lhs, rhs, margin, margin >= -allowance});
  }

 private:
  BoundReport& out_;
  Real tol_;
};

}  // namespace

BoundReport check_bounds(const EntropyReport& rep, Real tol) {
  BoundReport out;
  BoundWriter w(out, tol);
  const auto& refs = rep.grid.reference_times;
  const auto& times = rep.grid.record_times;

  for (int r : refs) {
    for (int s : times) {
      if (s < r) continue;
      for (int t : times) {
        if (t <= s) continue;
        const Estimate& ic_rt = rep.Ic(r, t);
        const Estimate& ic_rs = rep.Ic(r, s);
        const Real gain = ic_rt.value.value() - ic_rs.value.value();
        const std::string k = key({r, s, t});

        w.add("B1", k, ic_rs.value.value(), ic_rt.value.value(), gain, {&ic_rt, &ic_rs});

        const Estimate& cb_rs = rep.chi_bar(r, s);
        const Estimate& cb_rt = rep.chi_bar(r, t);
        const Real drop = ext_diff(cb_rs.value, cb_rt.value);
        w.add("B2", k, gain, drop, min_slack({drop - gain, gain}), {&ic_rt, &ic_rs, &cb_rs, &cb_rt});

        const Estimate& iqc = rep.Iq_cond(r, s, t);
        const Estimate& iq = rep.Iq(s, t);
        const Real excess = iqc.value.value() - iq.value.value();
        w.add("B5", k, gain, excess, min_slack({excess - gain, gain}), {&ic_rt, &ic_rs, &iqc, &iq});
      }
    }
  }

  for (int s : refs) {
    for (int t : times) {
      if (t <= s) continue;
      const Estimate& ic = rep.Ic(s, t);
      const Estimate& chi_s = rep.chi(s);
      const Estimate& cb = rep.chi_bar(s, t);
      const Real room = ext_diff(chi_s.value, cb.value);
      const Real v = ic.value.value();
      w.add("B3", key({s, t}), v, room, min_slack({room - v, v}), {&ic, &chi_s, &cb});
    }
  }

  if (rep.grid.is_reference(0)) {
    for (int t : times) {
      if (t == 0) continue;
      const Estimate& ic = rep.Ic(0, t);
      const Real holevo = rep.chi_initial.value();
      w.add("B4", key({0, t}), ic.value.value(), holevo, holevo - ic.value.value(), {&ic});
    }
  }

  // additivity of the information gain
  for (int r : times) {
    for (int s : times) {
      if (s <= r) continue;
      for (int t : times) {
        if (t <= s) continue;
        const Real res = rep.Iq(r, t).value.value() - rep.Iq(r, s).value.value() -
                         rep.Iq(s, t).value.value();
        w.add("B6", key({r, s, t}), std::abs(res), 0, -std::abs(res), {}, false);
      }
    }
  }
  for (int u : refs) {
    for (int r : times) {
      if (r < u) continue;
      for (int s : times) {
        if (s <= r) continue;
        for (int t : times) {
          if (t <= s) continue;
          const Real res = rep.Iq_cond(u, r, t).value.value() - rep.Iq_cond(u, r, s).value.value() -
                           rep.Iq_cond(u, s, t).value.value();
          w.add("B6", key({u, r, s, t}), std::abs(res), 0, -std::abs(res), {}, false);
        }
      }
    }
  }

  if (rep.pure_preserving) {
    for (int u : refs) {
      for (int r : times) {
        if (r < u) continue;
        for (int s : times) {
          if (s < r) continue;
          for (int t : times) {
            if (t <= s) continue;
            const Estimate& a = rep.Iq_cond(u, r, s);
            const Estimate& b = rep.Iq_cond(u, r, t);
            w.add("B7", key({u, r, s, t}), a.value.value(), b.value.value(),
                  b.value.value() - a.value.value(), {&a, &b});
          }
        }
      }
    }
    if (rep.grid.is_reference(0)) {
      for (int t : times) {
        const Estimate& g = rep.Iq_cond(0, 0, t);
        if (t == 0) {
          w.add("B7", key({0, 0, 0}), std::abs(g.value.value()), 0, -std::abs(g.value.value()), {},
                false);
        } else {
          w.add("B7", key({0, 0, t}), 0, g.value.value(), g.value.value(), {&g});
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- serialization

namespace {

using Json = nlohmann::ordered_json;

Real unit_scale(Units units) { return units == Units::Bits ? 1 / std::numbers::ln2 : 1.0; }

Json estimate_json(const Estimate& e, Real scale) {
  Json obj = Json::object();
  if (e.value.is_infinite()) {
    obj["value"] = "inf";
  } else {
    obj["value"] = e.value.value() * scale;
  }
  obj["se"] = e.se * scale;
  return obj;
}

std::string key_of(const PairKey& k) { return key({k.first, k.second}); }
std::string key_of(const TripleKey& k) {
  return key({std::get<0>(k), std::get<1>(k), std::get<2>(k)});
}
std::string key_of(int t) { return std::to_string(t); }

template <typename Map>
Json table_json(const Map& map, Real scale) {
  Json obj = Json::object();
  for (const auto& [k, e] : map) obj[key_of(k)] = estimate_json(e, scale);
  return obj;
}

std::string csv_real(Real x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string report_json(const EntropyReport& rep, Units units) {
  const Real scale = unit_scale(units);
  Json doc = Json::object();
  Json meta = Json::object();
  meta["estimator"] = rep.estimator == EstimatorKind::Exact ? "exact" : "monte-carlo";
  meta["records"] = rep.records;
  meta["units"] = units == Units::Bits ? "bits" : "nats";
  meta["pure_preserving"] = rep.pure_preserving;
  doc["meta"] = std::move(meta);
  doc["Ic"] = table_json(rep.classical_info, scale);
  doc["chi_bar"] = table_json(rep.mean_chi, scale);
  doc["chi_at"] = table_json(rep.chi_at, scale);
  doc["Iq"] = table_json(rep.quantum_gain, scale);
  doc["Iq_cond"] = table_json(rep.quantum_gain_cond, scale);
  doc["joint_mutual"] = table_json(rep.joint_mutual, scale);
  Json chi0 = Json::object();
  chi0["0"] = estimate_json(Estimate{rep.chi_initial, 0}, scale);
  doc["chi_initial"] = std::move(chi0);
  return doc.dump(2) + "\n";
}

std::string bounds_csv(const BoundReport& bounds, Units units) {
  const Real scale = unit_scale(units);
  std::ostringstream os;
  os << "bound_id,times,lhs,rhs,margin,pass\n";
  for (const auto& row : bounds.rows) {
    os << row.id << ",\"" << row.times << "\"," << csv_real(row.lhs * scale) << ","
       << csv_real(row.rhs * scale) << "," << csv_real(row.margin * scale) << ","
       << (row.pass ? "true" : "false") << "\n";
  }
  return os.str();
}

}  // namespace contmeas
