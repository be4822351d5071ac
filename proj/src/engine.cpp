#include "contmeas/engine.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace contmeas {

APrioriTrack compute_a_priori(const MeasurementModel& model, const TimeGrid& grid) {
  if (grid.horizon() != model.horizon) {
    throw Error(ErrorKind::InvalidParameters, "grid horizon differs from model horizon");
  }
  APrioriTrack track;
  track.eta.reserve(static_cast<std::size_t>(model.horizon) + 1);
  track.eta.push_back(model.ensemble.average());
  for (int step = 1; step <= model.horizon; ++step) {
    const UnnormalizedState next = a_priori_step(model.instrument_at_step(step),
                                                 UnnormalizedState(track.eta.back().matrix()));
    track.eta.push_back(DensityOperator::trusted(next.matrix));
  }
  return track;
}

double leaf_count(const MeasurementModel& model) {
  double n = static_cast<double>(model.ensemble.letters());
  for (const auto& inst : model.schedule) n *= static_cast<double>(inst.outcomes());
  return n;
}

std::size_t subtree_count(const MeasurementModel& model) {
  return model.ensemble.letters() * model.instrument_at_step(1).outcomes();
}

std::size_t sample_block_count(std::size_t n) { return (n + kSampleBlock - 1) / kSampleBlock; }

namespace {

struct Frame {
  Matrix rho;
  Real log_p = 0;
  Real entropy = 0;
  std::vector<Matrix> cond;
  std::vector<Real> cond_log;
  std::vector<Real> cond_entropy;
};

Matrix sandwich(const KrausMap& map, const Matrix& rho) {
  Matrix out = Matrix::Zero(rho.rows(), rho.cols());
  for (const auto& k : map.operators) out.noalias() += k * rho * k.adjoint();
  return out;
}

Matrix normalize(const Matrix& m, Real trace) {
  Matrix out = m / trace;
  return (out + out.adjoint()) / 2.0;
}

Real spectrum_entropy(const Matrix& rho) {
  return entropy_of_spectrum(hermitian_eig(rho).eigenvalues);
}

std::string path_context(std::size_t letter, const std::vector<std::size_t>& outcomes, int depth) {
  std::ostringstream os;
  os << "trajectory letter " << letter << ", outcomes [";
  for (int k = 0; k < depth; ++k) os << (k ? "," : "") << outcomes[static_cast<std::size_t>(k)];
  os << "]";
  return os.str();
}

void run_tasks(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto count = std::min<std::size_t>(threads, n);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class Walker {
 public:
  Walker(const MeasurementModel& model, const TimeGrid& grid, const APrioriTrack& track)
      : model_(model), grid_(grid), track_(track) {
    const auto horizon = static_cast<std::size_t>(model.horizon);
    is_record_.assign(horizon + 1, false);
    for (int t : grid.record_times) is_record_[static_cast<std::size_t>(t)] = true;
    for (int s : grid.reference_times) eta_entropy_.push_back(spectrum_entropy(track.at(s).matrix()));
  }

  int horizon() const { return model_.horizon; }
  std::size_t outcomes_at(int step) const { return model_.instrument_at_step(step).outcomes(); }

  Frame root(std::size_t letter) const {
    Frame f;
    f.rho = model_.ensemble.states[letter].matrix();
    f.log_p = std::log(model_.ensemble.prior[letter]);
    f.entropy = spectrum_entropy(f.rho);
    const auto refs = grid_.reference_times.size();
    f.cond.resize(refs);
    f.cond_log.assign(refs, 0);
    f.cond_entropy.assign(refs, 0);
    seed_references(f, 0);
    return f;
  }

  /// Child of `parent` (at `depth`) for outcome v. False when pruned.
  bool extend(const Frame& parent, int depth, std::size_t v, Frame& child, Real prune) const {
    const int step = depth + 1;
    const KrausMap& map = model_.instrument_at_step(step).maps[v];
    const Matrix sigma = sandwich(map, parent.rho);
    const Real mass = sigma.trace().real();
    if (!(mass > prune)) return false;

    const bool record = is_record_[static_cast<std::size_t>(step)];
    child.rho = normalize(sigma, mass);
    child.log_p = parent.log_p + std::log(mass);
    if (record) child.entropy = spectrum_entropy(child.rho);

    const auto refs = grid_.reference_times.size();
    child.cond.resize(refs);
    child.cond_log.resize(refs);
    child.cond_entropy.resize(refs);
    for (std::size_t i = 0; i < refs; ++i) {
      if (grid_.reference_times[i] >= step) continue;
      const Matrix c = sandwich(map, parent.cond[i]);
      const Real cmass = c.trace().real();
      if (!(cmass > 0)) {
        throw Error(ErrorKind::NotPositiveSemidefinite,
                    "conditioned branch has non-positive mass on a positive-probability path");
      }
      child.cond[i] = normalize(c, cmass);
      child.cond_log[i] = parent.cond_log[i] + std::log(cmass);
      if (record) child.cond_entropy[i] = spectrum_entropy(child.cond[i]);
    }
    seed_references(child, step);
    return true;
  }

  TrajectoryRecord make_record(std::size_t letter, const std::vector<std::size_t>& outcomes,
                               const std::vector<Frame>& frames) const {
    const auto& times = grid_.record_times;
    const auto& refs = grid_.reference_times;
    TrajectoryRecord rec;
    rec.letter = letter;
    rec.outcomes = outcomes;
    rec.prob = std::exp(frames.back().log_p);
    rec.log_prob.reserve(times.size());
    rec.aposteriori.reserve(times.size());
    rec.entropy.reserve(times.size());
    for (int t : times) {
      const Frame& f = frames[static_cast<std::size_t>(t)];
      rec.log_prob.push_back(f.log_p);
      rec.aposteriori.push_back(f.rho);
      rec.entropy.push_back(f.entropy);
    }
    rec.conditioned.resize(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      rec.conditioned[i].resize(times.size());
      for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] < refs[i]) continue;
        const Frame& f = frames[static_cast<std::size_t>(times[j])];
        rec.conditioned[i][j] = ConditionedState{true, f.cond[i], f.cond_log[i], f.cond_entropy[i]};
      }
    }
    return rec;
  }

 private:
  void seed_references(Frame& f, int time) const {
    for (std::size_t i = 0; i < grid_.reference_times.size(); ++i) {
      if (grid_.reference_times[i] != time) continue;
      f.cond[i] = track_.at(time).matrix();
      f.cond_log[i] = 0;
      f.cond_entropy[i] = eta_entropy_[i];
    }
  }

  const MeasurementModel& model_;
  const TimeGrid& grid_;
  const APrioriTrack& track_;
  std::vector<bool> is_record_;
  std::vector<Real> eta_entropy_;
};

void check_inputs(const MeasurementModel& model, const TimeGrid& grid, const APrioriTrack& track) {
  if (grid.horizon() != model.horizon) {
    throw Error(ErrorKind::InvalidParameters, "grid horizon differs from model horizon");
  }
  if (track.eta.size() != static_cast<std::size_t>(model.horizon) + 1) {
    throw Error(ErrorKind::InvalidParameters, "a-priori track does not cover the horizon");
  }
}

void walk_subtree(const Walker& walker, std::size_t letter, std::size_t first, Real prune,
                  std::size_t task, const TaskVisitor& visit) {
  const int horizon = walker.horizon();
  std::vector<Frame> frames(static_cast<std::size_t>(horizon) + 1);
  std::vector<std::size_t> outcomes(static_cast<std::size_t>(horizon), 0);
  std::vector<std::size_t> next(static_cast<std::size_t>(horizon) + 1, 0);

  int depth = 0;
  try {
    frames[0] = walker.root(letter);
    outcomes[0] = first;
    if (!walker.extend(frames[0], 0, first, frames[1], prune)) return;
    depth = 1;
    while (depth >= 1) {
      const auto d = static_cast<std::size_t>(depth);
      if (depth == horizon) {
        visit(task, walker.make_record(letter, outcomes, frames));
        --depth;
        continue;
      }
      std::size_t& k = next[d];
      if (k >= walker.outcomes_at(depth + 1)) {
        k = 0;
        --depth;
        continue;
      }
      const std::size_t v = k++;
      if (walker.extend(frames[d], depth, v, frames[d + 1], prune)) {
        outcomes[d] = v;
        ++depth;
      }
    }
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " (" + path_context(letter, outcomes, depth) + ")");
  }
}

std::mt19937_64 block_rng(std::uint64_t seed, std::size_t block) {
  const auto b = static_cast<std::uint64_t>(block);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32), 0x5a5au};
  return std::mt19937_64(seq);
}

std::size_t draw_index(std::mt19937_64& rng, const std::vector<Real>& weights) {
  Real total = 0;
  for (Real w : weights) total += w;
  const Real u = std::uniform_real_distribution<Real>(0.0, 1.0)(rng) * total;
  Real acc = 0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0)) continue;
    last = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  return last;
}

}  // namespace

void enumerate_subtrees(const MeasurementModel& model, const TimeGrid& grid,
                        const APrioriTrack& track, const TaskVisitor& visit,
                        const EngineOptions& options) {
  check_inputs(model, grid, track);
  const double leaves = leaf_count(model);
  if (leaves > static_cast<double>(options.leaf_budget)) {
    std::ostringstream os;
    os << "outcome tree has " << leaves << " leaves, budget is " << options.leaf_budget;
    throw Error(ErrorKind::BudgetExceeded, os.str());
  }
  const Walker walker(model, grid, track);
  const std::size_t first_outcomes = model.instrument_at_step(1).outcomes();
  run_tasks(subtree_count(model), options.threads, [&](std::size_t task) {
    const std::size_t letter = task / first_outcomes;
    if (!(model.ensemble.prior[letter] > 0)) return;
    walk_subtree(walker, letter, task % first_outcomes, options.prune, task, visit);
  });
}

std::size_t enumerate(const MeasurementModel& model, const TimeGrid& grid,
                      const APrioriTrack& track, const RecordVisitor& visit,
                      const EngineOptions& options) {
  EngineOptions serial = options;
  serial.threads = 1;
  std::size_t count = 0;
  enumerate_subtrees(
      model, grid, track,
      [&](std::size_t, const TrajectoryRecord& rec) {
        ++count;
        visit(rec);
      },
      serial);
  return count;
}

std::vector<TrajectoryRecord> enumerate_all(const MeasurementModel& model, const TimeGrid& grid,
                                            const APrioriTrack& track,
                                            const EngineOptions& options) {
  std::vector<TrajectoryRecord> out;
  enumerate(model, grid, track, [&](const TrajectoryRecord& r) { out.push_back(r); }, options);
  return out;
}

void sample_blocks(const MeasurementModel& model, const TimeGrid& grid, const APrioriTrack& track,
                   std::size_t n, std::uint64_t seed, const TaskVisitor& visit,
                   const EngineOptions& options) {
  check_inputs(model, grid, track);
  if (n < 1) throw Error(ErrorKind::InvalidParameters, "sample count must be >= 1");
  const Walker walker(model, grid, track);
  const int horizon = model.horizon;

  // Outcome probabilities are Tr{rho E_v} with E_v the outcome effect.
  std::vector<std::vector<Matrix>> effects(static_cast<std::size_t>(horizon));
  for (int step = 1; step <= horizon; ++step) {
    for (const auto& map : model.instrument_at_step(step).maps) {
      effects[static_cast<std::size_t>(step - 1)].push_back(map.effect());
    }
  }

  run_tasks(sample_block_count(n), options.threads, [&](std::size_t block) {
    auto rng = block_rng(seed, block);
    const std::size_t begin = block * kSampleBlock;
    const std::size_t count = std::min(kSampleBlock, n - begin);
    std::vector<Frame> frames(static_cast<std::size_t>(horizon) + 1);
    std::vector<std::size_t> outcomes(static_cast<std::size_t>(horizon), 0);
    std::vector<Real> weights;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t letter = draw_index(rng, model.ensemble.prior);
      int depth = 0;
      try {
        frames[0] = walker.root(letter);
        for (; depth < horizon; ++depth) {
          const auto d = static_cast<std::size_t>(depth);
          const auto& eff = effects[d];
          weights.resize(eff.size());
          for (std::size_t v = 0; v < eff.size(); ++v) {
            weights[v] = std::max<Real>(0, (frames[d].rho * eff[v]).trace().real());
          }
          const std::size_t v = draw_index(rng, weights);
          outcomes[d] = v;
          if (!walker.extend(frames[d], depth, v, frames[d + 1], 0)) {
            throw Error(ErrorKind::NotPositiveSemidefinite, "sampled a null branch");
          }
        }
      } catch (const Error& e) {
        throw Error(e.kind(),
                    std::string(e.what()) + " (" + path_context(letter, outcomes, depth) + ")");
      }
      visit(block, walker.make_record(letter, outcomes, frames));
    }
  });
}

std::vector<TrajectoryRecord> sample(const MeasurementModel& model, const TimeGrid& grid,
                                     const APrioriTrack& track, std::size_t n, std::uint64_t seed,
                                     const EngineOptions& options) {
  std::vector<std::vector<TrajectoryRecord>> blocks(sample_block_count(n));
  sample_blocks(
      model, grid, track, n, seed,
      [&](std::size_t b, const TrajectoryRecord& r) { blocks[b].push_back(r); }, options);
  std::vector<TrajectoryRecord> out;
  out.reserve(n);
  for (auto& b : blocks) {
    for (auto& r : b) out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------- consistency

namespace {

using PathKey = std::vector<std::size_t>;

PathKey prefix_key(const TrajectoryRecord& rec, int t) {
  PathKey key;
  key.reserve(static_cast<std::size_t>(t) + 1);
  key.push_back(rec.letter);
  key.insert(key.end(), rec.outcomes.begin(), rec.outcomes.begin() + t);
  return key;
}

PathKey increment_key(const TrajectoryRecord& rec, int s, int t) {
  return PathKey(rec.outcomes.begin() + s, rec.outcomes.begin() + t);
}

std::string times_label(std::initializer_list<int> times) {
  std::string out;
  for (int t : times) out += (out.empty() ? "" : ",") + std::to_string(t);
  return out;
}

/// Applies steps s+1..t along the record's outcomes; returns the unnormalized result.
Matrix propagate(const MeasurementModel& model, const TrajectoryRecord& rec, Matrix state, int s,
                 int t) {
  for (int step = s + 1; step <= t; ++step) {
    const auto v = rec.outcomes[static_cast<std::size_t>(step - 1)];
    state = sandwich(model.instrument_at_step(step).maps[v], state);
  }
  return state;
}

}  // namespace

ConsistencyReport consistency_checks(const MeasurementModel& model, const TimeGrid& grid,
                                     const APrioriTrack& track,
                                     const std::vector<TrajectoryRecord>& records, Real tol) {
  ConsistencyReport report;
  const auto& times = grid.record_times;
  const auto& refs = grid.reference_times;

  Real total = 0;
  for (const auto& rec : records) total += rec.prob;
  report.add("prob.total", std::abs(total - 1), tol);

  // one representative record per distinct (letter, x_1..x_t)
  std::vector<std::map<PathKey, const TrajectoryRecord*>> distinct(times.size());
  for (const auto& rec : records) {
    for (std::size_t j = 0; j < times.size(); ++j) distinct[j].emplace(prefix_key(rec, times[j]), &rec);
  }

  for (std::size_t j = 0; j < times.size(); ++j) {
    const int t = times[j];
    Matrix avg = Matrix::Zero(model.dim, model.dim);
    for (const auto& [key, rec] : distinct[j]) avg += std::exp(rec->log_prob[j]) * rec->aposteriori[j];
    report.add("a_priori(" + std::to_string(t) + ")", (avg - track.at(t).matrix()).norm(), tol);
  }

  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t j = i + 1; j < times.size(); ++j) {
      const int s = times[i];
      const int t = times[j];
      // martingale at probability level: P(a, x<=s) = sum over increments of P(a, x<=t)
      std::map<PathKey, Real> children;
      for (const auto& [key, rec] : distinct[j]) {
        children[PathKey(key.begin(), key.begin() + s + 1)] += std::exp(rec->log_prob[j]);
      }
      Real worst = 0;
      for (const auto& [key, rec] : distinct[i]) {
        const auto it = children.find(key);
        const Real sum = it == children.end() ? 0 : it->second;
        worst = std::max(worst, std::abs(sum - std::exp(rec->log_prob[i])));
      }
      report.add("martingale(" + times_label({s, t}) + ")", worst, tol);

      // normalized-state recursion and probability telescoping along each path
      Real state_err = 0;
      Real prob_err = 0;
      for (const auto& [key, rec] : distinct[j]) {
        const Matrix next = propagate(model, *rec, rec->aposteriori[i], s, t);
        const Real mass = next.trace().real();
        state_err = std::max(state_err, (next / mass - rec->aposteriori[j]).norm());
        prob_err = std::max(prob_err,
                            std::abs(std::exp(rec->log_prob[i]) * mass - std::exp(rec->log_prob[j])));
      }
      report.add("recursion(" + times_label({s, t}) + ")", state_err, tol);
      report.add("telescoping(" + times_label({s, t}) + ")", prob_err, tol);
    }
  }

  for (std::size_t r = 0; r < refs.size(); ++r) {
    const int s = refs[r];
    const std::size_t si = grid.record_index(s);
    for (std::size_t j = si + 1; j < times.size(); ++j) {
      const int t = times[j];
      struct Group {
        Real mass = 0;
        Matrix weighted;
        const TrajectoryRecord* first = nullptr;
        Real spread = 0;
      };
      std::map<PathKey, Group> groups;
      for (const auto& [key, rec] : distinct[j]) {
        Group& g = groups[increment_key(*rec, s, t)];
        const Real p = std::exp(rec->log_prob[j]);
        if (!g.first) {
          g.first = rec;
          g.weighted = Matrix::Zero(model.dim, model.dim);
        }
        g.mass += p;
        g.weighted += p * rec->aposteriori[j];
        g.spread = std::max(g.spread, (rec->cond(r, j).state - g.first->cond(r, j).state).norm());
      }
      Real incr_total = 0;
      Real mass_err = 0;
      Real state_err = 0;
      Real spread = 0;
      for (const auto& [key, g] : groups) {
        const ConditionedState& c = g.first->cond(r, j);
        const Real incr = std::exp(c.log_prob);
        incr_total += incr;
        mass_err = std::max(mass_err, std::abs(g.mass - incr));
        state_err = std::max(state_err, (g.weighted / g.mass - c.state).norm());
        spread = std::max(spread, g.spread);
      }
      const std::string label = "(" + times_label({s, t}) + ")";
      report.add("increment_total" + label, std::abs(incr_total - 1), tol);
      report.add("increment_marginal" + label, mass_err, tol);
      report.add("marginal_state" + label, state_err, tol);
      report.add("measurability" + label, spread, tol);

      // composition: conditioning s -> u -> t equals s -> t
      Real comp_err = 0;
      for (std::size_t u = si + 1; u < j; ++u) {
        for (const auto& [key, rec] : distinct[j]) {
          const Matrix next = propagate(model, *rec, rec->cond(r, u).state, times[u], t);
          comp_err = std::max(comp_err, (next / next.trace().real() - rec->cond(r, j).state).norm());
        }
      }
      if (j > si + 1) report.add("composition" + label, comp_err, tol);
    }
  }
  return report;
}

// ---------------------------------------------------------------- CSV dump

namespace {

std::string format_real(Real x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string trajectory_csv_header(const TimeGrid& grid) {
  std::string out = "letter,outcomes,prob";
  for (int t : grid.record_times) out += ",S_" + std::to_string(t);
  return out + "\n";
}

std::string trajectory_csv_line(const MeasurementModel& model, const TrajectoryRecord& rec) {
  std::string out = std::to_string(rec.letter) + ",";
  for (std::size_t k = 0; k < rec.outcomes.size(); ++k) {
    if (k) out += ".";
    out += model.instrument_at_step(static_cast<int>(k) + 1).labels[rec.outcomes[k]];
  }
  out += "," + format_real(rec.prob);
  for (Real s : rec.entropy) out += "," + format_real(s);
  return out + "\n";
}

}  // namespace contmeas
