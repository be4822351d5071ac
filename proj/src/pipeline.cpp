#include "contmeas/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace contmeas {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string describe(const CheckReport::Item& item) {
  std::ostringstream os;
  os << item.name << " residual " << item.residual << " exceeds tolerance " << item.tolerance;
  return os.str();
}

std::string describe(const BoundRow& row) {
  std::ostringstream os;
  os << "bound " << row.id << " at (" << row.times << "): lhs " << row.lhs << ", rhs " << row.rhs
     << ", margin " << row.margin;
  return os.str();
}

std::string join_pair(int a, int b) { return std::to_string(a) + "," + std::to_string(b); }

/// Cross-checks on the finished report that do not need the record table.
void report_identities(const EntropyReport& rep, Real tol, ConsistencyReport& out) {
  constexpr Real kJointTol = 1e-8;
  for (const auto& [key, joint] : rep.joint_mutual) {
    const auto [r, s] = key;
    const Estimate& ic = rep.Ic(r, s);
    const Estimate& cb = rep.chi_bar(r, s);
    if (joint.value.is_infinite() || cb.value.is_infinite()) {
      out.add("joint_identity(" + join_pair(r, s) + ")",
              joint.value.is_infinite() == cb.value.is_infinite() ? 0 : 1, kJointTol);
      continue;
    }
    out.add("joint_identity(" + join_pair(r, s) + ")",
            std::abs(joint.value.value() - ic.value.value() - cb.value.value()), kJointTol);
  }
  for (const auto& [t, chi] : rep.chi_at) {
    if (!rep.grid.is_reference(t)) continue;
    const Estimate& cb = rep.chi_bar(t, t);
    const Real res = chi.value.is_infinite() || cb.value.is_infinite()
                         ? (chi.value.is_infinite() == cb.value.is_infinite() ? 0 : 1)
                         : std::abs(chi.value.value() - cb.value.value());
    out.add("chi_diagonal(" + std::to_string(t) + ")", res, tol);
  }
  if (rep.pure_preserving) out.add("purity", rep.max_aposteriori_entropy, tol);
}

}  // namespace

MeasurementModel load_model(const RunConfig& cfg) {
  MeasurementModel model;
  if (cfg.model_path && cfg.scenario) {
    throw Error(ErrorKind::InvalidParameters, "give either a model file or a scenario, not both");
  }
  if (cfg.model_path) {
    model = parse_model(read_file(*cfg.model_path));
  } else if (cfg.scenario) {
    model = builtin_scenario(*cfg.scenario, cfg.horizon.value_or(2), cfg.scenario_seed);
  } else {
    throw Error(ErrorKind::InvalidParameters, "no model file or scenario given");
  }
  if (cfg.horizon && *cfg.horizon != model.horizon) model = model.with_horizon(*cfg.horizon);
  return model;
}

PipelineResult run_pipeline(const RunConfig& cfg, PipelineAction action) {
  PipelineResult res;
  auto fail = [&](int code, std::string message) {
    res.exit_code = code;
    res.diagnostics.push_back(std::move(message));
    return res;
  };

  MeasurementModel model;
  try {
    model = load_model(cfg);
  } catch (const Error& e) {
    return fail(e.kind() == ErrorKind::Io ? exit_code::kIo : exit_code::kValidation, e.what());
  }

  res.validation = validate_model(model);
  if (const auto* item = res.validation.first_failure()) {
    return fail(exit_code::kValidation, "validation failed: " + describe(*item));
  }
  res.model = model;
  if (action == PipelineAction::Validate) return res;

  TimeGrid grid;
  try {
    if (cfg.grid) {
      grid = TimeGrid::make(model.horizon, *cfg.grid, cfg.refs.value_or(*cfg.grid));
    } else {
      grid = TimeGrid::full(model.horizon);
      if (cfg.refs) grid = TimeGrid::make(model.horizon, grid.record_times, *cfg.refs);
    }
  } catch (const Error& e) {
    return fail(exit_code::kValidation, e.what());
  }

  const APrioriTrack track = compute_a_priori(model, grid);
  EngineOptions options;
  options.threads = cfg.threads;
  options.leaf_budget = cfg.leaf_budget;

  const double leaves = leaf_count(model);
  const bool enumerable = leaves <= static_cast<double>(cfg.leaf_budget);
  const bool check_table = leaves <= static_cast<double>(cfg.consistency_budget);
  const EstimatorKind kind =
      cfg.mode == EngineMode::Enumerate ? EstimatorKind::Exact : EstimatorKind::MonteCarlo;

  std::vector<ReportAccumulator> accs;
  std::vector<std::vector<TrajectoryRecord>> table;
  std::vector<std::string> dumps;
  try {
    if (cfg.mode == EngineMode::Enumerate) {
      const std::size_t tasks = subtree_count(model);
      accs.assign(tasks, ReportAccumulator(grid, track, kind));
      table.resize(check_table ? tasks : 0);
      dumps.resize(cfg.dump_trajectories ? tasks : 0);
      enumerate_subtrees(
          model, grid, track,
          [&](std::size_t task, const TrajectoryRecord& rec) {
            accs[task].add(rec);
            if (cfg.dump_trajectories) dumps[task] += trajectory_csv_line(model, rec);
            if (check_table) table[task].push_back(rec);
          },
          options);
    } else {
      if (cfg.samples < 1) return fail(exit_code::kValidation, "sample count must be >= 1");
      const std::size_t blocks = sample_block_count(cfg.samples);
      accs.assign(blocks, ReportAccumulator(grid, track, kind));
      dumps.resize(cfg.dump_trajectories ? blocks : 0);
      sample_blocks(
          model, grid, track, cfg.samples, cfg.seed,
          [&](std::size_t block, const TrajectoryRecord& rec) {
            accs[block].add(rec);
            if (cfg.dump_trajectories) dumps[block] += trajectory_csv_line(model, rec);
          },
          options);
      if (check_table && enumerable) {
        const std::size_t tasks = subtree_count(model);
        table.resize(tasks);
        enumerate_subtrees(
            model, grid, track,
            [&](std::size_t task, const TrajectoryRecord& rec) { table[task].push_back(rec); },
            options);
      }
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::BudgetExceeded) return fail(exit_code::kIo, e.what());
    return fail(exit_code::kViolation, e.what());
  }

  ReportAccumulator total(grid, track, kind);
  for (const auto& acc : accs) total.merge(acc);
  res.report = total.finish(model);

  if (!table.empty()) {
    std::vector<TrajectoryRecord> flat;
    for (auto& part : table) {
      for (auto& rec : part) flat.push_back(std::move(rec));
    }
    res.consistency = consistency_checks(model, grid, track, flat, kConsistencyTol);
  } else {
    res.diagnostics.push_back("consistency checks skipped: outcome tree too large to tabulate");
  }
  report_identities(*res.report, cfg.tolerance, res.consistency);

  if (action == PipelineAction::Check) res.bounds = check_bounds(*res.report, cfg.tolerance);

  try {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "report.json", report_json(*res.report, cfg.units));
    if (res.bounds) write_file(dir / "bounds.csv", bounds_csv(*res.bounds, cfg.units));
    if (cfg.dump_trajectories) {
      std::string csv = trajectory_csv_header(grid);
      for (const auto& d : dumps) csv += d;
      write_file(dir / "trajectories.csv", csv);
    }
  } catch (const std::exception& e) {
    return fail(exit_code::kIo, e.what());
  }

  if (const auto* item = res.consistency.first_failure()) {
    return fail(exit_code::kViolation, "consistency check failed: " + describe(*item));
  }
  if (res.bounds) {
    if (const auto* row = res.bounds->first_failure()) {
      return fail(exit_code::kViolation, "bound violated: " + describe(*row));
    }
  }
  return res;
}

}  // namespace contmeas
