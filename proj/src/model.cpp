#include "contmeas/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace contmeas {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- model

std::vector<EnsembleMember> Ensemble::members() const {
  std::vector<EnsembleMember> out;
  out.reserve(prior.size());
  for (std::size_t a = 0; a < prior.size(); ++a) out.push_back({prior[a], states[a]});
  return out;
}

DensityOperator Ensemble::average() const {
  const auto m = members();
  return average_state(m);
}

bool MeasurementModel::pure_preserving() const {
  for (const auto& inst : schedule) {
    if (!inst.single_kraus_per_outcome()) return false;
  }
  for (const auto& rho : ensemble.states) {
    auto spec = hermitian_eig(rho.matrix());
    const RealVector lambda = clip_spectrum(spec.eigenvalues);
    const Real top = lambda.maxCoeff();
    for (Eigen::Index i = 0; i + 1 < lambda.size(); ++i) {
      if (lambda[i] > kSupportTol * top) return false;
    }
  }
  return true;
}

MeasurementModel MeasurementModel::with_horizon(int new_horizon) const {
  if (new_horizon < 1) throw Error(ErrorKind::InvalidParameters, "horizon must be >= 1");
  MeasurementModel out = *this;
  if (homogeneous) {
    out.schedule.assign(static_cast<std::size_t>(new_horizon), schedule.front());
  } else {
    if (new_horizon > static_cast<int>(schedule.size())) {
      std::ostringstream os;
      os << "per-step schedule has " << schedule.size() << " instruments, horizon " << new_horizon
         << " requested";
      throw Error(ErrorKind::InvalidParameters, os.str());
    }
    out.schedule.resize(static_cast<std::size_t>(new_horizon));
  }
  out.horizon = new_horizon;
  return out;
}

// ---------------------------------------------------------------- grid

TimeGrid TimeGrid::full(int horizon) {
  std::vector<int> all(static_cast<std::size_t>(horizon) + 1);
  for (int t = 0; t <= horizon; ++t) all[static_cast<std::size_t>(t)] = t;
  return make(horizon, all, all);
}

TimeGrid TimeGrid::make(int horizon, std::vector<int> records, std::vector<int> refs) {
  auto tidy = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  tidy(records);
  tidy(refs);
  for (int t : records) {
    if (t < 0 || t > horizon) {
      throw Error(ErrorKind::InvalidParameters,
                  "grid time " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]");
    }
  }
  if (records.empty() || records.front() != 0 || records.back() != horizon) {
    throw Error(ErrorKind::InvalidParameters, "grid must contain 0 and the horizon");
  }
  for (int s : refs) {
    if (!std::binary_search(records.begin(), records.end(), s)) {
      throw Error(ErrorKind::InvalidParameters,
                  "reference time " + std::to_string(s) + " is not a grid time");
    }
  }
  return TimeGrid{std::move(refs), std::move(records)};
}

bool TimeGrid::is_record(int t) const {
  return std::binary_search(record_times.begin(), record_times.end(), t);
}

bool TimeGrid::is_reference(int s) const {
  return std::binary_search(reference_times.begin(), reference_times.end(), s);
}

std::size_t TimeGrid::record_index(int t) const {
  auto it = std::lower_bound(record_times.begin(), record_times.end(), t);
  if (it == record_times.end() || *it != t) {
    throw Error(ErrorKind::GridMiss, "time " + std::to_string(t) + " is not a record time");
  }
  return static_cast<std::size_t>(it - record_times.begin());
}

std::size_t TimeGrid::reference_index(int s) const {
  auto it = std::lower_bound(reference_times.begin(), reference_times.end(), s);
  if (it == reference_times.end() || *it != s) {
    throw Error(ErrorKind::GridMiss, "time " + std::to_string(s) + " is not a reference time");
  }
  return static_cast<std::size_t>(it - reference_times.begin());
}

// ---------------------------------------------------------------- parsing

namespace {

[[noreturn]] void shape_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::ShapeError, where + ": " + what);
}

void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      shape_error(where, "unknown field \"" + key + "\"");
    }
  }
}

const Json& require(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) shape_error(where, std::string("missing field \"") + key + "\"");
  return *it;
}

int read_int(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) shape_error(where, "expected an integer");
  return j.get<int>();
}

Real read_real(const Json& j, const std::string& where) {
  if (!j.is_number()) shape_error(where, "expected a number");
  return j.get<Real>();
}

Matrix read_matrix(const Json& j, Eigen::Index dim, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != dim) {
    shape_error(where, "expected " + std::to_string(dim) + " rows");
  }
  Matrix m(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
      shape_error(where, "row " + std::to_string(r) + " must have " + std::to_string(dim) +
                             " entries");
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      const Json& e = row[static_cast<std::size_t>(c)];
      const std::string at = where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]";
      if (e.is_number()) {
        m(r, c) = Complex(read_real(e, at), 0);
        continue;
      }
      if (!e.is_array() || e.size() != 2) shape_error(at, "entry must be a real or [re, im]");
      m(r, c) = Complex(read_real(e[0], at), read_real(e[1], at));
    }
  }
  return m;
}

Instrument read_instrument(const Json& j, Eigen::Index dim, const std::string& where) {
  if (!j.is_object() || j.empty()) shape_error(where, "expected a non-empty object of outcomes");
  std::vector<std::string> labels;
  std::vector<KrausMap> maps;
  for (const auto& [label, ops] : j.items()) {
    const std::string at = where + "[\"" + label + "\"]";
    if (!ops.is_array() || ops.empty()) shape_error(at, "expected a non-empty array of matrices");
    std::vector<Matrix> kraus;
    for (std::size_t k = 0; k < ops.size(); ++k) {
      kraus.push_back(read_matrix(ops[k], dim, at + "[" + std::to_string(k) + "]"));
    }
    labels.push_back(label);
    maps.emplace_back(std::move(kraus));
  }
  return Instrument(std::move(labels), std::move(maps));
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

Json instrument_json(const Instrument& inst) {
  Json obj = Json::object();
  for (std::size_t v = 0; v < inst.outcomes(); ++v) {
    Json ops = Json::array();
    for (const auto& k : inst.maps[v].operators) ops.push_back(matrix_json(k));
    obj[inst.labels[v]] = std::move(ops);
  }
  return obj;
}

}  // namespace

MeasurementModel parse_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream os;
    os << "line " << line << ", column " << col << ": " << e.what();
    throw Error(ErrorKind::SyntaxError, os.str());
  }
  if (!doc.is_object()) shape_error("model", "top level must be an object");
  reject_unknown(doc, {"dim", "horizon", "ensemble", "instruments"}, "model");

  MeasurementModel model;
  model.dim = read_int(require(doc, "dim", "model"), "dim");
  model.horizon = read_int(require(doc, "horizon", "model"), "horizon");
  if (model.dim < 1) shape_error("dim", "must be >= 1");
  if (model.horizon < 1) shape_error("horizon", "must be >= 1");

  const Json& ens = require(doc, "ensemble", "model");
  if (!ens.is_array() || ens.empty()) shape_error("ensemble", "expected a non-empty array");
  for (std::size_t a = 0; a < ens.size(); ++a) {
    const std::string where = "ensemble[" + std::to_string(a) + "]";
    if (!ens[a].is_object()) shape_error(where, "expected an object");
    reject_unknown(ens[a], {"p", "state"}, where);
    model.ensemble.prior.push_back(read_real(require(ens[a], "p", where), where + ".p"));
    model.ensemble.states.push_back(DensityOperator::trusted(
        read_matrix(require(ens[a], "state", where), model.dim, where + ".state")));
  }

  const Json& inst = require(doc, "instruments", "model");
  if (inst.is_object()) {
    model.homogeneous = true;
    model.schedule.assign(static_cast<std::size_t>(model.horizon),
                          read_instrument(inst, model.dim, "instruments"));
  } else if (inst.is_array()) {
    model.homogeneous = false;
    if (static_cast<int>(inst.size()) != model.horizon) {
      shape_error("instruments", "per-step array has " + std::to_string(inst.size()) +
                                     " entries, horizon is " + std::to_string(model.horizon));
    }
    for (std::size_t k = 0; k < inst.size(); ++k) {
      model.schedule.push_back(
          read_instrument(inst[k], model.dim, "instruments[" + std::to_string(k) + "]"));
    }
  } else {
    shape_error("instruments", "expected an object or an array of objects");
  }
  return model;
}

std::string serialize_model(const MeasurementModel& model) {
  Json doc = Json::object();
  doc["dim"] = model.dim;
  doc["horizon"] = model.horizon;
  Json ens = Json::array();
  for (std::size_t a = 0; a < model.ensemble.letters(); ++a) {
    Json member = Json::object();
    member["p"] = model.ensemble.prior[a];
    member["state"] = matrix_json(model.ensemble.states[a].matrix());
    ens.push_back(std::move(member));
  }
  doc["ensemble"] = std::move(ens);
  if (model.homogeneous) {
    doc["instruments"] = instrument_json(model.schedule.front());
  } else {
    Json steps = Json::array();
    for (const auto& inst : model.schedule) steps.push_back(instrument_json(inst));
    doc["instruments"] = std::move(steps);
  }
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------- validation

ValidationReport validate_model(const MeasurementModel& model) {
  ValidationReport report;
  auto add = [&](std::string name, Real residual, Real tol) {
    report.add(std::move(name), residual, tol);
  };

  const std::size_t distinct = model.homogeneous ? 1 : model.schedule.size();
  for (std::size_t k = 0; k < distinct && k < model.schedule.size(); ++k) {
    const std::string name = model.homogeneous ? "instrument" : "instrument[" + std::to_string(k) + "]";
    add(name + ".completeness", model.schedule[k].completeness_residual(), kCompletenessTol);
  }

  Real total = 0;
  Real most_negative = 0;
  for (std::size_t a = 0; a < model.ensemble.letters(); ++a) {
    const Real p = model.ensemble.prior[a];
    total += p;
    most_negative = std::min(most_negative, p);

    const Matrix& m = model.ensemble.states[a].matrix();
    const std::string name = "ensemble[" + std::to_string(a) + "]";
    const Real herm = hermiticity_residual(m);
    add(name + ".hermiticity", herm, kHermitianTol * std::max<Real>(1, m.norm()));
    add(name + ".trace", std::abs(m.trace().real() - 1), kTraceTol);
    const Matrix sym = (m + m.adjoint()) / 2.0;
    const RealVector lambda = hermitian_eig(sym).eigenvalues;
    const Real top = std::max<Real>(lambda.cwiseAbs().maxCoeff(), 0);
    add(name + ".negativity", std::max<Real>(0, -lambda.minCoeff()), kClipTol * top);
  }
  add("prior.sum", std::abs(total - 1), kProbabilityTol);
  add("prior.negativity", -most_negative, 0);
  return report;
}

// ---------------------------------------------------------------- generators

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<Real> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Real re = normal(rng);
      const Real im = normal(rng);
      g(r, c) = Complex(re, im);
    }
  }
  return g;
}

Ensemble qubit_letter_ensemble() {
  Eigen::VectorXcd zero(2), plus(2);
  zero << 1, 0;
  plus << 1, 1;
  return Ensemble{{0.5, 0.5}, {DensityOperator::pure(zero), DensityOperator::pure(plus)}};
}

Matrix mat2(Complex a, Complex b, Complex c, Complex d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

MeasurementModel homogeneous_model(Ensemble ens, Instrument inst, int horizon) {
  MeasurementModel m;
  m.dim = inst.dim();
  m.horizon = horizon;
  m.ensemble = std::move(ens);
  m.schedule.assign(static_cast<std::size_t>(horizon), std::move(inst));
  m.homogeneous = true;
  return m;
}

std::vector<std::string> numeric_labels(std::size_t m) {
  std::vector<std::string> labels;
  for (std::size_t v = 0; v < m; ++v) labels.push_back(std::to_string(v));
  return labels;
}

}  // namespace

Instrument random_instrument(std::uint64_t seed, Eigen::Index dim, std::size_t outcomes,
                             std::size_t kraus_per_outcome) {
  if (dim < 1 || outcomes < 1 || kraus_per_outcome < 1) {
    throw Error(ErrorKind::InvalidParameters, "random_instrument: sizes must be positive");
  }
  auto rng = make_rng(seed, 0x1257);
  const auto blocks = static_cast<Eigen::Index>(outcomes * kraus_per_outcome);
  const Matrix g = gaussian_matrix(rng, dim * blocks, dim);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(dim * blocks, dim);
  // fix the column phases so that R has a positive diagonal
  const Matrix r = qr.matrixQR().topRows(dim).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < dim; ++c) {
    const Complex d = r(c, c);
    if (std::abs(d) > 0) q.col(c) *= d / std::abs(d);
  }
  std::vector<KrausMap> maps;
  for (std::size_t v = 0; v < outcomes; ++v) {
    std::vector<Matrix> ops;
    for (std::size_t j = 0; j < kraus_per_outcome; ++j) {
      const auto block = static_cast<Eigen::Index>(v * kraus_per_outcome + j);
      ops.push_back(q.middleRows(block * dim, dim));
    }
    maps.emplace_back(std::move(ops));
  }
  return Instrument(numeric_labels(outcomes), std::move(maps));
}

DensityOperator random_density(std::uint64_t seed, Eigen::Index dim, bool pure) {
  auto rng = make_rng(seed, 0xd3);
  if (pure) {
    const Matrix psi = gaussian_matrix(rng, dim, 1);
    return DensityOperator::pure(psi.col(0));
  }
  const Matrix g = gaussian_matrix(rng, dim, dim);
  const Matrix w = g * g.adjoint();
  return DensityOperator::trusted(w / w.trace().real());
}

MeasurementModel random_model(const RandomModelParams& p) {
  if (p.dim < 2 || p.outcomes < 1 || p.letters < 1 || p.kraus_per_outcome < 1 || p.horizon < 1) {
    throw Error(ErrorKind::InvalidParameters,
                "random_model: need dim >= 2, outcomes >= 1, letters >= 1, kraus >= 1, horizon >= 1");
  }
  Ensemble ens;
  auto rng = make_rng(p.seed, 0xa1);
  std::exponential_distribution<Real> expo(1.0);
  Real total = 0;
  for (std::size_t a = 0; a < p.letters; ++a) {
    ens.prior.push_back(0.05 + expo(rng));
    total += ens.prior.back();
  }
  for (auto& w : ens.prior) w /= total;
  for (std::size_t a = 0; a < p.letters; ++a) {
    ens.states.push_back(random_density(p.seed * 1000003ULL + a + 1, p.dim, p.pure_letters));
  }
  return homogeneous_model(std::move(ens),
                           random_instrument(p.seed, p.dim, p.outcomes, p.kraus_per_outcome),
                           p.horizon);
}

std::vector<std::string> builtin_scenario_names() {
  return {"identity", "qubit-projective", "qubit-weak", "pure-preserving-random", "damped-qubit"};
}

MeasurementModel builtin_scenario(std::string_view name, int horizon, std::uint64_t seed) {
  if (horizon < 1) throw Error(ErrorKind::InvalidParameters, "horizon must be >= 1");
  if (name == "identity") {
    return homogeneous_model(qubit_letter_ensemble(),
                             Instrument({"0"}, {KrausMap({Matrix::Identity(2, 2)})}), horizon);
  }
  if (name == "qubit-projective") {
    return homogeneous_model(
        qubit_letter_ensemble(),
        Instrument({"0", "1"}, {KrausMap({mat2(1, 0, 0, 0)}), KrausMap({mat2(0, 0, 0, 1)})}),
        horizon);
  }
  if (name == "qubit-weak") {
    const Real theta = std::numbers::pi / 8;
    return homogeneous_model(qubit_letter_ensemble(),
                             Instrument({"0", "1"}, {KrausMap({mat2(std::cos(theta), 0, 0, 1)}),
                                                     KrausMap({mat2(std::sin(theta), 0, 0, 0)})}),
                             horizon);
  }
  if (name == "pure-preserving-random") {
    RandomModelParams p;
    p.seed = seed;
    p.dim = 3;
    p.outcomes = 3;
    p.kraus_per_outcome = 1;
    p.letters = 3;
    p.horizon = horizon;
    p.pure_letters = true;
    return random_model(p);
  }
  if (name == "damped-qubit") {
    const Real gamma = 0.3;
    Ensemble ens;
    ens.prior = {0.5, 0.5};
    ens.states.push_back(DensityOperator::trusted(mat2(0.9, 0, 0, 0.1)));
    ens.states.push_back(DensityOperator::trusted(mat2(0.5, 0.4, 0.4, 0.5)));
    return homogeneous_model(
        std::move(ens),
        Instrument({"0", "1"}, {KrausMap({mat2(1, 0, 0, std::sqrt(1 - gamma))}),
                                KrausMap({mat2(0, std::sqrt(gamma), 0, 0)})}),
        horizon);
  }
  throw Error(ErrorKind::UnknownScenario, std::string(name));
}

}  // namespace contmeas
