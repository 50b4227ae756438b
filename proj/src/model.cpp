#include "okl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "okl/error.hpp"
#include "text.hpp"

namespace okl {

using Json = nlohmann::ordered_json;

Model train(const Dataset& data, const KernelSpec& kernel, const LossSpec& loss,
            const RegularizerSpec& reg, double C, const SolverConfig& config,
            std::shared_ptr<const GramMatrix> gram, const EpochObserver& observer, int threads) {
  if (!gram) {
    if (kernel.kind == KernelSpec::Kind::precomputed) {
      throw ValidationError("a precomputed kernel needs a Gram matrix");
    }
    gram = std::make_shared<GramMatrix>(okl::gram(data, kernel, threads));
  }
  const Problem problem = Problem::make(data, gram, loss, reg, C);
  FitResult fit = solve(problem, config, observer);
  Model m;
  m.alpha = std::move(fit.state.alpha);
  m.theta = std::move(fit.theta);
  m.loss = loss;
  m.reg = reg;
  m.C = C;
  m.kernel = kernel;
  m.training = data;
  m.report = std::move(fit.report);
  return m;
}

namespace {

void check_task(const Model& model, int task) {
  if (task < 0 || task >= model.num_tasks()) {
    throw ValidationError("unknown task " + std::to_string(task + 1) + " (model has " +
                          std::to_string(model.num_tasks()) + " tasks)");
  }
}

// agg(s) = sum over training samples j of task s of alpha_j row_j.
Eigen::VectorXd aggregate(const Model& model, const Eigen::VectorXd& row) {
  if (row.size() != model.size()) {
    throw ValidationError("kernel row has length " + std::to_string(row.size()) + ", expected " +
                          std::to_string(model.size()));
  }
  Eigen::VectorXd agg = Eigen::VectorXd::Zero(model.num_tasks());
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    agg(model.training.tasks[static_cast<std::size_t>(j)]) += model.alpha(j) * row(j);
  }
  return agg;
}

Eigen::VectorXd row_for(const Model& model, const SparseVector& x) {
  if (model.kernel.kind == KernelSpec::Kind::precomputed) {
    throw ValidationError("model uses a precomputed kernel; supply Gram rows instead of features");
  }
  return kernel_row(model.kernel, model.training, x);
}

}  // namespace

double predict_gram_row(const Model& model, const Eigen::VectorXd& row, int task) {
  check_task(model, task);
  return model.theta.row(task).dot(aggregate(model, row));
}

double predict(const Model& model, const SparseVector& x, int task) {
  check_task(model, task);
  return predict_gram_row(model, row_for(model, x), task);
}

Eigen::VectorXd predict_all_tasks(const Model& model, const Eigen::VectorXd& row) {
  return model.theta * aggregate(model, row);
}

int argmax_task(const Eigen::VectorXd& scores) {
  int best = 0;
  for (Eigen::Index t = 1; t < scores.size(); ++t) {
    if (scores(t) > scores(best)) best = static_cast<int>(t);
  }
  return best;
}

int predict_multiclass_gram_row(const Model& model, const Eigen::VectorXd& row) {
  return argmax_task(predict_all_tasks(model, row));
}

int predict_multiclass(const Model& model, const SparseVector& x) {
  return predict_multiclass_gram_row(model, row_for(model, x));
}

// ---- persistence ----

namespace {

constexpr const char* kFormatName = "okl-model";

// Top-level fields in file order; used to name what a truncated file lacks.
const std::vector<std::string> kFields = {"format", "version",  "n",     "T",
                                          "loss",   "regularizer", "C",  "kernel",
                                          "task_ids", "alpha",  "theta", "training",
                                          "report", "checksum"};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

// JSON has no infinities; the report may legitimately hold one.
Json real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double real_from(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ParseError("field '" + field + "' is not a number");
}

const Json& require(const Json& obj, const std::string& key, const std::string& where = "") {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError("missing field '" + (where.empty() ? key : where + "." + key) + "'");
  }
  return obj.at(key);
}

std::string loss_name(LossSpec::Kind k) {
  switch (k) {
    case LossSpec::Kind::hinge: return "hinge";
    case LossSpec::Kind::squared: return "squared";
    case LossSpec::Kind::eps_svr: return "eps_svr";
  }
  return "";
}

std::string reg_name(RegularizerSpec::Kind k) {
  switch (k) {
    case RegularizerSpec::Kind::pnorm: return "pnorm";
    case RegularizerSpec::Kind::entropy: return "entropy";
    case RegularizerSpec::Kind::cosh: return "cosh";
  }
  return "";
}

std::string kernel_name(KernelSpec::Kind k) {
  switch (k) {
    case KernelSpec::Kind::linear: return "linear";
    case KernelSpec::Kind::rbf: return "rbf";
    case KernelSpec::Kind::precomputed: return "precomputed";
  }
  return "";
}

Json payload(const Model& m) {
  Json doc;
  doc["format"] = kFormatName;
  doc["version"] = kModelFormatVersion;
  doc["n"] = m.size();
  doc["T"] = m.num_tasks();
  doc["loss"] = {{"kind", loss_name(m.loss.kind)}, {"epsilon", m.loss.epsilon}};
  doc["regularizer"] = {{"kind", reg_name(m.reg.kind)}, {"k", m.reg.k}, {"lambda", m.reg.lambda}};
  doc["C"] = m.C;
  doc["kernel"] = {{"kind", kernel_name(m.kernel.kind)}, {"gamma", m.kernel.gamma}};
  doc["task_ids"] = m.training.task_ids;
  doc["alpha"] = std::vector<double>(m.alpha.data(), m.alpha.data() + m.alpha.size());
  Json theta = Json::array();
  for (Eigen::Index r = 0; r < m.theta.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index s = 0; s < m.theta.cols(); ++s) row.push_back(m.theta(r, s));
    theta.push_back(std::move(row));
  }
  doc["theta"] = std::move(theta);
  Json features = Json::array();
  for (const auto& x : m.training.features) {
    Json fx = Json::array();
    for (const auto& f : x) fx.push_back(Json::array({f.index, f.value}));
    features.push_back(std::move(fx));
  }
  doc["training"] = {{"tasks", m.training.tasks},
                     {"labels", m.training.labels},
                     {"features", std::move(features)}};
  Json history = Json::array();
  for (const auto& g : m.report.history) {
    history.push_back(Json::array({g.epoch, real(g.primal), real(g.dual), real(g.relative_gap)}));
  }
  doc["report"] = {{"epochs", m.report.epochs},
                   {"primal", real(m.report.primal)},
                   {"dual", real(m.report.dual)},
                   {"relative_gap", real(m.report.relative_gap)},
                   {"converged", m.report.converged},
                   {"stop_reason", m.report.stop_reason},
                   {"history", std::move(history)}};
  return doc;
}

template <typename T>
T get_as(const Json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("field '" + field + "' has the wrong type");
  }
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
  Json doc = payload(model);
  doc["checksum"] = hex64(fnv1a(doc.dump()));
  out << doc.dump(1) << '\n';
  if (!out) throw std::runtime_error("failed to write model");
}

void save_model_file(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_model(model, out);
}

Model load_model(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    for (const auto& key : kFields) {
      if (text.find('"' + key + '"') == std::string::npos) {
        throw ParseError("truncated model file: missing field '" + key + "'");
      }
    }
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
  for (const auto& key : kFields) require(doc, key);

  if (get_as<std::string>(doc.at("format"), "format") != kFormatName) {
    throw ValidationError("not a model file");
  }
  const int version = get_as<int>(doc.at("version"), "version");
  if (version != kModelFormatVersion) {
    throw ValidationError("model format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto stored = get_as<std::string>(doc.at("checksum"), "checksum");
  Json body = doc;
  body.erase("checksum");
  if (hex64(fnv1a(body.dump())) != stored) throw ParseError("model checksum mismatch");

  Model m;
  const auto n = get_as<long long>(doc.at("n"), "n");
  const auto T = get_as<int>(doc.at("T"), "T");

  const Json& loss = doc.at("loss");
  const auto loss_kind = get_as<std::string>(require(loss, "kind", "loss"), "loss.kind");
  const double epsilon = get_as<double>(require(loss, "epsilon", "loss"), "loss.epsilon");
  if (loss_kind == "hinge") m.loss = LossSpec::hinge();
  else if (loss_kind == "squared") m.loss = LossSpec::squared();
  else if (loss_kind == "eps_svr") m.loss = LossSpec::eps_svr(epsilon);
  else throw ParseError("unknown loss '" + loss_kind + "'");

  const Json& reg = doc.at("regularizer");
  const auto reg_kind = get_as<std::string>(require(reg, "kind", "regularizer"), "regularizer.kind");
  const int k = get_as<int>(require(reg, "k", "regularizer"), "regularizer.k");
  const double lambda = get_as<double>(require(reg, "lambda", "regularizer"), "regularizer.lambda");
  if (reg_kind == "pnorm") m.reg = RegularizerSpec::pnorm(k, lambda);
  else if (reg_kind == "entropy") m.reg = RegularizerSpec::entropy(lambda);
  else if (reg_kind == "cosh") m.reg = RegularizerSpec::cosh(lambda);
  else throw ParseError("unknown regularizer '" + reg_kind + "'");
  m.reg.k = k;
  m.C = get_as<double>(doc.at("C"), "C");

  const Json& kernel = doc.at("kernel");
  const auto kernel_kind = get_as<std::string>(require(kernel, "kind", "kernel"), "kernel.kind");
  const double gamma = get_as<double>(require(kernel, "gamma", "kernel"), "kernel.gamma");
  if (kernel_kind == "linear") m.kernel = KernelSpec::linear();
  else if (kernel_kind == "rbf") m.kernel = KernelSpec::rbf(gamma);
  else if (kernel_kind == "precomputed") m.kernel = KernelSpec::precomputed();
  else throw ParseError("unknown kernel '" + kernel_kind + "'");

  m.training.num_tasks = T;
  m.training.task_ids = get_as<std::vector<long long>>(doc.at("task_ids"), "task_ids");
  const auto alpha = get_as<std::vector<double>>(doc.at("alpha"), "alpha");
  m.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
  const auto theta = get_as<std::vector<std::vector<double>>>(doc.at("theta"), "theta");
  m.theta.resize(T, T);
  if (static_cast<int>(theta.size()) != T) throw ValidationError("theta has the wrong number of rows");
  for (int r = 0; r < T; ++r) {
    if (static_cast<int>(theta[r].size()) != T) throw ValidationError("theta is not square");
    for (int s = 0; s < T; ++s) m.theta(r, s) = theta[r][s];
  }

  const Json& tr = doc.at("training");
  m.training.tasks = get_as<std::vector<int>>(require(tr, "tasks", "training"), "training.tasks");
  m.training.labels = get_as<std::vector<double>>(require(tr, "labels", "training"), "training.labels");
  const Json& feats = require(tr, "features", "training");
  for (const auto& fx : feats) {
    SparseVector x;
    for (const auto& f : fx) {
      x.push_back({get_as<int>(f.at(0), "training.features"), get_as<double>(f.at(1), "training.features")});
    }
    m.training.features.push_back(std::move(x));
  }

  const Json& rep = doc.at("report");
  m.report.epochs = get_as<long>(require(rep, "epochs", "report"), "report.epochs");
  m.report.primal = real_from(require(rep, "primal", "report"), "report.primal");
  m.report.dual = real_from(require(rep, "dual", "report"), "report.dual");
  m.report.relative_gap = real_from(require(rep, "relative_gap", "report"), "report.relative_gap");
  m.report.converged = get_as<bool>(require(rep, "converged", "report"), "report.converged");
  m.report.stop_reason = get_as<std::string>(require(rep, "stop_reason", "report"), "report.stop_reason");
  for (const auto& g : require(rep, "history", "report")) {
    m.report.history.push_back({get_as<long>(g.at(0), "report.history"),
                                real_from(g.at(1), "report.history"),
                                real_from(g.at(2), "report.history"),
                                real_from(g.at(3), "report.history")});
  }

  const auto sz = static_cast<std::size_t>(n);
  if (n < 0 || m.alpha.size() != n || m.training.tasks.size() != sz ||
      m.training.labels.size() != sz || m.training.features.size() != sz ||
      static_cast<int>(m.training.task_ids.size()) != T) {
    throw ValidationError("model fields have inconsistent sizes");
  }
  for (int t : m.training.tasks) {
    if (t < 0 || t >= T) throw ValidationError("model has a training task out of range");
  }
  return m;
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_model(in);
}

Eigen::MatrixXd rederive_theta(const Model& model, const GramMatrix* gram) {
  std::shared_ptr<const GramMatrix> k;
  if (gram != nullptr) {
    k = std::make_shared<GramMatrix>(*gram);
  } else if (model.kernel.kind == KernelSpec::Kind::precomputed) {
    throw ValidationError("re-deriving theta for a precomputed kernel needs the training Gram matrix");
  } else {
    k = std::make_shared<GramMatrix>(okl::gram(model.training, model.kernel));
  }
  const Problem p = Problem::make(model.training, k, model.loss, model.reg, model.C);
  return theta_from_rho(model.reg, recompute_caches(p, model.alpha).c);
}

// ---- theta export ----

Eigen::MatrixXd transform_theta(const Eigen::MatrixXd& theta, ThetaTransform transform) {
  switch (transform) {
    case ThetaTransform::raw: return theta;
    case ThetaTransform::abs: return theta.cwiseAbs();
    case ThetaTransform::log1p_abs: return theta.cwiseAbs().unaryExpr([](double v) { return std::log1p(v); });
  }
  return theta;
}

void export_theta(const Eigen::MatrixXd& theta, ThetaFormat format, ThetaTransform transform,
                  bool drop_diagonal, std::ostream& out, int digits) {
  const Eigen::MatrixXd m = transform_theta(theta, transform);
  const Eigen::Index T = m.rows();
  if (format == ThetaFormat::csv) {
    for (Eigen::Index r = 0; r < T; ++r) {
      for (Eigen::Index s = 0; s < T; ++s) {
        if (s > 0) out << ',';
        out << (drop_diagonal && r == s ? "0" : detail::format_double(m(r, s), digits));
      }
      out << '\n';
    }
  } else {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index r = 0; r < T; ++r) {
      for (Eigen::Index s = 0; s < T; ++s) {
        if (drop_diagonal && r == s) continue;
        lo = std::min(lo, m(r, s));
        hi = std::max(hi, m(r, s));
      }
    }
    out << "P5\n" << T << ' ' << T << "\n255\n";
    for (Eigen::Index r = 0; r < T; ++r) {
      for (Eigen::Index s = 0; s < T; ++s) {
        unsigned char px = 0;
        if (!(drop_diagonal && r == s) && hi > lo) {
          px = static_cast<unsigned char>(std::lround(255.0 * (m(r, s) - lo) / (hi - lo)));
        }
        out.put(static_cast<char>(px));
      }
    }
  }
  if (!out) throw std::runtime_error("failed to write theta export");
}

}  // namespace okl
