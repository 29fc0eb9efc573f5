#include "dmmmen/target.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "dmmmen/io.hpp"
#include "dmmmen/mathutil.hpp"
#include "dmmmen/rng.hpp"

namespace dmmmen {

Vector predict_batch(const BlackBoxModel& model, const Matrix& X) {
  return model.predict(X);
}

namespace {

void check_arity(const BlackBoxModel& model, const Matrix& X) {
  if (model.arity() >= 0 && X.cols() != model.arity()) {
    std::ostringstream msg;
    msg << "model expects " << model.arity() << " features, got " << X.cols();
    throw ArityError(msg.str());
  }
}

class LogisticModel final : public BlackBoxModel {
 public:
  LogisticModel(Vector w, double b) : w_(std::move(w)), b_(b) {}

  Vector predict(const Matrix& X) const override {
    check_arity(*this, X);
    Vector out = X * w_;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i] + b_);
    return out;
  }
  Eigen::Index arity() const override { return w_.size(); }
  std::string kind() const override { return "builtin-logistic"; }

  const Vector& weights() const { return w_; }
  double bias() const { return b_; }

 private:
  Vector w_;
  double b_;
};

class MlpModel final : public BlackBoxModel {
 public:
  MlpModel(Matrix W1, Vector b1, Vector w2, double b2)
      : W1_(std::move(W1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(b2) {}

  Vector predict(const Matrix& X) const override {
    check_arity(*this, X);
    Matrix H = (X * W1_).rowwise() + b1_.transpose();
    H = H.array().tanh();
    Vector out = H * w2_;
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i] + b2_);
    return out;
  }
  Eigen::Index arity() const override { return W1_.rows(); }
  std::string kind() const override { return "builtin-mlp"; }

  const Matrix& W1() const { return W1_; }
  const Vector& b1() const { return b1_; }
  const Vector& w2() const { return w2_; }
  double b2() const { return b2_; }

 private:
  Matrix W1_;  // p x hidden
  Vector b1_;  // hidden
  Vector w2_;  // hidden
  double b2_;
};

class PredictionFileModel final : public BlackBoxModel {
 public:
  explicit PredictionFileModel(Vector probs) : probs_(std::move(probs)) {
    for (Eigen::Index i = 0; i < probs_.size(); ++i)
      if (!(probs_[i] >= 0.0) || !(probs_[i] <= 1.0))
        throw ValueError("stored probability outside [0,1] at row " +
                         std::to_string(i));
  }

  Vector predict(const Matrix& X) const override {
    if (X.rows() != probs_.size())
      throw ArityError("prediction file holds " + std::to_string(probs_.size()) +
                       " rows, batch has " + std::to_string(X.rows()));
    return probs_;
  }
  Eigen::Index arity() const override { return -1; }
  std::string kind() const override { return "prediction-file"; }

 private:
  Vector probs_;
};

/// Bidirectional pipe to a child process speaking the line-JSON protocol.
class SubprocessModel final : public BlackBoxModel {
 public:
  explicit SubprocessModel(std::string command) : command_(std::move(command)) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw ProtocolError("cannot create pipes for subprocess model");
    pid_ = fork();
    if (pid_ < 0) throw ProtocolError("fork failed for subprocess model");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_ = fdopen(from_child[0], "r");
    out_ = fdopen(to_child[1], "w");
    if (!in_ || !out_) throw ProtocolError("cannot attach to subprocess pipes");
  }

  ~SubprocessModel() override {
    if (out_) fclose(out_);
    if (in_) fclose(in_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  Vector predict(const Matrix& X) const override {
    std::lock_guard<std::mutex> lock(mutex_);
    nlohmann::json req;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < X.cols(); ++j) row.push_back(X(i, j));
      rows.push_back(std::move(row));
    }
    req["x"] = std::move(rows);
    const std::string line = req.dump();
    if (std::fprintf(out_, "%s\n", line.c_str()) < 0 || std::fflush(out_) != 0)
      throw ProtocolError("cannot write request to subprocess model");

    std::string reply;
    for (;;) {
      char buf[4096];
      if (!std::fgets(buf, sizeof(buf), in_))
        throw ProtocolError("subprocess model closed its output");
      reply += buf;
      if (!reply.empty() && reply.back() == '\n') break;
    }
    nlohmann::json resp;
    try {
      resp = nlohmann::json::parse(reply);
    } catch (const nlohmann::json::parse_error& e) {
      throw ProtocolError(std::string("malformed subprocess reply: ") + e.what());
    }
    if (!resp.contains("y") || !resp["y"].is_array())
      throw ProtocolError("subprocess reply lacks a 'y' array");
    const auto y = resp["y"].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(y.size()) != X.rows())
      throw ProtocolError("subprocess reply length does not match request");
    Vector out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      if (!(y[static_cast<std::size_t>(i)] >= 0.0) ||
          !(y[static_cast<std::size_t>(i)] <= 1.0))
        throw ValueError("subprocess probability outside [0,1]");
      out[i] = y[static_cast<std::size_t>(i)];
    }
    return out;
  }
  Eigen::Index arity() const override { return -1; }
  std::string kind() const override { return "subprocess"; }
  std::string metadata() const override { return command_; }

 private:
  std::string command_;
  pid_t pid_ = -1;
  FILE* in_ = nullptr;
  FILE* out_ = nullptr;
  mutable std::mutex mutex_;
};

}  // namespace

std::unique_ptr<BlackBoxModel> make_logistic(Vector weights, double bias) {
  return std::make_unique<LogisticModel>(std::move(weights), bias);
}

std::unique_ptr<BlackBoxModel> train_builtin_logistic(const Matrix& X,
                                                      const Eigen::VectorXi& labels,
                                                      double l2, int iters) {
  if (labels.size() != X.rows()) throw DimensionError("label count mismatch");
  if (l2 < 0.0) throw ValueError("l2 must be >= 0");
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    if (labels[i] != 0 && labels[i] != 1) throw ValueError("labels must be 0/1");

  const auto n = static_cast<double>(X.rows());
  // Curvature bound of the mean logistic loss: ||x||^2/4n summed, plus l2.
  const double lipschitz = X.array().square().sum() / (4.0 * n) + l2 + 1e-12;
  const double lr = 1.0 / lipschitz;

  Vector w = Vector::Zero(X.cols());
  double b = 0.0;
  Vector ylab(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) ylab[i] = labels[i];

  for (int it = 0; it < iters; ++it) {
    Vector pred = X * w;
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred[i] = sigmoid(pred[i] + b);
    const Vector resid = pred - ylab;
    const Vector grad_w = X.transpose() * resid / n + l2 * w;
    const double grad_b = resid.sum() / n;
    w -= lr * grad_w;
    b -= lr * grad_b;
    if (!w.allFinite() || !std::isfinite(b))
      throw ConvergenceError("logistic training diverged at iteration " +
                             std::to_string(it));
  }
  return make_logistic(std::move(w), b);
}

std::unique_ptr<BlackBoxModel> train_builtin_mlp(const Matrix& X,
                                                 const Eigen::VectorXi& labels,
                                                 int hidden, double l2, int iters,
                                                 std::uint64_t seed) {
  if (labels.size() != X.rows()) throw DimensionError("label count mismatch");
  if (hidden < 1) throw ValueError("hidden must be >= 1");
  const auto n = static_cast<double>(X.rows());
  Rng rng(seed);
  Matrix W1(X.cols(), hidden);
  for (Eigen::Index i = 0; i < W1.rows(); ++i)
    for (Eigen::Index j = 0; j < W1.cols(); ++j)
      W1(i, j) = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(X.cols())));
  Vector b1 = Vector::Zero(hidden);
  Vector w2(hidden);
  for (Eigen::Index j = 0; j < hidden; ++j) w2[j] = rng.normal(0.0, 0.5);
  double b2 = 0.0;
  Vector ylab(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) ylab[i] = labels[i];
  const double lr = 0.5;

  for (int it = 0; it < iters; ++it) {
    Matrix H = (X * W1).rowwise() + b1.transpose();
    H = H.array().tanh();
    Vector logits = H * w2;
    Vector pred(logits.size());
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred[i] = sigmoid(logits[i] + b2);
    const Vector resid = (pred - ylab) / n;
    const Vector grad_w2 = H.transpose() * resid + l2 * w2;
    const double grad_b2 = resid.sum();
    const Matrix dH =
        (resid * w2.transpose()).cwiseProduct((1.0 - H.array().square()).matrix());
    const Matrix grad_W1 = X.transpose() * dH + l2 * W1;
    const Vector grad_b1 = dH.colwise().sum();
    W1 -= lr * grad_W1;
    b1 -= lr * grad_b1;
    w2 -= lr * grad_w2;
    b2 -= lr * grad_b2;
    if (!W1.allFinite() || !w2.allFinite() || !std::isfinite(b2))
      throw ConvergenceError("mlp training diverged at iteration " +
                             std::to_string(it));
  }
  return std::make_unique<MlpModel>(std::move(W1), std::move(b1), std::move(w2), b2);
}

std::unique_ptr<BlackBoxModel> make_prediction_model(Vector probs) {
  return std::make_unique<PredictionFileModel>(std::move(probs));
}

std::unique_ptr<BlackBoxModel> load_prediction_file(const std::string& path,
                                                    MatrixFormat format) {
  const Matrix m = load_matrix(path, format);
  if (m.cols() != 1) throw DimensionError("prediction file must hold one column");
  return make_prediction_model(m.col(0));
}

std::unique_ptr<BlackBoxModel> make_subprocess_model(const std::string& command) {
  return std::make_unique<SubprocessModel>(command);
}

std::string model_to_json(const BlackBoxModel& model) {
  nlohmann::json j;
  j["kind"] = model.kind();
  if (const auto* lm = dynamic_cast<const LogisticModel*>(&model)) {
    j["weights"] = std::vector<double>(lm->weights().data(),
                                       lm->weights().data() + lm->weights().size());
    j["bias"] = lm->bias();
  } else if (const auto* mm = dynamic_cast<const MlpModel*>(&model)) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < mm->W1().rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < mm->W1().cols(); ++c) row.push_back(mm->W1()(i, c));
      rows.push_back(std::move(row));
    }
    j["W1"] = std::move(rows);
    j["b1"] = std::vector<double>(mm->b1().data(), mm->b1().data() + mm->b1().size());
    j["w2"] = std::vector<double>(mm->w2().data(), mm->w2().data() + mm->w2().size());
    j["b2"] = mm->b2();
  } else {
    throw ValueError("only builtin models serialize to JSON");
  }
  return j.dump(2);
}

std::unique_ptr<BlackBoxModel> load_model_json(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "builtin-logistic") {
      const auto w = j.at("weights").get<std::vector<double>>();
      return make_logistic(
          Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())),
          j.at("bias").get<double>());
    }
    if (kind == "builtin-mlp") {
      const auto rows = j.at("W1").get<std::vector<std::vector<double>>>();
      if (rows.empty()) throw SchemaError("empty W1");
      Matrix W1(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.front().size()));
      for (Eigen::Index i = 0; i < W1.rows(); ++i)
        for (Eigen::Index c = 0; c < W1.cols(); ++c)
          W1(i, c) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      const auto b1 = j.at("b1").get<std::vector<double>>();
      const auto w2 = j.at("w2").get<std::vector<double>>();
      return std::make_unique<MlpModel>(
          std::move(W1),
          Eigen::Map<const Vector>(b1.data(), static_cast<Eigen::Index>(b1.size())),
          Eigen::Map<const Vector>(w2.data(), static_cast<Eigen::Index>(w2.size())),
          j.at("b2").get<double>());
    }
    throw SchemaError("unknown model kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model file schema: ") + e.what());
  }
}

void SyntheticSpec::validate() const {
  if (n < 1 || p < 1) throw DimensionError("synthetic spec requires n,p >= 1");
  if (true_components.empty()) throw ValueError("synthetic spec needs components");
  double wsum = 0.0;
  for (const auto& comp : true_components) {
    if (comp.weight < 0.0) throw ValueError("component weights must be >= 0");
    if (comp.noise_sd < 0.0) throw ValueError("noise sd must be >= 0");
    if (comp.coefficients.size() != p)
      throw DimensionError("component coefficient length must equal p");
    wsum += comp.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    throw ValueError("component weights must form a simplex");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Matrix X(spec.n, spec.p);
  Vector y(spec.n);
  Eigen::VectorXi z(spec.n);
  std::vector<double> logw(spec.true_components.size());
  for (std::size_t k = 0; k < logw.size(); ++k)
    logw[k] = spec.true_components[k].weight > 0.0
                  ? std::log(spec.true_components[k].weight)
                  : -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const int k = rng.categorical_from_logs(logw);
    z[i] = k;
    for (Eigen::Index j = 0; j < spec.p; ++j) X(i, j) = rng.normal();
    const auto& comp = spec.true_components[static_cast<std::size_t>(k)];
    y[i] = X.row(i).dot(comp.coefficients) + comp.noise_sd * rng.normal();
  }
  return SyntheticData{make_dataset(std::move(X), std::move(y), "synthetic"),
                       std::move(z)};
}

}  // namespace dmmmen
