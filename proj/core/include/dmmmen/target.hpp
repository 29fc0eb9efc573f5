#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dmmmen/data.hpp"

namespace dmmmen {

/// Abstract target model g: R^p -> [0,1], queried in batches.
///
/// Implementations must be deterministic for fixed inputs; the builtin and
/// file adapters are safe for concurrent batch calls, the subprocess adapter
/// serializes requests over its single pipe.
class BlackBoxModel {
 public:
  virtual ~BlackBoxModel() = default;

  /// One probability per input row.
  virtual Vector predict(const Matrix& X) const = 0;

  /// Expected feature count, or -1 when the adapter cannot know it.
  virtual Eigen::Index arity() const = 0;

  virtual std::string kind() const = 0;
  virtual std::string metadata() const { return {}; }
};

Vector predict_batch(const BlackBoxModel& model, const Matrix& X);

/// Logistic model trained by plain gradient descent on {0,1} labels with an
/// optional L2 penalty. The step size is derived from the curvature bound of
/// the regularized logistic loss, so training is parameter-free and
/// deterministic.
std::unique_ptr<BlackBoxModel> train_builtin_logistic(const Matrix& X,
                                                      const Eigen::VectorXi& labels,
                                                      double l2, int iters);

/// Direct construction from known weights (fixtures, model files).
std::unique_ptr<BlackBoxModel> make_logistic(Vector weights, double bias);

/// One-hidden-layer tanh network for nonlinear demo targets.
std::unique_ptr<BlackBoxModel> train_builtin_mlp(const Matrix& X,
                                                 const Eigen::VectorXi& labels,
                                                 int hidden, double l2, int iters,
                                                 std::uint64_t seed);

/// Adapter serving stored per-row probabilities; predict requires exact row
/// alignment with the stored vector.
std::unique_ptr<BlackBoxModel> load_prediction_file(const std::string& path,
                                                    MatrixFormat format);
std::unique_ptr<BlackBoxModel> make_prediction_model(Vector probs);

/// Adapter speaking line-delimited JSON over a child process's stdin/stdout:
/// request {"x": [[...], ...]}, reply {"y": [...]}, one line each. The child
/// must be deterministic for fixed inputs.
std::unique_ptr<BlackBoxModel> make_subprocess_model(const std::string& command);

/// Builtin-logistic / builtin-mlp weights serialized as JSON.
std::unique_ptr<BlackBoxModel> load_model_json(const std::string& path);
std::string model_to_json(const BlackBoxModel& model);

/// Ground-truth mixture-of-regressions generator for recovery fixtures.
struct SyntheticSpec {
  struct Component {
    double weight = 1.0;
    Vector coefficients;
    double noise_sd = 0.1;
  };
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  std::vector<Component> true_components;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  DatasetMatrix data;
  Eigen::VectorXi true_z;
};

/// Rows draw a component by weight, x ~ N(0, I), y = x.beta_z + N(0, sd^2).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace dmmmen
