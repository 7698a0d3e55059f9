#pragma once

#include "condsub/data.hpp"
#include "condsub/tree.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace condsub {

enum class Loss { squared_error, misclassification };

std::string_view to_string(Loss loss);
/// Accepts "squared_error" / "mse" and "misclassification" / "mmce".
Loss parse_loss(std::string_view text);

inline double pointwise_loss(Loss loss, double y, double yhat) {
  if (loss == Loss::squared_error) return (y - yhat) * (y - yhat);
  return y == yhat ? 0.0 : 1.0;
}

/// Mean pointwise loss.
double mean_loss(Loss loss, const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& yhat);

/// Batch prediction function f̂. Implementations look their feature columns
/// up by name, so inputs may carry extra columns in any order. Fitted
/// models are immutable; predict() may be called concurrently unless the
/// implementation says otherwise.
class PredictiveModel {
 public:
  virtual ~PredictiveModel() = default;

  virtual Eigen::VectorXd predict(const Dataset& data) const = 0;
  virtual std::string name() const = 0;

  const std::vector<ColumnInfo>& features() const { return features_; }

 protected:
  explicit PredictiveModel(std::vector<ColumnInfo> features) : features_(std::move(features)) {}

  /// The model's feature columns of `data`, in training order. Throws
  /// DataError on missing columns or type changes.
  Eigen::MatrixXd feature_matrix(const Dataset& data) const;

  std::vector<ColumnInfo> features_;
};

using ModelPtr = std::shared_ptr<const PredictiveModel>;

/// Wraps a closure over the numeric feature matrix (columns in the order
/// given at construction).
class FunctionModel final : public PredictiveModel {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

  FunctionModel(std::vector<std::string> feature_names, Fn fn, std::string name = "function");

  Eigen::VectorXd predict(const Dataset& data) const override;
  std::string name() const override { return name_; }

 private:
  Fn fn_;
  std::string name_;
};

class LinearModel final : public PredictiveModel {
 public:
  LinearModel(std::vector<ColumnInfo> features, double intercept, Eigen::VectorXd coefficients);

  Eigen::VectorXd predict(const Dataset& data) const override;
  std::string name() const override { return "ols"; }

  double intercept() const { return intercept_; }
  const Eigen::VectorXd& coefficients() const { return coefficients_; }

 private:
  double intercept_;
  Eigen::VectorXd coefficients_;
};

/// Ordinary least squares with intercept via column-pivoting QR. Throws
/// ModelError naming the collinear columns when the design is rank deficient.
std::shared_ptr<const LinearModel> fit_ols(const Dataset& train);

class KnnModel final : public PredictiveModel {
 public:
  KnnModel(std::vector<ColumnInfo> features, Standardizer scaler, Eigen::MatrixXd points, Eigen::VectorXd targets,
           Index k);

  Eigen::VectorXd predict(const Dataset& data) const override;
  std::string name() const override { return "knn"; }
  Index k() const { return k_; }

 private:
  Standardizer scaler_;
  Eigen::MatrixXd points_;  // standardized training rows
  Eigen::VectorXd targets_;
  Index k_;
};

/// k-nearest-neighbour regression on features standardized with training
/// statistics. Distance ties go to the lowest training row index.
std::shared_ptr<const KnnModel> fit_knn(const Dataset& train, Index k);

struct ForestOptions {
  Index n_trees = 100;
  /// Split candidates per node; 0 means ceil(p / 3).
  Index mtry = 0;
  Index min_node_size = 5;
  int max_depth = std::numeric_limits<int>::max();
};

class ForestModel final : public PredictiveModel {
 public:
  /// n_classes == 0 for regression; otherwise predictions are majority
  /// votes over class codes (ties to the lowest code).
  ForestModel(std::vector<ColumnInfo> features, std::vector<tree::Tree> trees, Index n_classes,
              std::vector<std::vector<bool>> in_bag = {});

  Eigen::VectorXd predict(const Dataset& data) const override;
  /// Out-of-bag predictions for the training rows: each row is averaged
  /// over the trees whose bootstrap sample missed it (all trees if none did).
  /// Regression forests only; `train` must be the training data.
  Eigen::VectorXd oob_predict(const Dataset& train) const;
  std::string name() const override { return n_classes_ ? "forest-classifier" : "forest"; }

  const std::vector<tree::Tree>& trees() const { return trees_; }
  Index n_classes() const { return n_classes_; }

 private:
  std::vector<tree::Tree> trees_;
  Index n_classes_;
  std::vector<std::vector<bool>> in_bag_;
};

/// Bagged CART regression trees, each grown on a bootstrap sample of size n
/// with its own derived random stream. Trees are grown in parallel.
std::shared_ptr<const ForestModel> fit_forest(const Dataset& train, std::uint64_t seed, const ForestOptions& options = {});

/// Classification forest on integer class codes 0..n_classes-1 (gini).
std::shared_ptr<const ForestModel> fit_forest_classifier(const Dataset& x, const Eigen::VectorXd& codes, Index n_classes,
                                                         std::uint64_t seed, const ForestOptions& options = {});

/// Prediction by a subprocess speaking the line protocol
///
///   child -> "CONDSUB-PREDICT 1"            (handshake, once)
///   parent -> "PREDICT <n>" + n CSV rows    (feature columns in training order,
///                                            categorical cells as quoted level names)
///   child -> n lines, one decimal each
///
/// The command runs under /bin/sh -c. Requests on one instance are
/// serialized by a mutex.
class ExternalModel final : public PredictiveModel {
 public:
  ExternalModel(std::string command, std::vector<ColumnInfo> features,
                std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~ExternalModel() override;

  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  Eigen::VectorXd predict(const Dataset& data) const override;
  std::string name() const override { return "external"; }

 private:
  std::string read_line() const;
  void write_all(const std::string& text) const;
  void shutdown() noexcept;

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::string buffer_;
  mutable std::mutex mutex_;
};

std::shared_ptr<const ExternalModel> external_model(const std::string& command, std::vector<ColumnInfo> features,
                                                    std::chrono::milliseconds timeout = std::chrono::seconds(60));

}  // namespace condsub
