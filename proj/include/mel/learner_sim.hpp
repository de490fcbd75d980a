#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mel::learner {

enum class TaskKind { kQuadratic, kLogistic };

// Row-major design matrix plus targets. Losses and gradients are always
// evaluated over a prefix of the rows, matching the dispatched batch size.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> x;  // n * dim
  std::vector<double> y;  // n

  std::size_t size() const { return y.size(); }
  const double* row(std::size_t i) const { return x.data() + i * dim; }
};

struct TaskSpec {
  TaskKind kind = TaskKind::kLogistic;
  std::size_t dim = 8;
  std::size_t learners = 20;
  std::int64_t total_samples = 54000;
  double heterogeneity = 0.3;  // per-learner mean shift magnitude
  double noise = 0.1;          // target noise (quadratic)
  std::uint64_t seed = 1;
  std::size_t eval_samples = 4000;
  bool reshuffle_each_cycle = false;
};

// Mean-squared-error / logistic loss over the first n rows.
double dataset_loss(TaskKind kind, const Dataset& data, std::size_t n,
                    const std::vector<double>& w);
// Analytic gradient of the same loss. Throws on non-finite output.
std::vector<double> dataset_gradient(TaskKind kind, const Dataset& data,
                                     std::size_t n,
                                     const std::vector<double>& w);

// One full-batch gradient-descent step w - eta*grad.
std::vector<double> local_update(TaskKind kind, const Dataset& data,
                                 std::size_t n, const std::vector<double>& w,
                                 double eta);

// Weighted global loss sum_k d_k F_k / sum_k d_k over dataset prefixes.
double global_loss(TaskKind kind, const std::vector<Dataset>& datasets,
                   const std::vector<std::int64_t>& d_k,
                   const std::vector<double>& w);
std::vector<double> global_gradient(TaskKind kind,
                                    const std::vector<Dataset>& datasets,
                                    const std::vector<std::int64_t>& d_k,
                                    const std::vector<double>& w);

// Auxiliary centralized trajectory, re-synchronized to the aggregate at each
// global cycle; exists only to validate the divergence bound.
struct AuxiliaryTrack {
  std::vector<double> v;
  std::int64_t sync_step = 0;

  void resync(const std::vector<double>& w, std::int64_t step) {
    v = w;
    sync_step = step;
  }
};

void auxiliary_step(TaskKind kind, const std::vector<Dataset>& datasets,
                    const std::vector<std::int64_t>& d_k, AuxiliaryTrack& track,
                    double eta);

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  double step = 0.0;
  bool pass = false;
  std::string to_string() const;
};

// Analytic gradient vs central finite differences over the full prefix.
GradientCheckReport gradient_check(TaskKind kind, const Dataset& data,
                                   std::size_t n, const std::vector<double>& w,
                                   double step = 1e-6, double tol = 1e-5);

// Largest eigenvalue of X'X/n (power iteration): the exact smoothness
// constant of the quadratic loss on a dataset prefix.
double quadratic_smoothness(const Dataset& data, std::size_t n);

// What the orchestrator needs from a learner fleet. local_train runs tau
// full-batch steps over the first d_k samples and also reports the local
// gradients at the dispatched and at the returned model, which the
// orchestrator folds into its beta estimate without extra passes.
class LearnerBackend {
 public:
  virtual ~LearnerBackend() = default;

  struct LocalResult {
    std::vector<double> w;
    std::vector<double> grad_start;
    std::vector<double> grad_end;
  };

  virtual std::size_t dim() const = 0;
  virtual std::size_t learner_count() const = 0;
  virtual LocalResult local_train(std::size_t k, const std::vector<double>& w,
                                  std::int64_t d_k, std::int64_t tau,
                                  double eta) = 0;
  virtual std::vector<double> local_gradient(std::size_t k,
                                             const std::vector<double>& w,
                                             std::int64_t d_k) = 0;
  virtual double local_loss(std::size_t k, const std::vector<double>& w,
                            std::int64_t d_k) = 0;
  virtual double eval_loss(const std::vector<double>& w) = 0;
  virtual double eval_accuracy(const std::vector<double>& w) = 0;
};

// Synthetic convex learners. Each learner owns a sample stream from its own
// mean-shifted distribution; batches are stream prefixes, so the i-th sample
// of learner k depends only on (seed, k, i) and runs replay bit-identically.
// With reshuffle_each_cycle the batch window slides along the stream instead
// of re-reading the prefix.
class SyntheticTask : public LearnerBackend {
 public:
  explicit SyntheticTask(const TaskSpec& spec);
  // Explicit datasets, bypassing generation (tests, custom corpora).
  SyntheticTask(TaskKind kind, std::vector<Dataset> datasets);

  std::size_t dim() const override { return dim_; }
  std::size_t learner_count() const override { return pools_.size(); }
  LocalResult local_train(std::size_t k, const std::vector<double>& w,
                          std::int64_t d_k, std::int64_t tau,
                          double eta) override;
  std::vector<double> local_gradient(std::size_t k,
                                     const std::vector<double>& w,
                                     std::int64_t d_k) override;
  double local_loss(std::size_t k, const std::vector<double>& w,
                    std::int64_t d_k) override;
  double eval_loss(const std::vector<double>& w) override;
  double eval_accuracy(const std::vector<double>& w) override;

  TaskKind kind() const { return kind_; }
  // Grows learner k's pool so the current batch window holds n samples and
  // returns the pool; the window is a prefix unless reshuffling is on.
  const Dataset& pool(std::size_t k, std::int64_t n);
  std::size_t window_start(std::size_t k) const;
  const std::vector<double>& learner_mean(std::size_t k) const;

 private:
  struct Stream {
    std::mt19937_64 rng;
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform{0.0, 1.0};
    std::vector<double> mean;
    Dataset data;
    std::size_t window_start = 0;
  };

  void generate(Stream& s, std::size_t upto);
  Dataset window(std::size_t k, std::int64_t d_k);

  TaskKind kind_ = TaskKind::kLogistic;
  std::size_t dim_ = 0;
  TaskSpec spec_;
  bool generated_ = true;
  std::vector<Stream> pools_;
  std::vector<double> w_true_;
  Dataset eval_;
};

}  // namespace mel::learner
