#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mtlsp/model.hpp"
#include "mtlsp/sampler.hpp"

namespace mtlsp {

struct TrainConfig {
  int batch_size = 10;
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int patience = 5;        // consecutive non-improving dev evaluations
  int max_epochs = 50;
  std::vector<uint64_t> seeds = {1, 2, 3};
  int eval_every = 0;      // steps between dev evals; 0 = each epoch end
  Strategy strategy = Strategy::Proportional;
  double alpha_min = 0.1;
  int anneal_epochs = 20;
  // Raw Adam at lr 0.05 diverges on transformers; the rate is applied
  // through lr * min(step^-1/2, step * warmup^-3/2). 0 disables.
  int warmup_steps = 4000;
  double clip_norm = 1.0;  // global gradient norm; 0 disables

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

double lr_at_step(const TrainConfig& cfg, int64_t step);

struct AdamState {
  int64_t step = 0;
  std::vector<std::vector<double>> m, v;  // one slot per parameter
};

// Bias-corrected Adam over matched param/grad lists. Params are updated
// in place; call between tape runs only.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

// Scales all gradients by clip/norm when the global norm exceeds clip.
// Returns the pre-clip norm.
double clip_gradients(std::vector<Tensor>& grads, double clip);

// Stop once the observed value has not improved for `patience`
// consecutive observations.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);
  bool observe(double value);  // true = stop now
  double best() const { return best_; }
  int best_index() const { return best_index_; }  // 0-based observation
  int observations() const { return count_; }

 private:
  int patience_;
  double best_;
  int best_index_ = -1;
  int since_best_ = 0;
  int count_ = 0;
};

struct ParamCounts {
  int64_t total = 0;
  std::map<std::string, int64_t> by_component;
};

// Exact learnable-scalar counts grouped into embeddings / encoder /
// decoder:<key> / head:<key>.
ParamCounts count_parameters(const ParserModel& model);

struct DevEvalRecord {
  int eval_index = 0;  // 1-based
  int epoch = 0;
  int64_t step = 0;
  std::vector<double> per_task_loss;  // per-token mean, task order
  double aggregate = 0.0;             // unweighted mean over tasks
};

struct SeedRunReport {
  uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::map<std::string, double> test_metrics;  // "task/em", "task/smatch"
  double best_dev_loss = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<double> step_losses;
  std::vector<DevEvalRecord> dev_history;
  double wall_seconds = 0.0;
};

struct RunReport {
  std::vector<SeedRunReport> seed_runs;
  std::map<std::string, double> metric_mean;  // over non-failed seeds
  std::map<std::string, double> metric_std;   // population std
  ParamCounts param_counts;
  double wall_seconds = 0.0;

  // include_volatile=false drops wall-clock fields so two deterministic
  // runs compare byte-identically.
  std::string to_json(bool include_volatile = true) const;
};

struct TrainOutput {
  std::unique_ptr<ParserModel> model;  // restored to the best-dev checkpoint
  SeedRunReport run;
};

// One seeded training run over the task registry: sampled single-task
// batches, Adam with warmup and clipping, periodic dev evaluation, early
// stopping, best-checkpoint restore, test-set scoring.
TrainOutput train_model(const std::vector<TaskSpec>& tasks,
                        const ModelConfig& model_config,
                        const TrainConfig& train_config, uint64_t seed,
                        const std::filesystem::path* out_dir = nullptr,
                        std::ostream* log = nullptr);

// Sequential runs over train_config.seeds; failures are recorded and
// excluded from the aggregates.
RunReport run_seeds(const std::vector<TaskSpec>& tasks,
                    const ModelConfig& model_config,
                    const TrainConfig& train_config,
                    const std::filesystem::path* out_dir = nullptr,
                    std::ostream* log = nullptr);

// Population mean/std helpers used for the per-task aggregates.
double mean_of(const std::vector<double>& values);
double population_std(const std::vector<double>& values);

}  // namespace mtlsp
