#include "mtlsp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mtlsp/eval.hpp"

namespace mtlsp {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
  if (patience < 1) throw UsageError("config: patience must be >= 1");
  if (max_epochs < 1) throw UsageError("config: max_epochs must be >= 1");
  if (seeds.empty()) throw UsageError("config: seeds must be non-empty");
  if (lr < 0.0) throw UsageError("config: lr must be >= 0");
  if (eval_every < 0) throw UsageError("config: eval_every must be >= 0");
  if (warmup_steps < 0) throw UsageError("config: warmup_steps must be >= 0");
  if (clip_norm < 0.0) throw UsageError("config: clip_norm must be >= 0");
  if (alpha_min <= 0.0 || alpha_min > 1.0) {
    throw UsageError("config: alpha_min must be in (0,1]");
  }
  if (anneal_epochs < 1) throw UsageError("config: anneal_epochs must be >= 1");
}

std::string TrainConfig::to_json() const {
  json j;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["patience"] = patience;
  j["max_epochs"] = max_epochs;
  j["seeds"] = seeds;
  j["eval_every"] = eval_every;
  j["strategy"] = strategy_name(strategy);
  j["alpha_min"] = alpha_min;
  j["anneal_epochs"] = anneal_epochs;
  j["warmup_steps"] = warmup_steps;
  j["clip_norm"] = clip_norm;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.patience = j.value("patience", c.patience);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.seeds = j.value("seeds", c.seeds);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (j.contains("strategy")) {
    c.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  }
  c.alpha_min = j.value("alpha_min", c.alpha_min);
  c.anneal_epochs = j.value("anneal_epochs", c.anneal_epochs);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.validate();
  return c;
}

double lr_at_step(const TrainConfig& cfg, int64_t step) {
  if (cfg.warmup_steps == 0) return cfg.lr;
  const double t = static_cast<double>(std::max<int64_t>(step, 1));
  const double w = static_cast<double>(cfg.warmup_steps);
  return cfg.lr * std::min(1.0 / std::sqrt(t), t / (w * std::sqrt(w)));
}

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: param/grad count mismatch");
  }
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(static_cast<size_t>(params[i].size()), 0.0);
      state.v[i].assign(static_cast<size_t>(params[i].size()), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: state does not match parameter list");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw ShapeError("adam_step: grad shape mismatch");
    }
    auto p = params[i].values_mut();
    auto g = grads[i].values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double clip_gradients(std::vector<Tensor>& grads, double clip) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double x : g.values()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (clip > 0.0 && norm > clip) {
    const double f = clip / norm;
    for (Tensor& g : grads) {
      for (double& x : g.values_mut()) x *= f;
    }
  }
  return norm;
}

EarlyStopper::EarlyStopper(int patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw UsageError("patience must be >= 1");
}

bool EarlyStopper::observe(double value) {
  ++count_;
  if (value < best_) {
    best_ = value;
    best_index_ = count_ - 1;
    since_best_ = 0;
    return false;
  }
  ++since_best_;
  return since_best_ >= patience_;
}

ParamCounts count_parameters(const ParserModel& model) {
  ParamCounts out;
  for (const auto& [name, t] : model.params().named()) {
    std::string component;
    if (name == "src_embed" || name.find(".tgt_embed") != std::string::npos ||
        name.find(".ptr_embed") != std::string::npos) {
      component = "embeddings";
    } else if (name.rfind("encoder.", 0) == 0) {
      component = "encoder";
    } else if (name.find(".out_bias") != std::string::npos) {
      component = "head:" + name.substr(8, name.find(".out_bias") - 8);
    } else {
      // decoder.<key>.rest
      const size_t key_end = name.find('.', 8);
      component = "decoder:" + name.substr(8, key_end - 8);
    }
    out.by_component[component] += t.size();
    out.total += t.size();
  }
  return out;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  const double mu = mean_of(values);
  double sq = 0.0;
  for (double v : values) sq += (v - mu) * (v - mu);
  return std::sqrt(sq / static_cast<double>(values.size()));
}

namespace {

// Shuffled pass over one task's train split; reshuffles on wrap.
struct TaskCursor {
  std::vector<size_t> order;
  size_t pos = 0;

  explicit TaskCursor(size_t n) : order(n) {
    std::iota(order.begin(), order.end(), 0);
  }
  void shuffle(Rng& rng) {
    for (size_t i = order.size() - 1; i > 0; --i) {
      const size_t j = rng.below(i + 1);
      std::swap(order[i], order[j]);
    }
  }
  size_t next(Rng& rng) {
    if (pos >= order.size()) {
      shuffle(rng);
      pos = 0;
    }
    return order[pos++];
  }
};

std::vector<double> dev_losses_per_task(const ParserModel& model,
                                        const std::vector<TaskSpec>& tasks) {
  std::vector<double> out;
  out.reserve(tasks.size());
  for (size_t t = 0; t < tasks.size(); ++t) {
    double nll = 0.0;
    int64_t token_count = 0;
    for (const Example& ex : tasks[t].dev) {
      RunState rs;  // eval mode, no tape
      const double mean_nll = model.sequence_loss(rs, ex, t).scalar();
      const auto len = static_cast<int64_t>(ex.gold_actions.size());
      nll += mean_nll * static_cast<double>(len);
      token_count += len;
    }
    out.push_back(nll / static_cast<double>(token_count));
  }
  return out;
}

std::map<std::string, double> test_metrics(const ParserModel& model,
                                           const std::vector<TaskSpec>& tasks) {
  std::map<std::string, double> out;
  for (size_t t = 0; t < tasks.size(); ++t) {
    const TaskSpec& task = tasks[t];
    int64_t matched = 0;
    std::vector<AmrGraph> gold_graphs, pred_graphs;
    for (const Example& ex : task.test) {
      const std::vector<std::string> pred =
          model.parse_tokens(ex.source_tokens, t, model.config().beam);
      const bool impossible = needs_unk(ex.gold_actions);
      if (!impossible && pred == ex.target_tokens) ++matched;
      if (task.formalism == Formalism::Amr) {
        gold_graphs.push_back(parse_penman(ex.raw_target));
        try {
          pred_graphs.push_back(restore(pred));
        } catch (const RestoreError& e) {
          if (e.prefix().has_value()) {
            pred_graphs.push_back(*e.prefix());
          } else {
            // unusable prediction: single impossible-node placeholder
            AmrGraph g;
            g.nodes.emplace_back("v0", "amr-empty");
            g.top = "v0";
            pred_graphs.push_back(std::move(g));
          }
        }
      }
    }
    out[task.name + "/em"] =
        static_cast<double>(matched) / static_cast<double>(task.test.size());
    if (task.formalism == Formalism::Amr) {
      out[task.name + "/smatch"] =
          smatch_corpus(gold_graphs, pred_graphs).f1;
    }
  }
  return out;
}

}  // namespace

TrainOutput train_model(const std::vector<TaskSpec>& tasks_in,
                        const ModelConfig& model_config,
                        const TrainConfig& train_config, uint64_t seed,
                        const std::filesystem::path* out_dir,
                        std::ostream* log) {
  model_config.validate();
  train_config.validate();
  if (tasks_in.empty()) throw DataError("no tasks to train on");

  const auto start = std::chrono::steady_clock::now();
  const SeedSplitter split(seed);
  Rng init_rng(split.stream("init"));
  Rng train_rng(split.stream("train"));
  Rng sampler_rng(split.stream("sampler"));
  Rng dropout_rng(split.stream("dropout"));

  // Vocabularies and gold alignments depend on the architecture mode.
  std::vector<TaskSpec> tasks = tasks_in;
  VocabSet vocabs = build_vocabs(tasks, model_config.mode);
  align_tasks(tasks, vocabs);
  std::vector<TaskInfo> infos;
  infos.reserve(tasks.size());
  for (const TaskSpec& t : tasks) infos.push_back({t.name, t.formalism});

  auto model = std::make_unique<ParserModel>(model_config, vocabs, infos, init_rng);

  std::vector<Tensor> param_tensors;
  for (auto& [name, t] : model->params().named()) param_tensors.push_back(t);

  SamplerState sampler;
  sampler.strategy = train_config.strategy;
  sampler.alpha_min = train_config.alpha_min;
  sampler.anneal_epochs = train_config.anneal_epochs;
  sampler.seed = split.stream("sampler");
  for (const TaskSpec& t : tasks) sampler.sizes.push_back(t.size_train);
  if (train_config.strategy == Strategy::Loss) {
    sampler.dev_losses = dev_losses_per_task(*model, tasks);
  }

  int64_t total_train = 0;
  for (const TaskSpec& t : tasks) total_train += t.size_train;
  const int64_t steps_per_epoch =
      (total_train + train_config.batch_size - 1) / train_config.batch_size;

  std::vector<TaskCursor> cursors;
  for (const TaskSpec& t : tasks) {
    cursors.emplace_back(t.train.size());
    cursors.back().shuffle(train_rng);
  }

  AdamState adam;
  EarlyStopper stopper(train_config.patience);
  SeedRunReport run;
  run.seed = seed;
  auto best_snapshot = model->params().snapshot();
  int best_epoch = 0;

  const auto run_dev_eval = [&](int epoch, int64_t step) -> bool {
    DevEvalRecord rec;
    rec.eval_index = static_cast<int>(run.dev_history.size()) + 1;
    rec.epoch = epoch;
    rec.step = step;
    rec.per_task_loss = dev_losses_per_task(*model, tasks);
    rec.aggregate = mean_of(rec.per_task_loss);
    run.dev_history.push_back(rec);
    const bool improved = rec.aggregate < stopper.best();
    const bool stop = stopper.observe(rec.aggregate);
    if (improved) {
      best_snapshot = model->params().snapshot();
      best_epoch = epoch;
      if (out_dir != nullptr) model->save(*out_dir / "best");
    }
    if (log != nullptr) {
      *log << "eval " << rec.eval_index << " epoch " << epoch << " dev "
           << rec.aggregate << (improved ? " *" : "") << "\n";
    }
    return stop;
  };

  int64_t global_step = 0;
  bool stopped = false;
  int epoch = 0;
  for (epoch = 1; epoch <= train_config.max_epochs && !stopped; ++epoch) {
    for (int64_t s = 0; s < steps_per_epoch && !stopped; ++s) {
      const size_t task = draw_task(sampler, sampler_rng);
      ++global_step;
      Tape tape;
      RunState rs{&tape, &dropout_rng, true};
      Tensor batch_loss;
      try {
        for (int b = 0; b < train_config.batch_size; ++b) {
          const size_t idx = cursors[task].next(train_rng);
          Tensor l = model->sequence_loss(rs, tasks[task].train[idx], task);
          batch_loss = b == 0 ? l : add(&tape, batch_loss, l);
        }
        batch_loss = scale(&tape, batch_loss,
                           1.0 / static_cast<double>(train_config.batch_size));
        backward(tape, batch_loss);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at step " +
                           std::to_string(global_step) + " on task '" +
                           tasks[task].name + "': " + e.what());
      }
      run.step_losses.push_back(batch_loss.scalar());

      std::vector<Tensor> grads;
      grads.reserve(param_tensors.size());
      for (Tensor& p : param_tensors) grads.push_back(p.grad());
      clip_gradients(grads, train_config.clip_norm);
      adam_step(param_tensors, grads, adam, lr_at_step(train_config, global_step),
                train_config.beta1, train_config.beta2, train_config.adam_eps);
      model->params().zero_grads();

      if (train_config.eval_every > 0 &&
          global_step % train_config.eval_every == 0) {
        stopped = run_dev_eval(epoch, global_step);
      }
    }
    if (!stopped && train_config.eval_every == 0) {
      stopped = run_dev_eval(epoch, global_step);
    }
    if (!stopped) {
      on_epoch_end(sampler, train_config.strategy == Strategy::Loss
                                ? run.dev_history.back().per_task_loss
                                : std::vector<double>{});
    }
  }
  run.epochs_run = std::min(epoch - 1, train_config.max_epochs);

  // The returned model is the best-dev checkpoint, not the last state.
  model->params().restore(best_snapshot);
  run.best_dev_loss = stopper.best();
  run.best_epoch = best_epoch;
  if (out_dir != nullptr) model->save(*out_dir / "last");

  run.test_metrics = test_metrics(*model, tasks);
  run.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return {std::move(model), std::move(run)};
}

namespace {

json run_to_json(const SeedRunReport& r, bool include_volatile) {
  json j;
  j["seed"] = r.seed;
  j["failed"] = r.failed;
  if (r.failed) j["failure"] = r.failure;
  j["test_metrics"] = r.test_metrics;
  j["best_dev_loss"] = r.best_dev_loss;
  j["best_epoch"] = r.best_epoch;
  j["epochs_run"] = r.epochs_run;
  json hist = json::array();
  for (const DevEvalRecord& d : r.dev_history) {
    hist.push_back({{"eval", d.eval_index},
                    {"epoch", d.epoch},
                    {"step", d.step},
                    {"per_task", d.per_task_loss},
                    {"aggregate", d.aggregate}});
  }
  j["dev_history"] = hist;
  if (include_volatile) j["wall_seconds"] = r.wall_seconds;
  return j;
}

}  // namespace

std::string RunReport::to_json(bool include_volatile) const {
  json j;
  json runs = json::array();
  for (const SeedRunReport& r : seed_runs) {
    runs.push_back(run_to_json(r, include_volatile));
  }
  j["seed_runs"] = runs;
  j["metric_mean"] = metric_mean;
  j["metric_std"] = metric_std;
  j["param_counts"] = {{"total", param_counts.total},
                       {"by_component", param_counts.by_component}};
  if (include_volatile) j["wall_seconds"] = wall_seconds;
  return j.dump(2);
}

RunReport run_seeds(const std::vector<TaskSpec>& tasks,
                    const ModelConfig& model_config,
                    const TrainConfig& train_config,
                    const std::filesystem::path* out_dir, std::ostream* log) {
  train_config.validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  for (uint64_t seed : train_config.seeds) {
    std::filesystem::path seed_dir;
    const std::filesystem::path* seed_dir_ptr = nullptr;
    if (out_dir != nullptr) {
      seed_dir = *out_dir / ("seed" + std::to_string(seed));
      seed_dir_ptr = &seed_dir;
    }
    try {
      TrainOutput out =
          train_model(tasks, model_config, train_config, seed, seed_dir_ptr, log);
      if (report.param_counts.total == 0) {
        report.param_counts = count_parameters(*out.model);
      }
      report.seed_runs.push_back(std::move(out.run));
    } catch (const std::exception& e) {
      SeedRunReport failed;
      failed.seed = seed;
      failed.failed = true;
      failed.failure = e.what();
      report.seed_runs.push_back(std::move(failed));
      if (log != nullptr) {
        *log << "warning: seed " << seed << " failed: " << e.what() << "\n";
      }
    }
  }
  // Aggregate mean/std over surviving seeds per metric.
  std::map<std::string, std::vector<double>> by_metric;
  for (const SeedRunReport& r : report.seed_runs) {
    if (r.failed) continue;
    for (const auto& [k, v] : r.test_metrics) by_metric[k].push_back(v);
  }
  for (const auto& [k, vs] : by_metric) {
    report.metric_mean[k] = mean_of(vs);
    report.metric_std[k] = population_std(vs);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return report;
}

}  // namespace mtlsp
