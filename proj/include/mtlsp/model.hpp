#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtlsp/corpus.hpp"
#include "mtlsp/rng.hpp"
#include "mtlsp/tensor.hpp"

namespace mtlsp {

struct ModelConfig {
  ArchMode mode = ArchMode::Single;
  int layers = 3;
  int units = 512;
  int heads = 4;
  double dropout = 0.1;
  int max_len = 128;
  int beam = 4;
  int ffn_multiplier = 4;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// Named parameters in creation order; every deterministic walk (Adam,
// counting, checkpointing) iterates this order.
class ParamStore {
 public:
  Tensor create_uniform(const std::string& name, Shape shape, Rng& rng,
                        double bound);
  Tensor create_fill(const std::string& name, Shape shape, double value);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) > 0; }
  std::vector<std::pair<std::string, Tensor>> named() const;
  size_t count() const { return order_.size(); }
  void zero_grads();
  // Overwrites values by name; shapes must match and names must exist.
  void load_values(const std::vector<std::pair<std::string, Tensor>>& entries);
  std::vector<std::pair<std::string, std::vector<double>>> snapshot() const;
  void restore(const std::vector<std::pair<std::string, std::vector<double>>>& snap);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> by_name_;
};

// Per-forward execution context. Training mode needs a tape and an rng
// for dropout; inference leaves all three at their defaults.
struct RunState {
  Tape* tape = nullptr;
  Rng* dropout_rng = nullptr;
  bool training = false;
};

struct Hypothesis {
  std::vector<Action> actions;
  double score = 0.0;  // sum of per-step log probabilities
};

struct TaskInfo {
  std::string name;
  Formalism formalism = Formalism::TreeString;
};

// Transformer encoder/decoder with a pointer head. The output
// distribution at each step spans the target vocabulary plus the n
// source positions; copy logits are the final decoder layer's
// cross-attention scores averaged over heads, normalized jointly with
// the generation logits in one softmax.
class ParserModel {
 public:
  ParserModel(ModelConfig config, VocabSet vocabs, std::vector<TaskInfo> tasks,
              Rng& init_rng);
  ParserModel(const ParserModel&) = delete;
  ParserModel& operator=(const ParserModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const VocabSet& vocabs() const { return vocabs_; }
  const std::vector<TaskInfo>& tasks() const { return tasks_; }
  size_t task_index(const std::string& name) const;
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // (n_in, units) contextual embeddings; n_in includes the task marker
  // row in 1-to-1 mode.
  Tensor encode(RunState& rs, const std::vector<std::string>& source_tokens,
                size_t task) const;

  // Probability rows (|prefix|+1, V_tgt + n); row t conditions on
  // prefix[0..t-1]. The last row is the next-action distribution.
  Tensor decode_probs(RunState& rs, const std::vector<Action>& prefix,
                      const Tensor& enc_out, size_t task) const;

  // Inference-mode next-action distribution after `prefix`.
  std::vector<double> decode_step(const std::vector<Action>& prefix,
                                  const Tensor& enc_out, size_t task) const;

  // Mean token-level negative log probability of the gold actions under
  // teacher forcing.
  Tensor sequence_loss(RunState& rs, const Example& example, size_t task) const;

  // Ranked hypotheses, best first; each ends with EOS or at max_len.
  std::vector<Hypothesis> beam_search(const std::vector<std::string>& source_tokens,
                                      size_t task, int beam) const;

  // Convenience: top beam hypothesis detokenized to target tokens.
  std::vector<std::string> parse_tokens(const std::vector<std::string>& source_tokens,
                                        size_t task, int beam) const;

  int64_t target_vocab_size(size_t task) const;
  int64_t source_len(const Tensor& enc_out) const;
  uint64_t vocabs_hash() const;

  void save(const std::filesystem::path& dir) const;
  static std::unique_ptr<ParserModel> load(const std::filesystem::path& dir);

 private:
  std::string decoder_key(size_t task) const;
  std::vector<int64_t> source_ids(const std::vector<std::string>& tokens,
                                  size_t task) const;
  int64_t joint_input_id(const Action& a, size_t task) const;

  struct AttnResult {
    Tensor out;
    Tensor avg_scores;  // defined only when requested
  };
  AttnResult attention(RunState& rs, const Tensor& q_in, const Tensor& kv_in,
                       const std::string& prefix, const Tensor* mask,
                       bool want_scores) const;
  Tensor ffn(RunState& rs, const Tensor& x, const std::string& prefix) const;
  Tensor norm(RunState& rs, const Tensor& x, const std::string& prefix) const;
  Tensor embed_positions(RunState& rs, const Tensor& emb) const;

  ModelConfig config_;
  VocabSet vocabs_;
  std::vector<TaskInfo> tasks_;
  ParamStore params_;
  Tensor pos_enc_;  // constant (max_len, units)
};

// Sinusoidal table, rows are positions.
Tensor sinusoidal_positions(int max_len, int units);

}  // namespace mtlsp
