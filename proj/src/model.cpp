#include "mtlsp/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mtlsp/checkpoint.hpp"

namespace mtlsp {

using nlohmann::json;

void ModelConfig::validate() const {
  if (layers < 1) throw UsageError("config: layers must be >= 1");
  if (units < 1) throw UsageError("config: units must be >= 1");
  if (heads < 1 || units % heads != 0) {
    throw UsageError("config: units must be divisible by heads");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw UsageError("config: dropout must be in [0,1)");
  }
  if (max_len < 2) throw UsageError("config: max_len must be >= 2");
  if (beam < 1) throw UsageError("config: beam must be >= 1");
  if (ffn_multiplier < 1) throw UsageError("config: ffn_multiplier must be >= 1");
}

std::string ModelConfig::to_json() const {
  json j;
  j["mode"] = mode_name(mode);
  j["layers"] = layers;
  j["units"] = units;
  j["heads"] = heads;
  j["dropout"] = dropout;
  j["max_len"] = max_len;
  j["beam"] = beam;
  j["ffn_multiplier"] = ffn_multiplier;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.mode = mode_from_name(j.value("mode", "single"));
  c.layers = j.value("layers", c.layers);
  c.units = j.value("units", c.units);
  c.heads = j.value("heads", c.heads);
  c.dropout = j.value("dropout", c.dropout);
  c.max_len = j.value("max_len", c.max_len);
  c.beam = j.value("beam", c.beam);
  c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
  c.validate();
  return c;
}

// ------------------------------ ParamStore ------------------------------

Tensor ParamStore::create_uniform(const std::string& name, Shape shape,
                                  Rng& rng, double bound) {
  if (by_name_.count(name)) throw Error("duplicate parameter: " + name);
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  std::vector<double> values(static_cast<size_t>(n));
  for (double& v : values) v = rng.uniform(-bound, bound);
  Tensor t = Tensor::from(std::move(shape), std::move(values), true);
  order_.push_back(name);
  by_name_.emplace(name, t);
  return t;
}

Tensor ParamStore::create_fill(const std::string& name, Shape shape,
                               double value) {
  if (by_name_.count(name)) throw Error("duplicate parameter: " + name);
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  Tensor t = Tensor::from(std::move(shape),
                          std::vector<double>(static_cast<size_t>(n), value), true);
  order_.push_back(name);
  by_name_.emplace(name, t);
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw Error("unknown parameter: " + name);
  return it->second;
}

std::vector<std::pair<std::string, Tensor>> ParamStore::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(order_.size());
  for (const std::string& n : order_) out.emplace_back(n, by_name_.at(n));
  return out;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : by_name_) t.zero_grad();
}

void ParamStore::load_values(
    const std::vector<std::pair<std::string, Tensor>>& entries) {
  for (const auto& [name, src] : entries) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) {
      throw DataError("checkpoint has unknown parameter: " + name);
    }
    Tensor& dst = it->second;
    if (dst.shape() != src.shape()) {
      throw DataError("checkpoint shape mismatch for parameter: " + name);
    }
    std::copy(src.values().begin(), src.values().end(),
              dst.values_mut().begin());
  }
}

std::vector<std::pair<std::string, std::vector<double>>> ParamStore::snapshot()
    const {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  out.reserve(order_.size());
  for (const std::string& n : order_) {
    auto v = by_name_.at(n).values();
    out.emplace_back(n, std::vector<double>(v.begin(), v.end()));
  }
  return out;
}

void ParamStore::restore(
    const std::vector<std::pair<std::string, std::vector<double>>>& snap) {
  for (const auto& [name, values] : snap) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error("snapshot has unknown parameter: " + name);
    auto dst = it->second.values_mut();
    if (dst.size() != values.size()) {
      throw Error("snapshot size mismatch for parameter: " + name);
    }
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

// ------------------------------ construction ----------------------------

Tensor sinusoidal_positions(int max_len, int units) {
  std::vector<double> v(static_cast<size_t>(max_len) * static_cast<size_t>(units));
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < units; i += 2) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(units));
      v[static_cast<size_t>(pos * units + i)] = std::sin(angle);
      if (i + 1 < units) {
        v[static_cast<size_t>(pos * units + i + 1)] = std::cos(angle);
      }
    }
  }
  return Tensor::from({max_len, units}, std::move(v), false);
}

namespace {

void create_layer_norm(ParamStore& ps, const std::string& prefix, int units) {
  ps.create_fill(prefix + ".gain", {units}, 1.0);
  ps.create_fill(prefix + ".bias", {units}, 0.0);
}

void create_attention(ParamStore& ps, const std::string& prefix, int units,
                      Rng& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(units));
  for (const char* w : {"wq", "wk", "wv", "wo"}) {
    ps.create_uniform(prefix + "." + w, {units, units}, rng, bound);
  }
  for (const char* b : {"bq", "bk", "bv", "bo"}) {
    ps.create_fill(prefix + "." + b, {units}, 0.0);
  }
}

void create_ffn(ParamStore& ps, const std::string& prefix, int units, int hidden,
                Rng& rng) {
  ps.create_uniform(prefix + ".w1", {units, hidden}, rng,
                    std::sqrt(3.0 / static_cast<double>(units)));
  ps.create_fill(prefix + ".b1", {hidden}, 0.0);
  ps.create_uniform(prefix + ".w2", {hidden, units}, rng,
                    std::sqrt(3.0 / static_cast<double>(hidden)));
  ps.create_fill(prefix + ".b2", {units}, 0.0);
}

}  // namespace

ParserModel::ParserModel(ModelConfig config, VocabSet vocabs,
                         std::vector<TaskInfo> tasks, Rng& init_rng)
    : config_(config), vocabs_(std::move(vocabs)), tasks_(std::move(tasks)) {
  config_.validate();
  if (tasks_.empty()) throw UsageError("model requires at least one task");
  if (config_.mode == ArchMode::Single && tasks_.size() != 1) {
    throw UsageError("single mode requires exactly one task");
  }
  if (!vocabs_.shared_target && vocabs_.targets.size() != tasks_.size()) {
    throw UsageError("one target vocab per task required");
  }
  const int u = config_.units;
  const double embed_bound = std::sqrt(3.0 / static_cast<double>(u));

  params_.create_uniform("src_embed", {vocabs_.source.size(), u}, init_rng,
                         embed_bound);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.l" + std::to_string(l);
    create_layer_norm(params_, p + ".ln1", u);
    create_attention(params_, p + ".attn", u, init_rng);
    create_layer_norm(params_, p + ".ln2", u);
    create_ffn(params_, p + ".ffn", u, u * config_.ffn_multiplier, init_rng);
  }
  create_layer_norm(params_, "encoder.final_ln", u);

  std::vector<std::string> keys;
  if (config_.mode == ArchMode::OneToN) {
    for (const TaskInfo& t : tasks_) keys.push_back(t.name);
  } else {
    keys.push_back("shared");
  }
  for (size_t k = 0; k < keys.size(); ++k) {
    const std::string d = "decoder." + keys[k];
    const int64_t vt = vocabs_.shared_target
                           ? vocabs_.targets.front().size()
                           : vocabs_.targets[config_.mode == ArchMode::OneToN ? k : 0].size();
    params_.create_uniform(d + ".tgt_embed", {vt, u}, init_rng, embed_bound);
    params_.create_uniform(d + ".ptr_embed", {config_.max_len, u}, init_rng,
                           embed_bound);
    for (int l = 0; l < config_.layers; ++l) {
      const std::string p = d + ".l" + std::to_string(l);
      create_layer_norm(params_, p + ".ln1", u);
      create_attention(params_, p + ".self", u, init_rng);
      create_layer_norm(params_, p + ".ln2", u);
      create_attention(params_, p + ".cross", u, init_rng);
      create_layer_norm(params_, p + ".ln3", u);
      create_ffn(params_, p + ".ffn", u, u * config_.ffn_multiplier, init_rng);
    }
    create_layer_norm(params_, d + ".final_ln", u);
    params_.create_fill(d + ".out_bias", {vt}, 0.0);
  }
  pos_enc_ = sinusoidal_positions(config_.max_len, u);
}

size_t ParserModel::task_index(const std::string& name) const {
  for (size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].name == name) return i;
  }
  throw UsageError("unknown task: " + name);
}

std::string ParserModel::decoder_key(size_t task) const {
  if (config_.mode == ArchMode::OneToN) return "decoder." + tasks_.at(task).name;
  return "decoder.shared";
}

int64_t ParserModel::target_vocab_size(size_t task) const {
  return vocabs_.target_for(task).size();
}

int64_t ParserModel::source_len(const Tensor& enc_out) const {
  return config_.mode == ArchMode::OneToOne ? enc_out.rows() - 1 : enc_out.rows();
}

std::vector<int64_t> ParserModel::source_ids(
    const std::vector<std::string>& tokens, size_t task) const {
  if (tokens.empty()) throw DataError("empty source");
  std::vector<int64_t> ids;
  ids.reserve(tokens.size() + 1);
  if (config_.mode == ArchMode::OneToOne) {
    ids.push_back(vocabs_.source.marker_id(tasks_.at(task).name));
  }
  for (const std::string& t : tokens) ids.push_back(vocabs_.source.id(t));
  if (static_cast<int64_t>(ids.size()) > config_.max_len) {
    throw DataError("over-length input: " + std::to_string(ids.size()) +
                    " tokens, max_len " + std::to_string(config_.max_len));
  }
  return ids;
}

int64_t ParserModel::joint_input_id(const Action& a, size_t task) const {
  if (a.kind == ActionKind::Gen) return a.value;
  return target_vocab_size(task) + a.value - 1;
}

Tensor ParserModel::norm(RunState& rs, const Tensor& x,
                         const std::string& prefix) const {
  return layer_norm(rs.tape, x, params_.get(prefix + ".gain"),
                    params_.get(prefix + ".bias"));
}

Tensor ParserModel::ffn(RunState& rs, const Tensor& x,
                        const std::string& prefix) const {
  Tensor h = add(rs.tape, matmul(rs.tape, x, params_.get(prefix + ".w1")),
                 params_.get(prefix + ".b1"));
  h = relu(rs.tape, h);
  return add(rs.tape, matmul(rs.tape, h, params_.get(prefix + ".w2")),
             params_.get(prefix + ".b2"));
}

ParserModel::AttnResult ParserModel::attention(RunState& rs, const Tensor& q_in,
                                               const Tensor& kv_in,
                                               const std::string& prefix,
                                               const Tensor* mask,
                                               bool want_scores) const {
  const int heads = config_.heads;
  const int64_t dh = config_.units / heads;
  Tensor q = add(rs.tape, matmul(rs.tape, q_in, params_.get(prefix + ".wq")),
                 params_.get(prefix + ".bq"));
  Tensor k = add(rs.tape, matmul(rs.tape, kv_in, params_.get(prefix + ".wk")),
                 params_.get(prefix + ".bk"));
  Tensor v = add(rs.tape, matmul(rs.tape, kv_in, params_.get(prefix + ".wv")),
                 params_.get(prefix + ".bv"));
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> ctx_parts;
  ctx_parts.reserve(static_cast<size_t>(heads));
  Tensor score_sum;
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice(rs.tape, q, 1, h * dh, dh);
    Tensor kh = slice(rs.tape, k, 1, h * dh, dh);
    Tensor vh = slice(rs.tape, v, 1, h * dh, dh);
    Tensor s = scale(rs.tape, matmul(rs.tape, qh, transpose(rs.tape, kh)),
                     inv_sqrt_dh);
    if (want_scores) {
      score_sum = h == 0 ? s : add(rs.tape, score_sum, s);
    }
    if (mask != nullptr) s = add(rs.tape, s, *mask);
    Tensor a = softmax(rs.tape, s);
    ctx_parts.push_back(matmul(rs.tape, a, vh));
  }
  Tensor ctx = heads == 1 ? ctx_parts.front() : concat(rs.tape, ctx_parts, 1);
  AttnResult r;
  r.out = add(rs.tape, matmul(rs.tape, ctx, params_.get(prefix + ".wo")),
              params_.get(prefix + ".bo"));
  if (want_scores) {
    r.avg_scores = scale(rs.tape, score_sum, 1.0 / static_cast<double>(heads));
  }
  return r;
}

Tensor ParserModel::embed_positions(RunState& rs, const Tensor& emb) const {
  Tensor scaled = scale(rs.tape, emb, std::sqrt(static_cast<double>(config_.units)));
  Tensor pe = slice(rs.tape, pos_enc_, 0, 0, emb.rows());
  return add(rs.tape, scaled, pe);
}

Tensor ParserModel::encode(RunState& rs,
                           const std::vector<std::string>& source_tokens,
                           size_t task) const {
  if (task >= tasks_.size()) throw UsageError("task index out of range");
  const std::vector<int64_t> ids = source_ids(source_tokens, task);
  Tensor x = embedding_lookup(rs.tape, params_.get("src_embed"), ids);
  x = embed_positions(rs, x);
  x = dropout(rs.tape, x, config_.dropout, rs.dropout_rng, rs.training);
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.l" + std::to_string(l);
    Tensor h = norm(rs, x, p + ".ln1");
    Tensor a = attention(rs, h, h, p + ".attn", nullptr, false).out;
    a = dropout(rs.tape, a, config_.dropout, rs.dropout_rng, rs.training);
    x = add(rs.tape, x, a);
    h = norm(rs, x, p + ".ln2");
    Tensor f = ffn(rs, h, p + ".ffn");
    f = dropout(rs.tape, f, config_.dropout, rs.dropout_rng, rs.training);
    x = add(rs.tape, x, f);
  }
  return norm(rs, x, "encoder.final_ln");
}

namespace {

Tensor causal_mask(int64_t t) {
  std::vector<double> v(static_cast<size_t>(t * t), 0.0);
  for (int64_t i = 0; i < t; ++i) {
    for (int64_t j = i + 1; j < t; ++j) {
      v[static_cast<size_t>(i * t + j)] = -1e30;
    }
  }
  return Tensor::from({t, t}, std::move(v), false);
}

}  // namespace

Tensor ParserModel::decode_probs(RunState& rs, const std::vector<Action>& prefix,
                                 const Tensor& enc_out, size_t task) const {
  if (static_cast<int64_t>(prefix.size()) >= config_.max_len) {
    throw DataError("decoder prefix reached max_len");
  }
  const std::string d = decoder_key(task);
  const Tensor& tgt_embed = params_.get(d + ".tgt_embed");
  const Tensor& ptr_embed = params_.get(d + ".ptr_embed");
  const int64_t n_src = source_len(enc_out);

  std::vector<int64_t> ids;
  ids.reserve(prefix.size() + 1);
  ids.push_back(Vocab::kBos);
  for (const Action& a : prefix) ids.push_back(joint_input_id(a, task));

  Tensor table = concat(rs.tape, {tgt_embed, ptr_embed}, 0);
  Tensor x = embedding_lookup(rs.tape, table, ids);
  x = embed_positions(rs, x);
  x = dropout(rs.tape, x, config_.dropout, rs.dropout_rng, rs.training);

  const Tensor mask = causal_mask(x.rows());
  Tensor copy_scores;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = d + ".l" + std::to_string(l);
    Tensor h = norm(rs, x, p + ".ln1");
    Tensor a = attention(rs, h, h, p + ".self", &mask, false).out;
    a = dropout(rs.tape, a, config_.dropout, rs.dropout_rng, rs.training);
    x = add(rs.tape, x, a);

    h = norm(rs, x, p + ".ln2");
    const bool last = l == config_.layers - 1;
    AttnResult c = attention(rs, h, enc_out, p + ".cross", nullptr, last);
    if (last) copy_scores = c.avg_scores;
    Tensor co = dropout(rs.tape, c.out, config_.dropout, rs.dropout_rng, rs.training);
    x = add(rs.tape, x, co);

    h = norm(rs, x, p + ".ln3");
    Tensor f = ffn(rs, h, p + ".ffn");
    f = dropout(rs.tape, f, config_.dropout, rs.dropout_rng, rs.training);
    x = add(rs.tape, x, f);
  }
  Tensor hfin = norm(rs, x, d + ".final_ln");

  // Generation logits share the target embedding (tied projection).
  Tensor gen_logits = add(rs.tape, matmul(rs.tape, hfin, transpose(rs.tape, tgt_embed)),
                          params_.get(d + ".out_bias"));
  if (config_.mode == ArchMode::OneToOne) {
    // drop the marker column from the pointer block
    copy_scores = slice(rs.tape, copy_scores, 1, 1, n_src);
  }
  Tensor joint = concat(rs.tape, {gen_logits, copy_scores}, 1);
  return softmax(rs.tape, joint);
}

std::vector<double> ParserModel::decode_step(const std::vector<Action>& prefix,
                                             const Tensor& enc_out,
                                             size_t task) const {
  RunState rs;
  Tensor probs = decode_probs(rs, prefix, enc_out, task);
  const int64_t w = probs.cols();
  const int64_t last = probs.rows() - 1;
  std::vector<double> out(static_cast<size_t>(w));
  for (int64_t i = 0; i < w; ++i) out[static_cast<size_t>(i)] = probs.at(last, i);
  return out;
}

Tensor ParserModel::sequence_loss(RunState& rs, const Example& example,
                                  size_t task) const {
  if (example.gold_actions.empty()) {
    throw DataError("sequence_loss: example has no gold actions");
  }
  Tensor enc = encode(rs, example.source_tokens, task);
  std::vector<Action> prefix(example.gold_actions.begin(),
                             example.gold_actions.end() - 1);
  Tensor probs = decode_probs(rs, prefix, enc, task);
  std::vector<int64_t> targets;
  targets.reserve(example.gold_actions.size());
  for (const Action& a : example.gold_actions) {
    targets.push_back(joint_input_id(a, task));
  }
  return cross_entropy(rs.tape, probs, targets);
}

std::vector<Hypothesis> ParserModel::beam_search(
    const std::vector<std::string>& source_tokens, size_t task, int beam) const {
  if (beam < 1) throw UsageError("beam must be >= 1");
  RunState rs;
  const Tensor enc = encode(rs, source_tokens, task);
  const int64_t vt = target_vocab_size(task);

  std::vector<Hypothesis> live{{{}, 0.0}};
  std::vector<Hypothesis> finished;
  while (!live.empty()) {
    struct Cand {
      double score;
      size_t hyp;
      int64_t action_idx;
    };
    std::vector<Cand> cands;
    for (size_t h = 0; h < live.size(); ++h) {
      const std::vector<double> dist = decode_step(live[h].actions, enc, task);
      for (int64_t i = 0; i < static_cast<int64_t>(dist.size()); ++i) {
        const double p = dist[static_cast<size_t>(i)];
        cands.push_back({live[h].score + std::log(std::max(p, 1e-300)), h, i});
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.score > b.score; });
    std::vector<Hypothesis> next_live;
    const size_t keep = std::min(cands.size(), static_cast<size_t>(beam));
    for (size_t c = 0; c < keep; ++c) {
      Hypothesis hyp = live[cands[c].hyp];
      const int64_t idx = cands[c].action_idx;
      hyp.actions.push_back(idx < vt ? Action::gen(idx)
                                     : Action::copy(idx - vt + 1));
      hyp.score = cands[c].score;
      const bool eos = hyp.actions.back() == Action::gen(Vocab::kEos);
      const bool capped =
          static_cast<int64_t>(hyp.actions.size()) >= config_.max_len;
      if (eos || capped) {
        finished.push_back(std::move(hyp));
      } else {
        next_live.push_back(std::move(hyp));
      }
    }
    live = std::move(next_live);
  }
  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     return a.score > b.score;
                   });
  if (finished.size() > static_cast<size_t>(beam)) {
    finished.resize(static_cast<size_t>(beam));
  }
  return finished;
}

std::vector<std::string> ParserModel::parse_tokens(
    const std::vector<std::string>& source_tokens, size_t task, int beam) const {
  const std::vector<Hypothesis> hyps = beam_search(source_tokens, task, beam);
  if (hyps.empty()) return {};
  return apply_actions(hyps.front().actions, source_tokens,
                       vocabs_.target_for(task));
}

uint64_t ParserModel::vocabs_hash() const {
  std::string all = vocabs_.source.to_json();
  for (const Vocab& v : vocabs_.targets) all += v.to_json();
  uint64_t h = 14695981039346656037ull;
  for (char c : all) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

void ParserModel::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "params.ckpt", params_.named());
  json j;
  j["format"] = "mtlsp-model-v1";
  j["config"] = json::parse(config_.to_json());
  json jt = json::array();
  for (const TaskInfo& t : tasks_) {
    jt.push_back({{"name", t.name}, {"formalism", formalism_name(t.formalism)}});
  }
  j["tasks"] = jt;
  j["source_vocab"] = json::parse(vocabs_.source.to_json());
  json tv = json::array();
  for (const Vocab& v : vocabs_.targets) tv.push_back(json::parse(v.to_json()));
  j["target_vocabs"] = tv;
  j["shared_target"] = vocabs_.shared_target;
  j["vocab_hash"] = vocabs_hash();
  std::ofstream os(dir / "model.json");
  if (!os) throw DataError("cannot write model sidecar in " + dir.string());
  os << j.dump(2) << "\n";
}

std::unique_ptr<ParserModel> ParserModel::load(const std::filesystem::path& dir) {
  std::ifstream is(dir / "model.json");
  if (!is) throw DataError("cannot open model sidecar: " + (dir / "model.json").string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("malformed model sidecar: " + std::string(e.what()));
  }
  if (j.value("format", "") != "mtlsp-model-v1") {
    throw DataError("unexpected model sidecar format");
  }
  const ModelConfig config = ModelConfig::from_json(j.at("config").dump());
  std::vector<TaskInfo> tasks;
  for (const auto& tj : j.at("tasks")) {
    tasks.push_back({tj.at("name").get<std::string>(),
                     formalism_from_name(tj.at("formalism").get<std::string>())});
  }
  VocabSet vs;
  vs.source = Vocab::from_json(j.at("source_vocab").dump());
  for (const auto& vj : j.at("target_vocabs")) {
    vs.targets.push_back(Vocab::from_json(vj.dump()));
  }
  vs.shared_target = j.at("shared_target").get<bool>();

  Rng throwaway(0);
  auto model = std::make_unique<ParserModel>(config, std::move(vs),
                                             std::move(tasks), throwaway);
  if (j.at("vocab_hash").get<uint64_t>() != model->vocabs_hash()) {
    throw DataError("vocab hash mismatch: sidecar does not match its vocabularies");
  }
  model->params().load_values(load_checkpoint(dir / "params.ckpt"));
  return model;
}

}  // namespace mtlsp
