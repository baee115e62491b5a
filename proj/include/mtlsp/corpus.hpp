#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtlsp/errors.hpp"

namespace mtlsp {

enum class ActionKind { Gen, Copy };

// One decoder step: emit a target-vocab symbol, or point at a 1-based
// source position.
struct Action {
  ActionKind kind = ActionKind::Gen;
  int64_t value = 0;  // vocab id (Gen) or source position (Copy)

  static Action gen(int64_t id) { return {ActionKind::Gen, id}; }
  static Action copy(int64_t pos) { return {ActionKind::Copy, pos}; }
  bool operator==(const Action&) const = default;
};

struct Example {
  std::vector<std::string> source_tokens;
  std::vector<std::string> target_tokens;
  std::vector<Action> gold_actions;  // filled by alignment
  std::string raw_target;            // target exactly as read (PENMAN for amr)
};

enum class Formalism { TreeString, Amr };
Formalism formalism_from_name(const std::string& name);
std::string formalism_name(Formalism f);

enum class ArchMode { Single, OneToN, OneToOne };
ArchMode mode_from_name(const std::string& name);
std::string mode_name(ArchMode m);

// Token table with reserved ids PAD/BOS/EOS/UNK plus one marker slot per
// task name handed to the constructor. Non-reserved tokens are inserted
// in sorted order so identical corpora serialize byte-identically.
class Vocab {
 public:
  static constexpr int64_t kPad = 0;
  static constexpr int64_t kBos = 1;
  static constexpr int64_t kEos = 2;
  static constexpr int64_t kUnk = 3;

  explicit Vocab(std::vector<std::string> marker_tasks = {});

  int64_t add(const std::string& token);
  int64_t id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int64_t id) const;
  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
  int64_t reserved() const { return reserved_; }
  int64_t marker_id(const std::string& task_name) const;

  std::string to_json() const;
  static Vocab from_json(const std::string& text);
  uint64_t content_hash() const;
  bool operator==(const Vocab& other) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> marker_tasks_;
  int64_t reserved_ = 4;
  std::unordered_map<std::string, int64_t> index_;
};

std::string marker_token(const std::string& task_name);

struct TaskSpec {
  std::string name;
  Formalism formalism = Formalism::TreeString;
  std::vector<Example> train, dev, test;
  int64_t size_train = 0;  // == train.size(), the task's D_t
};

// Shared source vocab plus either one target vocab per task or a single
// shared one (1-to-1).
struct VocabSet {
  Vocab source;
  std::vector<Vocab> targets;
  bool shared_target = false;

  const Vocab& target_for(size_t task_index) const {
    return shared_target ? targets.front() : targets.at(task_index);
  }
};

std::vector<std::string> tokenize_ws(const std::string& text);

// Manifest JSON: { "tasks": [ { "name", "formalism", "train", "dev",
// "test" } ] }; split paths resolve relative to the manifest location.
// AMR targets are PENMAN strings, linearized at load time.
std::vector<TaskSpec> load_manifest(const std::filesystem::path& manifest_path);

VocabSet build_vocabs(const std::vector<TaskSpec>& tasks, ArchMode mode);

// COPY(first matching source position) when the target token occurs
// verbatim in the source, else GEN(id, UNK fallback); ends with GEN(EOS).
std::vector<Action> align_gold_actions(const Example& example,
                                       const Vocab& target_vocab);

// Runs alignment over every split of every task.
void align_tasks(std::vector<TaskSpec>& tasks, const VocabSet& vocabs);

// Inverse of alignment: action sequence back to target tokens. Stops
// before EOS; COPY reads the raw source token, so source-side UNKs
// round-trip.
std::vector<std::string> apply_actions(const std::vector<Action>& actions,
                                       const std::vector<std::string>& source_tokens,
                                       const Vocab& target_vocab);

// Gold sequences that need UNK cannot be produced verbatim; evaluation
// counts them as unparseable.
bool needs_unk(const std::vector<Action>& actions);

}  // namespace mtlsp
