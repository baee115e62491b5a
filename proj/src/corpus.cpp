#include "mtlsp/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mtlsp/amr.hpp"

namespace mtlsp {

using nlohmann::json;

Formalism formalism_from_name(const std::string& name) {
  if (name == "tree-string") return Formalism::TreeString;
  if (name == "amr") return Formalism::Amr;
  throw DataError("unknown formalism: " + name);
}

std::string formalism_name(Formalism f) {
  return f == Formalism::TreeString ? "tree-string" : "amr";
}

ArchMode mode_from_name(const std::string& name) {
  if (name == "single") return ArchMode::Single;
  if (name == "1-to-n") return ArchMode::OneToN;
  if (name == "1-to-1") return ArchMode::OneToOne;
  throw UsageError("unknown mode: " + name + " (expected single|1-to-n|1-to-1)");
}

std::string mode_name(ArchMode m) {
  switch (m) {
    case ArchMode::Single: return "single";
    case ArchMode::OneToN: return "1-to-n";
    default: return "1-to-1";
  }
}

std::string marker_token(const std::string& task_name) {
  return "<" + task_name + ">";
}

Vocab::Vocab(std::vector<std::string> marker_tasks)
    : marker_tasks_(std::move(marker_tasks)) {
  tokens_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (const std::string& t : marker_tasks_) tokens_.push_back(marker_token(t));
  reserved_ = static_cast<int64_t>(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<int64_t>(i));
  }
}

int64_t Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int64_t id = static_cast<int64_t>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int64_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

const std::string& Vocab::token(int64_t id) const {
  if (id < 0 || id >= size()) throw DataError("vocab id out of range");
  return tokens_[static_cast<size_t>(id)];
}

int64_t Vocab::marker_id(const std::string& task_name) const {
  auto it = index_.find(marker_token(task_name));
  if (it == index_.end() || it->second >= reserved_) {
    throw DataError("unknown task marker: " + marker_token(task_name));
  }
  return it->second;
}

std::string Vocab::to_json() const {
  json j;
  j["markers"] = marker_tasks_;
  j["tokens"] = std::vector<std::string>(tokens_.begin() + reserved_, tokens_.end());
  return j.dump();
}

Vocab Vocab::from_json(const std::string& text) {
  const json j = json::parse(text);
  Vocab v(j.at("markers").get<std::vector<std::string>>());
  for (const auto& t : j.at("tokens")) v.add(t.get<std::string>());
  return v;
}

uint64_t Vocab::content_hash() const {
  const std::string s = to_json();
  uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

bool Vocab::operator==(const Vocab& other) const {
  return tokens_ == other.tokens_ && reserved_ == other.reserved_;
}

std::vector<std::string> tokenize_ws(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

namespace {

std::vector<Example> load_jsonl(const std::filesystem::path& path,
                                const std::string& task, const std::string& split,
                                Formalism formalism) {
  std::ifstream is(path);
  if (!is) {
    throw DataError("task '" + task + "': cannot open " + split + " file " +
                    path.string());
  }
  std::vector<Example> out;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed JSONL line: " + e.what());
    }
    if (!j.contains("source") || !j.contains("target")) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": line must contain \"source\" and \"target\"");
    }
    Example ex;
    ex.source_tokens = tokenize_ws(j.at("source").get<std::string>());
    ex.raw_target = j.at("target").get<std::string>();
    if (formalism == Formalism::Amr) {
      try {
        ex.target_tokens = linearize(parse_penman(ex.raw_target));
      } catch (const DataError& e) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": bad PENMAN target: " + e.what());
      }
    } else {
      ex.target_tokens = tokenize_ws(ex.raw_target);
    }
    if (ex.source_tokens.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": empty source");
    }
    if (ex.target_tokens.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": empty target");
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) {
    throw DataError("task '" + task + "': split '" + split + "' empty");
  }
  return out;
}

}  // namespace

std::vector<TaskSpec> load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw DataError("cannot open manifest: " + manifest_path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!j.contains("tasks") || !j.at("tasks").is_array() || j.at("tasks").empty()) {
    throw DataError("manifest must contain a non-empty \"tasks\" array");
  }
  const auto base = manifest_path.has_parent_path()
                        ? manifest_path.parent_path()
                        : std::filesystem::path(".");
  std::vector<TaskSpec> tasks;
  std::set<std::string> names;
  for (const auto& tj : j.at("tasks")) {
    TaskSpec t;
    t.name = tj.at("name").get<std::string>();
    if (t.name.empty()) throw DataError("task name must be non-empty");
    if (!names.insert(t.name).second) {
      throw DataError("duplicate task name: " + t.name);
    }
    t.formalism = formalism_from_name(tj.at("formalism").get<std::string>());
    auto resolve = [&](const std::string& key) {
      std::filesystem::path p = tj.at(key).get<std::string>();
      return p.is_absolute() ? p : base / p;
    };
    t.train = load_jsonl(resolve("train"), t.name, "train", t.formalism);
    t.dev = load_jsonl(resolve("dev"), t.name, "dev", t.formalism);
    t.test = load_jsonl(resolve("test"), t.name, "test", t.formalism);
    t.size_train = static_cast<int64_t>(t.train.size());
    tasks.push_back(std::move(t));
  }
  return tasks;
}

VocabSet build_vocabs(const std::vector<TaskSpec>& tasks, ArchMode mode) {
  if (tasks.empty()) throw DataError("no tasks registered");
  VocabSet vs;
  std::vector<std::string> marker_tasks;
  if (mode == ArchMode::OneToOne) {
    for (const TaskSpec& t : tasks) marker_tasks.push_back(t.name);
  }
  vs.source = Vocab(marker_tasks);

  // Vocabularies come from the train split only; dev/test map to UNK.
  std::set<std::string> src_tokens;
  std::vector<std::set<std::string>> tgt_tokens(tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    for (const Example& ex : tasks[i].train) {
      src_tokens.insert(ex.source_tokens.begin(), ex.source_tokens.end());
      tgt_tokens[i].insert(ex.target_tokens.begin(), ex.target_tokens.end());
    }
  }
  for (const std::string& t : src_tokens) vs.source.add(t);

  if (mode == ArchMode::OneToOne) {
    vs.shared_target = true;
    std::set<std::string> merged;
    for (const auto& s : tgt_tokens) merged.insert(s.begin(), s.end());
    Vocab tgt;
    for (const std::string& t : merged) tgt.add(t);
    vs.targets.push_back(std::move(tgt));
  } else {
    vs.shared_target = false;
    for (const auto& s : tgt_tokens) {
      Vocab tgt;
      for (const std::string& t : s) tgt.add(t);
      vs.targets.push_back(std::move(tgt));
    }
  }
  return vs;
}

std::vector<Action> align_gold_actions(const Example& example,
                                       const Vocab& target_vocab) {
  std::vector<Action> out;
  out.reserve(example.target_tokens.size() + 1);
  for (const std::string& tok : example.target_tokens) {
    int64_t copy_pos = 0;
    for (size_t i = 0; i < example.source_tokens.size(); ++i) {
      if (example.source_tokens[i] == tok) {
        copy_pos = static_cast<int64_t>(i) + 1;
        break;
      }
    }
    if (copy_pos > 0) {
      out.push_back(Action::copy(copy_pos));
    } else {
      out.push_back(Action::gen(target_vocab.id(tok)));
    }
  }
  out.push_back(Action::gen(Vocab::kEos));
  return out;
}

void align_tasks(std::vector<TaskSpec>& tasks, const VocabSet& vocabs) {
  for (size_t i = 0; i < tasks.size(); ++i) {
    const Vocab& tgt = vocabs.target_for(i);
    for (auto* split : {&tasks[i].train, &tasks[i].dev, &tasks[i].test}) {
      for (Example& ex : *split) {
        ex.gold_actions = align_gold_actions(ex, tgt);
      }
    }
  }
}

std::vector<std::string> apply_actions(const std::vector<Action>& actions,
                                       const std::vector<std::string>& source_tokens,
                                       const Vocab& target_vocab) {
  std::vector<std::string> out;
  for (const Action& a : actions) {
    if (a.kind == ActionKind::Gen) {
      if (a.value == Vocab::kEos) break;
      out.push_back(target_vocab.token(a.value));
    } else {
      if (a.value < 1 || a.value > static_cast<int64_t>(source_tokens.size())) {
        throw DataError("copy position out of range");
      }
      out.push_back(source_tokens[static_cast<size_t>(a.value - 1)]);
    }
  }
  return out;
}

bool needs_unk(const std::vector<Action>& actions) {
  return std::any_of(actions.begin(), actions.end(), [](const Action& a) {
    return a.kind == ActionKind::Gen && a.value == Vocab::kUnk;
  });
}

}  // namespace mtlsp
