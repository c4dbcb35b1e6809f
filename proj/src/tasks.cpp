#include "adaptmix/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace adaptmix {

namespace fs = std::filesystem;
using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

long TaskDataset::total_train_tokens() const {
  long n = 0;
  for (const Example& ex : train) n += static_cast<long>(ex.token_count());
  return n;
}

const std::vector<Example>& TaskDataset::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  throw std::invalid_argument("TaskDataset: unknown split");
}

void TaskDataset::validate() const {
  if (task_id.empty()) throw std::invalid_argument("TaskDataset: empty task_id");
  if (train.empty() || val.empty() || test.empty()) {
    throw std::invalid_argument("TaskDataset '" + task_id + "': all three splits must be non-empty");
  }
  for (const auto* part : {&train, &val, &test}) {
    for (const Example& ex : *part) {
      if (ex.instruction.empty() && ex.response.empty()) {
        throw std::invalid_argument("TaskDataset '" + task_id + "': empty example");
      }
      for (const int id : ex.instruction) {
        if (id <= 0) throw std::invalid_argument("TaskDataset '" + task_id + "': token id must be positive");
      }
      for (const int id : ex.response) {
        if (id <= 0) throw std::invalid_argument("TaskDataset '" + task_id + "': token id must be positive");
      }
    }
  }
}

void SuiteConfig::validate() const {
  if (num_tasks < 2) throw std::invalid_argument("SuiteConfig: num_tasks must be >= 2");
  if (sizes.size() != num_tasks || difficulty.size() != num_tasks) {
    throw std::invalid_argument("SuiteConfig: sizes/difficulty must list one entry per task");
  }
  for (const std::size_t s : sizes) {
    if (s < 3) throw std::invalid_argument("SuiteConfig: each task needs at least 3 examples");
  }
  if (vocab_size < 4) throw std::invalid_argument("SuiteConfig: vocab_size must be >= 4");
  if (min_instr_len == 0 || min_instr_len > max_instr_len) {
    throw std::invalid_argument("SuiteConfig: bad instruction length range");
  }
  if (response_len == 0) throw std::invalid_argument("SuiteConfig: response_len must be positive");
  if (hard_keys < 2) throw std::invalid_argument("SuiteConfig: hard_keys must be >= 2");
}

namespace {

// 10% val / 10% test, at least one example each; the remainder trains.
void split_examples(std::vector<Example> all, Rng& rng, TaskDataset& out) {
  std::vector<std::size_t> order = rng.permutation(all.size());
  const std::size_t n = all.size();
  const std::size_t n_val = std::max<std::size_t>(1, n / 10);
  const std::size_t n_test = std::max<std::size_t>(1, n / 10);
  if (n_val + n_test >= n) throw std::invalid_argument("split_examples: task too small to split");
  for (std::size_t i = 0; i < n; ++i) {
    Example& ex = all[order[i]];
    if (i < n_val) out.val.push_back(std::move(ex));
    else if (i < n_val + n_test) out.test.push_back(std::move(ex));
    else out.train.push_back(std::move(ex));
  }
}

}  // namespace

std::vector<TaskDataset> generate_suite(const SuiteConfig& config) {
  config.validate();
  std::vector<TaskDataset> suite;
  suite.reserve(config.num_tasks);

  for (std::size_t t = 0; t < config.num_tasks; ++t) {
    const bool hard = config.difficulty[t] == TaskDifficulty::hard;
    TaskDataset ds;
    ds.task_id = (hard ? "hard_" : "easy_") + std::to_string(t);
    Rng rng(derive_stream(config.seed, "suite/" + ds.task_id));

    const auto rand_token = [&rng, &config]() {
      return static_cast<int>(rng.uniform_int(1, config.vocab_size - 1));
    };
    const auto rand_seq = [&](std::size_t len) {
      std::vector<int> seq(len);
      for (int& x : seq) x = rand_token();
      return seq;
    };

    std::vector<Example> all;
    all.reserve(config.sizes[t]);

    if (!hard) {
      // Echo task: one marker token, instruction and response both repeat
      // it. A single mapping shared by every example.
      const int marker = rand_token();
      for (std::size_t i = 0; i < config.sizes[t]; ++i) {
        const std::size_t ilen =
            static_cast<std::size_t>(rng.uniform_int(static_cast<long>(config.min_instr_len),
                                                     static_cast<long>(config.max_instr_len)));
        Example ex;
        ex.instruction.assign(ilen, marker);
        ex.response.assign(config.response_len, marker);
        all.push_back(std::move(ex));
      }
    } else {
      // Keyed substitution: the instruction repeats one of hard_keys key
      // tokens and the response is the fixed sequence assigned to that key.
      std::vector<int> keys;
      while (keys.size() < config.hard_keys) {
        const int k = rand_token();
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
      }
      std::vector<std::vector<int>> responses;
      responses.reserve(keys.size());
      for (std::size_t k = 0; k < keys.size(); ++k) responses.push_back(rand_seq(config.response_len));

      for (std::size_t i = 0; i < config.sizes[t]; ++i) {
        const std::size_t which = static_cast<std::size_t>(rng.next_below(keys.size()));
        const std::size_t ilen =
            static_cast<std::size_t>(rng.uniform_int(static_cast<long>(config.min_instr_len),
                                                     static_cast<long>(config.max_instr_len)));
        Example ex;
        ex.instruction.assign(ilen, keys[which]);
        ex.response = responses[which];
        all.push_back(std::move(ex));
      }
    }

    Rng split_rng(derive_stream(config.seed, "split/" + ds.task_id));
    split_examples(std::move(all), split_rng, ds);
    ds.validate();
    suite.push_back(std::move(ds));
  }
  return suite;
}

namespace {

std::vector<int> parse_token_string(const std::string& s, const std::string& where) {
  std::vector<int> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      throw std::runtime_error(where + ": token '" + tok + "' is not an integer");
    }
    if (used != tok.size()) throw std::runtime_error(where + ": token '" + tok + "' is not an integer");
    if (v <= 0) throw std::runtime_error(where + ": token id " + std::to_string(v) + " (0 is reserved for padding)");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string token_string(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) s += ' ';
    s += std::to_string(ids[i]);
  }
  return s;
}

std::vector<Example> load_task_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_jsonl_suite: cannot open " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!rec.is_object() || !rec.contains("instruction") || !rec.contains("response")) {
      throw std::runtime_error(where + ": record must have 'instruction' and 'response'");
    }
    if (!rec["instruction"].is_string() || !rec["response"].is_string()) {
      throw std::runtime_error(where + ": 'instruction' and 'response' must be strings of token ids");
    }
    Example ex;
    ex.instruction = parse_token_string(rec["instruction"].get<std::string>(), where);
    ex.response = parse_token_string(rec["response"].get<std::string>(), where);
    if (ex.instruction.empty() && ex.response.empty()) {
      throw std::runtime_error(where + ": empty example");
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw std::runtime_error("load_jsonl_suite: empty task file " + path.string());
  return out;
}

}  // namespace

std::vector<TaskDataset> load_jsonl_suite(const std::string& manifest_path,
                                          const SplitFractions& fractions, std::uint64_t seed) {
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0)) {
    throw std::invalid_argument("load_jsonl_suite: split fractions must be positive");
  }
  if (std::fabs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw std::invalid_argument("load_jsonl_suite: split fractions must sum to 1");
  }

  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("load_jsonl_suite: cannot open manifest " + manifest_path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("load_jsonl_suite: manifest is not valid JSON (" + std::string(e.what()) + ")");
  }
  if (!manifest.contains("tasks") || !manifest["tasks"].is_array() || manifest["tasks"].empty()) {
    throw std::runtime_error("load_jsonl_suite: manifest must list at least one task");
  }

  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<TaskDataset> suite;
  for (const json& entry : manifest["tasks"]) {
    if (!entry.contains("task_id") || !entry.contains("file")) {
      throw std::runtime_error("load_jsonl_suite: manifest task needs 'task_id' and 'file'");
    }
    TaskDataset ds;
    ds.task_id = entry["task_id"].get<std::string>();
    fs::path file = entry["file"].get<std::string>();
    if (file.is_relative()) file = base / file;

    std::vector<Example> all = load_task_file(file);
    const std::size_t n = all.size();
    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                                           static_cast<double>(n) * fractions.val)));
    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(
                                                            static_cast<double>(n) * fractions.test)));
    if (n_val + n_test >= n) {
      throw std::runtime_error("load_jsonl_suite: task '" + ds.task_id + "' too small to split");
    }
    Rng rng(derive_stream(seed, "split/" + ds.task_id));
    std::vector<std::size_t> order = rng.permutation(n);
    for (std::size_t i = 0; i < n; ++i) {
      Example& ex = all[order[i]];
      if (i < n_val) ds.val.push_back(std::move(ex));
      else if (i < n_val + n_test) ds.test.push_back(std::move(ex));
      else ds.train.push_back(std::move(ex));
    }
    ds.validate();
    suite.push_back(std::move(ds));
  }
  return suite;
}

std::string write_jsonl_suite(const std::vector<TaskDataset>& suite, const std::string& dir,
                              const std::string& suite_id) {
  if (suite.empty()) throw std::invalid_argument("write_jsonl_suite: empty suite");
  fs::create_directories(dir);
  json manifest;
  manifest["suite_id"] = suite_id;
  manifest["tasks"] = json::array();

  for (const TaskDataset& ds : suite) {
    const std::string filename = ds.task_id + ".jsonl";
    std::ofstream out(fs::path(dir) / filename);
    if (!out) throw std::runtime_error("write_jsonl_suite: cannot write " + filename);
    for (const auto* part : {&ds.train, &ds.val, &ds.test}) {
      for (const Example& ex : *part) {
        json rec;
        rec["instruction"] = token_string(ex.instruction);
        rec["response"] = token_string(ex.response);
        out << rec.dump() << "\n";
      }
    }
    json entry;
    entry["task_id"] = ds.task_id;
    entry["file"] = filename;
    entry["instance_count"] = ds.train.size() + ds.val.size() + ds.test.size();
    manifest["tasks"].push_back(entry);
  }

  const fs::path manifest_path = fs::path(dir) / "manifest.json";
  std::ofstream out(manifest_path);
  out << manifest.dump(2) << "\n";
  return manifest_path.string();
}

SamplerState::SamplerState(const TaskDataset& dataset, Split split, std::uint64_t stream_seed, bool iid)
    : split_(split), iid_(iid), rng_(stream_seed) {
  const std::size_t n = dataset.split(split).size();
  if (n == 0) throw std::invalid_argument("SamplerState: empty split");
  if (!iid_) order_ = rng_.permutation(n);
}

std::size_t SamplerState::next_index(std::size_t split_size) {
  if (iid_) return static_cast<std::size_t>(rng_.next_below(split_size));
  if (cursor_ >= order_.size()) {
    order_ = rng_.permutation(split_size);
    cursor_ = 0;
    ++epochs_;
  }
  return order_[cursor_++];
}

TokenBatch sample_batch(const TaskDataset& dataset, Split split, std::size_t batch_size,
                        SamplerState& state) {
  const std::vector<Example>& pool = dataset.split(split);
  if (state.split() != split) throw std::invalid_argument("sample_batch: sampler bound to another split");
  if (batch_size == 0 || batch_size > pool.size()) {
    throw std::invalid_argument("sample_batch: batch_size " + std::to_string(batch_size) +
                                " for split of " + std::to_string(pool.size()));
  }
  std::vector<std::vector<int>> rows;
  rows.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const Example& ex = pool[state.next_index(pool.size())];
    std::vector<int> row = ex.instruction;
    row.insert(row.end(), ex.response.begin(), ex.response.end());
    rows.push_back(std::move(row));
  }
  return TokenBatch::from_rows(rows);
}

long count_nonpad_tokens(const TokenBatch& batch) { return batch.nonpad_tokens(); }

std::vector<double> static_weights(const std::vector<TaskDataset>& datasets, WeightMode mode) {
  if (datasets.empty()) throw std::invalid_argument("static_weights: no datasets");
  const std::size_t t = datasets.size();
  std::vector<double> w(t, 0.0);
  if (mode == WeightMode::uniform) {
    for (double& x : w) x = 1.0 / static_cast<double>(t);
    return w;
  }
  std::vector<long> sizes(t);
  for (std::size_t i = 0; i < t; ++i) sizes[i] = static_cast<long>(datasets[i].train_size());
  return proportional_from_counts(sizes);
}

std::vector<CountEntry> manifest_instance_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest_instance_counts: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest_instance_counts: invalid JSON (" + std::string(e.what()) + ")");
  }
  const char* list_key = doc.contains("tasks") ? "tasks" : "categories";
  const char* name_key = doc.contains("tasks") ? "task_id" : "category";
  if (!doc.contains(list_key) || !doc[list_key].is_array()) {
    throw std::runtime_error("manifest_instance_counts: no 'tasks' or 'categories' array in " + path);
  }
  std::vector<CountEntry> out;
  for (const json& entry : doc[list_key]) {
    if (!entry.contains("instance_count")) {
      throw std::runtime_error("manifest_instance_counts: entry without instance_count in " + path);
    }
    CountEntry ce;
    ce.name = entry.value(name_key, std::string("?"));
    ce.instance_count = entry.at("instance_count").get<long>();
    out.push_back(std::move(ce));
  }
  if (out.empty()) throw std::runtime_error("manifest_instance_counts: empty list in " + path);
  return out;
}

std::vector<double> proportional_from_counts(const std::vector<long>& counts) {
  if (counts.empty()) throw std::invalid_argument("proportional_from_counts: no counts");
  double total = 0.0;
  for (const long c : counts) {
    if (c <= 0) throw std::invalid_argument("proportional_from_counts: counts must be positive");
    total += static_cast<double>(c);
  }
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / total;
  return w;
}

}  // namespace adaptmix
