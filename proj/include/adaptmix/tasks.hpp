#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaptmix/model.hpp"
#include "adaptmix/rng.hpp"

namespace adaptmix {

struct Example {
  std::vector<int> instruction;
  std::vector<int> response;

  std::size_t token_count() const { return instruction.size() + response.size(); }
};

enum class Split { train, val, test };
const char* split_name(Split s);

struct TaskDataset {
  std::string task_id;
  std::vector<Example> train;
  std::vector<Example> val;
  std::vector<Example> test;

  std::size_t train_size() const { return train.size(); }
  long total_train_tokens() const;
  const std::vector<Example>& split(Split s) const;
  void validate() const;  // non-empty splits, no pad ids
};

enum class TaskDifficulty { easy, hard };

// Desk-scale synthetic suite. Easy tasks are single-mapping echo tasks
// that saturate quickly; hard tasks are keyed-substitution tasks whose
// response depends on a key token, learnable but only with many examples.
struct SuiteConfig {
  std::size_t num_tasks = 2;
  std::vector<std::size_t> sizes;               // per task
  std::vector<TaskDifficulty> difficulty;       // per task
  int vocab_size = 32;
  std::size_t min_instr_len = 4;
  std::size_t max_instr_len = 8;
  std::size_t response_len = 6;
  std::size_t hard_keys = 16;                   // distinct keys per hard task
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<TaskDataset> generate_suite(const SuiteConfig& config);

// Task file format: JSON lines, one object per example with keys
// "instruction" and "response", each a string of space-separated positive
// integer token ids (0 is reserved for padding and rejected).
//
// The manifest is a JSON document:
//   { "suite_id": "...", "tasks": [ {"task_id": ..., "file": ...,
//     "category": ..., "instance_count": ...}, ... ] }
// with file paths resolved relative to the manifest location.
struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

std::vector<TaskDataset> load_jsonl_suite(const std::string& manifest_path,
                                          const SplitFractions& fractions, std::uint64_t seed);

// Writes one JSONL file per task plus a manifest; returns the manifest path.
std::string write_jsonl_suite(const std::vector<TaskDataset>& suite, const std::string& dir,
                              const std::string& suite_id);

// Epoch-cycling minibatch cursor over one task split: every example is
// visited exactly once per epoch before the permutation is redrawn. The
// iid flag switches to with-replacement draws instead.
class SamplerState {
 public:
  SamplerState(const TaskDataset& dataset, Split split, std::uint64_t stream_seed, bool iid = false);

  std::size_t next_index(std::size_t split_size);
  long epochs_completed() const { return epochs_; }
  Split split() const { return split_; }

 private:
  Split split_;
  bool iid_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  long epochs_ = 0;
};

// Draws batch_size examples (instruction+response concatenated, left-padded
// to the batch max) and advances the sampler. batch_size must not exceed
// the split size.
TokenBatch sample_batch(const TaskDataset& dataset, Split split, std::size_t batch_size,
                        SamplerState& state);

long count_nonpad_tokens(const TokenBatch& batch);

enum class WeightMode { uniform, proportional };

// Static task-sampling distributions: 1/T each, or train-set-size shares.
std::vector<double> static_weights(const std::vector<TaskDataset>& datasets, WeightMode mode);
std::vector<double> proportional_from_counts(const std::vector<long>& counts);

// Task names and instance counts from a suite manifest's metadata (or a
// category-statistics file with a "categories" array). Feeding the counts
// into proportional_from_counts replays corpus-level proportional
// weighting without the corpus.
struct CountEntry {
  std::string name;
  long instance_count = 0;
};
std::vector<CountEntry> manifest_instance_counts(const std::string& path);

}  // namespace adaptmix
