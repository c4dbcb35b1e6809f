#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "adaptmix/tasks.hpp"

using namespace adaptmix;
namespace fs = std::filesystem;

#ifndef ADAPTMIX_SOURCE_DIR
#define ADAPTMIX_SOURCE_DIR "."
#endif

namespace {

SuiteConfig two_task_config(std::uint64_t seed = 0) {
  SuiteConfig cfg;
  cfg.num_tasks = 2;
  cfg.sizes = {100, 50};
  cfg.difficulty = {TaskDifficulty::easy, TaskDifficulty::hard};
  cfg.vocab_size = 32;
  cfg.seed = seed;
  return cfg;
}

std::vector<std::vector<int>> all_token_rows(const TaskDataset& ds) {
  std::vector<std::vector<int>> rows;
  for (const auto* part : {&ds.train, &ds.val, &ds.test}) {
    for (const Example& ex : *part) {
      std::vector<int> row = ex.instruction;
      row.insert(row.end(), ex.response.begin(), ex.response.end());
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("adaptmix_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("suite generation is deterministic and splits sizes as configured") {
  const SuiteConfig cfg = two_task_config();
  const auto a = generate_suite(cfg);
  const auto b = generate_suite(cfg);
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(all_token_rows(a[i]) == all_token_rows(b[i]));
  }

  // 10% val / 10% test reservations, minimum one example.
  CHECK(a[0].train_size() == 100 - 10 - 10);
  CHECK(a[0].val.size() == 10);
  CHECK(a[0].test.size() == 10);
  CHECK(a[1].train_size() == 50 - 5 - 5);

  const auto c = generate_suite(two_task_config(1));
  CHECK(all_token_rows(a[0]) != all_token_rows(c[0]));
}

TEST_CASE("total_train_tokens equals a brute-force recount") {
  const auto suite = generate_suite(two_task_config(3));
  for (const TaskDataset& ds : suite) {
    long recount = 0;
    for (const Example& ex : ds.train) {
      recount += static_cast<long>(ex.instruction.size() + ex.response.size());
    }
    CHECK(ds.total_train_tokens() == recount);
  }
}

TEST_CASE("suite config validation") {
  SuiteConfig cfg = two_task_config();
  cfg.sizes = {100};
  CHECK_THROWS(generate_suite(cfg));
  cfg = two_task_config();
  cfg.sizes[1] = 2;
  CHECK_THROWS(generate_suite(cfg));
  cfg = two_task_config();
  cfg.min_instr_len = 9;
  cfg.max_instr_len = 8;
  CHECK_THROWS(generate_suite(cfg));
}

TEST_CASE("easy tasks are single-mapping, hard tasks carry multiple keys") {
  SuiteConfig cfg = two_task_config(7);
  cfg.hard_keys = 8;
  const auto suite = generate_suite(cfg);

  std::set<std::vector<int>> easy_responses, hard_responses;
  for (const Example& ex : suite[0].train) easy_responses.insert(ex.response);
  for (const Example& ex : suite[1].train) hard_responses.insert(ex.response);
  CHECK(easy_responses.size() == 1);
  CHECK(hard_responses.size() > 1);
}

TEST_CASE("samplers cycle epochs without replacement") {
  const auto suite = generate_suite(two_task_config(11));
  const TaskDataset& ds = suite[1];
  SamplerState state(ds, Split::train, 42);

  // Over 5 epochs each example appears exactly 5 times.
  const std::size_t n = ds.train_size();
  std::map<std::size_t, int> counts;
  for (std::size_t draw = 0; draw < 5 * n; ++draw) counts[state.next_index(n)]++;
  CHECK(counts.size() == n);
  for (const auto& [idx, count] : counts) CHECK(count == 5);
  CHECK(state.epochs_completed() == 4);  // fifth epoch not yet exhausted
}

TEST_CASE("full-split batches reshuffle between epochs") {
  const auto suite = generate_suite(two_task_config(13));
  const TaskDataset& ds = suite[0];
  SamplerState state(ds, Split::val, 5);
  const std::size_t n = ds.val.size();

  std::vector<std::size_t> first, second;
  for (std::size_t i = 0; i < n; ++i) first.push_back(state.next_index(n));
  for (std::size_t i = 0; i < n; ++i) second.push_back(state.next_index(n));
  auto sorted_first = first, sorted_second = second;
  std::sort(sorted_first.begin(), sorted_first.end());
  std::sort(sorted_second.begin(), sorted_second.end());
  CHECK(sorted_first == sorted_second);  // same coverage
  CHECK(first != second);                // different order
}

TEST_CASE("same-seed samplers produce identical batch sequences") {
  const auto suite = generate_suite(two_task_config(17));
  SamplerState s1(suite[0], Split::train, 99);
  SamplerState s2(suite[0], Split::train, 99);
  for (int i = 0; i < 10; ++i) {
    const TokenBatch a = sample_batch(suite[0], Split::train, 4, s1);
    const TokenBatch b = sample_batch(suite[0], Split::train, 4, s2);
    CHECK(a.ids == b.ids);
    CHECK(a.mask == b.mask);
  }
}

TEST_CASE("sample_batch validates sizes and split binding") {
  const auto suite = generate_suite(two_task_config(19));
  SamplerState state(suite[0], Split::train, 1);
  CHECK_THROWS(sample_batch(suite[0], Split::train, suite[0].train_size() + 1, state));
  CHECK_THROWS(sample_batch(suite[0], Split::val, 1, state));
  CHECK_THROWS(sample_batch(suite[0], Split::train, 0, state));
}

TEST_CASE("count_nonpad_tokens counts exactly the mask") {
  const TokenBatch batch = TokenBatch::from_rows({{1, 2, 3}, {4, 5, 6, 7, 8}});
  CHECK(count_nonpad_tokens(batch) == 8);
  double mask_sum = 0.0;
  for (const double m : batch.mask) mask_sum += m;
  CHECK(static_cast<long>(mask_sum) == count_nonpad_tokens(batch));
  // Left padding: first row leads with pads.
  CHECK(batch.id_at(0, 0) == kPadId);
  CHECK(batch.id_at(0, 2) == 1);

  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<int>> rows(2 + rng.next_below(3));
    for (auto& row : rows) {
      row.resize(1 + rng.next_below(6));
      for (int& id : row) id = 1 + static_cast<int>(rng.next_below(30));
    }
    const TokenBatch b = TokenBatch::from_rows(rows);
    double s = 0.0;
    for (const double m : b.mask) s += m;
    CHECK(static_cast<long>(s) == count_nonpad_tokens(b));
  }
}

TEST_CASE("static weights: uniform, proportional, and permutation equivariance") {
  const auto suite = generate_suite(two_task_config(29));

  const auto uniform = static_weights(suite, WeightMode::uniform);
  CHECK(uniform[0] == doctest::Approx(0.5));
  CHECK(uniform[1] == doctest::Approx(0.5));

  const auto prop30_10 = proportional_from_counts({30, 10});
  CHECK(prop30_10[0] == doctest::Approx(0.75));
  CHECK(prop30_10[1] == doctest::Approx(0.25));

  const auto equal4 = proportional_from_counts({7, 7, 7, 7});
  for (const double w : equal4) CHECK(w == doctest::Approx(0.25));

  const auto prop = static_weights(suite, WeightMode::proportional);
  double sum = 0.0;
  for (const double w : prop) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  // Permutation equivariance.
  std::vector<TaskDataset> reversed = {suite[1], suite[0]};
  const auto prop_rev = static_weights(reversed, WeightMode::proportional);
  CHECK(prop[0] == doctest::Approx(prop_rev[1]).epsilon(1e-12));
  CHECK(prop[1] == doctest::Approx(prop_rev[0]).epsilon(1e-12));

  CHECK_THROWS(static_weights({}, WeightMode::uniform));
  CHECK_THROWS(proportional_from_counts({0, 5}));
}

TEST_CASE("category metadata reproduces the translation share of instances") {
  const fs::path path = fs::path(ADAPTMIX_SOURCE_DIR) / "data" / "natural_instructions_categories.json";
  const std::vector<CountEntry> entries = manifest_instance_counts(path.string());
  REQUIRE(entries.size() == 20);
  REQUIRE(entries[0].name == "Translation");
  REQUIRE(entries[0].instance_count == 1182213);

  std::vector<long> counts;
  long sum = 0;
  for (const CountEntry& e : entries) {
    counts.push_back(e.instance_count);
    sum += e.instance_count;
  }
  CHECK(sum == 3998997);

  const auto weights = proportional_from_counts(counts);
  CHECK(weights[0] == doctest::Approx(1182213.0 / 3998997.0).epsilon(1e-12));
}

TEST_CASE("manifest_instance_counts also reads suite manifests") {
  const fs::path dir = temp_dir("counts");
  {
    std::ofstream manifest(dir / "manifest.json");
    manifest << R"({"tasks": [{"task_id": "a", "file": "a.jsonl", "instance_count": 30},
                              {"task_id": "b", "file": "b.jsonl", "instance_count": 10}]})";
  }
  const auto entries = manifest_instance_counts((dir / "manifest.json").string());
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].name == "a");
  const auto weights = proportional_from_counts({entries[0].instance_count, entries[1].instance_count});
  CHECK(weights[0] == doctest::Approx(0.75));
  {
    std::ofstream manifest(dir / "manifest.json");
    manifest << R"({"tasks": [{"task_id": "a", "file": "a.jsonl"}]})";
  }
  CHECK_THROWS(manifest_instance_counts((dir / "manifest.json").string()));
  fs::remove_all(dir);
}

TEST_CASE("jsonl round-trip preserves token sequences") {
  const auto suite = generate_suite(two_task_config(31));
  const fs::path dir = temp_dir("roundtrip");
  const std::string manifest = write_jsonl_suite(suite, dir.string(), "rt");

  const auto reloaded = load_jsonl_suite(manifest, SplitFractions{}, 0);
  REQUIRE(reloaded.size() == suite.size());
  for (std::size_t i = 0; i < suite.size(); ++i) {
    auto orig = all_token_rows(suite[i]);
    auto back = all_token_rows(reloaded[i]);
    std::sort(orig.begin(), orig.end());
    std::sort(back.begin(), back.end());
    CHECK(orig == back);
  }
  fs::remove_all(dir);
}

TEST_CASE("jsonl split fractions: 10 lines at (0.8,0.1,0.1) give 8/1/1") {
  const fs::path dir = temp_dir("fractions");
  {
    std::ofstream task(dir / "t.jsonl");
    for (int i = 1; i <= 10; ++i) {
      task << R"({"instruction": ")" << i << R"(", "response": ")" << i + 1 << R"("})" << "\n";
    }
    std::ofstream manifest(dir / "manifest.json");
    manifest << R"({"tasks": [{"task_id": "t", "file": "t.jsonl"}]})";
  }
  const auto suite = load_jsonl_suite((dir / "manifest.json").string(), SplitFractions{0.8, 0.1, 0.1}, 7);
  REQUIRE(suite.size() == 1);
  CHECK(suite[0].train.size() == 8);
  CHECK(suite[0].val.size() == 1);
  CHECK(suite[0].test.size() == 1);

  // Splits are disjoint and their union is the source data.
  std::multiset<std::vector<int>> instructions;
  for (const auto* part : {&suite[0].train, &suite[0].val, &suite[0].test}) {
    for (const Example& ex : *part) instructions.insert(ex.instruction);
  }
  CHECK(instructions.size() == 10);
  std::set<std::vector<int>> unique(instructions.begin(), instructions.end());
  CHECK(unique.size() == 10);
  fs::remove_all(dir);
}

TEST_CASE("jsonl loader reports malformed lines with file and line number") {
  const fs::path dir = temp_dir("malformed");
  {
    std::ofstream task(dir / "bad.jsonl");
    task << R"({"instruction": "1 2", "response": "3"})" << "\n";
    task << R"({"instruction": "1 2"})" << "\n";  // missing response
    std::ofstream manifest(dir / "manifest.json");
    manifest << R"({"tasks": [{"task_id": "bad", "file": "bad.jsonl"}]})";
  }
  try {
    load_jsonl_suite((dir / "manifest.json").string(), SplitFractions{}, 0);
    FAIL("expected malformed line to be rejected");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.jsonl:2") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("jsonl loader rejects pad ids, non-integers and empty tasks") {
  const fs::path dir = temp_dir("badtokens");
  const auto write_and_load = [&](const std::string& line) {
    {
      std::ofstream task(dir / "t.jsonl");
      task << line << "\n";
      std::ofstream manifest(dir / "manifest.json");
      manifest << R"({"tasks": [{"task_id": "t", "file": "t.jsonl"}]})";
    }
    return load_jsonl_suite((dir / "manifest.json").string(), SplitFractions{}, 0);
  };
  CHECK_THROWS(write_and_load(R"({"instruction": "0 1", "response": "2"})"));
  CHECK_THROWS(write_and_load(R"({"instruction": "a b", "response": "2"})"));
  CHECK_THROWS(write_and_load(R"({"instruction": 5, "response": "2"})"));
  {
    std::ofstream task(dir / "t.jsonl");
    std::ofstream manifest(dir / "manifest.json");
    manifest << R"({"tasks": [{"task_id": "t", "file": "t.jsonl"}]})";
  }
  CHECK_THROWS(load_jsonl_suite((dir / "manifest.json").string(), SplitFractions{}, 0));
  fs::remove_all(dir);
}

TEST_CASE("iid sampler draws with replacement deterministically") {
  const auto suite = generate_suite(two_task_config(37));
  SamplerState a(suite[0], Split::train, 4, /*iid=*/true);
  SamplerState b(suite[0], Split::train, 4, /*iid=*/true);
  std::map<std::size_t, int> counts;
  const std::size_t n = suite[0].train_size();
  for (int i = 0; i < 200; ++i) {
    const std::size_t idx = a.next_index(n);
    CHECK(idx == b.next_index(n));
    counts[idx]++;
  }
  CHECK(a.epochs_completed() == 0);
}
