#include "adaptmix/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "adaptmix/metrics.hpp"
#include "adaptmix/run_record.hpp"
#include "adaptmix/svg.hpp"

namespace adaptmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json* find_ptr(const json& j, const char* key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double require_number(const json& j, const std::string& pointer) {
  if (!j.is_number()) throw ConfigError(pointer, "expected a number");
  return j.get<double>();
}

long require_integer(const json& j, const std::string& pointer) {
  if (!j.is_number_integer()) throw ConfigError(pointer, "expected an integer");
  return j.get<long>();
}

std::string require_string(const json& j, const std::string& pointer) {
  if (!j.is_string()) throw ConfigError(pointer, "expected a string");
  return j.get<std::string>();
}

std::string fraction_dir_name(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", fraction);
  return std::string(buf);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");

  ExperimentConfig cfg;

  if (const json* v = find_ptr(doc, "schema_version")) {
    cfg.schema_version = static_cast<int>(require_integer(*v, "/schema_version"));
    if (cfg.schema_version != 1) throw ConfigError("/schema_version", "unsupported version");
  }

  const json* suite = find_ptr(doc, "suite");
  if (!suite || !suite->is_object()) throw ConfigError("/suite", "required object");
  const json* synthetic = find_ptr(*suite, "synthetic");
  const json* manifest = find_ptr(*suite, "manifest");
  if ((synthetic == nullptr) == (manifest == nullptr)) {
    throw ConfigError("/suite", "exactly one of 'synthetic' or 'manifest' is required");
  }
  if (manifest) {
    cfg.manifest_path = require_string(*manifest, "/suite/manifest");
  } else {
    if (!synthetic->is_object()) throw ConfigError("/suite/synthetic", "expected an object");
    SuiteConfig sc;
    const json& s = *synthetic;
    if (const json* v = find_ptr(s, "num_tasks")) sc.num_tasks = static_cast<std::size_t>(require_integer(*v, "/suite/synthetic/num_tasks"));
    if (const json* v = find_ptr(s, "vocab_size")) sc.vocab_size = static_cast<int>(require_integer(*v, "/suite/synthetic/vocab_size"));
    if (const json* v = find_ptr(s, "min_instr_len")) sc.min_instr_len = static_cast<std::size_t>(require_integer(*v, "/suite/synthetic/min_instr_len"));
    if (const json* v = find_ptr(s, "max_instr_len")) sc.max_instr_len = static_cast<std::size_t>(require_integer(*v, "/suite/synthetic/max_instr_len"));
    if (const json* v = find_ptr(s, "response_len")) sc.response_len = static_cast<std::size_t>(require_integer(*v, "/suite/synthetic/response_len"));
    if (const json* v = find_ptr(s, "hard_keys")) sc.hard_keys = static_cast<std::size_t>(require_integer(*v, "/suite/synthetic/hard_keys"));
    if (const json* v = find_ptr(s, "seed")) sc.seed = static_cast<std::uint64_t>(require_integer(*v, "/suite/synthetic/seed"));

    const json* sizes = find_ptr(s, "sizes");
    if (!sizes || !sizes->is_array() || sizes->empty()) {
      throw ConfigError("/suite/synthetic/sizes", "required non-empty array");
    }
    for (std::size_t i = 0; i < sizes->size(); ++i) {
      const long v = require_integer((*sizes)[i], "/suite/synthetic/sizes/" + std::to_string(i));
      if (v < 3) throw ConfigError("/suite/synthetic/sizes/" + std::to_string(i), "must be >= 3");
      sc.sizes.push_back(static_cast<std::size_t>(v));
    }
    const json* diff = find_ptr(s, "difficulty");
    if (!diff || !diff->is_array() || diff->size() != sizes->size()) {
      throw ConfigError("/suite/synthetic/difficulty", "required array matching 'sizes' length");
    }
    for (std::size_t i = 0; i < diff->size(); ++i) {
      const std::string d = require_string((*diff)[i], "/suite/synthetic/difficulty/" + std::to_string(i));
      if (d == "easy") sc.difficulty.push_back(TaskDifficulty::easy);
      else if (d == "hard") sc.difficulty.push_back(TaskDifficulty::hard);
      else throw ConfigError("/suite/synthetic/difficulty/" + std::to_string(i), "must be 'easy' or 'hard'");
    }
    sc.num_tasks = sc.sizes.size();
    try {
      sc.validate();
    } catch (const std::exception& e) {
      throw ConfigError("/suite/synthetic", e.what());
    }
    cfg.synthetic_suite = std::move(sc);
  }

  if (const json* v = find_ptr(doc, "suite_id")) cfg.suite_id = require_string(*v, "/suite_id");
  if (cfg.suite_id.empty()) {
    cfg.suite_id = cfg.synthetic_suite ? "synthetic-" + std::to_string(cfg.synthetic_suite->seed) : "";
  }

  if (const json* m = find_ptr(doc, "model")) {
    if (!m->is_object()) throw ConfigError("/model", "expected an object");
    if (const json* v = find_ptr(*m, "vocab_size")) cfg.model.vocab_size = static_cast<int>(require_integer(*v, "/model/vocab_size"));
    if (const json* v = find_ptr(*m, "embed_dim")) cfg.model.embed_dim = static_cast<int>(require_integer(*v, "/model/embed_dim"));
    if (const json* v = find_ptr(*m, "hidden_dim")) cfg.model.hidden_dim = static_cast<int>(require_integer(*v, "/model/hidden_dim"));
    if (const json* v = find_ptr(*m, "context_len")) cfg.model.context_len = static_cast<int>(require_integer(*v, "/model/context_len"));
    if (const json* v = find_ptr(*m, "seed")) cfg.model.seed = static_cast<std::uint64_t>(require_integer(*v, "/model/seed"));
    try {
      cfg.model.validate();
    } catch (const std::exception& e) {
      throw ConfigError("/model", e.what());
    }
  }

  const json* methods = find_ptr(doc, "methods");
  if (!methods || !methods->is_array() || methods->empty()) {
    throw ConfigError("/methods", "required non-empty array");
  }
  for (std::size_t i = 0; i < methods->size(); ++i) {
    const std::string name = require_string((*methods)[i], "/methods/" + std::to_string(i));
    const auto m = method_from_name(name);
    if (!m) throw ConfigError("/methods/" + std::to_string(i), "unknown method '" + name + "'");
    cfg.methods.push_back(*m);
  }

  const json* budgets = find_ptr(doc, "budget_fractions");
  if (!budgets || !budgets->is_array() || budgets->empty()) {
    throw ConfigError("/budget_fractions", "required non-empty array");
  }
  for (std::size_t i = 0; i < budgets->size(); ++i) {
    const double f = require_number((*budgets)[i], "/budget_fractions/" + std::to_string(i));
    if (!(f > 0.0 && f <= 1.0)) {
      throw ConfigError("/budget_fractions/" + std::to_string(i), "must be in (0, 1]");
    }
    cfg.budget_fractions.push_back(f);
  }

  const json* seeds = find_ptr(doc, "seeds");
  if (!seeds || !seeds->is_array() || seeds->empty()) throw ConfigError("/seeds", "required non-empty array");
  for (std::size_t i = 0; i < seeds->size(); ++i) {
    const long v = require_integer((*seeds)[i], "/seeds/" + std::to_string(i));
    if (v < 0) throw ConfigError("/seeds/" + std::to_string(i), "must be >= 0");
    cfg.seeds.push_back(static_cast<std::uint64_t>(v));
  }

  if (const json* v = find_ptr(doc, "out_dir")) cfg.out_dir = require_string(*v, "/out_dir");

  if (const json* h = find_ptr(doc, "hyper")) {
    if (!h->is_object()) throw ConfigError("/hyper", "expected an object");
    if (const json* v = find_ptr(*h, "tau")) cfg.hyper.tau = require_number(*v, "/hyper/tau");
    if (const json* v = find_ptr(*h, "entropy_weight")) cfg.hyper.entropy_weight = require_number(*v, "/hyper/entropy_weight");
    if (const json* v = find_ptr(*h, "probe_lr")) cfg.hyper.probe_lr = require_number(*v, "/hyper/probe_lr");
    if (const json* v = find_ptr(*h, "meta_lr")) cfg.hyper.meta_lr = require_number(*v, "/hyper/meta_lr");
    if (const json* v = find_ptr(*h, "logit_clip")) cfg.hyper.logit_clip = require_number(*v, "/hyper/logit_clip");
    try {
      cfg.hyper.validate();
    } catch (const std::exception& e) {
      throw ConfigError("/hyper", e.what());
    }
  }

  if (const json* a = find_ptr(doc, "adamw")) {
    if (!a->is_object()) throw ConfigError("/adamw", "expected an object");
    if (const json* v = find_ptr(*a, "beta1")) cfg.adamw.beta1 = require_number(*v, "/adamw/beta1");
    if (const json* v = find_ptr(*a, "beta2")) cfg.adamw.beta2 = require_number(*v, "/adamw/beta2");
    if (const json* v = find_ptr(*a, "eps")) cfg.adamw.eps = require_number(*v, "/adamw/eps");
    if (const json* v = find_ptr(*a, "weight_decay")) cfg.adamw.weight_decay = require_number(*v, "/adamw/weight_decay");
    try {
      cfg.adamw.validate();
    } catch (const std::exception& e) {
      throw ConfigError("/adamw", e.what());
    }
  }

  if (const json* v = find_ptr(doc, "peak_lr")) cfg.peak_lr = require_number(*v, "/peak_lr");
  if (!(cfg.peak_lr > 0.0)) throw ConfigError("/peak_lr", "must be positive");
  if (const json* v = find_ptr(doc, "warmup_steps")) cfg.warmup_steps = require_integer(*v, "/warmup_steps");
  if (cfg.warmup_steps < 0) throw ConfigError("/warmup_steps", "must be >= 0");
  if (const json* v = find_ptr(doc, "floor_fraction")) cfg.floor_fraction = require_number(*v, "/floor_fraction");
  if (!(cfg.floor_fraction > 0.0 && cfg.floor_fraction <= 1.0)) {
    throw ConfigError("/floor_fraction", "must be in (0, 1]");
  }
  if (const json* v = find_ptr(doc, "grad_clip")) cfg.grad_clip = require_number(*v, "/grad_clip");
  if (cfg.grad_clip < 0.0) throw ConfigError("/grad_clip", "must be >= 0");

  const auto size_field = [&doc](const char* key, std::size_t& target) {
    if (const json* v = find_ptr(doc, key)) {
      const long x = require_integer(*v, std::string("/") + key);
      if (x < 0) throw ConfigError(std::string("/") + key, "must be >= 0");
      target = static_cast<std::size_t>(x);
    }
  };
  size_field("tasks_per_step", cfg.tasks_per_step);
  size_field("adapt_batch_size", cfg.adapt_batch_size);
  size_field("adapt_accumulation_steps", cfg.adapt_accumulation_steps);
  size_field("sft_batch_size", cfg.sft_batch_size);
  size_field("sft_accumulation_steps", cfg.sft_accumulation_steps);
  size_field("val_batch_size", cfg.val_batch_size);

  if (const json* v = find_ptr(doc, "log_interval_tokens")) {
    cfg.log_interval_tokens = require_integer(*v, "/log_interval_tokens");
    if (cfg.log_interval_tokens < 0) throw ConfigError("/log_interval_tokens", "must be >= 0");
  }
  if (const json* v = find_ptr(doc, "adopt_probe")) {
    if (!v->is_boolean()) throw ConfigError("/adopt_probe", "expected a boolean");
    cfg.adopt_probe = v->get<bool>();
  }
  if (const json* v = find_ptr(doc, "iid_sampling")) {
    if (!v->is_boolean()) throw ConfigError("/iid_sampling", "expected a boolean");
    cfg.iid_sampling = v->get<bool>();
  }
  if (const json* v = find_ptr(doc, "max_epochs")) {
    cfg.max_epochs = require_integer(*v, "/max_epochs");
    if (cfg.max_epochs < 0) throw ConfigError("/max_epochs", "must be >= 0");
  }

  if (const json* v = find_ptr(doc, "ablation_lambdas")) {
    if (!v->is_array() || v->empty()) throw ConfigError("/ablation_lambdas", "expected a non-empty array");
    cfg.ablation_lambdas.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const double l = require_number((*v)[i], "/ablation_lambdas/" + std::to_string(i));
      if (l < 0.0) throw ConfigError("/ablation_lambdas/" + std::to_string(i), "must be >= 0");
      cfg.ablation_lambdas.push_back(l);
    }
  }

  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = parse_experiment_config(buf.str());
  // Manifest paths resolve relative to the config file.
  if (cfg.manifest_path) {
    fs::path mp = *cfg.manifest_path;
    if (mp.is_relative()) cfg.manifest_path = (fs::path(path).parent_path() / mp).string();
  }
  return cfg;
}

std::vector<TaskDataset> build_suite(const ExperimentConfig& config) {
  if (config.synthetic_suite) return generate_suite(*config.synthetic_suite);
  return load_jsonl_suite(*config.manifest_path, SplitFractions{}, config.model.seed);
}

void apply_seed_override_from_env(ExperimentConfig& config) {
  const char* env = std::getenv("ADAPTMIX_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') {
    throw std::runtime_error("ADAPTMIX_SEED must be an integer, got '" + std::string(env) + "'");
  }
  config.seeds = {static_cast<std::uint64_t>(v)};
}

RunConfig cell_run_config(const ExperimentConfig& config, const std::vector<TaskDataset>& suite,
                          Method method, double budget_fraction, std::uint64_t seed) {
  long suite_tokens = 0;
  for (const TaskDataset& ds : suite) suite_tokens += ds.total_train_tokens();

  RunConfig rc;
  rc.method = method;
  rc.budget_tokens = std::max<long>(1, std::lround(budget_fraction * static_cast<double>(suite_tokens)));
  rc.suite_id = config.suite_id;
  rc.model = config.model;
  rc.hyper = config.hyper;
  rc.adamw = config.adamw;
  rc.peak_lr = config.peak_lr;
  rc.warmup_steps = config.warmup_steps;
  rc.floor_fraction = config.floor_fraction;
  rc.grad_clip = config.grad_clip;
  rc.tasks_per_step = std::min(config.tasks_per_step, suite.size());
  if (method == Method::adapt) {
    rc.batch_size = config.adapt_batch_size;
    rc.accumulation_steps = config.adapt_accumulation_steps;
  } else {
    rc.batch_size = config.sft_batch_size;
    rc.accumulation_steps = config.sft_accumulation_steps;
  }
  rc.val_batch_size = config.val_batch_size;
  rc.log_interval_tokens = config.log_interval_tokens;
  rc.adopt_probe = config.adopt_probe;
  rc.iid_sampling = config.iid_sampling;
  rc.max_epochs = config.max_epochs;
  rc.seed = seed;
  return rc;
}

bool GridOutcome::all_ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
}

namespace {

struct SummaryRow {
  CellResult cell;
  double final_mean_val_loss = 0.0;
  double auc_value = 0.0;
  std::optional<long> ttm;
  std::optional<double> mid_loss;
  double final_n_eff = 0.0;
  double final_entropy = 0.0;
};

}  // namespace

GridOutcome run_experiment_grid(const ExperimentConfig& config, unsigned workers) {
  const std::vector<TaskDataset> suite = build_suite(config);

  GridOutcome outcome;
  outcome.suite_id = config.suite_id;

  struct Cell {
    Method method;
    double fraction;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (const double fraction : config.budget_fractions) {
    for (const Method method : config.methods) {
      for (const std::uint64_t seed : config.seeds) cells.push_back({method, fraction, seed});
    }
  }

  std::vector<CellResult> results(cells.size());
  std::vector<BudgetedRunRecord> records(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell& cell = cells[i];
      CellResult res;
      res.method = cell.method;
      res.budget_fraction = cell.fraction;
      res.seed = cell.seed;
      try {
        const RunConfig rc = cell_run_config(config, suite, cell.method, cell.fraction, cell.seed);
        res.budget_tokens = rc.budget_tokens;
        BudgetedRunRecord record = run_method(rc, suite);

        const fs::path dir =
            fs::path(config.out_dir) / config.suite_id / fraction_dir_name(cell.fraction);
        {
          const std::lock_guard<std::mutex> lock(io_mutex);
          fs::create_directories(dir);
        }
        const fs::path path =
            dir / (std::string(method_name(cell.method)) + "-seed" + std::to_string(cell.seed) + ".runlog");
        write_run_record(record, path.string());
        res.record_path = path.string();
        res.ok = true;
        records[i] = std::move(record);
      } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
      }
      results[i] = std::move(res);
    }
  };

  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, cells.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Grid summary: per (fraction, seed) group, the tokens-to-match threshold
  // is the best loss over both static baselines' full curves.
  std::ostringstream csv;
  csv << "suite,method,budget_fraction,seed,total_tokens,final_mean_val_loss,auc,tokens_to_match,"
         "mid_budget_loss,final_n_eff,final_entropy\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellResult& res = results[i];
    outcome.cells.push_back(res);
    if (!res.ok) continue;
    const BudgetedRunRecord& rec = records[i];
    const LossCurve curve = LossCurve::from_record(rec);

    std::optional<double> sft_best;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!results[j].ok || cells[j].method == Method::adapt) continue;
      if (cells[j].fraction != cells[i].fraction || cells[j].seed != cells[i].seed) continue;
      const double b = best_loss(LossCurve::from_record(records[j]));
      if (!sft_best || b < *sft_best) sft_best = b;
    }

    std::optional<long> ttm;
    if (sft_best) ttm = tokens_to_match(curve, *sft_best);
    std::optional<double> mid;
    if (curve.points.back().first >= rec.config.budget_tokens / 2) {
      mid = mid_budget_loss(curve, rec.config.budget_tokens);
    }

    csv << outcome.suite_id << ',' << method_name(res.method) << ',' << res.budget_fraction << ','
        << res.seed << ',' << rec.total_tokens << ',' << rec.points.back().mean_val_loss << ','
        << auc(curve) << ',' << (ttm ? std::to_string(*ttm) : std::string("not_reached")) << ','
        << (mid ? std::to_string(*mid) : std::string("")) << ',' << n_eff(rec.points.back().p) << ','
        << entropy(rec.points.back().p) << '\n';
  }

  fs::create_directories(config.out_dir);
  const fs::path summary_path = fs::path(config.out_dir) / "summary.csv";
  std::ofstream out(summary_path);
  out << csv.str();
  outcome.summary_csv_path = summary_path.string();
  return outcome;
}

namespace {

std::string run_id_from_path(const fs::path& path) {
  return path.parent_path().filename().string() + "/" + path.stem().string();
}

}  // namespace

ReportOutcome write_report(const std::string& records_dir, const std::string& out_dir,
                           const std::optional<std::string>& score_table_csv) {
  std::vector<fs::path> files;
  if (fs::exists(records_dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(records_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".runlog") files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("write_report: no .runlog files under " + records_dir);

  fs::create_directories(out_dir);
  ReportOutcome outcome;

  // Group by suite, then by budget; cross-suite comparison is refused.
  std::map<std::string, std::vector<std::pair<fs::path, BudgetedRunRecord>>> by_suite;
  for (const fs::path& f : files) {
    BudgetedRunRecord rec = read_run_record(f.string());
    by_suite[rec.config.suite_id].emplace_back(f, std::move(rec));
  }

  std::vector<RunMetricsRow> rows;
  std::ostringstream ttm_csv;
  ttm_csv << "suite,budget_tokens,run_id,method,tokens_to_match,fraction_of_budget\n";

  for (const auto& [suite_id, recs] : by_suite) {
    std::set<long> budgets;
    for (const auto& [path, rec] : recs) budgets.insert(rec.config.budget_tokens);

    for (const long budget : budgets) {
      // Best static-baseline loss over full curves, the matching threshold.
      std::optional<double> sft_best;
      for (const auto& [path, rec] : recs) {
        if (rec.config.budget_tokens != budget || rec.config.method == Method::adapt) continue;
        const double b = best_loss(LossCurve::from_record(rec));
        if (!sft_best || b < *sft_best) sft_best = b;
      }
      std::optional<double> best_sft_auc;
      for (const auto& [path, rec] : recs) {
        if (rec.config.budget_tokens != budget || rec.config.method == Method::adapt) continue;
        const double a = auc(LossCurve::from_record(rec));
        if (!best_sft_auc || a < *best_sft_auc) best_sft_auc = a;
      }

      std::vector<SvgSeries> loss_series;
      for (const auto& [path, rec] : recs) {
        if (rec.config.budget_tokens != budget) continue;
        const LossCurve curve = LossCurve::from_record(rec);

        RunMetricsRow row;
        row.run_id = suite_id + "/" + run_id_from_path(path);
        row.method = method_name(rec.config.method);
        row.budget = budget;
        row.auc_value = auc(curve);
        if (best_sft_auc && rec.config.method == Method::adapt) {
          row.auc_ratio_vs_best_sft = *best_sft_auc / row.auc_value;
        }
        if (sft_best) {
          row.tokens_to_match_value = tokens_to_match(curve, *sft_best);
          if (row.tokens_to_match_value) {
            ttm_csv << suite_id << ',' << budget << ',' << row.run_id << ',' << row.method << ','
                    << *row.tokens_to_match_value << ','
                    << static_cast<double>(*row.tokens_to_match_value) / static_cast<double>(budget)
                    << '\n';
          } else {
            ttm_csv << suite_id << ',' << budget << ',' << row.run_id << ',' << row.method
                    << ",not_reached,\n";
          }
        }
        if (curve.points.back().first >= budget / 2) row.mid_budget_loss_value = mid_budget_loss(curve, budget);
        const MixtureSummary ms = mixture_summary(rec);
        row.final_n_eff = ms.final_n_eff;
        row.final_entropy = ms.final_entropy;
        rows.push_back(std::move(row));

        SvgSeries series;
        series.label = std::string(method_name(rec.config.method)) + "-seed" +
                       std::to_string(rec.config.seed);
        for (const CurvePoint& pt : rec.points) {
          series.points.emplace_back(static_cast<double>(pt.tokens), pt.mean_val_loss);
        }
        loss_series.push_back(std::move(series));

        if (rec.config.method == Method::adapt) {
          std::vector<SvgSeries> mix_series;
          for (const auto& [task, traj] : mixture_summary(rec, 10).top_trajectories) {
            SvgSeries ts;
            ts.label = "task " + std::to_string(task);
            for (std::size_t k = 0; k < traj.size(); ++k) {
              ts.points.emplace_back(static_cast<double>(rec.points[k].tokens), traj[k]);
            }
            mix_series.push_back(std::move(ts));
          }
          const fs::path mix_path = fs::path(out_dir) / (suite_id + "-" + std::to_string(budget) + "-" +
                                                         path.stem().string() + "-mixture.svg");
          std::ofstream ms_out(mix_path);
          ms_out << render_line_chart("task mixture, " + suite_id, "tokens", "p", mix_series);
          outcome.svg_paths.push_back(mix_path.string());
        }
      }

      const fs::path loss_path =
          fs::path(out_dir) / (suite_id + "-" + std::to_string(budget) + "-loss.svg");
      std::ofstream loss_out(loss_path);
      loss_out << render_line_chart("validation loss, " + suite_id + " @ " + std::to_string(budget) +
                                        " tokens",
                                    "tokens", "mean val loss", loss_series);
      outcome.svg_paths.push_back(loss_path.string());
    }
  }

  const fs::path metrics_path = fs::path(out_dir) / "metrics.csv";
  std::ofstream metrics_out(metrics_path);
  metrics_out << metrics_csv(rows);
  outcome.csv_paths.push_back(metrics_path.string());

  const fs::path ttm_path = fs::path(out_dir) / "tokens_to_match.csv";
  std::ofstream ttm_out(ttm_path);
  ttm_out << ttm_csv.str();
  outcome.csv_paths.push_back(ttm_path.string());

  if (score_table_csv) {
    const ScoreTable table = ScoreTable::from_csv_file(*score_table_csv);
    const fs::path wr_path = fs::path(out_dir) / "win_rates.csv";
    std::ofstream wr_out(wr_path);
    wr_out << win_rate_csv(table);
    outcome.csv_paths.push_back(wr_path.string());
  }

  return outcome;
}

AblationOutcome run_entropy_ablation(const ExperimentConfig& config) {
  const std::vector<TaskDataset> suite = build_suite(config);
  if (config.budget_fractions.empty() || config.seeds.empty()) {
    throw std::runtime_error("run_entropy_ablation: config needs a budget fraction and a seed");
  }
  const double fraction = config.budget_fractions.front();
  const std::uint64_t seed = config.seeds.front();

  AblationOutcome outcome;
  std::vector<SvgSeries> loss_series;
  fs::create_directories(config.out_dir);

  for (const double lambda : config.ablation_lambdas) {
    RunConfig rc = cell_run_config(config, suite, Method::adapt, fraction, seed);
    rc.hyper.entropy_weight = lambda;
    const BudgetedRunRecord rec = run_adapt(rc, suite);

    const fs::path path = fs::path(config.out_dir) /
                          ("ablate-lambda" + fraction_dir_name(lambda) + "-seed" + std::to_string(seed) +
                           ".runlog");
    write_run_record(rec, path.string());

    AblationRow row;
    row.lambda = lambda;
    const MixtureSummary ms = mixture_summary(rec);
    row.final_n_eff = ms.final_n_eff;
    row.final_entropy = ms.final_entropy;
    row.tokens_used_pct =
        100.0 * static_cast<double>(rec.total_tokens) / static_cast<double>(rc.budget_tokens);
    row.final_mean_val_loss = rec.points.back().mean_val_loss;
    row.record_path = path.string();
    outcome.rows.push_back(row);

    SvgSeries series;
    series.label = "lambda=" + fraction_dir_name(lambda);
    for (const CurvePoint& pt : rec.points) {
      series.points.emplace_back(static_cast<double>(pt.tokens), pt.mean_val_loss);
    }
    loss_series.push_back(std::move(series));
  }

  std::ostringstream csv;
  csv << "lambda,n_eff,tokens_used_pct,entropy,final_mean_val_loss\n";
  for (const AblationRow& row : outcome.rows) {
    csv << row.lambda << ',' << row.final_n_eff << ',' << row.tokens_used_pct << ','
        << row.final_entropy << ',' << row.final_mean_val_loss << '\n';
  }
  const fs::path csv_path = fs::path(config.out_dir) / "entropy_ablation.csv";
  std::ofstream csv_out(csv_path);
  csv_out << csv.str();
  outcome.csv_path = csv_path.string();

  const fs::path svg_path = fs::path(config.out_dir) / "entropy_ablation_loss.svg";
  std::ofstream svg_out(svg_path);
  svg_out << render_line_chart("entropy-weight ablation, " + config.suite_id, "tokens",
                               "mean val loss", loss_series);
  outcome.svg_path = svg_path.string();
  return outcome;
}

}  // namespace adaptmix
