#include "adaptmix/run_record.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace adaptmix {

using nlohmann::json;

namespace {

json config_to_json_obj(const RunConfig& c) {
  json j;
  j["method"] = method_name(c.method);
  j["budget_tokens"] = c.budget_tokens;
  j["suite_id"] = c.suite_id;
  j["model"] = {{"vocab_size", c.model.vocab_size},
                {"embed_dim", c.model.embed_dim},
                {"hidden_dim", c.model.hidden_dim},
                {"context_len", c.model.context_len},
                {"seed", c.model.seed}};
  j["hyper"] = {{"tau", c.hyper.tau},
                {"entropy_weight", c.hyper.entropy_weight},
                {"probe_lr", c.hyper.probe_lr},
                {"meta_lr", c.hyper.meta_lr},
                {"logit_clip", c.hyper.logit_clip}};
  j["adamw"] = {{"beta1", c.adamw.beta1},
                {"beta2", c.adamw.beta2},
                {"eps", c.adamw.eps},
                {"weight_decay", c.adamw.weight_decay}};
  j["peak_lr"] = c.peak_lr;
  j["warmup_steps"] = c.warmup_steps;
  j["floor_fraction"] = c.floor_fraction;
  j["grad_clip"] = c.grad_clip;
  j["tasks_per_step"] = c.tasks_per_step;
  j["batch_size"] = c.batch_size;
  j["val_batch_size"] = c.val_batch_size;
  j["accumulation_steps"] = c.accumulation_steps;
  j["log_interval_tokens"] = c.log_interval_tokens;
  j["adopt_probe"] = c.adopt_probe;
  j["iid_sampling"] = c.iid_sampling;
  j["max_epochs"] = c.max_epochs;
  j["seed"] = c.seed;
  return j;
}

RunConfig config_from_json_obj(const json& j) {
  RunConfig c;
  const auto m = method_from_name(j.at("method").get<std::string>());
  if (!m) throw std::runtime_error("run record: unknown method '" + j.at("method").get<std::string>() + "'");
  c.method = *m;
  c.budget_tokens = j.at("budget_tokens").get<long>();
  c.suite_id = j.at("suite_id").get<std::string>();
  const json& jm = j.at("model");
  c.model.vocab_size = jm.at("vocab_size").get<int>();
  c.model.embed_dim = jm.at("embed_dim").get<int>();
  c.model.hidden_dim = jm.at("hidden_dim").get<int>();
  c.model.context_len = jm.at("context_len").get<int>();
  c.model.seed = jm.at("seed").get<std::uint64_t>();
  const json& jh = j.at("hyper");
  c.hyper.tau = jh.at("tau").get<double>();
  c.hyper.entropy_weight = jh.at("entropy_weight").get<double>();
  c.hyper.probe_lr = jh.at("probe_lr").get<double>();
  c.hyper.meta_lr = jh.at("meta_lr").get<double>();
  c.hyper.logit_clip = jh.at("logit_clip").get<double>();
  const json& ja = j.at("adamw");
  c.adamw.beta1 = ja.at("beta1").get<double>();
  c.adamw.beta2 = ja.at("beta2").get<double>();
  c.adamw.eps = ja.at("eps").get<double>();
  c.adamw.weight_decay = ja.at("weight_decay").get<double>();
  c.peak_lr = j.at("peak_lr").get<double>();
  c.warmup_steps = j.at("warmup_steps").get<long>();
  c.floor_fraction = j.at("floor_fraction").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.tasks_per_step = j.at("tasks_per_step").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.val_batch_size = j.at("val_batch_size").get<std::size_t>();
  c.accumulation_steps = j.at("accumulation_steps").get<std::size_t>();
  c.log_interval_tokens = j.at("log_interval_tokens").get<long>();
  c.adopt_probe = j.at("adopt_probe").get<bool>();
  c.iid_sampling = j.at("iid_sampling").get<bool>();
  c.max_epochs = j.at("max_epochs").get<long>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return std::string(buf);
}

}  // namespace

std::string run_config_to_json(const RunConfig& config) { return config_to_json_obj(config).dump(); }

RunConfig run_config_from_json(const std::string& json_text) {
  return config_from_json_obj(json::parse(json_text));
}

void write_run_record(const BudgetedRunRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_run_record: cannot open " + path);

  json header;
  header["format_version"] = record.format_version;
  header["config"] = config_to_json_obj(record.config);
  out << header.dump() << "\n";

  for (const CurvePoint& pt : record.points) {
    json j;
    j["tokens"] = pt.tokens;
    j["mean_val_loss"] = pt.mean_val_loss;
    j["val_losses"] = pt.val_losses;
    j["p"] = pt.p;
    j["entropy"] = pt.entropy;
    j["n_eff"] = pt.n_eff;
    j["lr"] = pt.lr;
    out << j.dump() << "\n";
  }

  json footer;
  footer["total_tokens"] = record.total_tokens;
  footer["params_digest"] = digest_hex(record.params_digest);
  footer["wall_seconds"] = record.wall_seconds;
  footer["iterations"] = record.iterations;
  footer["epoch_limit_hit"] = record.epoch_limit_hit;
  out << footer.dump() << "\n";
}

BudgetedRunRecord read_run_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_run_record: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.size() < 2) throw std::runtime_error("read_run_record: truncated record " + path);

  BudgetedRunRecord rec;
  const json header = json::parse(lines.front());
  rec.format_version = header.at("format_version").get<int>();
  rec.config = config_from_json_obj(header.at("config"));

  const json footer = json::parse(lines.back());
  rec.total_tokens = footer.at("total_tokens").get<long>();
  rec.params_digest = std::stoull(footer.at("params_digest").get<std::string>(), nullptr, 16);
  rec.wall_seconds = footer.at("wall_seconds").get<double>();
  rec.iterations = footer.at("iterations").get<long>();
  rec.epoch_limit_hit = footer.at("epoch_limit_hit").get<bool>();

  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    const json j = json::parse(lines[i]);
    CurvePoint pt;
    pt.tokens = j.at("tokens").get<long>();
    pt.mean_val_loss = j.at("mean_val_loss").get<double>();
    pt.val_losses = j.at("val_losses").get<std::vector<double>>();
    pt.p = j.at("p").get<std::vector<double>>();
    pt.entropy = j.at("entropy").get<double>();
    pt.n_eff = j.at("n_eff").get<double>();
    pt.lr = j.at("lr").get<double>();
    rec.points.push_back(std::move(pt));
  }
  return rec;
}

bool records_identical_modulo_wallclock(const std::string& path_a, const std::string& path_b) {
  const auto load = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("records_identical_modulo_wallclock: cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
  };
  auto a = load(path_a);
  auto b = load(path_b);
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) continue;
    // Only the footer may differ, and only in wall_seconds.
    json ja, jb;
    try {
      ja = json::parse(a[i]);
      jb = json::parse(b[i]);
    } catch (const json::exception&) {
      return false;
    }
    if (!ja.contains("wall_seconds") || !jb.contains("wall_seconds")) return false;
    ja["wall_seconds"] = 0.0;
    jb["wall_seconds"] = 0.0;
    if (ja.dump() != jb.dump()) return false;
  }
  return true;
}

}  // namespace adaptmix
