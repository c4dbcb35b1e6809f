#include "adaptmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace adaptmix {

void LossCurve::validate() const {
  if (points.size() < 2) throw std::invalid_argument("LossCurve: need at least 2 points");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].first <= points[i - 1].first) {
      throw std::invalid_argument("LossCurve: tokens must be strictly increasing");
    }
  }
}

LossCurve LossCurve::from_record(const BudgetedRunRecord& record) {
  LossCurve c;
  c.points.reserve(record.points.size());
  for (const CurvePoint& pt : record.points) c.points.emplace_back(pt.tokens, pt.mean_val_loss);
  c.validate();
  return c;
}

double auc(const LossCurve& curve) {
  curve.validate();
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const double dt = static_cast<double>(curve.points[i].first - curve.points[i - 1].first);
    area += 0.5 * (curve.points[i].second + curve.points[i - 1].second) * dt;
  }
  const double span = static_cast<double>(curve.points.back().first - curve.points.front().first);
  return area / span;
}

double auc_ratio(const LossCurve& sft, const LossCurve& aft) {
  const double denom = auc(aft);
  if (denom == 0.0) throw std::invalid_argument("auc_ratio: zero denominator");
  return auc(sft) / denom;
}

std::optional<long> tokens_to_match(const LossCurve& aft, double best_supervised_loss) {
  aft.validate();
  for (const auto& [tokens, loss] : aft.points) {
    if (loss <= best_supervised_loss) return tokens;
  }
  return std::nullopt;
}

double best_loss(const LossCurve& curve) {
  curve.validate();
  double best = curve.points.front().second;
  for (const auto& [tokens, loss] : curve.points) best = std::min(best, loss);
  return best;
}

double mid_budget_loss(const LossCurve& curve, long budget) {
  curve.validate();
  if (budget <= 0) throw std::invalid_argument("mid_budget_loss: budget must be positive");
  const long half = budget / 2;
  if (curve.points.back().first < half) {
    throw std::invalid_argument("mid_budget_loss: curve does not span half the budget");
  }
  double result = 0.0;
  bool found = false;
  for (const auto& [tokens, loss] : curve.points) {
    if (tokens > half) break;
    result = loss;
    found = true;
  }
  if (!found) throw std::invalid_argument("mid_budget_loss: no log point at or before half budget");
  return result;
}

void ScoreTable::validate() const {
  if (methods.empty() || benchmarks.empty()) throw std::invalid_argument("ScoreTable: empty table");
  if (scores.size() != methods.size()) throw std::invalid_argument("ScoreTable: one score row per method");
  for (const auto& row : scores) {
    if (row.size() != benchmarks.size()) {
      throw std::invalid_argument("ScoreTable: ragged rows (missing entries)");
    }
  }
}

std::size_t ScoreTable::method_index(const std::string& name) const {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i] == name) return i;
  }
  throw std::invalid_argument("ScoreTable: unknown method '" + name + "'");
}

ScoreTable ScoreTable::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ScoreTable: cannot open " + path);
  ScoreTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("ScoreTable: empty file " + path);

  const auto split_csv = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };

  const std::vector<std::string> header = split_csv(line);
  if (header.size() < 2 || header[0] != "method") {
    throw std::runtime_error("ScoreTable: header must be 'method,<benchmark>,...'");
  }
  table.benchmarks.assign(header.begin() + 1, header.end());

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("ScoreTable: " + path + ":" + std::to_string(lineno) + ": wrong cell count");
    }
    table.methods.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      try {
        row.push_back(std::stod(cells[i]));
      } catch (const std::exception&) {
        throw std::runtime_error("ScoreTable: " + path + ":" + std::to_string(lineno) +
                                 ": bad score '" + cells[i] + "'");
      }
    }
    table.scores.push_back(std::move(row));
  }
  table.validate();
  return table;
}

namespace {

double win_fraction(const ScoreTable& table, const std::string& a, const std::string& b, bool strict) {
  table.validate();
  const std::size_t ia = table.method_index(a);
  const std::size_t ib = table.method_index(b);
  std::size_t wins = 0;
  for (std::size_t j = 0; j < table.benchmarks.size(); ++j) {
    const double sa = table.scores[ia][j];
    const double sb = table.scores[ib][j];
    if (strict ? (sa > sb) : (sa >= sb)) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(table.benchmarks.size());
}

}  // namespace

double win_rate(const ScoreTable& table, const std::string& method_a, const std::string& method_b) {
  return win_fraction(table, method_a, method_b, /*strict=*/false);
}

double win_rate_strict(const ScoreTable& table, const std::string& method_a, const std::string& method_b) {
  return win_fraction(table, method_a, method_b, /*strict=*/true);
}

MixtureSummary mixture_summary(const BudgetedRunRecord& record, std::size_t top_k) {
  if (record.points.empty()) throw std::invalid_argument("mixture_summary: record has no snapshots");
  const std::vector<double>& final_p = record.points.back().p;

  MixtureSummary s;
  s.final_n_eff = n_eff(final_p);
  s.final_entropy = entropy(final_p);

  std::vector<std::size_t> order(final_p.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return final_p[a] > final_p[b]; });
  const std::size_t k = std::min(top_k, order.size());
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t task = order[r];
    std::vector<double> traj;
    traj.reserve(record.points.size());
    for (const CurvePoint& pt : record.points) traj.push_back(pt.p[task]);
    s.top_trajectories.emplace_back(task, std::move(traj));
  }
  return s;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os << *v;
  return os.str();
}

std::string opt_str(const std::optional<long>& v) { return v ? std::to_string(*v) : "not_reached"; }

}  // namespace

std::string metrics_csv(const std::vector<RunMetricsRow>& rows) {
  std::ostringstream os;
  os << "run_id,method,budget,auc,auc_ratio_vs_best_sft,tokens_to_match,mid_budget_loss,"
        "final_n_eff,final_entropy\n";
  for (const RunMetricsRow& r : rows) {
    os << r.run_id << ',' << r.method << ',' << r.budget << ',' << r.auc_value << ','
       << opt_str(r.auc_ratio_vs_best_sft) << ',' << opt_str(r.tokens_to_match_value) << ','
       << opt_str(r.mid_budget_loss_value) << ',' << r.final_n_eff << ',' << r.final_entropy << '\n';
  }
  return os.str();
}

std::string win_rate_csv(const ScoreTable& table) {
  table.validate();
  std::ostringstream os;
  os << "method_a,method_b,win_rate,win_rate_strict\n";
  for (const std::string& a : table.methods) {
    for (const std::string& b : table.methods) {
      if (a == b) continue;
      os << a << ',' << b << ',' << win_rate(table, a, b) << ',' << win_rate_strict(table, a, b) << '\n';
    }
  }
  return os.str();
}

}  // namespace adaptmix
