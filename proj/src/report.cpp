#include "slim/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace slim {

using json = nlohmann::json;

BreakEven break_even(double c_optimize, double c_base, double c_ours) {
  BreakEven result;
  const double delta = c_base - c_ours;
  if (delta <= 0.0) {
    result.note = "per-query saving is not positive; optimization cost never amortizes";
    return result;
  }
  result.defined = true;
  result.executions = std::llround(c_optimize / delta);
  return result;
}

double cost_reduction_percent(double c_base, double c_ours) {
  if (c_base <= 0.0) throw std::invalid_argument("cost_reduction: baseline cost must be > 0");
  double percent = 100.0 * (c_base - c_ours) / c_base;
  return std::round(percent * 10.0) / 10.0;
}

std::vector<ScorePoint> pareto_frontier(const std::vector<ScorePoint>& points) {
  if (points.empty()) throw std::invalid_argument("pareto_frontier: empty point set");
  std::vector<ScorePoint> frontier;
  for (const auto& p : points) {
    bool dominated = false;
    for (const auto& q : points) {
      if (q.score >= p.score && q.cost <= p.cost && (q.score > p.score || q.cost < p.cost)) {
        dominated = true;
        break;
      }
    }
    if (dominated) continue;
    // Drop exact duplicates already on the frontier.
    bool duplicate = std::any_of(frontier.begin(), frontier.end(), [&](const ScorePoint& f) {
      return f.score == p.score && f.cost == p.cost;
    });
    if (!duplicate) frontier.push_back(p);
  }
  std::sort(frontier.begin(), frontier.end(), [](const ScorePoint& a, const ScorePoint& b) {
    return a.cost != b.cost ? a.cost < b.cost : a.score < b.score;
  });
  return frontier;
}

EconReport econ_report(const std::vector<EconScenario>& scenarios) {
  EconReport report;
  for (const auto& s : scenarios) {
    EconRow row;
    row.name = s.name;
    row.c_base = s.c_base;
    row.c_ours = s.c_ours;
    row.c_optimize = s.c_optimize;
    row.delta_c = s.c_base - s.c_ours;
    row.reduction_percent = cost_reduction_percent(s.c_base, s.c_ours);
    row.break_even = break_even(s.c_optimize, s.c_base, s.c_ours);
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

double parse_money(const json& v, const std::string& field) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return std::stod(v.get<std::string>());
  throw std::invalid_argument("scenario field '" + field +
                              "' must be a number or decimal string");
}

}  // namespace

std::vector<EconScenario> parse_scenarios(const std::string& text) {
  json doc = json::parse(text);
  std::vector<EconScenario> out;
  for (const auto& entry : doc) {
    EconScenario s;
    s.name = entry.at("name").get<std::string>();
    s.c_optimize = parse_money(entry.at("c_optimize"), "c_optimize");
    s.c_base = parse_money(entry.at("c_base"), "c_base");
    s.c_ours = parse_money(entry.at("c_ours"), "c_ours");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<EconScenario> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenarios(buf.str());
}

std::string render_econ_report(const EconReport& report) {
  std::ostringstream out;
  out << "scenario\tc_base\tc_ours\tdelta_c\treduction_pct\tc_optimize\tn_break_even\n";
  for (const auto& row : report.rows) {
    out << row.name << '\t' << row.c_base << '\t' << row.c_ours << '\t' << row.delta_c << '\t';
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f", row.reduction_percent);
    out << pct << '\t' << row.c_optimize << '\t';
    if (row.break_even.defined) {
      out << row.break_even.executions;
    } else {
      out << "undefined";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace slim
