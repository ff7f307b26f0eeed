#pragma once

// Head / tail / overall accuracy of a prediction file under a split.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mccd/dataset.hpp"
#include "mccd/splitter.hpp"

namespace mccd {

struct Prediction {
  std::string id;
  std::string predicted_answer;
};

inline std::vector<Prediction> parse_predictions(std::istream& in) {
  std::vector<Prediction> out;
  detail::for_each_json_line(in, [&](std::size_t line, const json& obj) {
    out.push_back({detail::required_string(obj, "id", line),
                   detail::required_string(obj, "predicted_answer", line)});
  });
  return out;
}

inline void write_predictions(std::ostream& out, std::span<const Prediction> preds) {
  for (const auto& p : preds) out << json{{"id", p.id}, {"predicted_answer", p.predicted_answer}}.dump() << '\n';
}

// Trim ASCII whitespace and lowercase ASCII letters.
inline std::string normalize_answer(std::string_view s) {
  auto ws = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t b = 0, e = s.size();
  while (b < e && ws(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && ws(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

// Exact counts; accuracies are derived on demand.
struct Tally {
  std::uint64_t head_correct = 0;
  std::uint64_t head_n = 0;
  std::uint64_t tail_correct = 0;
  std::uint64_t tail_n = 0;

  static std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  }
  std::optional<double> head_acc() const { return ratio(head_correct, head_n); }
  std::optional<double> tail_acc() const { return ratio(tail_correct, tail_n); }
  std::optional<double> overall_acc() const { return ratio(head_correct + tail_correct, head_n + tail_n); }

  void add(SplitLabel label, bool correct) {
    if (label == SplitLabel::Head) {
      ++head_n;
      head_correct += correct;
    } else {
      ++tail_n;
      tail_correct += correct;
    }
  }
  Tally& operator+=(const Tally& o) {
    head_correct += o.head_correct;
    head_n += o.head_n;
    tail_correct += o.tail_correct;
    tail_n += o.tail_n;
    return *this;
  }
  bool operator==(const Tally&) const = default;
};

struct RobustnessReport {
  std::map<GroupKey, Tally> per_group;
  std::map<Task, Tally> per_task;
  Tally aggregate;
  std::vector<std::string> unmatched_ids;  // split samples without a prediction, sorted
  std::vector<std::string> warnings;

  bool operator==(const RobustnessReport&) const = default;
};

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline RobustnessReport score_predictions(std::span<const QASample> gold, std::span<const SplitAssignment> splits,
                                          std::span<const Prediction> preds) {
  std::unordered_map<std::string, const QASample*> gold_by_id;
  gold_by_id.reserve(gold.size());
  for (const auto& s : gold) gold_by_id.emplace(s.id, &s);

  std::unordered_map<std::string, std::string> pred_by_id;
  pred_by_id.reserve(preds.size());
  std::vector<std::string> unknown_pred_ids;
  for (const auto& p : preds) {
    if (!pred_by_id.emplace(p.id, normalize_answer(p.predicted_answer)).second)
      throw ScoringError("duplicate prediction id '" + p.id + "'");
    if (!gold_by_id.contains(p.id)) unknown_pred_ids.push_back(p.id);
  }

  RobustnessReport rep;
  for (const auto& a : splits) {
    auto g = gold_by_id.find(a.sample_id);
    if (g == gold_by_id.end()) throw ScoringError("split refers to unknown sample id '" + a.sample_id + "'");
    const QASample& s = *g->second;
    bool correct = false;
    if (auto p = pred_by_id.find(a.sample_id); p != pred_by_id.end())
      correct = p->second == normalize_answer(s.answer);
    else
      rep.unmatched_ids.push_back(a.sample_id);
    rep.per_group[a.group].add(a.label, correct);
  }
  for (const auto& [key, t] : rep.per_group) {
    rep.per_task[key.task] += t;
    rep.aggregate += t;
  }
  std::sort(rep.unmatched_ids.begin(), rep.unmatched_ids.end());
  std::sort(unknown_pred_ids.begin(), unknown_pred_ids.end());
  for (const auto& id : unknown_pred_ids) rep.warnings.push_back("prediction for unknown id '" + id + "' ignored");
  return rep;
}

enum class ReportFormat { TextTable, Json };

namespace detail {

inline json rounded_or_null(std::optional<double> v) {
  if (!v) return nullptr;
  return std::round(*v * 1e4) / 1e4;
}

inline json tally_json(const Tally& t) {
  return {{"head_acc", rounded_or_null(t.head_acc())},
          {"tail_acc", rounded_or_null(t.tail_acc())},
          {"overall_acc", rounded_or_null(t.overall_acc())},
          {"head_n", t.head_n},
          {"tail_n", t.tail_n},
          {"head_correct", t.head_correct},
          {"tail_correct", t.tail_correct}};
}

inline std::string percent_cell(std::optional<double> v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

inline std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}
inline std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

inline json report_json(const RobustnessReport& r) {
  json groups = json::array();
  for (const auto& [k, t] : r.per_group) {
    json g = detail::tally_json(t);
    g["task"] = std::string(to_string(k.task));
    g["question_type"] = std::string(to_string(k.question_type));
    groups.push_back(std::move(g));
  }
  json tasks = json::array();
  for (const auto& [task, t] : r.per_task) {
    json g = detail::tally_json(t);
    g["task"] = std::string(to_string(task));
    tasks.push_back(std::move(g));
  }
  return {{"schema_version", 1},
          {"groups", std::move(groups)},
          {"tasks", std::move(tasks)},
          {"aggregate", detail::tally_json(r.aggregate)},
          {"unmatched_ids", r.unmatched_ids},
          {"warnings", r.warnings}};
}

// Text layout: one row per group in GroupKey order, then one "All" row per
// task and a final "All | All" row. Accuracies are percentages with two
// decimals; "-" marks an empty split.
inline std::string render_report(const RobustnessReport& r, ReportFormat format) {
  if (format == ReportFormat::Json) return report_json(r).dump(2) + "\n";

  using detail::pad_left;
  using detail::pad_right;
  using detail::percent_cell;
  std::ostringstream out;
  auto row = [&](const std::string& task, const std::string& type, const Tally& t) {
    out << "| " << pad_right(task, 8) << " | " << pad_right(type, 11) << " | " << pad_left(percent_cell(t.head_acc()), 6)
        << " | " << pad_left(percent_cell(t.tail_acc()), 6) << " | " << pad_left(percent_cell(t.overall_acc()), 6)
        << " | " << pad_left(std::to_string(t.head_n), 8) << " | " << pad_left(std::to_string(t.tail_n), 8) << " |\n";
  };
  out << "| Task     | Type        |   Head |   Tail |    Avg |   Head n |   Tail n |\n";
  out << "|----------|-------------|--------|--------|--------|----------|----------|\n";
  for (const auto& [k, t] : r.per_group) row(std::string(to_string(k.task)), std::string(to_string(k.question_type)), t);
  for (const auto& [task, t] : r.per_task) row(std::string(to_string(task)), "All", t);
  if (!r.per_group.empty()) row("All", "All", r.aggregate);
  return out.str();
}

}  // namespace mccd
