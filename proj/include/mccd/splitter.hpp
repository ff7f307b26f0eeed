#pragma once

// Head/tail distribution-shift splits.
//
// Samples are grouped by (task, question type). For every group we take the
// answer histogram, measure its Shannon entropy normalized by log N (N being
// the number of observed answer classes) and keep only groups whose
// normalized entropy is below a threshold. Inside a kept group an answer class
// is "tail" when its count is at most tail_factor * mu, mu = total / N. Groups
// with exactly two answers use a simpler rule: the rarer answer is tail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <iterator>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mccd/dataset.hpp"

namespace mccd {

// Nonnegative rational used for the tail factor so that boundary counts are
// compared exactly.
struct Ratio {
  std::int64_t num = 6;
  std::int64_t den = 5;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  // Closest fraction with denominator <= max_den (continued fractions).
  // Decimal inputs such as 1.2 or 1.25 come back as 6/5 and 5/4.
  static Ratio from_double(double x, std::int64_t max_den = 1'000'000) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument("Ratio: value must be finite and >= 0");
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double r = x;
    for (int iter = 0; iter < 64; ++iter) {
      const double a_f = std::floor(r);
      if (a_f > 1e15) break;
      const auto a = static_cast<std::int64_t>(a_f);
      const std::int64_t q2 = q0 + a * q1;
      if (q2 > max_den) break;
      const std::int64_t p2 = p0 + a * p1;
      p0 = p1; q0 = q1; p1 = p2; q1 = q2;
      const double frac = r - a_f;
      if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - x) <= 1e-15 * std::max(1.0, x) ||
          frac == 0.0)
        break;
      r = 1.0 / frac;
    }
    if (q1 == 0) throw std::invalid_argument("Ratio: value too large");
    return {p1, q1};
  }
};

struct SplitConfig {
  double entropy_threshold = 0.9;
  Ratio tail_factor{6, 5};
  double epsilon_entropy = 0.0;  // a group is kept iff H̄ < entropy_threshold - epsilon_entropy
  bool two_answer_tie_both_head = false;

  void validate() const {
    if (!(entropy_threshold > 0.0 && entropy_threshold <= 1.0))
      throw std::invalid_argument("entropy_threshold must lie in (0, 1]");
    if (tail_factor.num <= 0 || tail_factor.den <= 0)
      throw std::invalid_argument("tail_factor must be positive");
    if (!(epsilon_entropy >= 0.0)) throw std::invalid_argument("epsilon_entropy must be >= 0");
  }
};

enum class SplitLabel { Head, Tail };
enum class SplitRule { GeneralThreshold, TwoAnswerLowFrequency };

inline constexpr std::string_view to_string(SplitLabel l) { return l == SplitLabel::Head ? "head" : "tail"; }
inline constexpr std::string_view to_string(SplitRule r) {
  return r == SplitRule::GeneralThreshold ? "general_threshold" : "two_answer_low_frequency";
}

// Shannon entropy of a histogram. Zero counts contribute nothing (0 log 0 = 0).
// Computed as log(T) - (1/T) * sum c log c, which is exact for uniform counts
// up to a few ulps. `log_base` = e gives nats, 2 gives bits.
inline double shannon_entropy(std::span<const std::uint64_t> counts, double log_base = std::numbers::e) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return 0.0;
  const double t = static_cast<double>(total);
  double acc = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double cd = static_cast<double>(c);
    acc += cd * std::log(cd);
  }
  const double h = std::log(t) - acc / t;
  return std::max(0.0, h) / std::log(log_base);
}

// H / log N, with N the number of nonzero classes; defined as 1 when N <= 1.
inline double normalized_entropy(std::span<const std::uint64_t> counts) {
  std::size_t n = 0;
  for (auto c : counts) n += (c > 0);
  if (n <= 1) return 1.0;
  const double h = shannon_entropy(counts) / std::log(static_cast<double>(n));
  return std::clamp(h, 0.0, 1.0);
}

struct AnswerDistribution {
  GroupKey group;
  std::map<std::string, std::uint64_t> counts;  // only classes with count >= 1
  std::uint64_t total = 0;
  std::size_t class_count = 0;
  double mean_count = 0.0;          // total / class_count, for reporting
  double entropy = 0.0;             // nats
  double normalized_entropy = 1.0;  // in [0, 1]
};

inline AnswerDistribution distribution_from_counts(GroupKey group,
                                                   std::map<std::string, std::uint64_t> counts) {
  for (auto it = counts.begin(); it != counts.end();) {
    if (it->second == 0) it = counts.erase(it);
    else ++it;
  }
  if (counts.empty()) throw std::invalid_argument("answer distribution of an empty group");
  AnswerDistribution d;
  d.group = group;
  d.counts = std::move(counts);
  std::vector<std::uint64_t> c;
  c.reserve(d.counts.size());
  for (const auto& [_, n] : d.counts) {
    c.push_back(n);
    d.total += n;
  }
  d.class_count = d.counts.size();
  d.mean_count = static_cast<double>(d.total) / static_cast<double>(d.class_count);
  d.entropy = shannon_entropy(c);
  d.normalized_entropy = normalized_entropy(c);
  return d;
}

// Histogram of answers for the samples of one group. All samples are expected
// to share a GroupKey; the first sample's key is recorded.
inline AnswerDistribution answer_distribution(std::span<const QASample> group_samples) {
  if (group_samples.empty()) throw std::invalid_argument("answer_distribution: empty group");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& s : group_samples) ++counts[s.answer];
  return distribution_from_counts(group_samples.front().group(), std::move(counts));
}

inline bool is_imbalanced(const AnswerDistribution& d, const SplitConfig& cfg) {
  return d.normalized_entropy < cfg.entropy_threshold - cfg.epsilon_entropy;
}

inline std::vector<AnswerDistribution> select_imbalanced_groups(std::span<const AnswerDistribution> dists,
                                                                const SplitConfig& cfg) {
  std::vector<AnswerDistribution> kept;
  for (const auto& d : dists)
    if (is_imbalanced(d, cfg)) kept.push_back(d);
  return kept;
}

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClassSplit {
  SplitLabel label = SplitLabel::Head;
  SplitRule rule = SplitRule::GeneralThreshold;
};

// count <= factor * total / N, evaluated exactly in integers.
inline bool at_most_scaled_mean(std::uint64_t count, std::uint64_t total, std::size_t n, Ratio factor) {
  using i128 = __int128;
  return static_cast<i128>(count) * static_cast<i128>(n) * factor.den <=
         static_cast<i128>(factor.num) * static_cast<i128>(total);
}

inline std::map<std::string, ClassSplit> split_head_tail(const AnswerDistribution& dist, const SplitConfig& cfg) {
  std::map<std::string, ClassSplit> out;
  if (dist.class_count < 2)
    throw SplitError("group " + to_string(dist.group) + " has a single answer class; no head/tail split exists");

  if (dist.class_count == 2) {
    auto first = dist.counts.begin();
    auto second = std::next(first);
    if (first->second == second->second) {
      if (!cfg.two_answer_tie_both_head)
        throw SplitError("group " + to_string(dist.group) + " has two equally frequent answers ('" +
                         first->first + "', '" + second->first + "'); tail is undefined");
      out[first->first] = {SplitLabel::Head, SplitRule::TwoAnswerLowFrequency};
      out[second->first] = {SplitLabel::Head, SplitRule::TwoAnswerLowFrequency};
      return out;
    }
    const bool first_rarer = first->second < second->second;
    out[first->first] = {first_rarer ? SplitLabel::Tail : SplitLabel::Head, SplitRule::TwoAnswerLowFrequency};
    out[second->first] = {first_rarer ? SplitLabel::Head : SplitLabel::Tail, SplitRule::TwoAnswerLowFrequency};
    return out;
  }

  for (const auto& [answer, count] : dist.counts) {
    const bool tail = at_most_scaled_mean(count, dist.total, dist.class_count, cfg.tail_factor);
    out[answer] = {tail ? SplitLabel::Tail : SplitLabel::Head, SplitRule::GeneralThreshold};
  }
  return out;
}

struct SplitAssignment {
  std::string sample_id;
  GroupKey group;
  SplitLabel label = SplitLabel::Head;
  std::string answer_class;
  SplitRule rule = SplitRule::GeneralThreshold;

  bool operator==(const SplitAssignment&) const = default;
};

struct GroupSplitReport {
  AnswerDistribution distribution;
  bool retained = false;
  std::map<std::string, ClassSplit> classes;  // empty when not retained
};

struct SplitResult {
  std::vector<SplitAssignment> assignments;  // corpus order
  std::vector<GroupSplitReport> groups;      // GroupKey order, retained or not
  std::vector<GroupKey> skipped;
};

inline SplitResult assign_splits(std::span<const QASample> corpus, const SplitConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw std::invalid_argument("assign_splits: empty corpus");

  SplitResult result;
  std::map<GroupKey, std::size_t> report_index;
  for (const auto& [key, members] : group_samples(corpus)) {
    GroupSplitReport rep;
    rep.distribution = answer_distribution(members);
    rep.retained = is_imbalanced(rep.distribution, cfg);
    if (rep.retained) {
      try {
        rep.classes = split_head_tail(rep.distribution, cfg);
      } catch (const SplitError& e) {
        throw SplitError("group " + to_string(key) + ": " + e.what());
      }
    } else {
      result.skipped.push_back(key);
    }
    report_index[key] = result.groups.size();
    result.groups.push_back(std::move(rep));
  }

  for (const auto& s : corpus) {
    const auto& rep = result.groups[report_index.at(s.group())];
    if (!rep.retained) continue;
    const ClassSplit& cs = rep.classes.at(s.answer);
    result.assignments.push_back({s.id, s.group(), cs.label, s.answer, cs.rule});
  }
  return result;
}

inline json to_json(const SplitAssignment& a) {
  return {{"id", a.sample_id},
          {"task", std::string(to_string(a.group.task))},
          {"question_type", std::string(to_string(a.group.question_type))},
          {"answer", a.answer_class},
          {"split", std::string(to_string(a.label))},
          {"rule", std::string(to_string(a.rule))}};
}

inline SplitAssignment assignment_from_json(const json& obj, std::size_t line = 0) {
  SplitAssignment a;
  a.sample_id = detail::required_string(obj, "id", line);
  const auto task = parse_task(detail::required_string(obj, "task", line));
  const auto qt = parse_question_type(detail::required_string(obj, "question_type", line));
  if (!task || !qt) throw FormatError(line, "unknown task or question_type");
  a.group = {*task, *qt};
  a.answer_class = detail::required_string(obj, "answer", line);
  const std::string split = detail::required_string(obj, "split", line);
  if (split == "head") a.label = SplitLabel::Head;
  else if (split == "tail") a.label = SplitLabel::Tail;
  else throw FormatError(line, "field 'split' must be \"head\" or \"tail\"");
  const std::string rule = obj.value("rule", std::string(to_string(SplitRule::GeneralThreshold)));
  if (rule == to_string(SplitRule::GeneralThreshold)) a.rule = SplitRule::GeneralThreshold;
  else if (rule == to_string(SplitRule::TwoAnswerLowFrequency)) a.rule = SplitRule::TwoAnswerLowFrequency;
  else throw FormatError(line, "unknown rule '" + rule + "'");
  return a;
}

inline std::vector<SplitAssignment> parse_splits(std::istream& in) {
  std::vector<SplitAssignment> out;
  detail::for_each_json_line(in, [&](std::size_t line, const json& obj) {
    out.push_back(assignment_from_json(obj, line));
  });
  return out;
}

inline void write_splits(std::ostream& out, std::span<const SplitAssignment> splits) {
  for (const auto& a : splits) out << to_json(a).dump() << '\n';
}

// Per-group side-channel report.
inline json group_report_json(const SplitResult& r, const SplitConfig& cfg) {
  json groups = json::array();
  for (const auto& g : r.groups) {
    const auto& d = g.distribution;
    json classes = json::array();
    for (const auto& [answer, count] : d.counts) {
      json c = {{"answer", answer}, {"count", count}};
      if (g.retained) {
        const auto& cs = g.classes.at(answer);
        c["split"] = std::string(to_string(cs.label));
        c["rule"] = std::string(to_string(cs.rule));
      } else {
        c["split"] = nullptr;
      }
      classes.push_back(std::move(c));
    }
    groups.push_back({{"task", std::string(to_string(d.group.task))},
                      {"question_type", std::string(to_string(d.group.question_type))},
                      {"total", d.total},
                      {"class_count", d.class_count},
                      {"mean_count", d.mean_count},
                      {"entropy_nats", d.entropy},
                      {"entropy_bits", d.entropy / std::numbers::ln2},
                      {"normalized_entropy", d.normalized_entropy},
                      {"retained", g.retained},
                      {"classes", std::move(classes)}});
  }
  return {{"schema_version", 1},
          {"config",
           {{"entropy_threshold", cfg.entropy_threshold},
            {"tail_factor", cfg.tail_factor.value()},
            {"tail_factor_ratio", {cfg.tail_factor.num, cfg.tail_factor.den}},
            {"epsilon_entropy", cfg.epsilon_entropy},
            {"two_answer_tie_both_head", cfg.two_answer_tie_both_head}}},
          {"groups", std::move(groups)}};
}

}  // namespace mccd
