#pragma once

// Corpus model for question-answer samples: JSON Lines ingestion, structural
// validation and grouping by (task, question type).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace mccd {

using json = nlohmann::json;

enum class Task { AudioQA, VisualQA, AVQA };

enum class QuestionType { Existential, Location, Counting, Comparative, Temporal };

inline constexpr std::string_view to_string(Task t) {
  switch (t) {
    case Task::AudioQA: return "AudioQA";
    case Task::VisualQA: return "VisualQA";
    case Task::AVQA: return "AVQA";
  }
  return "?";
}

inline constexpr std::string_view to_string(QuestionType q) {
  switch (q) {
    case QuestionType::Existential: return "Existential";
    case QuestionType::Location: return "Location";
    case QuestionType::Counting: return "Counting";
    case QuestionType::Comparative: return "Comparative";
    case QuestionType::Temporal: return "Temporal";
  }
  return "?";
}

inline std::optional<Task> parse_task(std::string_view s) {
  for (Task t : {Task::AudioQA, Task::VisualQA, Task::AVQA})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

inline std::optional<QuestionType> parse_question_type(std::string_view s) {
  for (QuestionType q : {QuestionType::Existential, QuestionType::Location, QuestionType::Counting,
                         QuestionType::Comparative, QuestionType::Temporal})
    if (to_string(q) == s) return q;
  return std::nullopt;
}

// Ordered task-major, type-minor.
struct GroupKey {
  Task task = Task::AVQA;
  QuestionType question_type = QuestionType::Existential;

  auto operator<=>(const GroupKey&) const = default;
};

inline std::string to_string(const GroupKey& g) {
  return std::string(to_string(g.task)) + "/" + std::string(to_string(g.question_type));
}

// True for the nine task/type pairs of the audio-visual QA benchmark layout.
inline bool is_known_group(const GroupKey& g) {
  using Q = QuestionType;
  switch (g.task) {
    case Task::AudioQA: return g.question_type == Q::Counting || g.question_type == Q::Comparative;
    case Task::VisualQA: return g.question_type == Q::Counting || g.question_type == Q::Location;
    case Task::AVQA: return true;
  }
  return false;
}

struct QASample {
  std::string id;
  Task task = Task::AVQA;
  QuestionType question_type = QuestionType::Existential;
  std::string question;
  std::string answer;
  std::optional<std::string> source_id;

  GroupKey group() const { return {task, question_type}; }
  bool operator==(const QASample&) const = default;
};

// Raised for malformed input files. `line` is 1-based; 0 when not tied to a line.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct ParsedSamples {
  std::vector<QASample> samples;
  std::vector<std::size_t> line_numbers;  // parallel to samples
  std::vector<std::string> warnings;
};

namespace detail {

inline bool is_blank(std::string_view s) {
  for (char c : s)
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n') return false;
  return true;
}

// Reads a stream line by line, rejecting a UTF-8 byte-order mark, and calls
// fn(line_number, parsed_object) for every nonblank line.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF"))
      throw FormatError(1, "byte-order mark not allowed (input must be plain UTF-8)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!obj.is_object()) throw FormatError(line_no, "expected a JSON object");
    fn(line_no, obj);
  }
}

inline std::string required_string(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) throw FormatError(line, std::string("missing required field '") + field + "'");
  if (!it->is_string()) throw FormatError(line, std::string("field '") + field + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

inline QASample sample_from_json(const json& obj, std::size_t line = 0) {
  QASample s;
  s.id = detail::required_string(obj, "id", line);
  if (s.id.empty()) throw FormatError(line, "field 'id' must be nonempty");
  const std::string task = detail::required_string(obj, "task", line);
  const std::string qtype = detail::required_string(obj, "question_type", line);
  s.question = detail::required_string(obj, "question", line);
  s.answer = detail::required_string(obj, "answer", line);
  if (s.answer.empty()) throw FormatError(line, "field 'answer' must be nonempty");

  auto t = parse_task(task);
  if (!t) throw FormatError(line, "field 'task' has unknown value '" + task + "'");
  auto q = parse_question_type(qtype);
  if (!q) throw FormatError(line, "field 'question_type' has unknown value '" + qtype + "'");
  s.task = *t;
  s.question_type = *q;

  if (auto it = obj.find("source_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw FormatError(line, "field 'source_id' must be a string");
    s.source_id = it->get<std::string>();
  }
  return s;
}

inline json to_json(const QASample& s) {
  json j = json::object();
  j["id"] = s.id;
  j["task"] = std::string(to_string(s.task));
  j["question_type"] = std::string(to_string(s.question_type));
  j["question"] = s.question;
  j["answer"] = s.answer;
  if (s.source_id) j["source_id"] = *s.source_id;
  return j;
}

// Parses a JSON Lines sample file. Samples are returned in file order.
inline ParsedSamples parse_samples(std::istream& in) {
  static const std::set<std::string, std::less<>> known = {"id",       "task",   "question_type",
                                                           "question", "answer", "source_id"};
  ParsedSamples out;
  std::unordered_map<std::string, std::size_t> first_seen;
  detail::for_each_json_line(in, [&](std::size_t line, const json& obj) {
    QASample s = sample_from_json(obj, line);
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!known.contains(it.key()))
        out.warnings.push_back("line " + std::to_string(line) + ": unknown field '" + it.key() +
                               "' ignored");
    auto [pos, inserted] = first_seen.emplace(s.id, line);
    if (!inserted)
      throw FormatError(line, "duplicate id '" + s.id + "' (first seen on line " +
                                  std::to_string(pos->second) + ", again on line " +
                                  std::to_string(line) + ")");
    out.samples.push_back(std::move(s));
    out.line_numbers.push_back(line);
  });
  return out;
}

inline void write_samples(std::ostream& out, std::span<const QASample> samples) {
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

struct CorpusStats {
  std::size_t sample_count = 0;
  std::set<std::string> vocabulary;
  std::map<GroupKey, std::size_t> per_group_counts;
  std::vector<std::string> duplicate_ids;
  std::vector<std::string> warnings;
};

// One-pass structural checks. Problems are reported in the result, never thrown.
// When `fixed_vocabulary` is given, answers outside it are reported.
inline CorpusStats validate_corpus(std::span<const QASample> samples,
                                   const std::set<std::string>* fixed_vocabulary = nullptr) {
  CorpusStats st;
  std::set<std::string> seen;
  std::set<std::string> dups;
  std::set<std::string> out_of_vocab;
  for (const auto& s : samples) {
    ++st.sample_count;
    st.vocabulary.insert(s.answer);
    ++st.per_group_counts[s.group()];
    if (!seen.insert(s.id).second) dups.insert(s.id);
    if (fixed_vocabulary && !fixed_vocabulary->contains(s.answer)) out_of_vocab.insert(s.answer);
  }
  st.duplicate_ids.assign(dups.begin(), dups.end());
  for (const auto& [g, n] : st.per_group_counts)
    if (!is_known_group(g))
      st.warnings.push_back("unusual task/question-type pair " + to_string(g) + " (" +
                            std::to_string(n) + " samples)");
  for (const auto& a : out_of_vocab)
    st.warnings.push_back("answer '" + a + "' is not in the vocabulary");
  if (fixed_vocabulary) st.vocabulary = *fixed_vocabulary;
  return st;
}

// Buckets samples by (task, question type). Iteration follows GroupKey order;
// samples keep their relative input order inside a group.
inline std::map<GroupKey, std::vector<QASample>> group_samples(std::span<const QASample> samples) {
  std::map<GroupKey, std::vector<QASample>> groups;
  for (const auto& s : samples) groups[s.group()].push_back(s);
  return groups;
}

// Vocabulary file: one answer class per line, blank lines ignored.
inline std::set<std::string> read_vocabulary(std::istream& in) {
  std::set<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!detail::is_blank(line)) vocab.insert(line);
  }
  return vocab;
}

inline json to_json(const CorpusStats& st) {
  json groups = json::array();
  for (const auto& [g, n] : st.per_group_counts)
    groups.push_back({{"task", std::string(to_string(g.task))},
                      {"question_type", std::string(to_string(g.question_type))},
                      {"count", n}});
  return {{"schema_version", 1},
          {"sample_count", st.sample_count},
          {"vocabulary", st.vocabulary},
          {"groups", groups},
          {"duplicate_ids", st.duplicate_ids},
          {"warnings", st.warnings}};
}

}  // namespace mccd
