#pragma once

// Multi-seed comparison of objective variants on the synthetic task.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mccd/parallel.hpp"
#include "mccd/synthetic.hpp"
#include "mccd/trainer.hpp"

namespace mccd {

struct SeedOutcome {
  std::uint64_t seed = 0;
  double head_acc = 0.0;
  double tail_acc = 0.0;
  double overall_acc = 0.0;

  bool operator==(const SeedOutcome&) const = default;
};

struct AblationRow {
  Variant variant = Variant::Full;
  double median_head = 0.0;
  double median_tail = 0.0;
  double median_overall = 0.0;
  std::vector<SeedOutcome> per_seed;

  bool operator==(const AblationRow&) const = default;
};

struct AblationTable {
  MccdConfig mccd;
  std::vector<AblationRow> rows;
};

// Median of a nonempty sample; mean of the two middle values for even sizes.
inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline SeedOutcome outcome_of(std::uint64_t seed, const RobustnessReport& r) {
  return {seed, r.aggregate.head_acc().value_or(0.0), r.aggregate.tail_acc().value_or(0.0),
          r.aggregate.overall_acc().value_or(0.0)};
}

// For every seed the corpus is generated with that seed and every variant is
// trained from the same initialization (also seeded by it). Runs execute in
// parallel on `threads` workers, each run single-threaded, so the table does
// not depend on the worker count.
inline AblationTable ablation_run(SyntheticConfig scfg, const TrainConfig& tcfg, std::span<const Variant> variants,
                                  std::span<const std::uint64_t> seeds, unsigned threads = 1) {
  if (variants.empty() || seeds.empty()) throw std::invalid_argument("ablation_run needs variants and seeds");
  std::vector<SyntheticData> data(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t s) {
    SyntheticConfig c = scfg;
    c.seed = seeds[s];
    data[s] = generate_synthetic(c);
  });

  const std::size_t jobs = variants.size() * seeds.size();
  std::vector<SeedOutcome> outcomes(jobs);
  parallel_for(jobs, threads, [&](std::size_t j) {
    const std::size_t v = j / seeds.size(), s = j % seeds.size();
    TrainConfig t = tcfg;
    t.seed = seeds[s];
    t.threads = 1;
    const TrainResult r = train(data[s].train, t, variants[v]);
    outcomes[j] = outcome_of(seeds[s], evaluate(r.model, data[s].test, data[s].splits));
  });

  AblationTable table;
  table.mccd = tcfg.mccd;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationRow row;
    row.variant = variants[v];
    row.per_seed.assign(outcomes.begin() + static_cast<std::ptrdiff_t>(v * seeds.size()),
                        outcomes.begin() + static_cast<std::ptrdiff_t>((v + 1) * seeds.size()));
    std::vector<double> h, t, o;
    for (const auto& x : row.per_seed) {
      h.push_back(x.head_acc);
      t.push_back(x.tail_acc);
      o.push_back(x.overall_acc);
    }
    row.median_head = median(h);
    row.median_tail = median(t);
    row.median_overall = median(o);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline json ablation_json(const AblationTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json seeds = json::array();
    for (const auto& s : r.per_seed)
      seeds.push_back({{"seed", s.seed}, {"head_acc", s.head_acc}, {"tail_acc", s.tail_acc}, {"overall_acc", s.overall_acc}});
    rows.push_back({{"variant", std::string(to_string(r.variant))},
                    {"median_head_acc", r.median_head},
                    {"median_tail_acc", r.median_tail},
                    {"median_overall_acc", r.median_overall},
                    {"per_seed", std::move(seeds)}});
  }
  return {{"schema_version", 1},
          {"mccd",
           {{"alpha", t.mccd.alpha},
            {"beta", t.mccd.beta},
            {"epsilon", t.mccd.epsilon},
            {"distance_space", std::string(to_string(t.mccd.distance_space))},
            {"dropped_term_rescale", "1/2"}}},
          {"rows", std::move(rows)}};
}

inline std::string ablation_text(const AblationTable& t) {
  std::ostringstream out;
  out << "| Variant        |   Head |   Tail |    Avg |\n";
  out << "|----------------|--------|--------|--------|\n";
  for (const auto& r : t.rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "| %-14s | %6.2f | %6.2f | %6.2f |\n", std::string(to_string(r.variant)).c_str(),
                  r.median_head * 100.0, r.median_tail * 100.0, r.median_overall * 100.0);
    out << buf;
  }
  return out.str();
}

}  // namespace mccd
