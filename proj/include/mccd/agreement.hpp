#pragma once

// Fleiss' kappa for a fixed number of raters labeling items into categories.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mccd {

struct VoteRow {
  std::vector<std::uint64_t> counts;  // votes per category
  std::uint64_t multiplicity = 1;     // number of items sharing this vote pattern
};

struct VoteTable {
  std::uint64_t raters = 0;
  std::size_t categories = 0;
  std::vector<VoteRow> rows;

  void validate() const {
    if (raters < 2) throw std::invalid_argument("vote table needs at least 2 raters");
    if (categories < 2) throw std::invalid_argument("vote table needs at least 2 categories");
    if (rows.empty()) throw std::invalid_argument("vote table has no rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      if (r.counts.size() != categories)
        throw std::invalid_argument("row " + std::to_string(i) + " has " + std::to_string(r.counts.size()) +
                                    " categories, expected " + std::to_string(categories));
      std::uint64_t s = 0;
      for (auto c : r.counts) s += c;
      if (s != raters)
        throw std::invalid_argument("row " + std::to_string(i) + " sums to " + std::to_string(s) + ", expected " +
                                    std::to_string(raters));
    }
  }
};

struct FleissTerms {
  double observed = 0.0;  // P-bar, mean per-item agreement
  double expected = 0.0;  // P-bar_e, chance agreement from category marginals
  double kappa = 0.0;
};

// Standard Fleiss definitions:
//   P_i = (sum_j n_ij^2 - n) / (n (n - 1)),  P-bar = mean_i P_i
//   p_j = sum_i n_ij / (N n),                P-bar_e = sum_j p_j^2
//   kappa = (P-bar - P-bar_e) / (1 - P-bar_e)
// Sums are accumulated in integers; only the final ratios are floating point.
inline FleissTerms fleiss_terms(const VoteTable& t) {
  t.validate();
  using u128 = unsigned __int128;
  const u128 n = t.raters;
  u128 items = 0;
  u128 sum_sq = 0;
  std::vector<u128> col(t.categories, 0);
  for (const auto& r : t.rows) {
    if (r.multiplicity == 0) continue;
    items += r.multiplicity;
    for (std::size_t j = 0; j < t.categories; ++j) {
      sum_sq += static_cast<u128>(r.multiplicity) * r.counts[j] * r.counts[j];
      col[j] += static_cast<u128>(r.multiplicity) * r.counts[j];
    }
  }
  if (items == 0) throw std::invalid_argument("vote table has no items");

  const u128 votes = items * n;
  u128 col_sq = 0;
  for (auto c : col) col_sq += c * c;

  const long double observed = static_cast<long double>(sum_sq - votes) / static_cast<long double>(votes * (n - 1));
  const long double expected = static_cast<long double>(col_sq) / (static_cast<long double>(votes) * votes);

  FleissTerms out;
  out.observed = static_cast<double>(observed);
  out.expected = static_cast<double>(expected);
  if (col_sq == votes * votes) {
    // Every vote fell into one category.
    if (sum_sq - votes != votes * (n - 1)) throw std::domain_error("kappa undefined: chance agreement is 1");
    out.kappa = 1.0;
    return out;
  }
  out.kappa = static_cast<double>((observed - expected) / (1.0L - expected));
  return out;
}

inline double fleiss_kappa(const VoteTable& t) { return fleiss_terms(t).kappa; }

// {"raters": 3, "categories": 2, "rows": [[3,0], {"counts": [2,1], "multiplicity": 47353}, ...]}
// "categories" may be omitted and is then taken from the first row.
inline VoteTable vote_table_from_json(const nlohmann::json& j) {
  VoteTable t;
  t.raters = j.at("raters").get<std::uint64_t>();
  const auto& rows = j.at("rows");
  if (!rows.is_array()) throw std::invalid_argument("'rows' must be an array");
  for (const auto& r : rows) {
    VoteRow row;
    if (r.is_array()) {
      row.counts = r.get<std::vector<std::uint64_t>>();
    } else {
      row.counts = r.at("counts").get<std::vector<std::uint64_t>>();
      row.multiplicity = r.value("multiplicity", std::uint64_t{1});
    }
    t.rows.push_back(std::move(row));
  }
  if (j.contains("categories")) t.categories = j.at("categories").get<std::size_t>();
  else if (!t.rows.empty()) t.categories = t.rows.front().counts.size();
  return t;
}

}  // namespace mccd
