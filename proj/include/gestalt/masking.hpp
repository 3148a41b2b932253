// masking.hpp -- redundancy resolution over raw detections.
//
// Works on any gestalt whose support is a set of building-element indices and
// which can be rescored on a reduced support. Two policies:
//
//   exclusion  each building element supports at most one accepted gestalt;
//              accepted members are removed from every other candidate.
//   masking    B is rejected only if a single accepted gestalt A leaves it
//              non-meaningful once A's members are discounted from B.
#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <iterator>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "gestalt/core_stats.hpp"

namespace gestalt {

using TieKey = std::tuple<std::size_t, std::size_t, double>;

template <class Payload>
struct GestaltCandidate {
  Payload payload;
  LogNfa nfa;
  std::vector<std::size_t> members;  // sorted ascending
  TieKey key{};
  std::function<LogNfa(std::span<const std::size_t>)> rescore;
};

template <class Payload>
bool gestalt_less(const GestaltCandidate<Payload>& a, const GestaltCandidate<Payload>& b) {
  if (a.nfa != b.nfa) return a.nfa < b.nfa;
  if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
  return a.key < b.key;
}

/// a \ b for sorted index lists.
inline std::vector<std::size_t> set_minus(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> out;
  out.reserve(a.size());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/// True when B is no longer meaningful after discounting A's members.
template <class Payload>
bool is_masked_by(const GestaltCandidate<Payload>& b, const GestaltCandidate<Payload>& a, double epsilon) {
  const auto rest = set_minus(b.members, a.members);
  if (rest.size() == b.members.size()) return false;  // disjoint: B keeps its own score
  return !is_meaningful(b.rescore(rest), epsilon);
}

/// Greedy exclusion principle. Returned gestalts carry the member set and NFA
/// they had when accepted.
template <class Payload>
std::vector<GestaltCandidate<Payload>> exclusion_filter(std::vector<GestaltCandidate<Payload>> pool, double epsilon) {
  std::erase_if(pool, [&](const auto& g) { return !is_meaningful(g.nfa, epsilon); });
  std::size_t max_index = 0;
  for (const auto& g : pool)
    if (!g.members.empty()) max_index = std::max(max_index, g.members.back());
  std::vector<char> taken(max_index + 1, 0);

  std::vector<GestaltCandidate<Payload>> accepted;
  while (!pool.empty()) {
    auto best = std::min_element(pool.begin(), pool.end(), gestalt_less<Payload>);
    accepted.push_back(std::move(*best));
    pool.erase(best);
    for (std::size_t k : accepted.back().members) taken[k] = 1;

    for (auto& g : pool) {
      const auto before = g.members.size();
      std::erase_if(g.members, [&](std::size_t k) { return taken[k] != 0; });
      if (g.members.size() != before) g.nfa = g.rescore(g.members);
    }
    std::erase_if(pool, [&](const auto& g) { return !is_meaningful(g.nfa, epsilon); });
  }
  return accepted;
}

/// Masking principle: candidates are visited once, in ascending NFA order,
/// and accepted unless one previously accepted gestalt masks them. Members
/// are never consumed.
template <class Payload>
std::vector<GestaltCandidate<Payload>> masking_filter(std::vector<GestaltCandidate<Payload>> pool, double epsilon) {
  std::erase_if(pool, [&](const auto& g) { return !is_meaningful(g.nfa, epsilon); });
  std::stable_sort(pool.begin(), pool.end(), gestalt_less<Payload>);
  std::vector<GestaltCandidate<Payload>> accepted;
  // Hot path: O(accepted) rescorings per candidate.
  for (auto& b : pool) {
    const bool masked =
        std::any_of(accepted.begin(), accepted.end(), [&](const auto& a) { return is_masked_by(b, a, epsilon); });
    if (!masked) accepted.push_back(std::move(b));
  }
  return accepted;
}

/// Pairs (a, b) of the given set where b is masked by a. An empty result is
/// the pairwise stability property: every gestalt survives the removal of any
/// other single one. masking_filter only checks against earlier acceptances,
/// so this is the check for the reverse direction too.
template <class Payload>
std::vector<std::pair<std::size_t, std::size_t>> masking_violations(
    const std::vector<GestaltCandidate<Payload>>& set, double epsilon) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < set.size(); ++a)
    for (std::size_t b = 0; b < set.size(); ++b)
      if (a != b && is_masked_by(set[b], set[a], epsilon)) out.emplace_back(a, b);
  return out;
}

}  // namespace gestalt
