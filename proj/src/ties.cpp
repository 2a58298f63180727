#include "ties.hpp"

#include <map>
#include <set>

namespace scoreline::detail {

std::vector<TiedChain> merge_tied_notes(const Part& part) {
  auto notes = notes_sorted(part);
  // candidates by (start, pitch)
  std::multimap<std::pair<Time, int>, std::size_t> by_start;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    Tie t = notes[i].value->tie;
    if (t == Tie::stop || t == Tie::cont) by_start.emplace(std::make_pair(notes[i].start, notes[i].value->midi_pitch), i);
  }
  std::vector<bool> consumed(notes.size(), false);
  std::vector<int> next(notes.size(), -1);
  for (std::size_t i = 0; i < notes.size(); ++i) {
    Tie t = notes[i].value->tie;
    if (t != Tie::start && t != Tie::cont) continue;
    if (notes[i].value->grace) continue;
    auto [lo, hi] = by_start.equal_range({notes[i].end, notes[i].value->midi_pitch});
    int pick = -1;
    for (auto it = lo; it != hi; ++it) {
      std::size_t j = it->second;
      if (consumed[j] || j == i) continue;
      if (notes[j].value->voice == notes[i].value->voice) {
        pick = static_cast<int>(j);
        break;
      }
      if (pick < 0) pick = static_cast<int>(j);
    }
    if (pick >= 0) {
      consumed[pick] = true;
      next[i] = pick;
    }
  }
  std::vector<TiedChain> out;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    if (consumed[i]) continue;
    TiedChain c{notes[i], notes[i].end, {notes[i].ref}};
    std::set<std::size_t> seen{i};
    for (int j = next[i]; j >= 0 && seen.insert(j).second; j = next[j]) {
      c.end = notes[j].end;
      c.members.push_back(notes[j].ref);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<TiedChain> unmerged_notes(const Part& part) {
  std::vector<TiedChain> out;
  for (const auto& n : notes_sorted(part)) out.push_back({n, n.end, {n.ref}});
  return out;
}

}  // namespace scoreline::detail
