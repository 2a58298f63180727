#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "scoreline/analysis.hpp"

namespace scoreline {

namespace {

constexpr long kInf = std::numeric_limits<long>::max() / 4;
// Reusing a stream the neighbouring contig does not use costs more than any
// pitch distance; opening a brand-new stream costs more still.
constexpr long kIdleStream = 1000;
constexpr long kNewStream = 2000;

/// Streams ordered top to bottom; keys are doubles so new streams can be
/// slotted between existing ones.
struct StreamOrder {
  std::vector<double> key;  // by stream id

  std::vector<int> sorted() const {
    std::vector<int> ids(key.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) { return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)]; });
    return ids;
  }
  int add(double k) {
    key.push_back(k);
    return static_cast<int>(key.size()) - 1;
  }
};

/// Order-preserving assignment of a contig's notes (highest first) to
/// streams. Slots alternate: gap 0, stream 0, gap 1, ..., stream S-1, gap S;
/// a gap slot opens a new stream there. Notes with a stream already (held
/// over from the processed neighbour) are pinned to it.
std::vector<int> assign_streams(const std::vector<std::size_t>& notes, const std::vector<VoiceInput>& input,
                                const std::map<int, int>& neighbour_pitch, const std::vector<int>& pinned,
                                StreamOrder& streams) {
  std::vector<int> ids = streams.sorted();
  const std::size_t slots = 2 * ids.size() + 1;
  auto slot_stream = [&](std::size_t j) { return j % 2 == 1 ? ids[j / 2] : -1; };
  auto cost = [&](std::size_t k, std::size_t j) -> long {
    int sid = slot_stream(j);
    if (pinned[k] >= 0) return sid == pinned[k] ? 0 : kInf;
    if (sid < 0) return kNewStream;
    auto it = neighbour_pitch.find(sid);
    if (it == neighbour_pitch.end()) return kIdleStream;
    return std::abs(input[notes[k]].pitch - it->second);
  };
  const std::size_t b = notes.size();
  // dp[k][j]: best cost placing notes 0..k-1 in slots < j. A stream slot
  // takes one note, a gap any number (each opens its own stream).
  enum : char { skip_slot, advance, stay };
  std::vector<std::vector<long>> dp(b + 1, std::vector<long>(slots + 1, kInf));
  std::vector<std::vector<char>> take(b + 1, std::vector<char>(slots + 1, skip_slot));
  for (std::size_t j = 0; j <= slots; ++j) dp[0][j] = 0;
  auto plus = [](long a, long c) { return a >= kInf || c >= kInf ? kInf : a + c; };
  for (std::size_t k = 1; k <= b; ++k)
    for (std::size_t j = 1; j <= slots; ++j) {
      long c = cost(k - 1, j - 1);
      dp[k][j] = dp[k][j - 1];
      if (long use = plus(dp[k - 1][j - 1], c); use < dp[k][j]) {
        dp[k][j] = use;
        take[k][j] = advance;
      }
      if (slot_stream(j - 1) < 0)
        if (long use = plus(dp[k - 1][j], c); use < dp[k][j]) {
          dp[k][j] = use;
          take[k][j] = stay;
        }
    }
  // pinned notes always keep their streams' order, so a placement exists
  if (dp[b][slots] >= kInf) throw std::logic_error("voice separation: no order-preserving stream assignment");
  std::vector<std::size_t> slot_of(b, 0);
  for (std::size_t k = b, j = slots; k > 0;) {
    switch (take[k][j]) {
      case skip_slot: --j; break;
      case advance: slot_of[--k] = --j; break;
      case stay: slot_of[--k] = j - 1; break;
    }
  }
  std::vector<int> out(b);
  for (std::size_t k = 0; k < b; ++k) {
    std::size_t j = slot_of[k];
    if (j % 2 == 1) {
      out[k] = ids[j / 2];
      continue;
    }
    double lo = j / 2 == 0 ? (ids.empty() ? 0.0 : streams.key[static_cast<std::size_t>(ids.front())] - 1)
                           : streams.key[static_cast<std::size_t>(ids[j / 2 - 1])];
    double hi = j / 2 == ids.size() ? lo + 2 : streams.key[static_cast<std::size_t>(ids[j / 2])];
    // several new streams in one gap are spread evenly
    std::size_t run = 0;
    while (k + run < b && slot_of[k + run] == j) ++run;
    for (std::size_t r = 0; r < run; ++r)
      out[k + r] = streams.add(lo + (hi - lo) * static_cast<double>(r + 1) / static_cast<double>(run + 1));
    k += run - 1;
  }
  return out;
}

}  // namespace

VoiceSeparation separate_voices(const std::vector<VoiceInput>& notes) {
  VoiceSeparation result;
  result.voices.assign(notes.size(), 0);
  if (notes.empty()) return result;

  // doubled grid so zero-length notes can take half a unit
  std::vector<std::int64_t> on(notes.size()), off(notes.size());
  std::set<std::int64_t> bounds;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    on[i] = 2 * notes[i].onset;
    off[i] = std::max(2 * notes[i].offset, on[i] + 1);
    bounds.insert(on[i]);
    bounds.insert(off[i]);
  }

  // contigs: maximal intervals with a fixed set of sounding notes
  std::vector<std::int64_t> edges(bounds.begin(), bounds.end());
  std::vector<std::size_t> by_onset(notes.size());
  std::iota(by_onset.begin(), by_onset.end(), 0);
  std::sort(by_onset.begin(), by_onset.end(), [&](std::size_t a, std::size_t b) { return on[a] < on[b]; });
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::pair<std::int64_t, std::int64_t>> spans;
  std::vector<std::size_t> active;
  std::size_t next = 0;
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    std::int64_t a = edges[e], z = edges[e + 1];
    active.erase(std::remove_if(active.begin(), active.end(), [&](std::size_t i) { return off[i] <= a; }),
                 active.end());
    while (next < by_onset.size() && on[by_onset[next]] <= a) active.push_back(by_onset[next++]);
    if (active.empty()) continue;
    std::vector<std::size_t> set = active;
    std::sort(set.begin(), set.end(), [&](std::size_t x, std::size_t y) {
      return notes[x].pitch != notes[y].pitch ? notes[x].pitch > notes[y].pitch : x < y;
    });
    members.push_back(std::move(set));
    spans.emplace_back(a, z);
  }

  const std::size_t m = members.size();
  std::size_t widest = 0;
  for (const auto& c : members) widest = std::max(widest, c.size());

  // seed the first maximal contig by pitch rank, then sweep outwards
  std::size_t seed = 0;
  while (members[seed].size() != widest) ++seed;
  StreamOrder streams;
  std::vector<int> stream(notes.size(), -1);
  std::vector<std::vector<int>> contig_streams(m);
  for (std::size_t k = 0; k < widest; ++k) {
    int id = streams.add(static_cast<double>(k));
    stream[members[seed][k]] = id;
    contig_streams[seed].push_back(id);
  }
  auto place = [&](std::size_t c, std::size_t from) {
    const auto& set = members[c];
    std::vector<int> pinned(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) pinned[k] = stream[set[k]];
    std::map<int, int> neighbour;
    for (std::size_t k = 0; k < members[from].size(); ++k)
      neighbour[contig_streams[from][k]] = notes[members[from][k]].pitch;
    contig_streams[c] = assign_streams(set, notes, neighbour, pinned, streams);
    for (std::size_t k = 0; k < set.size(); ++k)
      if (stream[set[k]] < 0) stream[set[k]] = contig_streams[c][k];
  };
  for (std::size_t c = seed + 1; c < m; ++c) place(c, c - 1);
  for (std::size_t c = seed; c-- > 0;) place(c, c + 1);

  // final numbering: streams sounding together keep their vertical order,
  // otherwise higher mean pitch first
  const std::size_t S = streams.key.size();
  std::vector<double> sum(S, 0), count(S, 0);
  for (std::size_t i = 0; i < notes.size(); ++i) {
    sum[static_cast<std::size_t>(stream[i])] += notes[i].pitch;
    count[static_cast<std::size_t>(stream[i])] += 1;
  }
  std::vector<std::set<std::size_t>> below(S);
  std::vector<int> indegree(S, 0);
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t k = 0; k + 1 < members[c].size(); ++k) {
      auto hi = static_cast<std::size_t>(contig_streams[c][k]);
      auto lo = static_cast<std::size_t>(contig_streams[c][k + 1]);
      if (below[hi].insert(lo).second) ++indegree[lo];
    }
  std::vector<int> number(S, 0);
  int next_number = 0;
  for (std::size_t placed = 0; placed < S; ++placed) {
    std::size_t best = S;
    for (std::size_t s = 0; s < S; ++s) {
      if (number[s] || indegree[s] > 0 || count[s] == 0) continue;
      if (best == S || sum[s] / count[s] > sum[best] / count[best]) best = s;
    }
    if (best == S) break;
    number[best] = ++next_number;
    for (std::size_t lo : below[best]) --indegree[lo];
  }
  result.voice_count = next_number;
  for (std::size_t i = 0; i < notes.size(); ++i) result.voices[i] = number[static_cast<std::size_t>(stream[i])];

  result.contigs.reserve(m);
  for (std::size_t c = 0; c < m; ++c)
    result.contigs.push_back({spans[c].first / 2, (spans[c].second + 1) / 2, members[c]});
  return result;
}

std::vector<int> estimate_voices(const NoteArray& notes) {
  std::vector<VoiceInput> input;
  input.reserve(notes.size());
  for (const auto& r : notes.records) {
    if (notes.kind == NoteArray::Kind::score) {
      input.push_back({r.onset_div, r.onset_div + r.duration_div, r.pitch});
    } else {
      auto us = [](double s) { return static_cast<std::int64_t>(std::llround(s * 1e6)); };
      input.push_back({us(r.onset_sec), us(r.onset_sec + r.duration_sec), r.pitch});
    }
  }
  return separate_voices(input).voices;
}

std::vector<int> estimate_voices(const Part& part) {
  std::vector<VoiceInput> input;
  for (const auto& n : notes_sorted(part)) input.push_back({n.start, n.end, n.value->midi_pitch});
  return separate_voices(input).voices;
}

}  // namespace scoreline
