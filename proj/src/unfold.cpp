#include "scoreline/unfold.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include "scoreline/errors.hpp"

namespace scoreline {

namespace {

struct Mark {
  Time at;
  Time end;  // voltas only
  NavigationKind kind;
  std::vector<int> numbers;
};

std::vector<Mark> marks_of(const Part& part) {
  std::vector<Mark> out;
  for (const auto& m : part.objects_of<NavigationMark>()) out.push_back({m.start, m.end, m->kind, m->volta_numbers});
  std::stable_sort(out.begin(), out.end(), [](const Mark& a, const Mark& b) { return a.at < b.at; });
  return out;
}

Time timeline_end(const Part& part) { return part.timeline().empty() ? 0 : part.last_time(); }

enum class Decision { undecided, take, skip };

/// Static repetition structure resolved from the marks.
struct Structure {
  std::vector<PlayoutSegment> sections;
  struct Repeat {
    Time end;     // position of the repeat_end
    Time target;  // where playback resumes
    int passes = 2;
  };
  std::vector<Repeat> repeats;
  std::map<Time, std::vector<std::size_t>> repeat_at;  // repeat_end position -> repeats
  std::vector<std::optional<std::size_t>> section_repeat;  // volta sections -> repeat
  std::vector<int> section_last_pass;                      // last ending number of the volta group
  std::set<Time> fine, to_coda, da_capo, dal_segno;
  std::optional<Time> segno, coda;
  Time end = 0;

  std::optional<std::size_t> section_at(Time t) const {
    for (std::size_t i = 0; i < sections.size(); ++i)
      if (sections[i].start == t) return i;
    return std::nullopt;
  }
};

Structure analyse(const Part& part) {
  Structure s;
  s.end = timeline_end(part);
  auto marks = marks_of(part);

  std::set<Time> cuts{0, s.end};
  for (const auto& m : marks) {
    if (m.at > s.end) throw Error(ErrorCategory::structure, "navigation mark beyond the end of the part");
    cuts.insert(m.at);
    if (m.kind == NavigationKind::volta) cuts.insert(m.end);
  }
  std::vector<Time> c(cuts.begin(), cuts.end());
  for (std::size_t i = 0; i + 1 < c.size(); ++i) s.sections.push_back({c[i], c[i + 1], {}});

  // repeat pairing: nearest unmatched start, else the previous end, else 0
  std::vector<Time> open;
  std::optional<Time> last_end;
  for (const auto& m : marks) {
    if (m.kind == NavigationKind::repeat_start) {
      open.push_back(m.at);
    } else if (m.kind == NavigationKind::repeat_end) {
      Time target;
      if (!open.empty()) {
        target = open.back();
        open.pop_back();
      } else {
        target = last_end.value_or(0);
      }
      if (target >= m.at)
        throw Error(ErrorCategory::structure, "repeat end at div " + std::to_string(m.at) + " encloses nothing");
      s.repeat_at[m.at].push_back(s.repeats.size());
      s.repeats.push_back({m.at, target, 2});
      last_end = m.at;
    } else if (m.kind == NavigationKind::fine) {
      s.fine.insert(m.at);
    } else if (m.kind == NavigationKind::to_coda) {
      s.to_coda.insert(m.at);
    } else if (m.kind == NavigationKind::da_capo) {
      s.da_capo.insert(m.at);
    } else if (m.kind == NavigationKind::dal_segno) {
      s.dal_segno.insert(m.at);
    } else if (m.kind == NavigationKind::segno) {
      if (!s.segno) s.segno = m.at;
    } else if (m.kind == NavigationKind::coda) {
      if (!s.coda) s.coda = m.at;
    }
  }

  // volta groups: adjacent brackets; the group's repeat ends inside it
  s.section_repeat.assign(s.sections.size(), std::nullopt);
  s.section_last_pass.assign(s.sections.size(), 0);
  std::vector<Mark> voltas;
  for (const auto& m : marks)
    if (m.kind == NavigationKind::volta) voltas.push_back(m);
  std::size_t g = 0;
  while (g < voltas.size()) {
    std::size_t h = g + 1;
    while (h < voltas.size() && voltas[h].at == voltas[h - 1].end) ++h;
    std::optional<std::size_t> repeat;
    int last_pass = 0;
    for (std::size_t v = g; v < h; ++v) {
      for (int n : voltas[v].numbers) last_pass = std::max(last_pass, n);
      if (repeat) continue;
      for (const auto& [pos, ids] : s.repeat_at)
        if (pos > voltas[v].at && pos <= voltas[v].end) {
          repeat = ids.front();
          break;
        }
    }
    if (!repeat)
      throw Error(ErrorCategory::structure,
                  "volta at div " + std::to_string(voltas[g].at) + " has no enclosing repeat");
    s.repeats[*repeat].passes = std::max(2, last_pass);
    for (std::size_t v = g; v < h; ++v)
      for (std::size_t i = 0; i < s.sections.size(); ++i)
        if (s.sections[i].start >= voltas[v].at && s.sections[i].end <= voltas[v].end) {
          s.sections[i].pass_constraints = voltas[v].numbers;
          s.section_repeat[i] = *repeat;
          s.section_last_pass[i] = last_pass;
        }
    g = h;
  }
  if (!s.dal_segno.empty() && !s.segno) throw Error(ErrorCategory::structure, "dal segno without a segno");
  if (!s.to_coda.empty() && !s.coda) throw Error(ErrorCategory::structure, "to coda without a coda");
  return s;
}

struct PlayState {
  std::size_t section = 0;
  std::vector<int> taken;  // backward jumps per repeat
  std::vector<Decision> decision;
  bool jumped = false;
  bool resume = false;  // re-enter at the end of the last played section
  Unfolding path;
};

class Enumerator {
public:
  Enumerator(const Structure& s, const UnfoldOptions& options, bool all_taken)
      : s_(s), options_(options), all_taken_(all_taken) {}

  std::vector<Unfolding> run() {
    PlayState st;
    st.taken.assign(s_.repeats.size(), 0);
    st.decision.assign(s_.repeats.size(), all_taken_ ? Decision::take : Decision::undecided);
    play(std::move(st));
    return std::move(results_);
  }

private:
  bool repeats_suspended(const PlayState& st) const { return st.jumped && !options_.repeats_after_jump; }

  void play(PlayState st) {
    // guards against malformed structures that would never terminate
    if (++steps_ > 1000000) throw Error(ErrorCategory::structure, "repetition structure does not terminate");
    while (true) {
      if (st.section >= s_.sections.size()) {
        results_.push_back(std::move(st.path));
        return;
      }
      const PlayoutSegment& sec = s_.sections[st.section];
      const bool resume = std::exchange(st.resume, false);
      if (auto r = s_.section_repeat[st.section]; r && !resume) {
        if (st.decision[*r] == Decision::undecided && !repeats_suspended(st)) {
          PlayState skip = st;
          skip.decision[*r] = Decision::skip;
          play(std::move(skip));
          st.decision[*r] = Decision::take;
        }
        int pass = repeats_suspended(st) || st.decision[*r] == Decision::skip ? s_.section_last_pass[st.section]
                                                                              : st.taken[*r] + 1;
        const auto& nums = sec.pass_constraints;
        if (std::find(nums.begin(), nums.end(), pass) == nums.end()) {
          ++st.section;
          continue;
        }
      }
      if (!resume) st.path.push_back(sec);
      Time at = sec.end;

      if (!resume && st.jumped && s_.fine.contains(at)) {
        results_.push_back(std::move(st.path));
        return;
      }
      if (auto it = s_.repeat_at.find(at); it != s_.repeat_at.end() && !repeats_suspended(st)) {
        std::size_t r = it->second.front();
        if (st.decision[r] == Decision::undecided) {
          PlayState skip = st;
          skip.decision[r] = Decision::skip;
          skip.resume = true;
          play(std::move(skip));
          st.decision[r] = Decision::take;
        }
        if (st.decision[r] == Decision::take && st.taken[r] + 1 < s_.repeats[r].passes) {
          ++st.taken[r];
          st.section = jump_target(s_.repeats[r].target);
          continue;
        }
      }
      if (st.jumped && s_.to_coda.contains(at)) {
        st.section = jump_target(*s_.coda);
        continue;
      }
      if (!st.jumped && (s_.da_capo.contains(at) || s_.dal_segno.contains(at))) {
        st.jumped = true;
        if (options_.repeats_after_jump) std::fill(st.taken.begin(), st.taken.end(), 0);
        st.section = jump_target(s_.da_capo.contains(at) ? 0 : *s_.segno);
        continue;
      }
      ++st.section;
    }
  }

  std::size_t jump_target(Time t) const {
    if (t == s_.end) return s_.sections.size();
    auto i = s_.section_at(t);
    if (!i) throw Error(ErrorCategory::structure, "jump target div " + std::to_string(t) + " is not a section start");
    return *i;
  }

  const Structure& s_;
  const UnfoldOptions& options_;
  bool all_taken_;
  std::size_t steps_ = 0;
  std::vector<Unfolding> results_;
};

}  // namespace

std::vector<PlayoutSegment> playout_sections(const Part& part) { return analyse(part).sections; }

std::vector<Unfolding> enumerate_unfoldings(const Part& part, const UnfoldOptions& options) {
  Structure s = analyse(part);
  auto all = Enumerator(s, options, false).run();
  std::vector<Unfolding> unique;
  for (auto& u : all)
    if (std::find(unique.begin(), unique.end(), u) == unique.end()) unique.push_back(std::move(u));
  std::stable_sort(unique.begin(), unique.end(), [](const Unfolding& a, const Unfolding& b) { return a.size() < b.size(); });
  return unique;
}

Unfolding maximal_unfolding(const Part& part, const UnfoldOptions& options) {
  Structure s = analyse(part);
  auto paths = Enumerator(s, options, true).run();
  if (paths.empty()) throw Error(ErrorCategory::structure, "no playthrough");
  return paths.front();
}

Part unfold_part(const Part& part, const Unfolding& unfolding) {
  const Time end = timeline_end(part);
  Part out(part.id(), part.name(), part.divs_per_quarter_at(0));
  out.set_staff_count(part.staff_count());

  std::map<ObjectRef, int> emitted;
  Time cursor = 0;
  int measure_number = -1;
  std::optional<TimeSignature> last_ts;
  std::optional<KeySignature> last_ks;
  auto in_force = [&]<typename T>(Time t) -> std::optional<T> {
    std::optional<T> found;
    for (const auto& o : part.objects_of<T>())
      if (o.start <= t) found = *o.value;
    return found;
  };

  for (const auto& seg : unfolding) {
    if (seg.start < 0 || seg.end > end || seg.start >= seg.end)
      throw Error(ErrorCategory::range, "segment outside the timeline");
    const Time offset = cursor - seg.start;
    for (const auto& [at, divs] : part.divs_map())
      if (at < seg.end && (at >= seg.start || std::next(part.divs_map().upper_bound(at)) == part.divs_map().end() ||
                           part.divs_map().upper_bound(at)->first > seg.start))
        out.set_divs_per_quarter(std::max(at, seg.start) + offset, divs);

    if (auto ts = in_force.template operator()<TimeSignature>(seg.start); ts && ts != last_ts) {
      out.add_object(*ts, cursor, cursor);
      last_ts = ts;
    }
    if (auto ks = in_force.template operator()<KeySignature>(seg.start);
        ks && (!last_ks || ks->fifths != last_ks->fifths || ks->mode != last_ks->mode)) {
      out.add_object(*ks, cursor, cursor);
      last_ks = ks;
    }

    std::map<std::string, std::string> renamed;
    std::vector<std::pair<const Slur*, Time>> slurs;
    const bool last_section = seg.end == end;
    for (ObjectRef ref = 0; ref < part.objects().size(); ++ref) {
      const TimedObject& o = part.object(ref);
      bool inside = (o.start >= seg.start && o.start < seg.end) || (last_section && o.start == end);
      if (!inside) continue;
      Time s = o.start + offset, e = o.end + offset;
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Note>) {
              Note n = v;
              n.id = v.id + "-" + std::to_string(++emitted[ref]);
              renamed[v.id] = n.id;
              out.add_object(n, s, e);
            } else if constexpr (std::is_same_v<T, Rest>) {
              Rest r = v;
              r.id = v.id + "-" + std::to_string(++emitted[ref]);
              out.add_object(r, s, e);
            } else if constexpr (std::is_same_v<T, Measure>) {
              if (measure_number < 0) measure_number = v.number - 1;
              out.add_object(Measure{++measure_number}, s, std::min(e, seg.end + offset));
            } else if constexpr (std::is_same_v<T, TimeSignature>) {
              if (o.start == seg.start) return;
              out.add_object(v, s, e);
              last_ts = v;
            } else if constexpr (std::is_same_v<T, KeySignature>) {
              if (o.start == seg.start) return;
              out.add_object(v, s, e);
              last_ks = v;
            } else if constexpr (std::is_same_v<T, Slur>) {
              slurs.emplace_back(&v, s);
            } else if constexpr (std::is_same_v<T, NavigationMark>) {
              return;
            } else {
              out.add_object(v, s, e);
            }
          },
          o.data);
    }
    for (const auto& [slur, s] : slurs) {
      auto a = renamed.find(slur->start_note_id), z = renamed.find(slur->end_note_id);
      if (a == renamed.end() || z == renamed.end()) continue;
      Time e = s;
      for (const auto& n : out.objects_of<Note>())
        if (n->id == z->second) e = std::max(e, n.end);
      out.add_object(Slur{a->second, z->second}, s, e);
    }
    cursor += seg.end - seg.start;
  }
  out.freeze();
  return out;
}

Part unfold_maximal(const Part& part, const UnfoldOptions& options) {
  return unfold_part(part, maximal_unfolding(part, options));
}

std::string describe(const Unfolding& unfolding) {
  std::ostringstream out;
  for (std::size_t i = 0; i < unfolding.size(); ++i) {
    const auto& s = unfolding[i];
    out << (i ? " " : "") << '[' << s.start << ',' << s.end << ')';
    if (!s.pass_constraints.empty()) {
      out << '{';
      for (std::size_t k = 0; k < s.pass_constraints.size(); ++k) out << (k ? "," : "") << s.pass_constraints[k];
      out << '}';
    }
  }
  return out.str();
}

}  // namespace scoreline
