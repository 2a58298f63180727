#include "scoreline/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <tuple>

#include "scoreline/errors.hpp"

namespace scoreline {

int letter_semitone(char step) {
  switch (step) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return 5;
    case 'G': return 7;
    case 'A': return 9;
    case 'B': return 11;
    default: throw Error(ErrorCategory::range, std::string("invalid step '") + step + "'");
  }
}

int midi_pitch(char step, int alter, int octave) {
  return 12 * (octave + 1) + letter_semitone(step) + alter;
}

Note Note::spelled(std::string id, char step, int alter, int octave, int voice, int staff) {
  Note n;
  n.id = std::move(id);
  n.step = step;
  n.alter = alter;
  n.octave = octave;
  n.midi_pitch = scoreline::midi_pitch(step, alter, octave);
  n.voice = voice;
  n.staff = staff;
  return n;
}

const char* to_string(NavigationKind k) noexcept {
  switch (k) {
    case NavigationKind::repeat_start: return "repeat_start";
    case NavigationKind::repeat_end: return "repeat_end";
    case NavigationKind::volta: return "volta";
    case NavigationKind::da_capo: return "da_capo";
    case NavigationKind::dal_segno: return "dal_segno";
    case NavigationKind::segno: return "segno";
    case NavigationKind::fine: return "fine";
    case NavigationKind::coda: return "coda";
    case NavigationKind::to_coda: return "to_coda";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Part

Part::Part(std::string id, std::string name, int divs_per_quarter) : id_(std::move(id)), name_(std::move(name)) {
  if (divs_per_quarter <= 0) throw Error(ErrorCategory::range, "divs per quarter must be positive");
  divs_map_[0] = divs_per_quarter;
}

void Part::check_mutable() const {
  if (frozen_) throw Error(ErrorCategory::frozen, "part '" + id_ + "' is frozen");
}

void Part::set_name(std::string name) {
  check_mutable();
  name_ = std::move(name);
}

int Part::staff_count() const {
  int n = staff_count_;
  for (const auto& o : objects_) {
    if (auto* note = o.as<Note>()) n = std::max(n, note->staff);
    if (auto* rest = o.as<Rest>()) n = std::max(n, rest->staff);
  }
  return n;
}

void Part::set_staff_count(int n) {
  check_mutable();
  if (n <= 0) throw Error(ErrorCategory::range, "staff count must be positive");
  staff_count_ = n;
}

TimePoint& Part::point_at(Time t) {
  auto [it, inserted] = timeline_.try_emplace(t);
  if (inserted) it->second.t = t;
  return it->second;
}

ObjectRef Part::add_object(ObjectData obj, Time start, Time end) {
  check_mutable();
  if (start < 0 || end < 0)
    throw Error(ErrorCategory::range, "negative time [" + std::to_string(start) + ", " + std::to_string(end) + "]");
  if (end < start)
    throw Error(ErrorCategory::range, "end before start [" + std::to_string(start) + ", " + std::to_string(end) + "]");
  if (auto* note = std::get_if<Note>(&obj)) {
    if (!note->grace && end == start)
      throw Error(ErrorCategory::range, "note '" + note->id + "' has zero duration");
    if (note->grace && end != start)
      throw Error(ErrorCategory::range, "grace note '" + note->id + "' must have zero duration");
    if (note->id.empty()) throw Error(ErrorCategory::identity, "note without id");
    if (note_index_.contains(note->id)) throw Error(ErrorCategory::identity, "duplicate note id '" + note->id + "'");
  }
  ObjectRef ref = objects_.size();
  std::string note_id;
  if (auto* note = std::get_if<Note>(&obj)) note_id = note->id;
  objects_.push_back(TimedObject{std::move(obj), start, end});
  if (!note_id.empty()) note_index_.emplace(std::move(note_id), ref);
  point_at(start).starting.push_back(ref);
  point_at(end).ending.push_back(ref);
  return ref;
}

void Part::set_divs_per_quarter(Time at, int divs) {
  check_mutable();
  if (at < 0) throw Error(ErrorCategory::range, "negative time");
  if (divs <= 0) throw Error(ErrorCategory::range, "divs per quarter must be positive");
  point_at(at);
  divs_map_[at] = divs;
  // drop redundant breakpoints so equal maps compare equal
  for (auto it = std::next(divs_map_.begin()); it != divs_map_.end();) {
    if (it->second == std::prev(it)->second)
      it = divs_map_.erase(it);
    else
      ++it;
  }
}

int Part::divs_per_quarter_at(Time t) const {
  auto it = divs_map_.upper_bound(t);
  if (it == divs_map_.begin()) return divs_map_.begin()->second;
  return std::prev(it)->second;
}

const TimedObject* Part::find_note(std::string_view id) const {
  auto it = note_index_.find(id);
  return it == note_index_.end() ? nullptr : &objects_[it->second];
}

Time Part::first_time() const { return timeline_.empty() ? 0 : timeline_.begin()->first; }
Time Part::last_time() const { return timeline_.empty() ? 0 : timeline_.rbegin()->first; }

std::vector<Timed<Note>> notes_sorted(const Part& part) {
  auto notes = part.objects_of<Note>();
  std::sort(notes.begin(), notes.end(), [](const Timed<Note>& a, const Timed<Note>& b) {
    return std::tie(a.start, a->midi_pitch, a->id) < std::tie(b.start, b->midi_pitch, b->id);
  });
  return notes;
}

namespace {

std::string describe_object(const TimedObject& o) {
  std::ostringstream s;
  s << '[' << o.start << ',' << o.end << "] ";
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Note>) {
          s << "note " << v.id << ' ' << v.step << v.alter << '/' << v.octave << " p" << v.midi_pitch << " v"
            << v.voice << " s" << v.staff << " tie" << static_cast<int>(v.tie) << (v.grace ? " grace" : "");
        } else if constexpr (std::is_same_v<T, Rest>) {
          s << "rest " << v.id << " v" << v.voice << " s" << v.staff;
        } else if constexpr (std::is_same_v<T, Measure>) {
          s << "measure " << v.number;
        } else if constexpr (std::is_same_v<T, TimeSignature>) {
          s << "time " << v.beats << '/' << v.beat_type;
        } else if constexpr (std::is_same_v<T, KeySignature>) {
          s << "key " << v.fifths << (v.mode == Mode::minor ? " minor" : " major");
        } else if constexpr (std::is_same_v<T, Slur>) {
          s << "slur " << v.start_note_id << ' ' << v.end_note_id;
        } else if constexpr (std::is_same_v<T, Directive>) {
          s << "directive " << static_cast<int>(v.kind) << ' ' << v.text;
        } else if constexpr (std::is_same_v<T, NavigationMark>) {
          s << "nav " << to_string(v.kind);
          for (int n : v.volta_numbers) s << ' ' << n;
        }
      },
      o.data);
  return s.str();
}

}  // namespace

std::vector<std::string> describe_timeline(const Part& part) {
  std::vector<std::string> out;
  for (const auto& [t, tp] : part.timeline()) {
    std::vector<std::string> starting, ending;
    for (auto r : tp.starting) starting.push_back(describe_object(part.object(r)));
    for (auto r : tp.ending) ending.push_back(describe_object(part.object(r)));
    std::sort(starting.begin(), starting.end());
    std::sort(ending.begin(), ending.end());
    std::string line = std::to_string(t) + " divs=" + std::to_string(part.divs_per_quarter_at(t)) + " |";
    for (auto& d : starting) line += " +" + d;
    line += " |";
    for (auto& d : ending) line += " -" + d;
    out.push_back(std::move(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PartGroup

PartGroup::PartGroup(std::string id, std::string name) : id_(std::move(id)), name_(std::move(name)) {}

void PartGroup::check_unique(const std::string& id) const {
  for (const auto& c : children_) {
    const std::string& other =
        std::visit([](const auto& n) -> const std::string& { return n.id(); }, c.node);
    if (other == id) throw Error(ErrorCategory::identity, "duplicate child id '" + id + "' in group '" + id_ + "'");
  }
}

void PartGroup::add(Part part) {
  check_unique(part.id());
  children_.push_back(Child{std::move(part)});
}

void PartGroup::add(PartGroup group) {
  check_unique(group.id());
  children_.push_back(Child{std::move(group)});
}

std::vector<const Part*> PartGroup::parts() const {
  std::vector<const Part*> out;
  for (const auto& c : children_) {
    if (auto* p = std::get_if<Part>(&c.node)) {
      out.push_back(p);
    } else {
      auto sub = std::get<PartGroup>(c.node).parts();
      out.insert(out.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

std::vector<Part*> PartGroup::parts_mutable() {
  std::vector<Part*> out;
  for (auto& c : children_) {
    if (auto* p = std::get_if<Part>(&c.node)) {
      out.push_back(p);
    } else {
      auto sub = std::get<PartGroup>(c.node).parts_mutable();
      out.insert(out.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PerformedPart

PerformedPart::PerformedPart(std::string id) : id_(std::move(id)) {}

void PerformedPart::check_mutable() const {
  if (frozen_) throw Error(ErrorCategory::frozen, "performance '" + id_ + "' is frozen");
}

void PerformedPart::add_note(PerformedNote note) {
  check_mutable();
  if (note.onset_sec < 0) throw Error(ErrorCategory::range, "negative onset");
  if (note.duration_sec < 0) throw Error(ErrorCategory::range, "negative duration");
  if (note.midi_pitch < 0 || note.midi_pitch > 127) throw Error(ErrorCategory::range, "pitch out of range");
  notes_.push_back(std::move(note));
}

void PerformedPart::add_control(ControlEvent event) {
  check_mutable();
  controls_.push_back(event);
}

void PerformedPart::freeze() {
  if (frozen_) return;
  std::stable_sort(notes_.begin(), notes_.end(), [](const PerformedNote& a, const PerformedNote& b) {
    return std::tie(a.onset_sec, a.midi_pitch) < std::tie(b.onset_sec, b.midi_pitch);
  });
  std::stable_sort(controls_.begin(), controls_.end(),
                   [](const ControlEvent& a, const ControlEvent& b) { return a.time_sec < b.time_sec; });
  std::set<std::string> seen;
  for (const auto& n : notes_)
    if (!n.id.empty() && !seen.insert(n.id).second)
      throw Error(ErrorCategory::identity, "duplicate performed note id '" + n.id + "'");
  for (std::size_t k = 0; k < notes_.size(); ++k) {
    if (!notes_[k].id.empty()) continue;
    std::string id = "n" + std::to_string(k + 1);
    while (seen.contains(id)) id += "'";
    seen.insert(id);
    notes_[k].id = id;
  }
  frozen_ = true;
}

const PerformedNote* PerformedPart::find_note(std::string_view id) const {
  for (const auto& n : notes_)
    if (n.id == id) return &n;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Alignment

const char* to_string(AlignmentLabel l) noexcept {
  switch (l) {
    case AlignmentLabel::match: return "match";
    case AlignmentLabel::insertion: return "insertion";
    case AlignmentLabel::deletion: return "deletion";
    case AlignmentLabel::ornament: return "ornament";
  }
  return "?";
}

void Alignment::add_match(std::string score_id, std::string perf_id) {
  pairs.push_back({AlignmentLabel::match, std::move(score_id), std::move(perf_id)});
}
void Alignment::add_insertion(std::string perf_id) {
  pairs.push_back({AlignmentLabel::insertion, std::nullopt, std::move(perf_id)});
}
void Alignment::add_deletion(std::string score_id) {
  pairs.push_back({AlignmentLabel::deletion, std::move(score_id), std::nullopt});
}
void Alignment::add_ornament(std::string score_id, std::string perf_id) {
  pairs.push_back({AlignmentLabel::ornament, std::move(score_id), std::move(perf_id)});
}

void Alignment::validate() const {
  std::set<std::string> matched_score, matched_perf;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const bool need_score = p.label != AlignmentLabel::insertion;
    const bool need_perf = p.label != AlignmentLabel::deletion;
    if (need_score != p.score_id.has_value() || need_perf != p.perf_id.has_value())
      throw Error(ErrorCategory::identity,
                  "alignment pair " + std::to_string(i) + " (" + to_string(p.label) + ") has wrong id fields");
    if (p.label == AlignmentLabel::match) {
      if (!matched_score.insert(*p.score_id).second)
        throw Error(ErrorCategory::identity, "score note '" + *p.score_id + "' matched twice");
      if (!matched_perf.insert(*p.perf_id).second)
        throw Error(ErrorCategory::identity, "performed note '" + *p.perf_id + "' matched twice");
    }
  }
}

std::size_t Alignment::count(AlignmentLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [&](const AlignmentPair& p) { return p.label == label; }));
}

}  // namespace scoreline
