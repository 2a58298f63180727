#pragma once

// Score / performance / alignment data model.
//
// A Part owns a timeline of TimePoints keyed by integer div position. Every
// score element is a TimedObject registered with the TimePoints at its start
// and end. Parts and PerformedParts are built mutably and then frozen; a frozen
// object rejects further mutation and may be shared across threads for reading.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scoreline/rational.hpp"

namespace scoreline {

using Time = std::int64_t;  // divs

enum class Tie { none, start, stop, cont };

/// Semitone of a natural letter: C,D,E,F,G,A,B -> 0,2,4,5,7,9,11.
int letter_semitone(char step);

/// 12*(octave+1) + semitone(step) + alter.
int midi_pitch(char step, int alter, int octave);

struct Note {
  std::string id;
  char step = 'C';
  int alter = 0;
  int octave = 4;
  int midi_pitch = 60;
  int voice = 1;
  int staff = 1;
  Tie tie = Tie::none;
  bool grace = false;

  /// Builds a note with midi_pitch derived from the spelling.
  static Note spelled(std::string id, char step, int alter, int octave, int voice = 1, int staff = 1);
};

struct Rest {
  std::string id;
  int voice = 1;
  int staff = 1;
};

struct Measure {
  int number = 1;
};

struct TimeSignature {
  int beats = 4;
  int beat_type = 4;

  friend bool operator==(const TimeSignature&, const TimeSignature&) = default;
};

enum class Mode { major, minor };

struct KeySignature {
  int fifths = 0;
  Mode mode = Mode::major;

  friend bool operator==(const KeySignature&, const KeySignature&) = default;
};

struct Slur {
  std::string start_note_id;
  std::string end_note_id;
};

enum class DirectiveKind { tempo, loudness };

struct Directive {
  DirectiveKind kind = DirectiveKind::tempo;
  std::string text;
  std::optional<double> quarter_bpm;  // tempo directives with a metronome value
};

enum class NavigationKind {
  repeat_start,
  repeat_end,
  volta,
  da_capo,
  dal_segno,
  segno,
  fine,
  coda,
  to_coda,
};

const char* to_string(NavigationKind k) noexcept;

struct NavigationMark {
  NavigationKind kind = NavigationKind::repeat_start;
  std::vector<int> volta_numbers;  // sorted, unique; volta only
};

using ObjectData =
    std::variant<Note, Rest, Measure, TimeSignature, KeySignature, Slur, Directive, NavigationMark>;

using ObjectRef = std::size_t;

struct TimedObject {
  ObjectData data;
  Time start = 0;
  Time end = 0;

  Time duration() const { return end - start; }

  template <class T>
  const T* as() const {
    return std::get_if<T>(&data);
  }
};

struct TimePoint {
  Time t = 0;
  std::vector<ObjectRef> starting;
  std::vector<ObjectRef> ending;
};

/// A typed view of one registered object.
template <class T>
struct Timed {
  const T* value;
  Time start;
  Time end;
  ObjectRef ref;

  const T& operator*() const { return *value; }
  const T* operator->() const { return value; }
};

class Part {
public:
  explicit Part(std::string id = "P1", std::string name = {}, int divs_per_quarter = 1);

  const std::string& id() const { return id_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name);

  /// Highest staff number used by any note or rest (at least 1), unless set explicitly larger.
  int staff_count() const;
  void set_staff_count(int n);

  /// Registers obj between start and end. Throws range error for negative or
  /// inverted times (and zero-length non-grace notes), identity error for a
  /// duplicate note id.
  ObjectRef add_object(ObjectData obj, Time start, Time end);

  /// Divs-per-quarter from `at` onwards; creates the TimePoint if absent.
  void set_divs_per_quarter(Time at, int divs);
  const std::map<Time, int>& divs_map() const { return divs_map_; }
  int divs_per_quarter_at(Time t) const;
  bool constant_divs() const { return divs_map_.size() == 1; }

  const std::map<Time, TimePoint>& timeline() const { return timeline_; }
  const TimedObject& object(ObjectRef ref) const { return objects_.at(ref); }
  std::span<const TimedObject> objects() const { return objects_; }

  template <class T>
  std::vector<Timed<T>> objects_of() const {
    std::vector<Timed<T>> out;
    for (ObjectRef i = 0; i < objects_.size(); ++i) {
      if (const T* v = objects_[i].template as<T>()) out.push_back({v, objects_[i].start, objects_[i].end, i});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    return out;
  }

  /// The note with this id, or nullptr.
  const TimedObject* find_note(std::string_view id) const;

  /// First and last TimePoint positions (0 for an empty part).
  Time first_time() const;
  Time last_time() const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

private:
  void check_mutable() const;
  TimePoint& point_at(Time t);

  std::string id_;
  std::string name_;
  int staff_count_ = 1;
  std::map<Time, int> divs_map_;
  std::map<Time, TimePoint> timeline_;
  std::vector<TimedObject> objects_;
  std::map<std::string, ObjectRef, std::less<>> note_index_;
  bool frozen_ = false;
};

/// Notes ordered by (start div, midi pitch, id).
std::vector<Timed<Note>> notes_sorted(const Part& part);

/// Canonical textual dump of the timeline, independent of insertion order.
/// Used to compare timelines structurally.
std::vector<std::string> describe_timeline(const Part& part);

class PartGroup {
public:
  struct Child;

  explicit PartGroup(std::string id = "root", std::string name = {});

  const std::string& id() const { return id_; }
  const std::string& name() const { return name_; }

  /// Throws identity error when a child with the same id already exists.
  void add(Part part);
  void add(PartGroup group);

  const std::vector<Child>& children() const { return children_; }

  /// All parts, depth-first in document order.
  std::vector<const Part*> parts() const;
  std::vector<Part*> parts_mutable();

private:
  void check_unique(const std::string& id) const;

  std::string id_;
  std::string name_;
  std::vector<Child> children_;
};

struct PartGroup::Child {
  std::variant<Part, PartGroup> node;
};

struct PerformedNote {
  std::string id;
  double onset_sec = 0;
  double duration_sec = 0;
  int midi_pitch = 60;
  int velocity = 64;
  int channel = 0;
  int track = 0;

  double offset_sec() const { return onset_sec + duration_sec; }
};

struct ControlEvent {
  double time_sec = 0;
  int channel = 0;
  int controller = 64;
  int value = 0;
};

class PerformedPart {
public:
  explicit PerformedPart(std::string id = "performance");

  const std::string& id() const { return id_; }

  void add_note(PerformedNote note);
  void add_control(ControlEvent event);

  /// Sorts both containers, assigns "n{k}" ids to notes without one (k is the
  /// 1-based position in onset-then-pitch order), checks id uniqueness and
  /// freezes.
  void freeze();
  bool frozen() const { return frozen_; }

  std::span<const PerformedNote> notes() const { return notes_; }
  std::span<const ControlEvent> controls() const { return controls_; }
  const PerformedNote* find_note(std::string_view id) const;

  /// Tick resolution of the source file; used as the default when re-encoding.
  int ppq = 480;

private:
  void check_mutable() const;

  std::string id_;
  std::vector<PerformedNote> notes_;
  std::vector<ControlEvent> controls_;
  bool frozen_ = false;
};

enum class AlignmentLabel { match, insertion, deletion, ornament };

const char* to_string(AlignmentLabel l) noexcept;

struct AlignmentPair {
  AlignmentLabel label = AlignmentLabel::match;
  std::optional<std::string> score_id;
  std::optional<std::string> perf_id;

  friend bool operator==(const AlignmentPair&, const AlignmentPair&) = default;
};

struct Alignment {
  std::vector<AlignmentPair> pairs;

  void add_match(std::string score_id, std::string perf_id);
  void add_insertion(std::string perf_id);
  void add_deletion(std::string score_id);
  void add_ornament(std::string score_id, std::string perf_id);

  /// Throws identity error when the id-presence rules or match uniqueness are violated.
  void validate() const;

  std::size_t count(AlignmentLabel label) const;

  friend bool operator==(const Alignment&, const Alignment&) = default;
};

}  // namespace scoreline
