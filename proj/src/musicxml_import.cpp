#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "score_builder.hpp"
#include "scoreline/io_score.hpp"
#include "xml.hpp"

namespace scoreline {

namespace {

using detail::Diagnostics;
using detail::PartBuilder;
using xml::Element;

// Presentation-only elements that carry nothing the model represents.
const std::set<std::string, std::less<>> kIgnoredNoteChildren = {
    "type", "dot", "stem", "beam", "notehead", "accidental", "time-modification", "instrument",
    "cue", "unpitched", "display-step", "display-octave", "footnote", "level", "play", "listen",
    "notehead-text", "lyric"};
const std::set<std::string, std::less<>> kIgnoredMeasureChildren = {"print", "bookmark", "link", "grouping"};
const std::set<std::string, std::less<>> kIgnoredAttributes = {
    "clef", "staff-details", "transpose", "instruments", "measure-style", "part-symbol", "footnote", "level",
    "directive", "for-part"};
const std::set<std::string, std::less<>> kIgnoredNotations = {
    "articulations", "ornaments", "fermata", "technical", "arpeggiate", "non-arpeggiate", "dynamics",
    "accidental-mark", "glissando", "slide", "other-notation", "footnote", "level"};

int to_int(const std::string& s, int fallback) {
  int v = fallback;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '+')) ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc()) return fallback;
  return v;
}

double to_double(const std::string& s, double fallback) {
  try {
    return std::stod(s);
  } catch (...) {
    return fallback;
  }
}

/// Quarter length of a note type name ("quarter", "eighth", ...).
Rational note_type_quarters(const std::string& type) {
  static const std::map<std::string, Rational, std::less<>> table = {
      {"maxima", 32}, {"long", 16},         {"breve", 8},           {"whole", 4},
      {"half", 2},    {"quarter", 1},       {"eighth", Rational(1, 2)}, {"16th", Rational(1, 4)},
      {"32nd", Rational(1, 8)}, {"64th", Rational(1, 16)}, {"128th", Rational(1, 32)}};
  auto it = table.find(type);
  return it == table.end() ? Rational(1) : it->second;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  int cur = 0;
  bool in = false;
  for (char c : s) {
    if (c >= '0' && c <= '9') {
      cur = cur * 10 + (c - '0');
      in = true;
    } else if (in) {
      out.push_back(cur);
      cur = 0;
      in = false;
    }
  }
  if (in) out.push_back(cur);
  return out;
}

/// Sorted unique integers, e.g. volta numbers "1, 2".
std::vector<int> parse_numbers(const std::string& s) {
  auto out = parse_ints(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct PartListNode {
  bool is_group = false;
  std::string id;
  std::string name;
  std::vector<PartListNode> children;
};

class PartReader {
public:
  PartReader(PartBuilder& builder, Diagnostics& diag) : b_(builder), diag_(diag) {}

  void read(const Element& part) {
    for (const auto* m : part.children_named("measure"))
      for (const auto* a : m->children_named("attributes"))
        if (auto d = a->child_text("divisions")) b_.require_divs(std::max(1, to_int(*d, 1)));

    for (const auto& child : part.children) {
      if (child->name != "measure") {
        diag_.warn("skipped <" + child->name + "> in part", child->line, child->column);
        continue;
      }
      read_measure(*child);
    }
    if (volta_open_) {
      diag_.warn("volta bracket never closed; closed at end of part");
      b_.add(NavigationMark{NavigationKind::volta, volta_numbers_}, volta_start_, measure_start_);
    }
    for (const auto& [num, idx] : open_slurs_) diag_.warn("slur " + std::to_string(num) + " never closed");
  }

private:
  void read_measure(const Element& m) {
    const Rational start = measure_start_;
    cursor_ = start;
    max_cursor_ = start;
    ++measure_counter_;
    int number = to_int(m.attr_or("number"), measure_counter_);
    measure_counter_ = number;
    end_marks_.clear();

    for (const auto& el : m.children) {
      const std::string& n = el->name;
      if (n == "attributes") {
        read_attributes(*el);
      } else if (n == "note") {
        read_note(*el);
      } else if (n == "backup") {
        cursor_ -= duration_of(*el);
        if (cursor_ < start) {
          diag_.warn("backup before measure start", el->line, el->column);
          cursor_ = start;
        }
      } else if (n == "forward") {
        cursor_ += duration_of(*el);
        max_cursor_ = std::max(max_cursor_, cursor_);
      } else if (n == "direction") {
        read_direction(*el);
      } else if (n == "sound") {
        read_sound(*el, cursor_);
      } else if (n == "barline") {
        read_barline(*el);
      } else if (!kIgnoredMeasureChildren.contains(n)) {
        diag_.warn("skipped <" + n + "> in measure " + std::to_string(number), el->line, el->column);
      }
    }

    const Rational end = max_cursor_;
    b_.add(Measure{number}, start, end);
    for (auto& mark : end_marks_) b_.add(std::move(mark), end, end);
    if (volta_closing_) {
      b_.add(NavigationMark{NavigationKind::volta, volta_numbers_}, volta_start_, end);
      volta_open_ = false;
      volta_closing_ = false;
    }
    measure_start_ = end;
  }

  Rational duration_of(const Element& el) {
    auto d = el.child_text("duration");
    if (!d) {
      diag_.warn("<" + el.name + "> without duration", el.line, el.column);
      return 0;
    }
    return Rational(to_int(*d, 0), divisions_);
  }

  void read_attributes(const Element& a) {
    for (const auto& c : a.children) {
      const std::string& n = c->name;
      if (n == "divisions") {
        divisions_ = std::max(1, to_int(xml::trim(c->text), 1));
      } else if (n == "key") {
        if (auto* num = c->attr("number"); num && *num != "1") continue;
        KeySignature ks;
        if (auto f = c->child_text("fifths")) {
          ks.fifths = std::clamp(to_int(*f, 0), -7, 7);
        } else {
          diag_.warn("non-traditional key signature skipped", c->line, c->column);
          continue;
        }
        if (auto mode = c->child_text("mode"); mode && *mode == "minor") ks.mode = Mode::minor;
        b_.add(ks, cursor_, cursor_);
      } else if (n == "time") {
        if (auto* num = c->attr("number"); num && *num != "1") continue;
        auto beats = c->child_text("beats");
        auto type = c->child_text("beat-type");
        if (!beats || !type) {
          diag_.warn("time signature without beats/beat-type skipped", c->line, c->column);
          continue;
        }
        int total = 0;
        for (int v : parse_ints(*beats)) total += v;
        if (beats->find('+') != std::string::npos)
          diag_.warn("composite time signature '" + *beats + "' summed", c->line, c->column);
        b_.add(TimeSignature{std::max(1, total), std::max(1, to_int(*type, 4))}, cursor_, cursor_);
      } else if (n == "staves") {
        b_.set_staff_count(std::max(1, to_int(xml::trim(c->text), 1)));
      } else if (!kIgnoredAttributes.contains(n)) {
        diag_.warn("skipped <" + n + "> in attributes", c->line, c->column);
      }
    }
  }

  void read_note(const Element& el) {
    const bool grace = el.child("grace") != nullptr;
    const bool chord = el.child("chord") != nullptr;
    const bool rest = el.child("rest") != nullptr;
    const Element* pitch = el.child("pitch");

    Rational dur = grace ? Rational(0) : duration_of(el);
    if (!grace && dur == 0 && !el.child("duration")) {
      if (auto type = el.child_text("type")) dur = note_type_quarters(*type);
    }
    Rational start = chord ? last_start_ : cursor_;
    if (!chord) {
      last_start_ = cursor_;
      if (!grace) cursor_ += dur;
      max_cursor_ = std::max(max_cursor_, cursor_);
    }
    const Rational end = start + dur;
    max_cursor_ = std::max(max_cursor_, end);

    int voice = std::max(1, to_int(el.child_text("voice").value_or("1"), 1));
    int staff = std::max(1, to_int(el.child_text("staff").value_or("1"), 1));
    std::string id = el.attr_or("id", el.attr_or("xml:id"));

    for (const auto& c : el.children) {
      const std::string& n = c->name;
      if (n == "grace" || n == "chord" || n == "rest" || n == "pitch" || n == "duration" || n == "voice" ||
          n == "staff" || n == "tie" || n == "notations")
        continue;
      if (n == "unpitched" && !rest && !pitch) {
        diag_.warn("unpitched note skipped", c->line, c->column);
        continue;
      }
      if (!kIgnoredNoteChildren.contains(n)) diag_.warn("skipped <" + n + "> in note", c->line, c->column);
    }

    if (rest) {
      if (!grace && dur > 0) b_.add(Rest{id, voice, staff}, start, end);
      return;
    }
    if (!pitch) return;

    auto step = pitch->child_text("step").value_or("C");
    auto alter_text = pitch->child_text("alter").value_or("0");
    double alter_value = to_double(alter_text, 0);
    if (alter_value != static_cast<int>(alter_value))
      diag_.warn("microtonal alter " + alter_text + " rounded", pitch->line, pitch->column);
    int alter = static_cast<int>(std::lround(alter_value));
    int octave = to_int(pitch->child_text("octave").value_or("4"), 4);
    char letter = step.empty() ? 'C' : static_cast<char>(std::toupper(static_cast<unsigned char>(step[0])));
    if (std::string("ABCDEFG").find(letter) == std::string::npos) {
      diag_.warn("invalid step '" + step + "'", pitch->line, pitch->column);
      letter = 'C';
    }

    Note note = Note::spelled(id, letter, alter, octave, voice, staff);
    note.grace = grace;
    if (!grace && dur == 0) {
      diag_.warn("note with zero duration treated as grace note", el.line, el.column);
      note.grace = true;
    }

    bool tie_start = false, tie_stop = false;
    for (const auto* t : el.children_named("tie")) {
      auto type = t->attr_or("type");
      tie_start |= type == "start";
      tie_stop |= type == "stop";
    }
    std::vector<const Element*> slur_marks;
    for (const auto* notations : el.children_named("notations")) {
      for (const auto& c : notations->children) {
        const std::string& n = c->name;
        if (n == "tied") {
          auto type = c->attr_or("type");
          tie_start |= type == "start" || type == "continue";
          tie_stop |= type == "stop" || type == "continue";
        } else if (n == "slur") {
          slur_marks.push_back(c.get());
        } else if (n == "tuplet") {
          auto type = c->attr_or("type");
          if (type == "start") {
            if (open_tuplets_ > 0) diag_.warn("nested tuplet: inner ratio ignored", c->line, c->column);
            ++open_tuplets_;
          } else if (type == "stop") {
            open_tuplets_ = std::max(0, open_tuplets_ - 1);
          }
        } else if (!kIgnoredNotations.contains(n)) {
          diag_.warn("skipped <" + n + "> in notations", c->line, c->column);
        }
      }
    }
    note.tie = tie_start && tie_stop ? Tie::cont : tie_start ? Tie::start : tie_stop ? Tie::stop : Tie::none;

    std::size_t idx = b_.add_note(std::move(note), start, end);
    for (const auto* s : slur_marks) {
      int number = to_int(s->attr_or("number", "1"), 1);
      auto type = s->attr_or("type");
      if (type == "start") {
        open_slurs_[number] = idx;
      } else if (type == "stop") {
        auto it = open_slurs_.find(number);
        if (it == open_slurs_.end()) {
          diag_.warn("slur stop without start", s->line, s->column);
        } else {
          b_.add_slur(it->second, idx);
          open_slurs_.erase(it);
        }
      }
    }
  }

  void add_mark(NavigationKind kind, const Rational& pos) {
    if (detail::is_measure_end_mark(kind)) {
      for (const auto& m : end_marks_)
        if (m.kind == kind) return;
      end_marks_.push_back(NavigationMark{kind, {}});
    } else {
      auto key = std::make_pair(static_cast<int>(kind), pos);
      if (point_marks_.insert(key).second) b_.add(NavigationMark{kind, {}}, pos, pos);
    }
  }

  void read_direction(const Element& d) {
    Rational pos = cursor_;
    if (auto off = d.child_text("offset")) pos += Rational(to_int(*off, 0), divisions_);
    if (pos < 0) pos = 0;
    bool has_metronome = false;
    std::optional<double> sound_tempo;
    if (const Element* s = d.child("sound"); s && s->attr("tempo")) sound_tempo = to_double(*s->attr("tempo"), 120);
    for (const auto* dt : d.children_named("direction-type")) {
      for (const auto& c : dt->children) {
        const std::string& n = c->name;
        if (n == "words") {
          std::string text = xml::trim(c->text);
          if (text.empty()) continue;
          auto meaning = detail::classify_words(text);
          if (meaning.kind == detail::WordsMeaning::Kind::navigation) {
            add_mark(meaning.navigation, pos);
          } else {
            Directive dir{meaning.kind == detail::WordsMeaning::Kind::loudness ? DirectiveKind::loudness
                                                                               : DirectiveKind::tempo,
                          text, meaning.bpm};
            if (dir.kind == DirectiveKind::tempo && sound_tempo && !has_metronome) {
              dir.quarter_bpm = sound_tempo;
              has_metronome = true;
            }
            b_.add(std::move(dir), pos, pos);
          }
        } else if (n == "metronome") {
          auto unit = c->child_text("beat-unit").value_or("quarter");
          auto per_minute = c->child_text("per-minute");
          if (!per_minute) {
            diag_.warn("metronome without per-minute skipped", c->line, c->column);
            continue;
          }
          Rational unit_q = note_type_quarters(unit);
          if (c->child("beat-unit-dot")) unit_q = unit_q * Rational(3, 2);
          double bpm = to_double(*per_minute, 120) * scoreline::to_double(unit_q);
          b_.add(Directive{DirectiveKind::tempo, unit + "=" + *per_minute, bpm}, pos, pos);
          has_metronome = true;
        } else if (n == "dynamics") {
          for (const auto& dyn : c->children) {
            std::string text = dyn->name == "other-dynamics" ? xml::trim(dyn->text) : dyn->name;
            b_.add(Directive{DirectiveKind::loudness, text, std::nullopt}, pos, pos);
          }
        } else if (n == "segno") {
          add_mark(NavigationKind::segno, pos);
        } else if (n == "coda") {
          add_mark(NavigationKind::coda, pos);
        } else {
          diag_.warn("skipped <" + n + "> in direction", c->line, c->column);
        }
      }
    }
    if (const Element* s = d.child("sound")) read_sound(*s, pos, has_metronome);
  }

  void read_sound(const Element& s, const Rational& pos, bool has_metronome = false) {
    if (auto* tempo = s.attr("tempo"); tempo && !has_metronome)
      b_.add(Directive{DirectiveKind::tempo, "sound tempo " + *tempo, to_double(*tempo, 120)}, pos, pos);
    if (s.attr("dacapo") && *s.attr("dacapo") == "yes") add_mark(NavigationKind::da_capo, pos);
    if (s.attr("dalsegno")) add_mark(NavigationKind::dal_segno, pos);
    if (s.attr("fine")) add_mark(NavigationKind::fine, pos);
    if (s.attr("tocoda")) add_mark(NavigationKind::to_coda, pos);
    if (s.attr("segno")) add_mark(NavigationKind::segno, pos);
    if (s.attr("coda")) add_mark(NavigationKind::coda, pos);
  }

  void read_barline(const Element& bl) {
    std::string location = bl.attr_or("location", "right");
    for (const auto& c : bl.children) {
      const std::string& n = c->name;
      if (n == "repeat") {
        if (c->attr_or("direction") == "forward") {
          add_mark(NavigationKind::repeat_start, measure_start_);
        } else {
          add_mark(NavigationKind::repeat_end, measure_start_);
        }
      } else if (n == "ending") {
        auto type = c->attr_or("type");
        if (type == "start") {
          if (volta_open_) {
            diag_.warn("volta started while another is open; previous closed", c->line, c->column);
            b_.add(NavigationMark{NavigationKind::volta, volta_numbers_}, volta_start_, measure_start_);
          }
          volta_open_ = true;
          volta_closing_ = false;
          volta_start_ = measure_start_;
          volta_numbers_ = parse_numbers(c->attr_or("number", "1"));
          if (volta_numbers_.empty()) volta_numbers_ = {1};
        } else if (type == "stop" || type == "discontinue") {
          if (!volta_open_) {
            diag_.warn("volta end without start", c->line, c->column);
          } else {
            volta_closing_ = true;
          }
        }
      } else if (n == "segno") {
        add_mark(NavigationKind::segno, location == "left" ? measure_start_ : cursor_);
      } else if (n == "coda") {
        add_mark(NavigationKind::coda, location == "left" ? measure_start_ : cursor_);
      } else if (n != "bar-style" && n != "fermata" && n != "footnote" && n != "level") {
        diag_.warn("skipped <" + n + "> in barline", c->line, c->column);
      }
    }
  }

  PartBuilder& b_;
  Diagnostics& diag_;
  int divisions_ = 1;
  int measure_counter_ = 0;
  Rational measure_start_ = 0;
  Rational cursor_ = 0;
  Rational max_cursor_ = 0;
  Rational last_start_ = 0;
  int open_tuplets_ = 0;
  std::map<int, std::size_t> open_slurs_;
  std::vector<NavigationMark> end_marks_;
  std::set<std::pair<int, Rational>> point_marks_;
  bool volta_open_ = false;
  bool volta_closing_ = false;
  Rational volta_start_ = 0;
  std::vector<int> volta_numbers_;
};

PartListNode read_part_list(const Element* list, Diagnostics& diag) {
  PartListNode root{true, "root", "", {}};
  std::vector<std::pair<std::string, PartListNode*>> stack;  // group number -> node
  auto current = [&]() -> PartListNode* { return stack.empty() ? &root : stack.back().second; };
  int group_counter = 0;
  if (!list) return root;
  for (const auto& c : list->children) {
    if (c->name == "score-part") {
      PartListNode n{false, c->attr_or("id"), c->child_text("part-name").value_or(""), {}};
      current()->children.push_back(std::move(n));
    } else if (c->name == "part-group") {
      std::string number = c->attr_or("number", "1");
      if (c->attr_or("type") == "start") {
        PartListNode g{true, "group" + std::to_string(++group_counter), c->child_text("group-name").value_or(""), {}};
        current()->children.push_back(std::move(g));
        stack.emplace_back(number, &current()->children.back());
      } else {
        auto it = std::find_if(stack.rbegin(), stack.rend(), [&](const auto& e) { return e.first == number; });
        if (it == stack.rend()) {
          diag.warn("part-group stop without start", c->line, c->column);
        } else {
          stack.erase(std::next(it).base(), stack.end());
        }
      }
    } else {
      diag.warn("skipped <" + c->name + "> in part-list", c->line, c->column);
    }
  }
  return root;
}

PartGroup assemble(const PartListNode& node, std::map<std::string, Part>& parts) {
  PartGroup group(node.id, node.name);
  for (const auto& c : node.children) {
    if (c.is_group) {
      group.add(assemble(c, parts));
    } else if (auto it = parts.find(c.id); it != parts.end()) {
      group.add(std::move(it->second));
      parts.erase(it);
    }
  }
  return group;
}

}  // namespace

ScoreDocument load_musicxml(std::string_view document, const LoadOptions& options) {
  auto root = xml::parse(document);
  if (root->name != "score-partwise")
    throw ParseError("expected <score-partwise> root, found <" + root->name + ">", root->line, root->column);

  ScoreDocument doc;
  doc.source_format = SourceFormat::musicxml;
  Diagnostics diag(options, doc.warnings);

  PartListNode list = read_part_list(root->child("part-list"), diag);
  std::map<std::string, std::string> names;
  std::vector<std::string> listed;
  std::function<void(const PartListNode&)> collect = [&](const PartListNode& n) {
    if (!n.is_group) {
      names[n.id] = n.name;
      listed.push_back(n.id);
    }
    for (const auto& c : n.children) collect(c);
  };
  collect(list);

  std::map<std::string, Part> parts;
  std::vector<std::string> unlisted;
  for (const auto& child : root->children) {
    if (child->name == "part-list") continue;
    if (child->name != "part") {
      static const std::set<std::string, std::less<>> header = {"work", "movement-number", "movement-title",
                                                                "identification", "defaults", "credit"};
      if (!header.contains(child->name)) diag.warn("skipped <" + child->name + ">", child->line, child->column);
      continue;
    }
    std::string id = child->attr_or("id", "P" + std::to_string(parts.size() + 1));
    if (parts.contains(id)) throw Error(ErrorCategory::identity, "duplicate part id '" + id + "'");
    if (!names.contains(id)) {
      diag.warn("part '" + id + "' missing from part-list", child->line, child->column);
      unlisted.push_back(id);
    }
    PartBuilder builder(id, names.contains(id) ? names[id] : std::string{});
    PartReader reader(builder, diag);
    reader.read(*child);
    parts.emplace(id, builder.build());
  }
  for (const auto& id : listed)
    if (!parts.contains(id)) diag.warn("part '" + id + "' listed but has no content");

  doc.root = assemble(list, parts);
  for (const auto& id : unlisted) {
    doc.root.add(std::move(parts.at(id)));
    parts.erase(id);
  }
  return doc;
}

}  // namespace scoreline
