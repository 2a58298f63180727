#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "scoreline/errors.hpp"
#include "scoreline/io_score.hpp"
#include "scoreline/timemap.hpp"
#include "xml.hpp"

namespace scoreline {

namespace {

const std::set<std::string, std::less<>> kDynamicNames = {"ppp", "pp", "p", "mp", "mf", "f", "ff", "fff",
                                                          "sf", "sfz", "sffz", "fp", "rfz", "fz"};

struct MeasureSpan {
  int number;
  Time start;  // output divs
  Time end;
};

/// A note or rest piece inside one measure, in output divs.
struct Piece {
  Time start;
  Time end;
  bool is_rest;
  Note note;  // for rests only id/voice/staff are used
};

class PartWriter {
public:
  PartWriter(const Part& part, std::ostream& out) : part_(part), out_(out), map_(part) {
    divisions_ = 1;
    for (const auto& [t, d] : part.divs_map()) divisions_ = std::lcm(divisions_, static_cast<Time>(d));
  }

  void write() {
    collect_measures();
    collect_pieces();
    assign_slur_numbers();
    out_ << "  <part id=\"" << xml::escape(part_.id()) << "\">\n";
    for (std::size_t i = 0; i < measures_.size(); ++i) write_measure(i);
    out_ << "  </part>\n";
  }

private:
  Time out_div(Time t) const {
    Rational q = map_.div_to_quarter(t) * divisions_;
    return q.numerator() / q.denominator();
  }

  void collect_measures() {
    Time content_end = out_div(part_.last_time());
    for (const auto& m : part_.objects_of<Measure>())
      measures_.push_back({m->number, out_div(m.start), out_div(m.end)});
    std::stable_sort(measures_.begin(), measures_.end(),
                     [](const MeasureSpan& a, const MeasureSpan& b) { return a.start < b.start; });
    if (measures_.empty()) {
      auto sigs = part_.objects_of<TimeSignature>();
      if (sigs.empty()) {
        measures_.push_back({1, 0, content_end});
      } else {
        int number = 1;
        Time t = 0;
        std::size_t si = 0;
        const TimeSignature* ts = sigs.front().value;
        do {
          while (si < sigs.size() && out_div(sigs[si].start) <= t) ts = sigs[si++].value;
          Time len = divisions_ * 4 * ts->beats / ts->beat_type;
          if (len <= 0) len = divisions_ * 4;
          measures_.push_back({number++, t, t + len});
          t += len;
        } while (t < content_end);
      }
    }
    if (measures_.front().start > 0) measures_.insert(measures_.begin(), {0, 0, measures_.front().start});
    for (std::size_t i = 0; i + 1 < measures_.size(); ++i)
      if (measures_[i].end < measures_[i + 1].start) measures_[i].end = measures_[i + 1].start;
    measures_.back().end = std::max(measures_.back().end, content_end);
  }

  std::size_t measure_index(Time t) const {
    // last measure with start <= t and (t < end or zero-length at t)
    std::size_t found = 0;
    for (std::size_t i = 0; i < measures_.size(); ++i) {
      if (measures_[i].start <= t && (t < measures_[i].end || i + 1 == measures_.size())) found = i;
      if (measures_[i].start > t) break;
    }
    return found;
  }

  void collect_pieces() {
    pieces_.resize(measures_.size());
    for (const auto& obj : part_.objects()) {
      const Note* note = obj.as<Note>();
      const Rest* rest = obj.as<Rest>();
      if (!note && !rest) continue;
      Note base;
      if (note) {
        base = *note;
      } else {
        base.id = rest->id;
        base.voice = rest->voice;
        base.staff = rest->staff;
      }
      Time s = out_div(obj.start);
      Time e = out_div(obj.end);
      if (s == e) {
        pieces_[measure_index(s)].push_back({s, e, rest != nullptr, base});
        continue;
      }
      // split at measure boundaries
      std::vector<std::pair<Time, Time>> spans;
      Time cur = s;
      while (cur < e) {
        std::size_t mi = measure_index(cur);
        Time stop = std::min(e, measures_[mi].end > cur ? measures_[mi].end : e);
        spans.emplace_back(cur, stop);
        cur = stop;
      }
      for (std::size_t k = 0; k < spans.size(); ++k) {
        Piece p{spans[k].first, spans[k].second, rest != nullptr, base};
        if (k > 0) p.note.id = base.id + "-c" + std::to_string(k + 1);
        if (!rest && spans.size() > 1) {
          bool in = (k > 0) || base.tie == Tie::stop || base.tie == Tie::cont;
          bool outgoing = (k + 1 < spans.size()) || base.tie == Tie::start || base.tie == Tie::cont;
          p.note.tie = in && outgoing ? Tie::cont : in ? Tie::stop : outgoing ? Tie::start : Tie::none;
        }
        pieces_[measure_index(spans[k].first)].push_back(p);
      }
    }
  }

  void assign_slur_numbers() {
    auto slurs = part_.objects_of<Slur>();
    std::vector<std::pair<Time, int>> active;  // end, number
    for (const auto& s : slurs) {
      const TimedObject* a = part_.find_note(s->start_note_id);
      const TimedObject* b = part_.find_note(s->end_note_id);
      if (!a || !b || s->start_note_id == s->end_note_id) continue;
      std::erase_if(active, [&](const auto& e) { return e.first < a->start; });
      int number = 1;
      while (std::any_of(active.begin(), active.end(), [&](const auto& e) { return e.second == number; })) ++number;
      active.emplace_back(b->start, number);
      slur_marks_[s->start_note_id].emplace_back("start", number);
      slur_marks_[s->end_note_id].emplace_back("stop", number);
    }
  }

  void seek(Time t) {
    if (t > cursor_) {
      out_ << "      <forward><duration>" << (t - cursor_) << "</duration></forward>\n";
    } else if (t < cursor_) {
      out_ << "      <backup><duration>" << (cursor_ - t) << "</duration></backup>\n";
    }
    cursor_ = t;
  }

  static std::string volta_number_text(const std::vector<int>& numbers) {
    std::string s;
    for (int n : numbers) s += (s.empty() ? "" : ", ") + std::to_string(n);
    return s;
  }

  void write_measure(std::size_t index) {
    const MeasureSpan& m = measures_[index];
    const bool first = index == 0;
    const bool last = index + 1 == measures_.size();
    auto in_measure = [&](Time t) { return t >= m.start && (t < m.end || (last && t == m.end)); };

    out_ << "    <measure number=\"" << m.number << "\">\n";
    cursor_ = m.start;

    // left barline
    std::vector<const NavigationMark*> volta_starts;
    std::vector<std::pair<const NavigationMark*, Time>> volta_ends;
    bool repeat_start = false, repeat_end = false;
    std::vector<std::pair<Time, const NavigationMark*>> point_marks;
    std::vector<const NavigationMark*> end_marks;
    for (const auto& nav : part_.objects_of<NavigationMark>()) {
      Time s = out_div(nav.start);
      Time e = out_div(nav.end);
      switch (nav->kind) {
        case NavigationKind::repeat_start:
          if (s == m.start && (m.start != m.end || first)) repeat_start = true;
          break;
        case NavigationKind::repeat_end:
          if (e == m.end && m.end > m.start) repeat_end = true;
          break;
        case NavigationKind::volta:
          if (s == m.start && m.end > m.start) volta_starts.push_back(nav.value);
          if (e == m.end && m.end > m.start) volta_ends.emplace_back(nav.value, s);
          break;
        case NavigationKind::segno:
        case NavigationKind::coda:
          if (in_measure(s)) point_marks.emplace_back(s, nav.value);
          break;
        default:
          if (e == m.end && (m.end > m.start || last)) end_marks.push_back(nav.value);
          break;
      }
    }
    if (repeat_start || !volta_starts.empty()) {
      out_ << "      <barline location=\"left\">\n";
      for (const auto* v : volta_starts)
        out_ << "        <ending number=\"" << volta_number_text(v->volta_numbers) << "\" type=\"start\"/>\n";
      if (repeat_start) out_ << "        <repeat direction=\"forward\"/>\n";
      out_ << "      </barline>\n";
    }

    // attributes at measure start
    std::ostringstream attrs;
    if (first) {
      attrs << "        <divisions>" << divisions_ << "</divisions>\n";
    }
    write_signatures_at(m.start, attrs, [&](Time t) { return t == m.start; });
    if (first && part_.staff_count() > 1) attrs << "        <staves>" << part_.staff_count() << "</staves>\n";
    if (!attrs.str().empty()) out_ << "      <attributes>\n" << attrs.str() << "      </attributes>\n";

    // positioned content: mid-measure signatures, directives, segno/coda
    std::vector<std::tuple<Time, int, std::string>> positioned;
    for (const auto& ts : part_.objects_of<TimeSignature>()) {
      Time t = out_div(ts.start);
      if (t != m.start && in_measure(t)) {
        std::ostringstream s;
        s << "      <attributes>\n        <time><beats>" << ts->beats << "</beats><beat-type>" << ts->beat_type
          << "</beat-type></time>\n      </attributes>\n";
        positioned.emplace_back(t, 0, s.str());
      }
    }
    for (const auto& ks : part_.objects_of<KeySignature>()) {
      Time t = out_div(ks.start);
      if (t != m.start && in_measure(t)) {
        std::ostringstream s;
        s << "      <attributes>\n" << key_xml(*ks) << "      </attributes>\n";
        positioned.emplace_back(t, 0, s.str());
      }
    }
    int order = 1;
    for (const auto& d : part_.objects_of<Directive>()) {
      Time t = out_div(d.start);
      if (in_measure(t)) positioned.emplace_back(t, order++, directive_xml(*d));
    }
    for (const auto& [t, nav] : point_marks) {
      std::string type = nav->kind == NavigationKind::segno ? "segno" : "coda";
      positioned.emplace_back(t, order++,
                              "      <direction>\n        <direction-type><" + type +
                                  "/></direction-type>\n      </direction>\n");
    }
    std::stable_sort(positioned.begin(), positioned.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
    for (const auto& [t, o, text] : positioned) {
      seek(t);
      out_ << text;
    }

    write_layers(pieces_[index], m);
    seek(std::max(cursor_, m.end));
    if (cursor_ < m.end) seek(m.end);

    for (const auto* nav : end_marks) out_ << end_mark_xml(*nav);

    if (repeat_end || !volta_ends.empty()) {
      out_ << "      <barline location=\"right\">\n";
      for (const auto& [v, s] : volta_ends)
        out_ << "        <ending number=\"" << volta_number_text(v->volta_numbers) << "\" type=\"stop\"/>\n";
      if (repeat_end) out_ << "        <repeat direction=\"backward\"/>\n";
      out_ << "      </barline>\n";
    }
    out_ << "    </measure>\n";
  }

  template <class Pred>
  void write_signatures_at(Time, std::ostream& attrs, Pred at_start) {
    const KeySignature* key = nullptr;
    for (const auto& ks : part_.objects_of<KeySignature>())
      if (at_start(out_div(ks.start))) key = ks.value;
    if (key) attrs << key_xml(*key);
    const TimeSignature* time = nullptr;
    for (const auto& ts : part_.objects_of<TimeSignature>())
      if (at_start(out_div(ts.start))) time = ts.value;
    if (time)
      attrs << "        <time><beats>" << time->beats << "</beats><beat-type>" << time->beat_type
            << "</beat-type></time>\n";
  }

  static std::string key_xml(const KeySignature& ks) {
    return "        <key><fifths>" + std::to_string(ks.fifths) + "</fifths><mode>" +
           (ks.mode == Mode::minor ? "minor" : "major") + "</mode></key>\n";
  }

  static std::string directive_xml(const Directive& d) {
    std::ostringstream s;
    s << "      <direction>\n        <direction-type>";
    if (d.kind == DirectiveKind::loudness) {
      if (kDynamicNames.contains(d.text))
        s << "<dynamics><" << d.text << "/></dynamics>";
      else
        s << "<dynamics><other-dynamics>" << xml::escape(d.text) << "</other-dynamics></dynamics>";
    } else {
      s << "<words>" << xml::escape(d.text) << "</words>";
    }
    s << "</direction-type>\n";
    if (d.kind == DirectiveKind::tempo && d.quarter_bpm) {
      std::ostringstream bpm;
      bpm << *d.quarter_bpm;
      s << "        <sound tempo=\"" << bpm.str() << "\"/>\n";
    }
    s << "      </direction>\n";
    return s.str();
  }

  static std::string end_mark_xml(const NavigationMark& nav) {
    std::string words, sound;
    switch (nav.kind) {
      case NavigationKind::da_capo: words = "D.C."; sound = "dacapo=\"yes\""; break;
      case NavigationKind::dal_segno: words = "D.S."; sound = "dalsegno=\"segno\""; break;
      case NavigationKind::fine: words = "Fine"; sound = "fine=\"yes\""; break;
      case NavigationKind::to_coda: words = "To Coda"; sound = "tocoda=\"coda\""; break;
      default: return {};
    }
    return "      <direction>\n        <direction-type><words>" + words +
           "</words></direction-type>\n        <sound " + sound + "/>\n      </direction>\n";
  }

  void write_layers(std::vector<Piece>& pieces, const MeasureSpan& m) {
    // chord groups per (staff, voice)
    std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
      return std::tie(a.note.staff, a.note.voice, a.start, a.end, a.is_rest, a.note.midi_pitch, a.note.id) <
             std::tie(b.note.staff, b.note.voice, b.start, b.end, b.is_rest, b.note.midi_pitch, b.note.id);
    });
    std::vector<std::vector<const Piece*>> groups;
    for (const auto& p : pieces) {
      if (!groups.empty()) {
        const Piece& g = *groups.back().front();
        if (!p.is_rest && !g.is_rest && g.note.staff == p.note.staff && g.note.voice == p.note.voice &&
            g.start == p.start && g.end == p.end) {
          groups.back().push_back(&p);
          continue;
        }
      }
      groups.push_back({&p});
    }
    struct Layer {
      int staff, voice;
      Time end;
      std::vector<const std::vector<const Piece*>*> groups;
    };
    std::vector<Layer> layers;
    for (const auto& g : groups) {
      const Piece& head = *g.front();
      Layer* target = nullptr;
      for (auto& l : layers) {
        if (l.staff == head.note.staff && l.voice == head.note.voice && l.end <= head.start) {
          target = &l;
          break;
        }
      }
      if (!target) {
        layers.push_back({head.note.staff, head.note.voice, m.start, {}});
        target = &layers.back();
      }
      target->groups.push_back(&g);
      target->end = head.end;
    }
    for (const auto& l : layers) {
      for (const auto* g : l.groups) {
        seek(g->front()->start);
        for (std::size_t i = 0; i < g->size(); ++i) write_piece(*(*g)[i], i > 0);
        cursor_ = g->front()->end;
      }
    }
  }

  void write_piece(const Piece& p, bool chord) {
    const Note& n = p.note;
    out_ << "      <note";
    if (!n.id.empty()) out_ << " id=\"" << xml::escape(n.id) << "\"";
    out_ << ">\n";
    if (n.grace && !p.is_rest) out_ << "        <grace/>\n";
    if (chord) out_ << "        <chord/>\n";
    if (p.is_rest) {
      out_ << "        <rest/>\n";
    } else {
      out_ << "        <pitch><step>" << n.step << "</step>";
      if (n.alter != 0) out_ << "<alter>" << n.alter << "</alter>";
      out_ << "<octave>" << n.octave << "</octave></pitch>\n";
    }
    if (p.end > p.start) out_ << "        <duration>" << (p.end - p.start) << "</duration>\n";
    const bool tie_stop = n.tie == Tie::stop || n.tie == Tie::cont;
    const bool tie_start = n.tie == Tie::start || n.tie == Tie::cont;
    if (!p.is_rest) {
      if (tie_stop) out_ << "        <tie type=\"stop\"/>\n";
      if (tie_start) out_ << "        <tie type=\"start\"/>\n";
    }
    out_ << "        <voice>" << n.voice << "</voice>\n";
    out_ << "        <staff>" << n.staff << "</staff>\n";
    std::vector<std::string> notations;
    if (!p.is_rest) {
      if (tie_stop) notations.push_back("<tied type=\"stop\"/>");
      if (tie_start) notations.push_back("<tied type=\"start\"/>");
      if (auto it = slur_marks_.find(n.id); it != slur_marks_.end())
        for (const auto& [type, number] : it->second)
          notations.push_back("<slur type=\"" + type + "\" number=\"" + std::to_string(number) + "\"/>");
    }
    if (!notations.empty()) {
      out_ << "        <notations>";
      for (const auto& s : notations) out_ << s;
      out_ << "</notations>\n";
    }
    out_ << "      </note>\n";
  }

  const Part& part_;
  std::ostream& out_;
  TimeMap map_;
  Time divisions_;
  Time cursor_ = 0;
  std::vector<MeasureSpan> measures_;
  std::vector<std::vector<Piece>> pieces_;
  std::map<std::string, std::vector<std::pair<std::string, int>>> slur_marks_;
};

void write_part_list(const PartGroup& group, std::ostream& out, int depth) {
  for (const auto& child : group.children()) {
    if (const auto* part = std::get_if<Part>(&child.node)) {
      out << "    <score-part id=\"" << xml::escape(part->id()) << "\">\n      <part-name>"
          << xml::escape(part->name()) << "</part-name>\n    </score-part>\n";
    } else {
      const auto& sub = std::get<PartGroup>(child.node);
      out << "    <part-group type=\"start\" number=\"" << depth << "\">";
      if (!sub.name().empty()) out << "<group-name>" << xml::escape(sub.name()) << "</group-name>";
      out << "</part-group>\n";
      write_part_list(sub, out, depth + 1);
      out << "    <part-group type=\"stop\" number=\"" << depth << "\"/>\n";
    }
  }
}

}  // namespace

void save_musicxml(const ScoreDocument& doc, std::ostream& sink) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
      << "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" "
         "\"http://www.musicxml.org/dtds/partwise.dtd\">\n"
      << "<score-partwise version=\"3.1\">\n  <part-list>\n";
  write_part_list(doc.root, out, 1);
  out << "  </part-list>\n";
  for (const Part* part : doc.parts()) PartWriter(*part, out).write();
  out << "</score-partwise>\n";
  sink << out.str();
  if (!sink) throw Error(ErrorCategory::io, "failed to write MusicXML");
}

std::string save_musicxml(const ScoreDocument& doc) {
  std::ostringstream out;
  save_musicxml(doc, out);
  return out.str();
}

}  // namespace scoreline
