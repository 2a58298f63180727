#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <set>

#include "score_builder.hpp"
#include "scoreline/io_score.hpp"
#include "xml.hpp"

namespace scoreline {

namespace {

using detail::Diagnostics;
using detail::PartBuilder;
using xml::Element;

int to_int(const std::string& s, int fallback) {
  int v = fallback;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() ? v : fallback;
}

std::string xml_id(const Element& e) {
  if (auto* id = e.attr("xml:id")) return *id;
  return {};
}

std::string strip_hash(const std::string& ref) { return !ref.empty() && ref[0] == '#' ? ref.substr(1) : ref; }

std::optional<Rational> dur_quarters(const std::string& dur, int dots) {
  Rational base;
  if (dur == "long")
    base = 16;
  else if (dur == "breve")
    base = 8;
  else {
    int d = to_int(dur, 0);
    if (d <= 0) return std::nullopt;
    base = Rational(4, d);
  }
  Rational total = base, add = base;
  for (int i = 0; i < dots; ++i) {
    add /= 2;
    total += add;
  }
  return total;
}

int accid_alter(const std::string& a) {
  if (a == "s") return 1;
  if (a == "f") return -1;
  if (a == "ss" || a == "x") return 2;
  if (a == "ff") return -2;
  if (a == "ts") return 3;
  if (a == "tf") return -3;
  return 0;
}

/// "2s" -> 2, "3f" -> -3, "0" -> 0.
std::optional<int> parse_key_sig(const std::string& sig) {
  if (sig.empty()) return std::nullopt;
  if (sig == "0") return 0;
  int n = to_int(sig, -1);
  if (n < 0) return std::nullopt;
  if (sig.back() == 's') return n;
  if (sig.back() == 'f') return -n;
  return std::nullopt;
}

std::vector<int> parse_numbers(const std::string& s) {
  std::vector<int> out;
  int cur = 0;
  bool in = false;
  for (char c : s + " ") {
    if (c >= '0' && c <= '9') {
      cur = cur * 10 + (c - '0');
      in = true;
    } else if (in) {
      out.push_back(cur);
      cur = 0;
      in = false;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct StaffState {
  PartBuilder builder;
  std::map<std::string, std::size_t> note_index;  // xml:id -> builder index
  int fifths = 0;
};

struct Meter {
  int count = 4, unit = 4;
};

class MeiReader {
public:
  MeiReader(Diagnostics& diag) : diag_(diag) {}

  void read(const Element& root, ScoreDocument& doc) {
    const Element* score = find_score(root);
    if (!score) throw ParseError("no music/body/mdiv/score element", root.line, root.column);

    for (const auto& c : score->children) {
      if (c->name == "scoreDef")
        score_def(*c, true);
      else if (c->name == "section")
        section(*c);
      else
        diag_.warn("unsupported element <" + c->name + "> skipped", c->line, c->column);
    }
    if (volta_open_) close_volta(time_);

    for (const auto& n : order_) {
      auto& b = staves_.at(n).builder;
      for (const auto& [start, end, number] : measures_) b.add(Measure{number}, start, end);
      for (const auto& [t, kind] : marks_) b.add(NavigationMark{kind, {}}, t, t);
      for (const auto& [start, end, nums] : voltas_) b.add(NavigationMark{NavigationKind::volta, nums}, start, end);
      for (const auto& [a, z] : pending_slurs_[n]) b.add_slur(a, z);
      doc.root.add(b.build());
    }
  }

private:
  static const Element* find_score(const Element& root) {
    const Element* music = root.child("music");
    const Element* body = music ? music->child("body") : nullptr;
    const Element* mdiv = body ? body->child("mdiv") : nullptr;
    while (mdiv && !mdiv->child("score") && mdiv->child("mdiv")) mdiv = mdiv->child("mdiv");
    return mdiv ? mdiv->child("score") : nullptr;
  }

  void score_def(const Element& def, bool initial) {
    std::optional<Meter> meter;
    if (def.attr("meter.count") && def.attr("meter.unit"))
      meter = Meter{to_int(def.attr_or("meter.count"), 4), to_int(def.attr_or("meter.unit"), 4)};
    if (const Element* ms = def.child("meterSig"))
      meter = Meter{to_int(ms->attr_or("count"), 4), to_int(ms->attr_or("unit"), 4)};
    std::optional<int> key = parse_key_sig(def.attr_or("key.sig"));
    if (const Element* ks = def.child("keySig")) key = parse_key_sig(ks->attr_or("sig"));
    Mode mode = def.attr_or("key.mode") == "minor" ? Mode::minor : Mode::major;

    if (meter) meter_ = *meter;
    std::vector<const Element*> defs;
    collect_staff_defs(def, defs);
    if (initial) {
      int index = 0;
      for (const Element* sd : defs) {
        std::string n = sd->attr_or("n", std::to_string(index + 1));
        ++index;
        std::string id = xml_id(*sd);
        if (id.empty()) id = "P" + std::to_string(index);
        std::string label = sd->attr_or("label");
        if (label.empty())
          if (const Element* l = sd->child("label")) label = xml::trim(l->text);
        staves_.emplace(n, StaffState{PartBuilder(id, label), {}, 0});
        order_.push_back(n);
      }
      if (staves_.empty()) throw ParseError("scoreDef declares no staffDef", def.line, def.column);
    }
    for (auto& [n, st] : staves_) {
      if (meter) st.builder.add(TimeSignature{meter->count, meter->unit}, time_, time_);
      if (key) {
        st.builder.add(KeySignature{*key, mode}, time_, time_);
        st.fifths = *key;
      }
    }
    // per-staff overrides
    for (const Element* sd : defs) {
      auto it = staves_.find(sd->attr_or("n"));
      if (it == staves_.end()) continue;
      if (!meter && sd->attr("meter.count") && sd->attr("meter.unit")) {
        Meter m{to_int(sd->attr_or("meter.count"), 4), to_int(sd->attr_or("meter.unit"), 4)};
        meter_ = m;
        it->second.builder.add(TimeSignature{m.count, m.unit}, time_, time_);
      }
      if (!key)
        if (auto k = parse_key_sig(sd->attr_or("key.sig"))) {
          it->second.builder.add(
              KeySignature{*k, sd->attr_or("key.mode") == "minor" ? Mode::minor : Mode::major}, time_, time_);
          it->second.fifths = *k;
        }
    }
  }

  static void collect_staff_defs(const Element& e, std::vector<const Element*>& out) {
    for (const auto& c : e.children) {
      if (c->name == "staffDef")
        out.push_back(c.get());
      else if (c->name == "staffGrp")
        collect_staff_defs(*c, out);
    }
  }

  void section(const Element& sec) {
    for (const auto& c : sec.children) {
      if (c->name == "measure")
        measure(*c);
      else if (c->name == "section")
        section(*c);
      else if (c->name == "ending")
        ending(*c);
      else if (c->name == "scoreDef")
        score_def(*c, false);
      else if (c->name == "pb" || c->name == "sb")
        continue;
      else
        diag_.warn("unsupported element <" + c->name + "> skipped", c->line, c->column);
    }
  }

  void ending(const Element& e) {
    if (volta_open_) close_volta(time_);
    std::vector<int> nums = parse_numbers(e.attr_or("n"));
    if (nums.empty()) nums = parse_numbers(e.attr_or("label"));
    if (nums.empty()) nums = {1};
    volta_open_ = true;
    volta_start_ = time_;
    volta_numbers_ = nums;
    section(e);
    close_volta(time_);
  }

  void close_volta(const Rational& end) {
    voltas_.emplace_back(volta_start_, end, volta_numbers_);
    volta_open_ = false;
  }

  void measure(const Element& m) {
    Rational start = time_;
    Rational nominal(4 * meter_.count, meter_.unit);
    Rational length = 0;
    bool any_content = false;
    std::string left = m.attr_or("left"), right = m.attr_or("right");
    if (left == "rptstart" || left == "rptboth") marks_.emplace_back(start, NavigationKind::repeat_start);

    for (const auto& c : m.children) {
      if (c->name == "staff") {
        auto it = staves_.find(c->attr_or("n"));
        if (it == staves_.end()) {
          diag_.warn("staff n=" + c->attr_or("n") + " not declared in scoreDef; skipped", c->line, c->column);
          continue;
        }
        StaffState& st = it->second;
        int layer_index = 0;
        for (const auto& l : c->children) {
          if (l->name != "layer") {
            diag_.warn("unsupported element <" + l->name + "> in staff skipped", l->line, l->column);
            continue;
          }
          ++layer_index;
          int voice = to_int(l->attr_or("n"), layer_index);
          Rational cursor = start;
          layer_events(*l, st, voice, cursor, Rational(1), nominal);
          length = std::max(length, cursor - start);
          any_content = true;
        }
      } else if (c->name == "tie" || c->name == "slur") {
        control_event(*c);
      } else if (c->name == "tempo" || c->name == "dynam" || c->name == "dir") {
        directive(*c, start);
      } else {
        diag_.warn("unsupported element <" + c->name + "> in measure skipped", c->line, c->column);
      }
    }
    if (!any_content) length = nominal;
    Rational end = start + length;
    if (right == "rptend" || right == "rptboth") marks_.emplace_back(end, NavigationKind::repeat_end);
    if (right == "rptboth") marks_.emplace_back(end, NavigationKind::repeat_start);
    for (const auto& [t, k] : measure_nav_) {
      Rational pos = detail::is_measure_end_mark(k) ? end : t;
      if (std::find(marks_.begin(), marks_.end(), std::make_pair(pos, k)) == marks_.end()) marks_.emplace_back(pos, k);
    }
    measure_nav_.clear();
    int number = to_int(m.attr_or("n"), static_cast<int>(measures_.size()) + 1);
    if (end > start) measures_.emplace_back(start, end, number);
    time_ = end;
    // control events may point forward to notes read later in the measure
    for (auto it = deferred_.begin(); it != deferred_.end();) {
      if (resolve(*it))
        it = deferred_.erase(it);
      else
        ++it;
    }
  }

  void layer_events(const Element& container, StaffState& st, int voice, Rational& cursor, Rational ratio,
                    const Rational& nominal) {
    for (const auto& e : container.children) {
      const std::string& name = e->name;
      if (name == "note") {
        Rational d = event_duration(*e, nullptr) * ratio;
        if (e->attr("grace")) d = 0;
        add_note(*e, nullptr, st, voice, cursor, d);
        cursor += d;
      } else if (name == "chord") {
        Rational d = event_duration(*e, nullptr) * ratio;
        if (e->attr("grace")) d = 0;
        for (const auto& n : e->children) {
          if (n->name == "note")
            add_note(*n, e.get(), st, voice, cursor, d);
          else if (n->name != "artic")
            diag_.warn("unsupported element <" + n->name + "> in chord skipped", n->line, n->column);
        }
        cursor += d;
      } else if (name == "rest") {
        Rational d = event_duration(*e, nullptr) * ratio;
        st.builder.add(Rest{xml_id(*e), voice, 1}, cursor, cursor + d);
        cursor += d;
      } else if (name == "mRest") {
        st.builder.add(Rest{xml_id(*e), voice, 1}, cursor, cursor + nominal);
        cursor += nominal;
      } else if (name == "space") {
        cursor += event_duration(*e, nullptr) * ratio;
      } else if (name == "mSpace") {
        cursor += nominal;
      } else if (name == "beam" || name == "graceGrp") {
        layer_events(*e, st, voice, cursor, ratio, nominal);
      } else if (name == "tuplet") {
        if (ratio != 1) diag_.warn("nested tuplet flattened to the outer ratio", e->line, e->column);
        int num = to_int(e->attr_or("num"), 1), numbase = to_int(e->attr_or("numbase"), 1);
        Rational inner = ratio != 1 || num <= 0 || numbase <= 0 ? ratio : Rational(numbase, num);
        layer_events(*e, st, voice, cursor, inner, nominal);
      } else {
        diag_.warn("unsupported element <" + name + "> in layer skipped", e->line, e->column);
      }
    }
  }

  Rational event_duration(const Element& e, const Element* chord) {
    std::string dur = e.attr_or("dur", chord ? chord->attr_or("dur") : std::string());
    int dots = to_int(e.attr_or("dots", chord ? chord->attr_or("dots", "0") : "0"), 0);
    if (dur.empty()) {
      if (e.attr("grace")) return 0;
      diag_.warn("<" + e.name + "> without @dur; treated as a quarter", e.line, e.column);
      return 1;
    }
    auto q = dur_quarters(dur, dots);
    if (!q) {
      diag_.warn("bad @dur '" + dur + "'; treated as a quarter", e.line, e.column);
      return 1;
    }
    return *q;
  }

  void add_note(const Element& e, const Element* chord, StaffState& st, int voice, const Rational& at,
                const Rational& d) {
    std::string pname = e.attr_or("pname");
    if (pname.size() != 1 || pname[0] < 'a' || pname[0] > 'g') {
      diag_.warn("note without a valid @pname skipped", e.line, e.column);
      return;
    }
    int octave = to_int(e.attr_or("oct"), 4);
    int alter = 0;
    if (auto* a = e.attr("accid.ges"))
      alter = accid_alter(*a);
    else if (auto* a2 = e.attr("accid"))
      alter = accid_alter(*a2);
    else if (const Element* ac = e.child("accid"))
      alter = accid_alter(ac->attr_or("accid.ges", ac->attr_or("accid")));
    else
      alter = key_alter(st, pname[0]);
    Note n = Note::spelled(xml_id(e), static_cast<char>(pname[0] - 'a' + 'A'), alter, octave, voice, 1);
    n.grace = e.attr("grace") != nullptr || (chord && chord->attr("grace"));
    std::string tie = e.attr_or("tie", chord ? chord->attr_or("tie") : std::string());
    if (tie == "i")
      n.tie = Tie::start;
    else if (tie == "m")
      n.tie = Tie::cont;
    else if (tie == "t")
      n.tie = Tie::stop;
    std::size_t idx = st.builder.add_note(n, at, at + d);
    if (!n.id.empty()) st.note_index[n.id] = idx;
  }

  /// Alteration implied by the key signature when the note has no accidental.
  static int key_alter(const StaffState& st, char pname) {
    static const std::string sharps = "fcgdaeb";
    auto pos = static_cast<int>(sharps.find(pname));
    if (st.fifths > 0 && pos < st.fifths) return 1;
    if (st.fifths < 0 && 6 - pos < -st.fifths) return -1;
    return 0;
  }

  void control_event(const Element& e) {
    Deferred d{e.name, strip_hash(e.attr_or("startid")), strip_hash(e.attr_or("endid")), e.line, e.column};
    if (d.start.empty() || d.end.empty()) {
      diag_.warn("<" + e.name + "> without startid/endid skipped", e.line, e.column);
      return;
    }
    if (!resolve(d)) deferred_.push_back(d);
  }

  struct Deferred {
    std::string kind, start, end;
    std::size_t line, column;
  };

  bool resolve(const Deferred& d) {
    for (auto& [n, st] : staves_) {
      auto a = st.note_index.find(d.start);
      if (a == st.note_index.end()) continue;
      for (auto& [n2, st2] : staves_) {
        auto z = st2.note_index.find(d.end);
        if (z == st2.note_index.end()) continue;
        if (&st2 != &st) {
          diag_.warn("<" + d.kind + "> across staves skipped", d.line, d.column);
          return true;
        }
        if (d.kind == "tie") {
          Note& first = st.builder.note(a->second);
          Note& last = st.builder.note(z->second);
          first.tie = first.tie == Tie::stop || first.tie == Tie::cont ? Tie::cont : Tie::start;
          last.tie = last.tie == Tie::start || last.tie == Tie::cont ? Tie::cont : Tie::stop;
        } else {
          pending_slurs_[n].emplace_back(a->second, z->second);
        }
        return true;
      }
      return false;
    }
    return false;
  }

  void directive(const Element& e, const Rational& measure_start) {
    // @tstamp counts meter units from 1
    Rational at = measure_start;
    if (auto* ts = e.attr("tstamp")) {
      try {
        Rational beat = parse_rational(*ts);
        at += (beat - 1) * Rational(4, meter_.unit);
      } catch (const Error&) {
        diag_.warn("bad @tstamp '" + *ts + "'", e.line, e.column);
      }
    }
    std::string text = xml::trim(e.text);
    for (const auto& c : e.children) text += xml::trim(c->text);
    std::vector<std::string> targets;
    for (const auto& s : parse_numbers(e.attr_or("staff"))) targets.push_back(std::to_string(s));
    if (targets.empty()) targets = order_;
    for (const auto& n : targets) {
      auto it = staves_.find(n);
      if (it == staves_.end()) continue;
      auto& b = it->second.builder;
      if (e.name == "dynam") {
        b.add(Directive{DirectiveKind::loudness, text, std::nullopt}, at, at);
      } else if (e.name == "tempo") {
        std::optional<double> bpm;
        if (auto* m = e.attr("midi.bpm")) bpm = std::stod(*m);
        if (!bpm) bpm = detail::classify_words(text).bpm;
        b.add(Directive{DirectiveKind::tempo, text, bpm}, at, at);
      } else {
        auto meaning = detail::classify_words(text);
        if (meaning.kind == detail::WordsMeaning::Kind::navigation) continue;
        DirectiveKind k =
            meaning.kind == detail::WordsMeaning::Kind::loudness ? DirectiveKind::loudness : DirectiveKind::tempo;
        b.add(Directive{k, text, meaning.bpm}, at, at);
      }
    }
    if (e.name == "dir") {
      auto meaning = detail::classify_words(text);
      if (meaning.kind == detail::WordsMeaning::Kind::navigation) measure_nav_.emplace_back(at, meaning.navigation);
    }
  }

  Diagnostics& diag_;
  std::map<std::string, StaffState> staves_;
  std::vector<std::string> order_;
  Meter meter_;
  Rational time_ = 0;
  std::vector<std::tuple<Rational, Rational, int>> measures_;
  std::vector<std::pair<Rational, NavigationKind>> marks_;
  std::vector<std::pair<Rational, NavigationKind>> measure_nav_;
  std::vector<std::tuple<Rational, Rational, std::vector<int>>> voltas_;
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> pending_slurs_;
  std::vector<Deferred> deferred_;
  bool volta_open_ = false;
  Rational volta_start_ = 0;
  std::vector<int> volta_numbers_;
};

}  // namespace

ScoreDocument load_mei(std::string_view document, const LoadOptions& options) {
  ScoreDocument doc;
  doc.source_format = SourceFormat::mei;
  auto root = xml::parse(document);
  if (root->name != "mei") throw ParseError("root element is <" + root->name + ">, expected <mei>", root->line, root->column);
  Diagnostics diag(options, doc.warnings);
  MeiReader reader(diag);
  reader.read(*root, doc);
  return doc;
}

}  // namespace scoreline
