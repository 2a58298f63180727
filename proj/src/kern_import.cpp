#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "score_builder.hpp"
#include "scoreline/io_score.hpp"

namespace scoreline {

namespace {

using detail::Diagnostics;
using detail::PartBuilder;

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct Spine {
  bool kern = false;
  int column = 0;     // exclusive-interpretation column this spine descends from
  int voice = 1;
  int depth = 0;      // number of splits above this sub-spine
  Rational cursor = 0;
  std::vector<std::size_t> open_slurs;
  std::string part_label;
  std::string name;
};

struct KernToken {
  bool rest = false;
  bool grace = false;
  bool has_pitch = false;
  char step = 'C';
  int alter = 0;
  int octave = 4;
  Rational duration = 0;
  bool has_duration = false;
  Tie tie = Tie::none;
  int slur_starts = 0;
  int slur_ends = 0;
};

/// Recip digits ("4", "8.", "0", "3%2") to quarters.
Rational recip_quarters(const std::string& digits, int dots) {
  Rational base;
  if (auto pct = digits.find('%'); pct != std::string::npos) {
    std::int64_t num = std::stoll(digits.substr(0, pct));
    std::int64_t den = std::stoll(digits.substr(pct + 1));
    base = num == 0 ? Rational(8) : Rational(4 * den, num);
  } else if (digits == "00") {
    base = 16;
  } else if (digits == "000") {
    base = 32;
  } else {
    std::int64_t n = std::stoll(digits);
    base = n == 0 ? Rational(8) : Rational(4, n);
  }
  Rational total = base, add = base;
  for (int i = 0; i < dots; ++i) {
    add /= 2;
    total += add;
  }
  return total;
}

KernToken parse_token(const std::string& tok, Diagnostics& diag, std::size_t line) {
  KernToken t;
  std::string digits;
  int dots = 0;
  bool tie_start = false, tie_stop = false, tie_cont = false;
  for (std::size_t i = 0; i < tok.size(); ++i) {
    char c = tok[i];
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '%' && !digits.empty())) {
      if (!t.has_duration || !digits.empty()) digits += c;
    } else if (c == '.') {
      if (!digits.empty()) ++dots;
    } else if (c == 'r') {
      t.rest = true;
    } else if (c == 'q' || c == 'Q') {
      t.grace = true;
    } else if ((c >= 'a' && c <= 'g') || (c >= 'A' && c <= 'G')) {
      if (t.has_pitch) continue;
      std::size_t j = i;
      while (j < tok.size() && tok[j] == c) ++j;
      int count = static_cast<int>(j - i);
      t.has_pitch = true;
      t.step = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      t.octave = std::islower(static_cast<unsigned char>(c)) ? 3 + count : 4 - count;
      i = j - 1;
    } else if (c == '#') {
      ++t.alter;
    } else if (c == '-') {
      --t.alter;
    } else if (c == 'n') {
      t.alter = 0;
    } else if (c == '[') {
      tie_start = true;
    } else if (c == ']') {
      tie_stop = true;
    } else if (c == '_') {
      tie_cont = true;
    } else if (c == '(') {
      ++t.slur_starts;
    } else if (c == ')') {
      ++t.slur_ends;
    }
    // beams, stems, articulations and editorial marks carry nothing we keep
  }
  if (!digits.empty()) {
    try {
      t.duration = recip_quarters(digits, dots);
      t.has_duration = true;
    } catch (...) {
      diag.warn("bad duration in token '" + tok + "'", line);
    }
  }
  if (tie_cont || (tie_start && tie_stop))
    t.tie = Tie::cont;
  else if (tie_start)
    t.tie = Tie::start;
  else if (tie_stop)
    t.tie = Tie::stop;
  return t;
}

int count_key_fifths(const std::string& inside) {
  int sharps = 0, flats = 0;
  for (char c : inside) {
    if (c == '#') ++sharps;
    if (c == '-') ++flats;
  }
  return sharps > 0 ? sharps : -flats;
}

struct PartAccum {
  std::set<int> columns;
  std::string name;
  std::vector<std::tuple<Rational, int, int>> signatures;  // time, beats, beat-type
  std::vector<std::pair<Rational, int>> keys;
  std::vector<std::pair<Rational, double>> tempos;
};

}  // namespace

ScoreDocument load_kern(std::string_view document, const LoadOptions& options) {
  ScoreDocument doc;
  doc.source_format = SourceFormat::kern;
  Diagnostics diag(options, doc.warnings);

  std::vector<std::string> lines = split(document, '\n');
  for (auto& l : lines)
    if (!l.empty() && l.back() == '\r') l.pop_back();

  std::vector<Spine> spines;
  std::size_t line_no = 0;
  std::size_t first = 0;
  for (; first < lines.size(); ++first) {
    const std::string& l = lines[first];
    if (l.empty() || l.rfind("!!", 0) == 0) continue;
    if (l.rfind("**", 0) != 0) throw ParseError("no kern spine: expected exclusive interpretation", first + 1);
    auto toks = split(l, '\t');
    for (std::size_t i = 0; i < toks.size(); ++i) {
      Spine s;
      s.kern = toks[i] == "**kern";
      s.column = static_cast<int>(i);
      spines.push_back(s);
    }
    break;
  }
  if (spines.empty() || std::none_of(spines.begin(), spines.end(), [](const Spine& s) { return s.kern; }))
    throw ParseError("no kern spine");

  struct PendingNote {
    int column;
    int voice;
    Note note;
    Rational start, end;
    std::size_t spine_slot;
    int slur_starts, slur_ends;
  };
  std::vector<PendingNote> notes;
  struct PendingRest {
    int column, voice;
    Rational start, end;
  };
  std::vector<PendingRest> rests;
  std::vector<std::tuple<Rational, int, bool, bool>> barlines;  // time, number, repeat_start, repeat_end
  std::map<int, std::string> column_part;  // base column -> part label
  std::map<int, std::string> column_name;
  std::vector<std::tuple<int, Rational, int, int>> time_sigs;  // column, time, beats, type
  std::vector<std::tuple<int, Rational, int, Mode>> key_sigs;
  std::vector<std::tuple<int, Rational, double>> tempos;
  std::set<int> warned_nested;

  auto max_cursor = [&]() {
    Rational m = 0;
    for (const auto& s : spines)
      if (s.kern) m = std::max(m, s.cursor);
    return m;
  };

  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    line_no = li + 1;
    const std::string& l = lines[li];
    if (l.empty() || l.rfind("!!", 0) == 0) continue;
    if (spines.empty()) break;
    auto toks = split(l, '\t');
    if (toks.size() != spines.size())
      throw ParseError("expected " + std::to_string(spines.size()) + " spine fields, found " +
                           std::to_string(toks.size()),
                       line_no);
    if (l[0] == '!') continue;

    if (l[0] == '*') {
      std::vector<Spine> next;
      for (std::size_t i = 0; i < toks.size(); ++i) {
        const std::string& t = toks[i];
        Spine& s = spines[i];
        if (t == "*-") continue;
        if (t == "*^") {
          Spine a = s, b = s;
          a.depth = b.depth = s.depth + 1;
          if (s.depth >= 1) {
            if (warned_nested.insert(s.column).second)
              diag.warn("nested spine split flattened into voice " + std::to_string(s.voice), line_no);
          } else {
            b.voice = s.voice + 1;
          }
          b.open_slurs.clear();
          next.push_back(a);
          next.push_back(b);
          continue;
        }
        if (t == "*v") {
          if (!next.empty() && i > 0 && toks[i - 1] == "*v" && next.back().column == s.column) {
            next.back().cursor = std::max(next.back().cursor, s.cursor);
            next.back().depth = std::max(0, std::min(next.back().depth, s.depth) - 1);
            next.back().voice = std::min(next.back().voice, s.voice);
            continue;
          }
          next.push_back(s);
          continue;
        }
        if (t == "*+" || t == "*x") {
          diag.warn("unsupported spine manipulator '" + t + "' ignored", line_no, i + 1);
          next.push_back(s);
          continue;
        }
        if (s.kern) {
          if (t.rfind("*M", 0) == 0 && t.size() > 2 && std::isdigit(static_cast<unsigned char>(t[2])) &&
              t.find('/') != std::string::npos && t.rfind("*MM", 0) != 0) {
            auto slash = t.find('/');
            try {
              int beats = std::stoi(t.substr(2, slash - 2));
              int type = std::stoi(t.substr(slash + 1));
              time_sigs.emplace_back(s.column, s.cursor, beats, type);
            } catch (...) {
              diag.warn("bad meter '" + t + "'", line_no, i + 1);
            }
          } else if (t.rfind("*MM", 0) == 0) {
            try {
              tempos.emplace_back(s.column, s.cursor, std::stod(t.substr(3)));
            } catch (...) {
              diag.warn("bad tempo '" + t + "'", line_no, i + 1);
            }
          } else if (t.rfind("*k[", 0) == 0) {
            auto close = t.find(']');
            key_sigs.emplace_back(s.column, s.cursor, count_key_fifths(t.substr(3, close - 3)), Mode::major);
          } else if (t.size() >= 3 && t.back() == ':' && std::isalpha(static_cast<unsigned char>(t[1]))) {
            // key designation *G: / *e: sets the mode of the latest key signature
            Mode mode = std::islower(static_cast<unsigned char>(t[1])) ? Mode::minor : Mode::major;
            for (auto it = key_sigs.rbegin(); it != key_sigs.rend(); ++it)
              if (std::get<0>(*it) == s.column) {
                std::get<3>(*it) = mode;
                break;
              }
          } else if (t.rfind("*part", 0) == 0) {
            column_part[s.column] = t.substr(1);
          } else if (t.rfind("*I\"", 0) == 0) {
            column_name[s.column] = t.substr(3);
          } else if (t.rfind("*>", 0) == 0) {
            diag.warn("expansion list '" + t + "' ignored", line_no, i + 1);
          }
          // clefs, staff numbers, instrument classes: no model counterpart
        }
        next.push_back(s);
      }
      spines = std::move(next);
      continue;
    }

    if (l[0] == '=') {
      Rational t = max_cursor();
      for (auto& s : spines)
        if (s.kern) s.cursor = t;
      std::string tok;
      for (std::size_t i = 0; i < toks.size(); ++i)
        if (spines[i].kern) {
          tok = toks[i];
          break;
        }
      int number = -1;
      std::string digits;
      for (char c : tok) {
        if (std::isdigit(static_cast<unsigned char>(c)))
          digits += c;
        else if (!digits.empty())
          break;
      }
      if (!digits.empty()) number = std::stoi(digits);
      bool rep_end = tok.find(":|") != std::string::npos || tok.find(":!") != std::string::npos;
      bool rep_start = tok.find("|:") != std::string::npos || tok.find("!:") != std::string::npos;
      barlines.emplace_back(t, number, rep_start, rep_end);
      continue;
    }

    // data line
    for (std::size_t i = 0; i < toks.size(); ++i) {
      Spine& s = spines[i];
      if (!s.kern || toks[i] == ".") continue;
      Rational onset = s.cursor;
      Rational advance = 0;
      for (const auto& sub : split(toks[i], ' ')) {
        if (sub.empty() || sub == ".") continue;
        KernToken k = parse_token(sub, diag, line_no);
        if (!k.has_duration && !k.grace) {
          diag.warn("token '" + sub + "' without duration skipped", line_no, i + 1);
          continue;
        }
        Rational dur = k.grace ? Rational(0) : k.duration;
        advance = std::max(advance, dur);
        if (k.rest) {
          if (dur > 0) rests.push_back({s.column, s.voice, onset, onset + dur});
          continue;
        }
        if (!k.has_pitch) {
          diag.warn("token '" + sub + "' without pitch skipped", line_no, i + 1);
          continue;
        }
        Note n = Note::spelled("", k.step, k.alter, k.octave, s.voice, 1);
        n.tie = k.tie;
        n.grace = k.grace;
        notes.push_back({s.column, s.voice, n, onset, onset + dur, i, k.slur_starts, k.slur_ends});
      }
      s.cursor = onset + advance;
    }
  }

  // group base columns into parts
  std::map<std::string, std::set<int>> parts_by_label;
  std::set<int> kern_columns;
  for (const auto& n : notes) kern_columns.insert(n.column);
  for (const auto& r : rests) kern_columns.insert(r.column);
  for (const auto& [c, b, t, ty] : time_sigs) kern_columns.insert(c);
  for (int c : kern_columns) {
    auto it = column_part.find(c);
    std::string label = it != column_part.end() ? it->second : "#col" + std::to_string(c);
    parts_by_label[label].insert(c);
  }
  std::vector<std::pair<std::string, std::set<int>>> ordered(parts_by_label.begin(), parts_by_label.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return *a.second.rbegin() > *b.second.rbegin(); });

  Rational end_time = 0;
  for (const auto& n : notes) end_time = std::max(end_time, n.end);
  for (const auto& r : rests) end_time = std::max(end_time, r.end);

  int part_index = 0;
  for (const auto& [label, columns] : ordered) {
    ++part_index;
    std::map<int, int> staff_of;
    int staff = 0;
    for (auto it = columns.rbegin(); it != columns.rend(); ++it) staff_of[*it] = ++staff;
    std::string name;
    for (int c : columns)
      if (column_name.contains(c)) name = column_name[c];
    PartBuilder b("P" + std::to_string(part_index), name);
    b.set_staff_count(staff);

    std::vector<std::size_t> index_of(notes.size(), SIZE_MAX);
    std::map<std::size_t, std::vector<std::size_t>> open_slurs;  // by spine column+voice key
    for (std::size_t k = 0; k < notes.size(); ++k) {
      const auto& pn = notes[k];
      if (!columns.contains(pn.column)) continue;
      Note n = pn.note;
      n.staff = staff_of[pn.column];
      index_of[k] = b.add_note(n, pn.start, pn.end);
      std::size_t key = static_cast<std::size_t>(pn.column) * 64 + static_cast<std::size_t>(pn.voice);
      for (int e = 0; e < pn.slur_ends; ++e) {
        auto& stack = open_slurs[key];
        if (stack.empty()) {
          diag.warn("slur end without start");
        } else {
          b.add_slur(stack.back(), index_of[k]);
          stack.pop_back();
        }
      }
      for (int s = 0; s < pn.slur_starts; ++s) open_slurs[key].push_back(index_of[k]);
    }
    for (const auto& r : rests)
      if (columns.contains(r.column)) b.add(Rest{"", r.voice, staff_of[r.column]}, r.start, r.end);

    std::set<std::tuple<Rational, int, int>> ts_seen;
    for (const auto& [c, t, beats, type] : time_sigs)
      if (columns.contains(c) && ts_seen.insert({t, beats, type}).second)
        b.add(TimeSignature{beats, type}, t, t);
    std::set<std::tuple<Rational, int, int>> ks_seen;
    for (const auto& [c, t, fifths, mode] : key_sigs)
      if (columns.contains(c) && ks_seen.insert({t, fifths, static_cast<int>(mode)}).second)
        b.add(KeySignature{fifths, mode}, t, t);
    std::set<Rational> tempo_seen;
    for (const auto& [c, t, bpm] : tempos)
      if (columns.contains(c) && tempo_seen.insert(t).second) {
        std::ostringstream text;
        text << "MM" << bpm;
        b.add(Directive{DirectiveKind::tempo, text.str(), bpm}, t, t);
      }

    // measures between barlines
    Rational prev = 0;
    int prev_number = -1;
    bool first_bar = true;
    for (const auto& [t, number, rep_start, rep_end] : barlines) {
      if (t > prev) {
        int n = first_bar ? (number > 0 ? number - 1 : 0) : (prev_number >= 0 ? prev_number : 0);
        b.add(Measure{n}, prev, t);
      }
      if (rep_end) b.add(NavigationMark{NavigationKind::repeat_end, {}}, t, t);
      if (rep_start) b.add(NavigationMark{NavigationKind::repeat_start, {}}, t, t);
      prev = t;
      prev_number = number >= 0 ? number : prev_number + 1;
      first_bar = false;
    }
    if (end_time > prev) b.add(Measure{prev_number >= 0 ? prev_number : 1}, prev, end_time);

    doc.root.add(b.build());
  }
  return doc;
}

}  // namespace scoreline
