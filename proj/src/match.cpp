#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "score_builder.hpp"
#include "scoreline/errors.hpp"
#include "scoreline/io_align.hpp"
#include "scoreline/timemap.hpp"
#include "ties.hpp"

namespace scoreline {

const std::string* MatchFile::info_value(std::string_view key) const {
  for (const auto& [k, v] : info)
    if (k == key) return &v;
  return nullptr;
}

namespace {

constexpr std::int64_t kDefaultRate = 500000;

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Splits on commas outside brackets and parentheses.
std::vector<std::string> split_args(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '[' || c == '(') ++depth;
    if (c == ']' || c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

/// `name(args)` at the start of `s`; returns args text and advances past ')'.
std::optional<std::string> take_clause(std::string_view& s, std::string_view name) {
  if (!s.starts_with(name) || s.size() <= name.size() || s[name.size()] != '(') return std::nullopt;
  int depth = 0;
  for (std::size_t i = name.size(); i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && --depth == 0) {
      std::string args(s.substr(name.size() + 1, i - name.size() - 1));
      s.remove_prefix(i + 1);
      return args;
    }
  }
  return std::nullopt;
}

std::int64_t to_int64(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    std::int64_t v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("expected an integer, found '" + s + "'", line);
  }
}

Rational to_rational(const std::string& s, std::size_t line) {
  try {
    return parse_rational(s);
  } catch (const Error&) {
    throw ParseError("expected a number, found '" + s + "'", line);
  }
}

int parse_alter(const std::string& s, std::size_t line) {
  if (s == "n" || s == "0") return 0;
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c == '#'; })) return static_cast<int>(s.size());
  if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c == 'b'; })) return -static_cast<int>(s.size());
  return static_cast<int>(to_int64(s, line));
}

std::string alter_text(int alter) {
  if (alter == 0) return "n";
  return std::string(static_cast<std::size_t>(std::abs(alter)), alter > 0 ? '#' : 'b');
}

std::vector<std::string> parse_list(const std::string& s, std::size_t line) {
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') throw ParseError("expected a [list], found '" + s + "'", line);
  std::string inner = s.substr(1, s.size() - 2);
  if (trim(inner).empty()) return {};
  return split_args(inner);
}

SNoteRecord parse_snote(const std::string& args, std::size_t line) {
  auto a = split_args(args);
  if (a.size() != 9) throw ParseError("snote needs 9 fields, found " + std::to_string(a.size()), line);
  SNoteRecord r;
  r.id = a[0];
  auto spelling = parse_list(a[1], line);
  if (spelling.size() != 2 || spelling[0].size() != 1) throw ParseError("snote spelling must be [step,alter]", line);
  r.step = static_cast<char>(std::toupper(static_cast<unsigned char>(spelling[0][0])));
  if (r.step < 'A' || r.step > 'G') throw ParseError("bad step '" + spelling[0] + "'", line);
  r.alter = parse_alter(spelling[1], line);
  r.octave = static_cast<int>(to_int64(a[2], line));
  auto colon = a[3].find(':');
  if (colon == std::string::npos) throw ParseError("expected <measure>:<beat>, found '" + a[3] + "'", line);
  r.measure = static_cast<int>(to_int64(a[3].substr(0, colon), line));
  r.beat = static_cast<int>(to_int64(a[3].substr(colon + 1), line));
  r.offset = to_rational(a[4], line);
  r.duration = to_rational(a[5], line);
  r.onset_beat = to_rational(a[6], line);
  r.offset_beat = to_rational(a[7], line);
  r.attributes = parse_list(a[8], line);
  return r;
}

struct TickNote {
  std::string id;
  int pitch;
  std::int64_t on, off;
  int velocity, channel, track;
};

TickNote parse_note(const std::string& args, std::size_t line) {
  auto a = split_args(args);
  if (a.size() != 7) throw ParseError("note needs 7 fields, found " + std::to_string(a.size()), line);
  TickNote n;
  n.id = a[0];
  n.pitch = static_cast<int>(to_int64(a[1], line));
  n.on = to_int64(a[2], line);
  n.off = to_int64(a[3], line);
  n.velocity = static_cast<int>(to_int64(a[4], line));
  n.channel = static_cast<int>(to_int64(a[5], line));
  n.track = static_cast<int>(to_int64(a[6], line));
  if (n.off < n.on) throw ParseError("note offset before onset", line);
  return n;
}

struct Clock {
  std::int64_t units = 480;
  std::int64_t rate = kDefaultRate;

  double seconds(std::int64_t tick) const {
    return static_cast<double>(tick) * static_cast<double>(rate) / (1e6 * static_cast<double>(units));
  }
  std::int64_t tick(double sec) const {
    return std::llround(sec * 1e6 * static_cast<double>(units) / static_cast<double>(rate));
  }
};

Clock clock_of(const MatchFile& m) {
  Clock c;
  try {
    if (auto* u = m.info_value("midiClockUnits")) c.units = std::stoll(*u);
    if (auto* r = m.info_value("midiClockRate")) c.rate = std::stoll(*r);
  } catch (const std::exception&) {
    throw ParseError("bad midiClockUnits/midiClockRate");
  }
  if (c.units <= 0 || c.rate <= 0) throw ParseError("midiClockUnits and midiClockRate must be positive");
  return c;
}

std::optional<TimeSignature> parse_time_signature(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos) return std::nullopt;
  try {
    int beats = std::stoi(text.substr(0, slash));
    int type = std::stoi(text.substr(slash + 1));
    if (beats > 0 && type > 0) return TimeSignature{beats, type};
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

int attr_number(const std::vector<std::string>& attrs, std::string_view prefix, int fallback) {
  for (const auto& a : attrs)
    if (a.size() > prefix.size() && a.starts_with(prefix) &&
        std::all_of(a.begin() + static_cast<long>(prefix.size()), a.end(), ::isdigit))
      return std::stoi(a.substr(prefix.size()));
  return fallback;
}

/// Rebuilds a score from the snote records when a time signature is declared.
std::optional<ScoreDocument> rebuild_score(const MatchFile& m) {
  const std::string* ts_text = m.info_value("timeSignature");
  if (!ts_text || m.snotes.empty()) return std::nullopt;
  auto ts = parse_time_signature(*ts_text);
  if (!ts) return std::nullopt;
  Rational quarters_per_beat(4, ts->beat_type);
  Rational measure_quarters = Rational(ts->beats) * quarters_per_beat;

  Rational min_q = 0;
  int first_measure = m.snotes.front().measure;
  for (const auto& s : m.snotes) {
    min_q = std::min(min_q, s.onset_beat * quarters_per_beat);
    first_measure = std::min(first_measure, s.measure);
  }
  Rational shift = -min_q;
  detail::PartBuilder b("P1", "");
  int staves = 1;
  Rational end = 0;
  for (const auto& s : m.snotes) {
    int staff = attr_number(s.attributes, "staff", 1);
    staves = std::max(staves, staff);
    Note n = Note::spelled(s.id, s.step, s.alter, s.octave, attr_number(s.attributes, "v", 1), staff);
    n.grace = std::find(s.attributes.begin(), s.attributes.end(), "grace") != s.attributes.end();
    Rational on = s.onset_beat * quarters_per_beat + shift;
    Rational off = n.grace ? on : s.offset_beat * quarters_per_beat + shift;
    if (off < on) return std::nullopt;
    b.add_note(n, on, off);
    end = std::max(end, off);
  }
  b.set_staff_count(staves);
  b.add(*ts, 0, 0);
  Rational t = 0;
  int number = first_measure;
  if (shift > 0) {
    b.add(Measure{number++}, 0, shift);
    t = shift;
  }
  while (t < end) {
    b.add(Measure{number++}, t, t + measure_quarters);
    t += measure_quarters;
  }
  ScoreDocument doc;
  doc.source_format = SourceFormat::match;
  doc.root.add(b.build());
  return doc;
}

void write_snote(std::ostream& out, const SNoteRecord& r) {
  out << "snote(" << r.id << ",[" << r.step << ',' << alter_text(r.alter) << "]," << r.octave << ',' << r.measure << ':'
      << r.beat << ',' << format_rational(r.offset) << ',' << format_rational(r.duration) << ','
      << format_rational(r.onset_beat) << ',' << format_rational(r.offset_beat) << ",[";
  for (std::size_t i = 0; i < r.attributes.size(); ++i) out << (i ? "," : "") << r.attributes[i];
  out << "])";
}

void write_note(std::ostream& out, const PerformedNote& n, const Clock& clock) {
  std::int64_t on = clock.tick(n.onset_sec);
  std::int64_t off = clock.tick(n.offset_sec());
  out << "note(" << n.id << ',' << n.midi_pitch << ',' << on << ',' << off << ',' << n.velocity << ',' << n.channel << ','
      << n.track << ')';
}

void emit(const std::vector<std::pair<std::string, std::string>>& info, const std::vector<SNoteRecord>& snotes,
          const PerformedPart& perf, const Alignment& alignment, std::ostream& out, const Clock& clock) {
  std::map<std::string, const SNoteRecord*, std::less<>> by_id;
  for (const auto& s : snotes) by_id.emplace(s.id, &s);
  auto snote = [&](const std::optional<std::string>& id) -> const SNoteRecord& {
    auto it = id ? by_id.find(*id) : by_id.end();
    if (it == by_id.end()) throw Error(ErrorCategory::identity, "score note '" + id.value_or("") + "' not found");
    return *it->second;
  };
  auto note = [&](const std::optional<std::string>& id) -> const PerformedNote& {
    const PerformedNote* n = id ? perf.find_note(*id) : nullptr;
    if (!n) throw Error(ErrorCategory::identity, "performed note '" + id.value_or("") + "' not found");
    return *n;
  };

  for (const auto& [k, v] : info) out << "info(" << k << ',' << v << ").\n";
  for (const auto& p : alignment.pairs) {
    switch (p.label) {
      case AlignmentLabel::match:
        write_snote(out, snote(p.score_id));
        out << '-';
        write_note(out, note(p.perf_id), clock);
        break;
      case AlignmentLabel::deletion:
        write_snote(out, snote(p.score_id));
        out << "-deletion";
        break;
      case AlignmentLabel::insertion:
        out << "insertion-";
        write_note(out, note(p.perf_id), clock);
        break;
      case AlignmentLabel::ornament:
        snote(p.score_id);
        out << "ornament(" << *p.score_id << ")-";
        write_note(out, note(p.perf_id), clock);
        break;
    }
    out << ".\n";
  }
  for (const auto& c : perf.controls())
    if (c.controller == 64) out << "sustain(" << clock.tick(c.time_sec) << ',' << c.value << ").\n";
  if (!out) throw Error(ErrorCategory::io, "match write failed");
}

}  // namespace

MatchFile load_match(std::string_view document) {
  MatchFile m;
  struct PendingLine {
    std::size_t line;
    std::string clause;
  };
  std::vector<PendingLine> body;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < document.size()) {
    auto eol = document.find('\n', pos);
    std::string line = trim(document.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
    pos = eol == std::string_view::npos ? document.size() : eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    if (line.back() != '.') throw ParseError("clause not terminated by '.'", line_no);
    line.pop_back();
    std::string_view s = line;
    if (auto args = take_clause(s, "info")) {
      if (!s.empty()) throw ParseError("trailing text after info clause", line_no);
      auto comma = args->find(',');
      if (comma == std::string::npos) throw ParseError("info needs a key and a value", line_no);
      m.info.emplace_back(trim(args->substr(0, comma)), trim(args->substr(comma + 1)));
    } else {
      body.push_back({line_no, line});
    }
  }

  Clock clock = clock_of(m);
  m.performance.ppq = static_cast<int>(clock.units);
  std::map<std::string, std::size_t, std::less<>> snote_index;
  auto add_snote = [&](const SNoteRecord& r, std::size_t line) {
    auto it = snote_index.find(r.id);
    if (it == snote_index.end()) {
      snote_index.emplace(r.id, m.snotes.size());
      m.snotes.push_back(r);
    } else if (!(m.snotes[it->second] == r)) {
      throw Error(ErrorCategory::identity, "line " + std::to_string(line) + ": score note '" + r.id +
                                               "' redefined with different fields");
    }
  };
  std::set<std::string> perf_ids;
  auto add_note = [&](const TickNote& n, std::size_t line) {
    if (!perf_ids.insert(n.id).second)
      throw Error(ErrorCategory::identity, "line " + std::to_string(line) + ": duplicate note id '" + n.id + "'");
    double on = clock.seconds(n.on);
    m.performance.add_note({n.id, on, clock.seconds(n.off) - on, n.pitch, n.velocity, n.channel, n.track});
  };

  for (const auto& [line, clause] : body) {
    std::string_view s = clause;
    if (auto snote_args = take_clause(s, "snote")) {
      SNoteRecord r = parse_snote(*snote_args, line);
      add_snote(r, line);
      if (s == "-deletion") {
        m.alignment.add_deletion(r.id);
        continue;
      }
      if (!s.starts_with("-")) throw ParseError("expected -note(...) or -deletion after snote", line);
      s.remove_prefix(1);
      auto note_args = take_clause(s, "note");
      if (!note_args || !s.empty()) throw ParseError("malformed note clause", line);
      TickNote n = parse_note(*note_args, line);
      add_note(n, line);
      m.alignment.add_match(r.id, n.id);
    } else if (s.starts_with("insertion-")) {
      s.remove_prefix(10);
      auto note_args = take_clause(s, "note");
      if (!note_args || !s.empty()) throw ParseError("malformed insertion clause", line);
      TickNote n = parse_note(*note_args, line);
      add_note(n, line);
      m.alignment.add_insertion(n.id);
    } else if (auto score_id = take_clause(s, "ornament")) {
      if (!s.starts_with("-")) throw ParseError("expected -note(...) after ornament", line);
      s.remove_prefix(1);
      auto note_args = take_clause(s, "note");
      if (!note_args || !s.empty()) throw ParseError("malformed ornament clause", line);
      TickNote n = parse_note(*note_args, line);
      add_note(n, line);
      m.alignment.add_ornament(trim(*score_id), n.id);
    } else if (auto sustain = take_clause(s, "sustain")) {
      auto a = split_args(*sustain);
      if (a.size() != 2 || !s.empty()) throw ParseError("sustain needs (tick,value)", line);
      m.performance.add_control({clock.seconds(to_int64(a[0], line)), 0, 64, static_cast<int>(to_int64(a[1], line))});
    } else {
      throw ParseError("unrecognized clause '" + clause + "'", line);
    }
  }
  for (const auto& p : m.alignment.pairs)
    if (p.label == AlignmentLabel::ornament && !snote_index.contains(*p.score_id))
      throw Error(ErrorCategory::identity, "ornament refers to unknown score note '" + *p.score_id + "'");
  m.performance.freeze();
  m.alignment.validate();
  m.score = rebuild_score(m);
  return m;
}

void save_match(const MatchFile& match, std::ostream& sink) {
  emit(match.info, match.snotes, match.performance, match.alignment, sink, clock_of(match));
}

std::string save_match(const MatchFile& match) {
  std::ostringstream out;
  save_match(match, out);
  return std::move(out).str();
}

void save_match(const Part& part, const PerformedPart& performance, const Alignment& alignment, std::ostream& sink) {
  alignment.validate();
  auto signatures = part.objects_of<TimeSignature>();
  TimeMap map(part);
  bool has_ts = map.has_time_signature();
  auto beat = [&](Time div) {
    Rational q = map.div_to_quarter(div);
    return has_ts ? map.quarter_to_beat(q) : q;
  };
  auto measures = part.objects_of<Measure>();

  std::vector<SNoteRecord> records;
  for (const auto& chain : detail::merge_tied_notes(part)) {
    const Note& n = *chain.first.value;
    SNoteRecord r;
    r.id = n.id;
    r.step = n.step;
    r.alter = n.alter;
    r.octave = n.octave;
    r.onset_beat = beat(chain.first.start);
    r.offset_beat = beat(chain.end);
    r.duration = r.offset_beat - r.onset_beat;
    Rational measure_start = 0;
    r.measure = 1;
    for (const auto& m : measures)
      if (m.start <= chain.first.start && (chain.first.start < m.end || m.start == m.end)) {
        r.measure = m->number;
        measure_start = beat(m.start);
        break;
      }
    Rational within = r.onset_beat - measure_start;
    std::int64_t whole = floor(within);
    r.beat = static_cast<int>(whole) + 1;
    r.offset = within - whole;
    r.attributes = {"staff" + std::to_string(n.staff), "v" + std::to_string(n.voice)};
    if (n.grace) r.attributes.push_back("grace");
    records.push_back(std::move(r));
  }

  for (const auto& p : alignment.pairs) {
    if (p.score_id && !part.find_note(*p.score_id))
      throw Error(ErrorCategory::identity, "score note '" + *p.score_id + "' not in part");
    if (p.perf_id && !performance.find_note(*p.perf_id))
      throw Error(ErrorCategory::identity, "performed note '" + *p.perf_id + "' not in performance");
  }

  Clock clock;
  clock.units = performance.ppq > 0 ? performance.ppq : 480;
  std::vector<std::pair<std::string, std::string>> info = {
      {"matchFileVersion", "1.0"},
      {"midiClockUnits", std::to_string(clock.units)},
      {"midiClockRate", std::to_string(clock.rate)},
  };
  if (!signatures.empty())
    info.emplace_back("timeSignature",
                      std::to_string(signatures.front()->beats) + "/" + std::to_string(signatures.front()->beat_type));
  emit(info, records, performance, alignment, sink, clock);
}

std::string save_match(const Part& part, const PerformedPart& performance, const Alignment& alignment) {
  std::ostringstream out;
  save_match(part, performance, alignment, out);
  return std::move(out).str();
}

Alignment load_corresp(std::string_view document) {
  Alignment a;
  std::size_t row = 0;
  std::size_t pos = 0;
  while (pos < document.size()) {
    auto eol = document.find('\n', pos);
    std::string_view line = document.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? document.size() : eol + 1;
    ++row;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.starts_with("//")) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      fields.push_back(trim(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start)));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    while (fields.size() > 10 && fields.back().empty()) fields.pop_back();
    if (fields.size() != 10)
      throw ParseError("expected 10 tab-separated columns, found " + std::to_string(fields.size()), row);
    const std::string& perf = fields[0];
    const std::string& score = fields[5];
    if (perf == "*" && score == "*") throw ParseError("row with neither an aligned nor a reference id", row);
    if (score == "*")
      a.add_insertion(perf);
    else if (perf == "*")
      a.add_deletion(score);
    else
      a.add_match(score, perf);
  }
  a.validate();
  return a;
}

}  // namespace scoreline
