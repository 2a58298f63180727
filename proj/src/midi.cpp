#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "scoreline/analysis.hpp"
#include "scoreline/errors.hpp"
#include "scoreline/io_midi.hpp"
#include "scoreline/timemap.hpp"
#include "ties.hpp"

namespace scoreline {

TempoMap::TempoMap(int ppq, std::int64_t default_us_per_quarter) : ppq_(ppq) {
  if (ppq <= 0) throw Error(ErrorCategory::range, "ppq must be positive");
  if (default_us_per_quarter <= 0) throw Error(ErrorCategory::range, "tempo must be positive");
  entries_.push_back({0, default_us_per_quarter});
}

void TempoMap::add(std::int64_t tick, std::int64_t us_per_quarter) {
  if (tick < 0 || us_per_quarter <= 0) throw Error(ErrorCategory::range, "bad tempo entry");
  auto it = std::lower_bound(entries_.begin(), entries_.end(), tick,
                             [](const Entry& e, std::int64_t t) { return e.tick < t; });
  if (it != entries_.end() && it->tick == tick)
    it->us_per_quarter = us_per_quarter;
  else
    entries_.insert(it, {tick, us_per_quarter});
}

double TempoMap::tick_to_seconds(std::int64_t tick) const {
  double seconds = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    std::int64_t seg_end = i + 1 < entries_.size() ? entries_[i + 1].tick : tick;
    std::int64_t upto = std::min(seg_end, tick);
    if (upto > entries_[i].tick)
      seconds += static_cast<double>(upto - entries_[i].tick) * static_cast<double>(entries_[i].us_per_quarter) /
                 (1e6 * ppq_);
    if (seg_end >= tick) break;
  }
  return seconds;
}

std::int64_t TempoMap::seconds_to_tick(double seconds) const {
  double elapsed = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    double sec_per_tick = static_cast<double>(entries_[i].us_per_quarter) / (1e6 * ppq_);
    if (i + 1 < entries_.size()) {
      double span = static_cast<double>(entries_[i + 1].tick - entries_[i].tick) * sec_per_tick;
      if (seconds < elapsed + span) return entries_[i].tick + std::llround((seconds - elapsed) / sec_per_tick);
      elapsed += span;
    } else {
      return entries_[i].tick + std::llround((seconds - elapsed) / sec_per_tick);
    }
  }
  return 0;
}

namespace {

// ---- reading ----

enum class EventKind { note_on, note_off, control, tempo, time_signature, key_signature, track_name };

struct RawEvent {
  std::int64_t tick;
  int track;
  std::size_t seq;
  EventKind kind;
  int channel = 0;
  int a = 0;
  int b = 0;
  std::string text;
};

struct SmfData {
  int format = 1;
  int ppq = 480;
  int track_count = 0;
  std::vector<RawEvent> events;  // sorted by (tick, track, seq)
  std::vector<std::int64_t> track_end;
};

class ByteReader {
public:
  ByteReader(std::string_view data, std::size_t offset = 0) : data_(data), pos_(offset) {}

  bool done() const { return pos_ >= data_.size(); }
  std::size_t pos() const { return pos_; }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t be(int n) {
    need(static_cast<std::size_t>(n));
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | static_cast<std::uint8_t>(data_[pos_++]);
    return v;
  }
  std::uint32_t varlen() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t c = u8();
      v = (v << 7) | (c & 0x7F);
      if (!(c & 0x80)) return v;
    }
    throw ParseError("variable-length quantity longer than 4 bytes at byte " + std::to_string(pos_));
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw ParseError("truncated MIDI data at byte " + std::to_string(pos_));
  }

  std::string_view data_;
  std::size_t pos_;
};

void read_track(std::string_view chunk, int track, SmfData& smf) {
  ByteReader r(chunk);
  std::int64_t tick = 0;
  std::uint8_t running = 0;
  std::size_t seq = 0;
  auto push = [&](RawEvent e) {
    e.tick = tick;
    e.track = track;
    e.seq = seq++;
    smf.events.push_back(std::move(e));
  };
  while (!r.done()) {
    tick += r.varlen();
    std::uint8_t status = r.u8();
    if (status == 0xFF) {
      std::uint8_t type = r.u8();
      std::uint32_t len = r.varlen();
      std::string_view data = r.bytes(len);
      auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(data[i]); };
      if (type == 0x2F) break;
      if (type == 0x51 && len == 3) {
        push({0, 0, 0, EventKind::tempo, 0, (byte(0) << 16) | (byte(1) << 8) | byte(2), 0, {}});
      } else if (type == 0x58 && len >= 2) {
        push({0, 0, 0, EventKind::time_signature, 0, byte(0), 1 << byte(1), {}});
      } else if (type == 0x59 && len == 2) {
        push({0, 0, 0, EventKind::key_signature, 0, static_cast<std::int8_t>(byte(0)), byte(1), {}});
      } else if (type == 0x03) {
        push({0, 0, 0, EventKind::track_name, 0, 0, 0, std::string(data)});
      }
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      r.bytes(r.varlen());
      continue;
    }
    std::uint8_t first;
    if (status & 0x80) {
      running = status;
      first = r.u8();
    } else {
      if (!running) throw ParseError("running status without a previous status byte in track " + std::to_string(track));
      first = status;
      status = running;
    }
    int channel = status & 0x0F;
    switch (status & 0xF0) {
      case 0x80: {
        r.u8();
        push({0, 0, 0, EventKind::note_off, channel, first, 0, {}});
        break;
      }
      case 0x90: {
        int velocity = r.u8();
        push({0, 0, 0, velocity == 0 ? EventKind::note_off : EventKind::note_on, channel, first, velocity, {}});
        break;
      }
      case 0xB0: {
        int value = r.u8();
        push({0, 0, 0, EventKind::control, channel, first, value, {}});
        break;
      }
      case 0xA0:
      case 0xE0: r.u8(); break;
      case 0xC0:
      case 0xD0: break;
      default: throw ParseError("unexpected status byte " + std::to_string(status) + " in track " + std::to_string(track));
    }
  }
  smf.track_end.push_back(tick);
}

SmfData read_smf(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 14 || bytes.substr(0, 4) != "MThd") throw ParseError("missing MThd header");
  r.bytes(4);
  std::uint32_t header_len = r.be(4);
  if (header_len < 6) throw ParseError("MThd chunk too short");
  SmfData smf;
  smf.format = static_cast<int>(r.be(2));
  int declared_tracks = static_cast<int>(r.be(2));
  std::uint32_t division = r.be(2);
  r.bytes(header_len - 6);
  if (smf.format > 1) throw ParseError("SMF type " + std::to_string(smf.format) + " not supported");
  if (division & 0x8000) throw ParseError("SMPTE time division not supported");
  if (division == 0) throw ParseError("zero ticks per quarter");
  smf.ppq = static_cast<int>(division);
  int track = 0;
  while (!r.done() && track < declared_tracks) {
    std::string_view id = r.bytes(4);
    std::uint32_t len = r.be(4);
    std::string_view chunk = r.bytes(len);
    if (id != "MTrk") continue;
    read_track(chunk, track++, smf);
  }
  smf.track_count = track;
  std::stable_sort(smf.events.begin(), smf.events.end(), [](const RawEvent& a, const RawEvent& b) {
    return std::tie(a.tick, a.track, a.seq) < std::tie(b.tick, b.track, b.seq);
  });
  return smf;
}

TempoMap tempo_map_of(const SmfData& smf) {
  TempoMap map(smf.ppq);
  for (const auto& e : smf.events)
    if (e.kind == EventKind::tempo && e.a > 0) map.add(e.tick, e.a);
  return map;
}

struct TickNote {
  std::int64_t on, off;
  int pitch, velocity, channel, track;
};

/// FIFO pairing of note-on/off per (track, channel, pitch).
std::vector<TickNote> pair_notes(const SmfData& smf, std::vector<Warning>& warnings) {
  std::map<std::tuple<int, int, int>, std::deque<std::pair<std::int64_t, int>>> open;
  std::vector<TickNote> out;
  for (const auto& e : smf.events) {
    if (e.kind == EventKind::note_on) {
      open[{e.track, e.channel, e.a}].emplace_back(e.tick, e.b);
    } else if (e.kind == EventKind::note_off) {
      auto& q = open[{e.track, e.channel, e.a}];
      if (q.empty()) {
        warnings.push_back({"track " + std::to_string(e.track) + ", tick " + std::to_string(e.tick),
                            "note-off without a sounding note (pitch " + std::to_string(e.a) + ") ignored"});
        continue;
      }
      auto [on, vel] = q.front();
      q.pop_front();
      out.push_back({on, e.tick, e.a, vel, e.channel, e.track});
    }
  }
  for (auto& [key, q] : open) {
    auto [track, channel, pitch] = key;
    for (auto [on, vel] : q) {
      std::int64_t end = smf.track_end.at(static_cast<std::size_t>(track));
      warnings.push_back({"track " + std::to_string(track) + ", tick " + std::to_string(on),
                          "note-on (pitch " + std::to_string(pitch) + ") never released; closed at end of track"});
      out.push_back({on, std::max(end, on), pitch, vel, channel, track});
    }
  }
  std::sort(out.begin(), out.end(), [](const TickNote& a, const TickNote& b) {
    return std::tie(a.on, a.pitch, a.track, a.channel, a.off) < std::tie(b.on, b.pitch, b.track, b.channel, b.off);
  });
  return out;
}

// ---- writing ----

struct TrackEvent {
  std::int64_t tick;
  int order;  // tie-break at equal ticks: meta, note-off, control, note-on
  std::string bytes;
};

void put_varlen(std::string& out, std::uint32_t v) {
  char buf[5];
  int n = 0;
  buf[n++] = static_cast<char>(v & 0x7F);
  while (v >>= 7) buf[n++] = static_cast<char>((v & 0x7F) | 0x80);
  while (n) out += buf[--n];
}

void put_be(std::string& out, std::uint32_t v, int n) {
  for (int i = n - 1; i >= 0; --i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::string meta(int type, std::string_view data) {
  std::string s;
  s += static_cast<char>(0xFF);
  s += static_cast<char>(type);
  put_varlen(s, static_cast<std::uint32_t>(data.size()));
  s += data;
  return s;
}

std::string channel_msg(int status, int channel, int a, int b) {
  return {static_cast<char>(status | channel), static_cast<char>(a), static_cast<char>(b)};
}

std::string tempo_meta(std::int64_t us) {
  std::string d;
  put_be(d, static_cast<std::uint32_t>(us), 3);
  return meta(0x51, d);
}

class SmfWriter {
public:
  explicit SmfWriter(int ppq) : ppq_(ppq) {
    if (ppq <= 0 || ppq > 0x7FFF) throw Error(ErrorCategory::encode, "ppq " + std::to_string(ppq) + " not encodable");
  }

  std::vector<TrackEvent>& track(std::size_t i) {
    if (tracks_.size() <= i) tracks_.resize(i + 1);
    return tracks_[i];
  }

  void note(std::size_t t, int channel, int pitch, int velocity, std::int64_t on, std::int64_t off) {
    if (pitch < 0 || pitch > 127) throw Error(ErrorCategory::encode, "pitch " + std::to_string(pitch) + " outside 0-127");
    if (channel < 0 || channel > 15) throw Error(ErrorCategory::encode, "channel " + std::to_string(channel) + " outside 0-15");
    velocity = std::clamp(velocity, 1, 127);
    track(t).push_back({on, 3, channel_msg(0x90, channel, pitch, velocity)});
    track(t).push_back({off, 1, channel_msg(0x80, channel, pitch, 0)});
  }

  void write(std::ostream& out) {
    if (tracks_.empty()) tracks_.resize(1);
    std::string file = "MThd";
    put_be(file, 6, 4);
    put_be(file, 1, 2);
    put_be(file, static_cast<std::uint32_t>(tracks_.size()), 2);
    put_be(file, static_cast<std::uint32_t>(ppq_), 2);
    for (auto& events : tracks_) {
      std::stable_sort(events.begin(), events.end(), [](const TrackEvent& a, const TrackEvent& b) {
        return std::tie(a.tick, a.order) < std::tie(b.tick, b.order);
      });
      std::string body;
      std::int64_t prev = 0;
      for (const auto& e : events) {
        if (e.tick < 0) throw Error(ErrorCategory::encode, "negative event time");
        put_varlen(body, static_cast<std::uint32_t>(e.tick - prev));
        body += e.bytes;
        prev = e.tick;
      }
      put_varlen(body, 0);
      body += meta(0x2F, {});
      file += "MTrk";
      put_be(file, static_cast<std::uint32_t>(body.size()), 4);
      file += body;
    }
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) throw Error(ErrorCategory::io, "MIDI write failed");
  }

private:
  int ppq_;
  std::vector<std::vector<TrackEvent>> tracks_;
};

int part_channel(std::size_t index) {
  // skip the General MIDI percussion channel
  std::size_t c = index < 9 ? index : index + 1;
  return static_cast<int>(c % 16);
}

}  // namespace

MidiLoadResult load_performance_midi(std::string_view bytes) {
  SmfData smf = read_smf(bytes);
  TempoMap tempo = tempo_map_of(smf);
  MidiLoadResult result;
  result.performance.ppq = smf.ppq;
  for (const auto& n : pair_notes(smf, result.warnings)) {
    if (n.off == n.on) {
      result.warnings.push_back({"track " + std::to_string(n.track) + ", tick " + std::to_string(n.on),
                                 "zero-length note (pitch " + std::to_string(n.pitch) + ") dropped"});
      continue;
    }
    double on = tempo.tick_to_seconds(n.on);
    result.performance.add_note({"", on, tempo.tick_to_seconds(n.off) - on, n.pitch, n.velocity, n.channel, n.track});
  }
  for (const auto& e : smf.events)
    if (e.kind == EventKind::control) result.performance.add_control({tempo.tick_to_seconds(e.tick), e.channel, e.a, e.b});
  result.performance.freeze();
  return result;
}

ScoreDocument load_score_midi(std::string_view bytes, const LoadOptions& options) {
  ScoreDocument doc;
  doc.source_format = SourceFormat::midi;
  SmfData smf = read_smf(bytes);
  std::vector<Warning> warnings;
  auto notes = pair_notes(smf, warnings);
  for (auto& w : warnings) {
    if (options.strict) throw ParseError(w.location + ": " + w.message);
    doc.warnings.push_back(std::move(w));
  }

  std::map<int, std::string> track_names;
  std::vector<std::pair<std::int64_t, TimeSignature>> signatures;
  std::vector<std::pair<std::int64_t, KeySignature>> keys;
  std::vector<std::pair<std::int64_t, std::int64_t>> tempos;
  for (const auto& e : smf.events) {
    switch (e.kind) {
      case EventKind::track_name:
        if (!track_names.contains(e.track)) track_names[e.track] = e.text;
        break;
      case EventKind::time_signature:
        if (e.a > 0) signatures.emplace_back(e.tick, TimeSignature{e.a, e.b});
        break;
      case EventKind::key_signature:
        keys.emplace_back(e.tick, KeySignature{std::clamp(e.a, -7, 7), e.b ? Mode::minor : Mode::major});
        break;
      case EventKind::tempo: tempos.emplace_back(e.tick, e.a); break;
      default: break;
    }
  }
  if (signatures.empty() || signatures.front().first > 0) signatures.insert(signatures.begin(), {0, TimeSignature{4, 4}});

  std::int64_t end = 0;
  for (const auto& n : notes) end = std::max(end, n.off);

  if (keys.empty() && !notes.empty()) {
    PitchClassProfile dist{};
    for (const auto& n : notes) dist[static_cast<std::size_t>(n.pitch % 12)] += static_cast<double>(n.off - n.on);
    try {
      KeyEstimate k = estimate_key_profile(dist);
      keys.emplace_back(0, KeySignature{key_fifths(k.tonic, k.mode), k.mode});
    } catch (const Error& e) {
      doc.warnings.push_back({"", std::string("no key signature estimated: ") + e.what()});
    }
  }

  // measures from the signature map
  std::vector<std::pair<std::int64_t, std::int64_t>> measures;
  {
    std::int64_t t = 0;
    std::size_t si = 0;
    while (t < end || measures.empty()) {
      while (si + 1 < signatures.size() && signatures[si + 1].first <= t) ++si;
      const TimeSignature& ts = signatures[si].second;
      std::int64_t len = std::max<std::int64_t>(1, 4 * static_cast<std::int64_t>(smf.ppq) * ts.beats / ts.beat_type);
      std::int64_t next = t + len;
      if (si + 1 < signatures.size() && signatures[si + 1].first < next && signatures[si + 1].first > t)
        next = signatures[si + 1].first;
      measures.emplace_back(t, next);
      t = next;
    }
  }

  std::map<std::pair<int, int>, std::vector<const TickNote*>> groups;
  for (const auto& n : notes) groups[{n.track, n.channel}].push_back(&n);

  int index = 0;
  for (const auto& [key, group] : groups) {
    ++index;
    std::string name = track_names.contains(key.first) ? track_names[key.first] : std::string();
    Part part("P" + std::to_string(index), name, smf.ppq);

    std::vector<int> pitches;
    std::vector<VoiceInput> voice_in;
    for (const TickNote* n : group) {
      pitches.push_back(n->pitch);
      voice_in.push_back({n->on, n->off, n->pitch});
    }
    auto spelled = estimate_spelling(pitches);
    auto voices = separate_voices(voice_in).voices;

    int k = 0;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const TickNote* n = group[i];
      if (n->off == n->on) {
        doc.warnings.push_back({"tick " + std::to_string(n->on), "zero-length note dropped"});
        continue;
      }
      Note note = Note::spelled("n" + std::to_string(++k), spelled[i].step, spelled[i].alter, spelled[i].octave,
                                voices[i], 1);
      part.add_object(note, n->on, n->off);
    }
    int number = 0;
    for (auto [s, e] : measures) part.add_object(Measure{++number}, s, e);
    for (const auto& [t, ts] : signatures) part.add_object(ts, t, t);
    for (const auto& [t, ks] : keys) part.add_object(ks, t, t);
    for (const auto& [t, us] : tempos) {
      double bpm = 60e6 / static_cast<double>(us);
      std::ostringstream text;
      text << "MM" << bpm;
      part.add_object(Directive{DirectiveKind::tempo, text.str(), bpm}, t, t);
    }
    part.freeze();
    doc.root.add(std::move(part));
  }
  return doc;
}

void save_midi(const PerformedPart& performance, std::ostream& sink, std::int64_t default_tempo_us) {
  int ppq = performance.ppq > 0 ? performance.ppq : 480;
  TempoMap tempo(ppq, default_tempo_us);
  SmfWriter w(ppq);
  w.track(0).push_back({0, 0, tempo_meta(default_tempo_us)});
  for (const auto& n : performance.notes()) {
    if (n.track < 0) throw Error(ErrorCategory::encode, "negative track for note " + n.id);
    std::int64_t on = tempo.seconds_to_tick(n.onset_sec);
    std::int64_t off = std::max(on + 1, tempo.seconds_to_tick(n.offset_sec()));
    w.note(static_cast<std::size_t>(n.track), n.channel, n.midi_pitch, n.velocity, on, off);
  }
  for (const auto& c : performance.controls()) {
    if (c.channel < 0 || c.channel > 15 || c.controller < 0 || c.controller > 127 || c.value < 0 || c.value > 127)
      throw Error(ErrorCategory::encode, "control event out of range");
    w.track(0).push_back({tempo.seconds_to_tick(c.time_sec), 2, channel_msg(0xB0, c.channel, c.controller, c.value)});
  }
  w.write(sink);
}

namespace {

void write_parts(const std::vector<const Part*>& parts, std::ostream& sink, std::int64_t default_tempo_us) {
  std::int64_t ppq = 1;
  for (const Part* p : parts)
    for (const auto& [t, divs] : p->divs_map()) ppq = std::lcm(ppq, static_cast<std::int64_t>(divs));
  if (ppq > 0x7FFF) throw Error(ErrorCategory::encode, "divs resolution " + std::to_string(ppq) + " exceeds MIDI ppq range");
  SmfWriter w(static_cast<int>(ppq));
  auto& conductor = w.track(0);

  bool tempo_written = false;
  if (!parts.empty()) {
    const Part& first = *parts.front();
    TimeMap map(first);
    auto tick = [&](Time div) { return (map.div_to_quarter(div) * ppq).numerator(); };
    for (const auto& d : first.objects_of<Directive>()) {
      if (d->kind != DirectiveKind::tempo || !d->quarter_bpm || *d->quarter_bpm <= 0) continue;
      conductor.push_back({tick(d.start), 0, tempo_meta(std::llround(60e6 / *d->quarter_bpm))});
      if (d.start == 0) tempo_written = true;
    }
    for (const auto& ts : first.objects_of<TimeSignature>()) {
      int log2 = 0;
      while ((1 << log2) < ts->beat_type) ++log2;
      if ((1 << log2) != ts->beat_type) throw Error(ErrorCategory::encode, "beat type not a power of two");
      std::string d{static_cast<char>(ts->beats), static_cast<char>(log2), 24, 8};
      conductor.push_back({tick(ts.start), 0, meta(0x58, d)});
    }
    for (const auto& ks : first.objects_of<KeySignature>()) {
      std::string d{static_cast<char>(static_cast<std::int8_t>(ks->fifths)), static_cast<char>(ks->mode == Mode::minor)};
      conductor.push_back({tick(ks.start), 0, meta(0x59, d)});
    }
  }
  if (!tempo_written) conductor.push_back({0, -1, tempo_meta(default_tempo_us)});

  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Part& p = *parts[i];
    TimeMap map(p);
    auto tick = [&](Time div) { return (map.div_to_quarter(div) * ppq).numerator(); };
    auto& track = w.track(i + 1);
    std::string name = p.name().empty() ? p.id() : p.name();
    track.push_back({0, 0, meta(0x03, name)});
    for (const auto& chain : detail::merge_tied_notes(p)) {
      if (chain.first.value->grace || chain.end <= chain.first.start) continue;
      w.note(i + 1, part_channel(i), chain.first.value->midi_pitch, 64, tick(chain.first.start), tick(chain.end));
    }
  }
  w.write(sink);
}

}  // namespace

void save_midi(const ScoreDocument& doc, std::ostream& sink, std::int64_t default_tempo_us) {
  write_parts(doc.parts(), sink, default_tempo_us);
}

void save_midi(const Part& part, std::ostream& sink, std::int64_t default_tempo_us) {
  write_parts({&part}, sink, default_tempo_us);
}

std::string save_midi(const PerformedPart& performance, std::int64_t default_tempo_us) {
  std::ostringstream out;
  save_midi(performance, out, default_tempo_us);
  return std::move(out).str();
}

std::string save_midi(const ScoreDocument& doc, std::int64_t default_tempo_us) {
  std::ostringstream out;
  save_midi(doc, out, default_tempo_us);
  return std::move(out).str();
}

std::string save_midi(const Part& part, std::int64_t default_tempo_us) {
  std::ostringstream out;
  save_midi(part, out, default_tempo_us);
  return std::move(out).str();
}

}  // namespace scoreline
