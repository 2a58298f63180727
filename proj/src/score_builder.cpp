#include "score_builder.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <regex>
#include <set>
#include <tuple>

namespace scoreline::detail {

std::int64_t lcm(std::int64_t a, std::int64_t b) { return std::lcm(a, b); }

std::size_t PartBuilder::add_note(Note note, const Rational& start, const Rational& end) {
  notes_.push_back({std::move(note), start, end});
  return notes_.size() - 1;
}

void PartBuilder::add(ObjectData obj, const Rational& start, const Rational& end) {
  objects_.push_back({std::move(obj), start, end});
}

void PartBuilder::add_slur(std::size_t start_note, std::size_t end_note) { slurs_.emplace_back(start_note, end_note); }

void PartBuilder::require_divs(std::int64_t divs) {
  if (divs > 0) divs_hint_ = lcm(divs_hint_, divs);
}

Part PartBuilder::build() const {
  std::int64_t divs = divs_hint_;
  auto absorb = [&](const Rational& r) { divs = lcm(divs, r.denominator()); };
  for (const auto& n : notes_) {
    absorb(n.start);
    absorb(n.end);
  }
  for (const auto& o : objects_) {
    absorb(o.start);
    absorb(o.end);
  }
  auto to_div = [&](const Rational& q) -> Time {
    Rational d = q * divs;
    if (d < 0) throw Error(ErrorCategory::range, "element before the start of the score in part '" + id_ + "'");
    return d.numerator();
  };

  std::vector<Note> notes;
  notes.reserve(notes_.size());
  for (const auto& n : notes_) notes.push_back(n.note);

  std::set<std::string> explicit_ids;
  for (const auto& n : notes)
    if (!n.id.empty()) explicit_ids.insert(n.id);
  std::vector<std::size_t> order(notes_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(notes_[a].start, notes_[a].note.midi_pitch) < std::tie(notes_[b].start, notes_[b].note.midi_pitch);
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    Note& n = notes[order[k]];
    if (!n.id.empty()) continue;
    std::string id = "n" + std::to_string(k + 1);
    while (explicit_ids.contains(id)) id += "x";
    n.id = id;
  }

  Part part(id_, name_, static_cast<int>(divs));
  part.set_staff_count(staff_count_);
  for (std::size_t i = 0; i < notes.size(); ++i) part.add_object(notes[i], to_div(notes_[i].start), to_div(notes_[i].end));

  std::size_t rest_counter = 0;
  for (const auto& o : objects_) {
    ObjectData data = o.data;
    if (auto* r = std::get_if<Rest>(&data); r && r->id.empty()) r->id = "r" + std::to_string(++rest_counter);
    part.add_object(std::move(data), to_div(o.start), to_div(o.end));
  }
  for (auto [a, b] : slurs_) {
    part.add_object(Slur{notes[a].id, notes[b].id}, to_div(notes_[a].start), to_div(notes_[b].end));
  }
  part.freeze();
  return part;
}

void Diagnostics::warn(const std::string& message, std::size_t line, std::size_t column) {
  if (options_.strict) throw ParseError(message, line, column);
  std::string location;
  if (line != 0) location = "line " + std::to_string(line) + (column ? ":" + std::to_string(column) : "");
  sink_.push_back({location, message});
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool starts_with(const std::string& s, std::string_view p) { return s.rfind(p, 0) == 0; }

}  // namespace

WordsMeaning classify_words(const std::string& raw) {
  WordsMeaning m;
  std::string text = lower(raw);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.erase(text.begin());

  auto nav = [&](NavigationKind k) {
    m.kind = WordsMeaning::Kind::navigation;
    m.navigation = k;
    return m;
  };
  if (text == "fine") return nav(NavigationKind::fine);
  if (starts_with(text, "d.c.") || starts_with(text, "da capo") || starts_with(text, "d. c.")) return nav(NavigationKind::da_capo);
  if (starts_with(text, "d.s.") || starts_with(text, "dal segno") || starts_with(text, "d. s.")) return nav(NavigationKind::dal_segno);
  if (starts_with(text, "to coda")) return nav(NavigationKind::to_coda);
  if (text == "segno") return nav(NavigationKind::segno);
  if (text == "coda") return nav(NavigationKind::coda);

  static const std::set<std::string> loudness = {
      "ppp", "pp", "p", "mp", "mf", "f", "ff", "fff", "sf", "sfz", "sffz", "fp", "rfz", "fz",
      "cresc.", "cresc", "crescendo", "dim.", "dim", "diminuendo", "decresc.", "decrescendo"};
  if (loudness.contains(text)) {
    m.kind = WordsMeaning::Kind::loudness;
    return m;
  }
  m.kind = WordsMeaning::Kind::tempo;
  static const std::regex bpm_re(R"(=\s*([0-9]+(\.[0-9]+)?))");
  std::smatch match;
  if (std::regex_search(text, match, bpm_re)) m.bpm = std::stod(match[1].str());
  return m;
}

bool is_measure_end_mark(NavigationKind k) {
  return k == NavigationKind::da_capo || k == NavigationKind::dal_segno || k == NavigationKind::to_coda ||
         k == NavigationKind::fine || k == NavigationKind::repeat_end;
}

}  // namespace scoreline::detail
