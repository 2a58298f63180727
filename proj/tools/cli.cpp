#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>

#include "scoreline/scoreline.hpp"

namespace scoreline::cli {

namespace {

namespace fs = std::filesystem;

enum class Format { musicxml, kern, mei, midi, match, corresp, csv, pgm, unknown };

const std::map<std::string, Format> kFormatNames{
    {"musicxml", Format::musicxml}, {"xml", Format::musicxml}, {"krn", Format::kern},   {"kern", Format::kern},
    {"mei", Format::mei},           {"mid", Format::midi},     {"midi", Format::midi},  {"match", Format::match},
    {"corresp", Format::corresp},   {"csv", Format::csv},      {"pgm", Format::pgm},
};

Format format_of(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  if (ext.empty()) return Format::unknown;
  ext.erase(0, 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == "txt" && path.find("corresp") != std::string::npos) return Format::corresp;
  auto it = kFormatNames.find(ext);
  return it == kFormatNames.end() ? Format::unknown : it->second;
}

/// Bad flag combinations found after CLI11 accepted the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::parse:
    case ErrorCategory::format_detection:
    case ErrorCategory::io:
      return parse_failure;
    default:
      return analysis_failure;
  }
}

struct Settings {
  bool strict = false;
  bool performance = false;
};

/// Per-input state; workers fill it, the main thread reports in input order.
struct Job {
  std::string path;
  std::string output;
  std::vector<std::string> warnings;
  int code = ok;
  std::string error;
};

class Context {
public:
  Context(Job& job, const Settings& settings) : job_(job), settings_(settings) {}

  void warn(const std::vector<Warning>& warnings, ErrorCategory escalate) {
    for (const auto& w : warnings) {
      std::string text = w.location.empty() ? w.message : w.location + ": " + w.message;
      if (settings_.strict) throw Error(escalate, text);
      job_.warnings.push_back(job_.path + ": warning: " + text);
    }
  }
  const Settings& settings() const { return settings_; }

private:
  Job& job_;
  const Settings& settings_;
};

bool looks_like_match(std::string_view bytes) {
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    std::string_view line = bytes.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '%') continue;
    line.remove_prefix(first);
    for (std::string_view p : {"info(", "snote(", "insertion-", "ornament(", "sustain("})
      if (line.starts_with(p)) return true;
    return false;
  }
  return false;
}

struct Loaded {
  std::optional<ScoreDocument> score;
  std::optional<PerformedPart> performance;
};

Loaded load(const std::string& bytes, Context& ctx) {
  Loaded result;
  if (looks_like_match(bytes)) {
    MatchFile m = load_match(bytes);
    if (ctx.settings().performance) {
      result.performance = std::move(m.performance);
    } else if (m.score) {
      ctx.warn(m.score->warnings, ErrorCategory::parse);
      result.score = std::move(m.score);
    } else {
      throw Error(ErrorCategory::missing_context, "match file carries no time signature to rebuild a score; use --performance");
    }
    return result;
  }
  if (ctx.settings().performance) {
    if (!bytes.starts_with("MThd"))
      throw Error(ErrorCategory::format_detection, "--performance needs a MIDI or match file");
    auto midi = load_performance_midi(bytes);
    ctx.warn(midi.warnings, ErrorCategory::parse);
    result.performance = std::move(midi.performance);
    return result;
  }
  LoadOptions options;
  options.strict = ctx.settings().strict;
  result.score = load_score(bytes, options);
  ctx.warn(result.score->warnings, ErrorCategory::parse);
  return result;
}

using Worker = std::function<std::string(const std::string& bytes, Context& ctx)>;

std::string read_stdin(std::istream& in) { return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}; }

/// Runs the worker on every input in parallel, then reports in input order.
/// One input writes to `target` (a file, or stdout for empty or `-`); several
/// inputs with a target write `<target>/<stem>.<ext>`.
int run_jobs(const std::vector<std::string>& inputs, const std::string& target, const std::string& ext,
             const Settings& settings, const Worker& worker, std::istream& in, std::ostream& out, std::ostream& err) {
  std::optional<std::string> stdin_bytes;
  if (std::count(inputs.begin(), inputs.end(), "-") > 1) throw UsageError("standard input can be read only once");
  if (std::find(inputs.begin(), inputs.end(), "-") != inputs.end()) stdin_bytes = read_stdin(in);
  const bool to_dir = inputs.size() > 1 && !target.empty() && target != "-";
  if (to_dir) fs::create_directories(target);

  std::vector<Job> jobs(inputs.size());
  std::vector<std::future<void>> running;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    jobs[i].path = inputs[i];
    running.push_back(std::async(std::launch::async, [&, i] {
      Job& job = jobs[i];
      try {
        Context ctx(job, settings);
        std::string bytes = job.path == "-" ? *stdin_bytes : read_file(job.path);
        job.output = worker(bytes, ctx);
        std::string dest = to_dir ? (fs::path(target) / fs::path(job.path).stem()).string() + ext : target;
        if (!dest.empty() && dest != "-") write_file_atomic(dest, job.output);
      } catch (const Error& e) {
        job.code = exit_code(e.category());
        std::string what = e.what();
        job.error = what.starts_with(job.path) ? what : job.path + ": " + what;
      } catch (const UsageError& e) {
        job.code = usage;
        job.error = e.what();
      } catch (const std::exception& e) {
        job.code = analysis_failure;
        job.error = job.path + ": " + e.what();
      }
    }));
  }
  for (auto& f : running) f.get();

  int code = ok;
  for (const auto& job : jobs) {
    for (const auto& w : job.warnings) err << w << '\n';
    if (job.code != ok) {
      err << "error: " << job.error << '\n';
      code = std::max(code, job.code);
      continue;
    }
    if (target.empty() || target == "-") out << job.output;
  }
  return code;
}

const ScoreDocument& need_score(const Loaded& l) {
  if (!l.score) throw UsageError("this command needs a score input");
  return *l.score;
}

std::string number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string spelled(const SpelledPitch& p) {
  std::string s(1, p.step);
  for (int a = p.alter; a > 0; --a) s += '#';
  for (int a = p.alter; a < 0; ++a) s += 'b';
  return s + std::to_string(p.octave);
}

PartGroup rebuild(const PartGroup& group, const std::function<Part(const Part&)>& f) {
  PartGroup out(group.id(), group.name());
  for (const auto& child : group.children()) {
    if (const auto* p = std::get_if<Part>(&child.node))
      out.add(f(*p));
    else
      out.add(rebuild(std::get<PartGroup>(child.node), f));
  }
  return out;
}

std::string encode_score(const ScoreDocument& doc, Format f) {
  switch (f) {
    case Format::musicxml:
      return save_musicxml(doc);
    case Format::midi:
      return save_midi(doc);
    default:
      throw UsageError("scores can be written as musicxml or midi only");
  }
}

Format output_format(const std::string& to, const std::string& path, Format fallback) {
  if (!to.empty()) {
    auto it = kFormatNames.find(to);
    if (it == kFormatNames.end()) throw UsageError("unknown format '" + to + "'");
    return it->second;
  }
  Format f = path.empty() || path == "-" ? fallback : format_of(path);
  if (f == Format::unknown) throw UsageError("cannot tell the output format of '" + path + "'; use --to");
  return f;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Symbolic music parsing, features and analysis", "scoreline"};
  app.require_subcommand(1);
  app.fallthrough();
  Settings settings;
  app.add_flag("--strict", settings.strict, "Turn warnings into errors");
  app.add_flag("--performance", settings.performance, "Read MIDI or match input as a performance");

  const std::map<std::string, BeatMode> beat_modes{{"slow", BeatMode::slow}, {"fast", BeatMode::fast}};

  // convert
  std::string conv_in, conv_out, conv_to;
  auto* convert = app.add_subcommand("convert", "Convert between formats (by extension)");
  convert->add_option("input", conv_in)->required();
  convert->add_option("output", conv_out)->required();
  convert->add_option("--to", conv_to, "Output format, overriding the extension");

  // notearray
  std::vector<std::string> na_in;
  std::string na_out;
  bool na_ts = false, na_unmerged = false;
  BeatMode na_beat = BeatMode::slow;
  auto* notearray = app.add_subcommand("notearray", "Note array as CSV");
  notearray->add_option("inputs", na_in)->required();
  notearray->add_option("-o,--output", na_out, "Output file, or directory for several inputs");
  notearray->add_flag("--include-time-signature", na_ts);
  notearray->add_flag("--unmerged-ties", na_unmerged, "Keep tied notes as separate rows");
  notearray->add_option("--beat-mode", na_beat)->transform(CLI::CheckedTransformer(beat_modes));

  // pianoroll
  std::vector<std::string> pr_in;
  std::string pr_out, pr_format;
  PianoRollOptions pr;
  bool pr_onset = false;
  const std::map<std::string, RollUnit> units{
      {"div", RollUnit::div}, {"quarter", RollUnit::quarter}, {"beat", RollUnit::beat}, {"sec", RollUnit::sec}};
  auto* pianoroll = app.add_subcommand("pianoroll", "Sparse piano roll as CSV or PGM");
  pianoroll->add_option("inputs", pr_in)->required();
  pianoroll->add_option("--time-div", pr.time_div)->required()->check(CLI::PositiveNumber);
  auto* unit_opt = pianoroll->add_option("--unit", pr.unit)->transform(CLI::CheckedTransformer(units));
  pianoroll->add_flag("--piano-range", pr.piano_range);
  pianoroll->add_flag("--onset-only", pr_onset, "Mark only the first frame of each note");
  pianoroll->add_option("--beat-mode", pr.beat_mode)->transform(CLI::CheckedTransformer(beat_modes));
  pianoroll->add_option("--format", pr_format)->check(CLI::IsMember({"csv", "pgm"}));
  pianoroll->add_option("-o,--output", pr_out);

  // analyze
  std::string an_in;
  bool an_key = false, an_spelling = false, an_voices = false;
  SpellingWindow window;
  auto* analyze = app.add_subcommand("analyze", "Key, pitch spelling or voice estimation");
  analyze->add_option("input", an_in)->required();
  auto* which = analyze->add_option_group("analysis");
  which->add_flag("--key", an_key);
  which->add_flag("--spelling", an_spelling);
  which->add_flag("--voices", an_voices);
  which->require_option(1);
  analyze->add_option("--k-pre", window.k_pre)->check(CLI::NonNegativeNumber);
  analyze->add_option("--k-post", window.k_post)->check(CLI::NonNegativeNumber);

  // unfold
  std::string uf_in, uf_out, uf_to;
  bool uf_list = false, uf_maximal = false, uf_sections = false;
  UnfoldOptions uf;
  auto* unfold = app.add_subcommand("unfold", "Enumerate or apply repeat unfoldings");
  unfold->add_option("input", uf_in)->required();
  auto* mode = unfold->add_option_group("mode");
  mode->add_flag("--list", uf_list);
  mode->add_flag("--maximal", uf_maximal);
  mode->add_flag("--sections", uf_sections, "List the playout sections");
  mode->require_option(0, 1);
  unfold->add_option("-o,--output", uf_out);
  unfold->add_option("--to", uf_to);
  unfold->add_flag("--repeats-after-jump", uf.repeats_after_jump);

  // align
  std::string al_in, al_save;
  bool al_stats = false;
  auto* align = app.add_subcommand("align", "Inspect a match or corresp alignment");
  align->add_option("input", al_in)->required();
  align->add_flag("--stats", al_stats, "Pair label counts and match rate (default)");
  align->add_option("--save", al_save, "Re-emit a match file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? ok : usage;
  }

  try {
    if (convert->parsed()) {
      Format f = output_format(conv_to, conv_out, Format::unknown);
      Worker w = [&](const std::string& bytes, Context& ctx) {
        Loaded l = load(bytes, ctx);
        if (l.performance) {
          if (f != Format::midi) throw UsageError("performances can be written as midi only");
          return save_midi(*l.performance);
        }
        return encode_score(*l.score, f);
      };
      return run_jobs({conv_in}, conv_out, "", settings, w, in, out, err);
    }

    if (notearray->parsed()) {
      NoteArrayOptions options;
      options.include_time_signature = na_ts;
      options.merge_ties = !na_unmerged;
      options.beat_mode = na_beat;
      Worker w = [&](const std::string& bytes, Context& ctx) {
        Loaded l = load(bytes, ctx);
        NoteArray a = l.performance ? note_array(*l.performance) : note_array(*l.score, options);
        ctx.warn(a.warnings, ErrorCategory::feature);
        return to_csv(a);
      };
      return run_jobs(na_in, na_out, ".csv", settings, w, in, out, err);
    }

    if (pianoroll->parsed()) {
      if (pr_format.empty()) pr_format = format_of(pr_out) == Format::pgm ? "pgm" : "csv";
      if (pr_onset) pr.fill = RollFill::onset_only;
      if (settings.performance && unit_opt->count() == 0) pr.unit = RollUnit::sec;
      Worker w = [&](const std::string& bytes, Context& ctx) {
        Loaded l = load(bytes, ctx);
        PianoRoll roll = l.performance ? compute_pianoroll(*l.performance, pr) : compute_pianoroll(*l.score, pr);
        ctx.warn(roll.warnings, ErrorCategory::feature);
        std::ostringstream s;
        if (pr_format == "pgm")
          write_pgm(roll, s);
        else
          write_csv(roll, s);
        return s.str();
      };
      return run_jobs(pr_in, pr_out, "." + pr_format, settings, w, in, out, err);
    }

    if (analyze->parsed()) {
      Worker w = [&](const std::string& bytes, Context& ctx) {
        Loaded l = load(bytes, ctx);
        NoteArray a = l.performance ? note_array(*l.performance) : note_array(*l.score);
        ctx.warn(a.warnings, ErrorCategory::feature);
        std::ostringstream s;
        if (an_key) {
          s << estimate_key(a) << '\n';
        } else if (an_spelling) {
          auto spelling = estimate_spelling(a, window);
          s << "id,pitch,spelling,step,alter,octave\n";
          for (std::size_t i = 0; i < a.size(); ++i) {
            const auto& p = spelling[i];
            s << a.records[i].id << ',' << a.records[i].pitch << ',' << spelled(p) << ',' << p.step << ',' << p.alter
              << ',' << p.octave << '\n';
          }
        } else {
          auto voices = estimate_voices(a);
          s << "id,pitch,voice\n";
          for (std::size_t i = 0; i < a.size(); ++i)
            s << a.records[i].id << ',' << a.records[i].pitch << ',' << voices[i] << '\n';
        }
        return s.str();
      };
      return run_jobs({an_in}, "", "", settings, w, in, out, err);
    }

    if (unfold->parsed()) {
      if (!uf_maximal && (!uf_out.empty() || !uf_to.empty())) throw UsageError("-o and --to apply to --maximal only");
      std::optional<Format> f;
      if (uf_maximal) f = output_format(uf_to, uf_out, Format::musicxml);
      Worker w = [&](const std::string& bytes, Context& ctx) {
        Loaded l = load(bytes, ctx);
        const ScoreDocument& doc = need_score(l);
        if (f) {
          ScoreDocument unfolded;
          unfolded.source_format = doc.source_format;
          unfolded.root = rebuild(doc.root, [&](const Part& p) { return unfold_maximal(p, uf); });
          return encode_score(unfolded, *f);
        }
        std::ostringstream s;
        for (const Part* p : doc.parts()) {
          if (uf_sections) {
            for (const auto& seg : playout_sections(*p)) s << p->id() << '\t' << describe({seg}) << '\n';
            continue;
          }
          for (const auto& u : enumerate_unfoldings(*p, uf)) s << p->id() << '\t' << describe(u) << '\n';
        }
        return s.str();
      };
      return run_jobs({uf_in}, f ? uf_out : "", "", settings, w, in, out, err);
    }

    if (align->parsed()) {
      (void)al_stats;
      Worker w = [&](const std::string& bytes, Context&) {
        Alignment alignment;
        if (looks_like_match(bytes)) {
          MatchFile m = load_match(bytes);
          if (!al_save.empty()) write_file_atomic(al_save, save_match(m));
          alignment = std::move(m.alignment);
        } else {
          if (!al_save.empty()) throw UsageError("--save needs a match file");
          alignment = load_corresp(bytes);
        }
        std::ostringstream s;
        s << "label,count\n";
        std::size_t total = 0;
        for (auto label : {AlignmentLabel::match, AlignmentLabel::insertion, AlignmentLabel::deletion,
                           AlignmentLabel::ornament}) {
          std::size_t n = alignment.count(label);
          total += n;
          s << to_string(label) << ',' << n << '\n';
        }
        double rate = total ? static_cast<double>(alignment.count(AlignmentLabel::match)) / static_cast<double>(total) : 0;
        s << "match_rate," << number(rate) << '\n';
        return s.str();
      };
      return run_jobs({al_in}, "", "", settings, w, in, out, err);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return usage;
  }
  return usage;
}

}  // namespace scoreline::cli
