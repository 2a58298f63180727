#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

using namespace scoreline;
using testing_support::data;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args, const std::string& stdin_bytes = "") {
  std::istringstream in(stdin_bytes);
  std::ostringstream out, err;
  int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return data(name).string(); }

class TempDir {
public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() / ("scoreline-cli-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                      "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

}  // namespace

TEST(Cli, NoteArrayOfMinimalScore) {
  auto r = run_cli({"notearray", fixture("minimal.musicxml")});
  EXPECT_EQ(r.code, cli::ok) << r.err;
  EXPECT_EQ(r.out,
            "onset_beat,duration_beat,onset_quarter,duration_quarter,onset_div,duration_div,pitch,voice,id\n"
            "0,4,0,4,0,4,60,1,n1\n");
}

TEST(Cli, PianoRollShape) {
  auto r = run_cli({"pianoroll", fixture("seven_quarters.musicxml"), "--time-div", "4", "--unit", "quarter", "--piano-range"});
  EXPECT_EQ(r.code, cli::ok) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "88,28");
}

TEST(Cli, ConvertedKernKeepsItsNoteArray) {
  TempDir dir;
  auto converted = run_cli({"convert", fixture("scale.krn"), dir / "scale.musicxml"});
  ASSERT_EQ(converted.code, cli::ok) << converted.err;
  auto a = run_cli({"notearray", fixture("scale.krn"), "--include-time-signature"});
  auto b = run_cli({"notearray", dir / "scale.musicxml", "--include-time-signature"});
  EXPECT_EQ(a.code, cli::ok);
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({}).code, cli::usage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::usage);
  EXPECT_EQ(run_cli({"pianoroll", fixture("minimal.musicxml")}).code, cli::usage);  // --time-div missing
  EXPECT_EQ(run_cli({"analyze", fixture("minimal.musicxml")}).code, cli::usage);    // no analysis chosen

  auto missing = run_cli({"notearray", fixture("nope.musicxml")});
  EXPECT_EQ(missing.code, cli::parse_failure);
  EXPECT_NE(missing.err.find("nope.musicxml"), std::string::npos);
  EXPECT_EQ(run_cli({"notearray", "-"}, "not a score at all").code, cli::parse_failure);

  std::vector<std::string> chromatic;
  std::string krn = "**kern\n*M4/4\n";
  for (const char* n : {"c", "c#", "d", "d#", "e", "f", "f#", "g", "g#", "a", "a#", "b"}) krn += std::string("4") + n + "\n";
  krn += "*-\n";
  auto degenerate = run_cli({"analyze", "-", "--key"}, krn);
  EXPECT_EQ(degenerate.code, cli::analysis_failure);
  EXPECT_FALSE(degenerate.err.empty());
}

TEST(Cli, StandardInputAndDeterminism) {
  std::string bytes = read_file(data("anacrusis.musicxml"));
  auto from_stdin = run_cli({"notearray", "-"}, bytes);
  auto from_file = run_cli({"notearray", fixture("anacrusis.musicxml")});
  EXPECT_EQ(from_stdin.code, cli::ok) << from_stdin.err;
  EXPECT_EQ(from_stdin.out, from_file.out);
  EXPECT_EQ(run_cli({"notearray", fixture("anacrusis.musicxml")}).out, from_file.out);
  EXPECT_EQ(run_cli({"notearray", "-", "-"}, bytes).code, cli::usage);
}

TEST(Cli, StrictTurnsWarningsIntoFailures) {
  // no time signature: beats fall back to quarters with a warning
  std::string krn = "**kern\n4c\n4d\n*-\n";
  auto lenient = run_cli({"notearray", "-"}, krn);
  EXPECT_EQ(lenient.code, cli::ok);
  EXPECT_NE(lenient.err.find("warning"), std::string::npos);
  EXPECT_NE(run_cli({"--strict", "notearray", "-"}, krn).code, cli::ok);
}

TEST(Cli, SeveralInputsIntoADirectory) {
  TempDir dir;
  auto r = run_cli({"notearray", fixture("minimal.musicxml"), fixture("scale.krn"), "-o", dir / ""});
  ASSERT_EQ(r.code, cli::ok) << r.err;
  for (const char* name : {"minimal.musicxml", "scale.krn"}) {
    std::string stem = std::filesystem::path(name).stem().string();
    EXPECT_EQ(read_file(dir / (stem + ".csv")), run_cli({"notearray", fixture(name)}).out);
  }
}

TEST(Cli, AnalyzeOutputs) {
  auto key = run_cli({"analyze", fixture("scale.krn"), "--key"});
  EXPECT_EQ(key.code, cli::ok) << key.err;
  EXPECT_EQ(key.out, "G\n");

  auto spelling = run_cli({"analyze", fixture("minimal.musicxml"), "--spelling"});
  EXPECT_EQ(spelling.out, "id,pitch,spelling,step,alter,octave\nn1,60,C4,C,0,4\n");

  auto voices = run_cli({"analyze", fixture("two_lines.krn"), "--voices"});
  EXPECT_EQ(voices.code, cli::ok) << voices.err;
  std::istringstream rows(voices.out);
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "id,pitch,voice");
  int n = 0;
  while (std::getline(rows, line)) {
    auto last = line.rfind(','), mid = line.rfind(',', last - 1);
    int pitch = std::stoi(line.substr(mid + 1, last - mid - 1));
    EXPECT_EQ(line.substr(last + 1), pitch >= 71 ? "1" : "2") << line;
    ++n;
  }
  EXPECT_GT(n, 0);
  EXPECT_EQ(run_cli({"analyze", fixture("minimal.musicxml"), "--spelling", "--k-pre", "-1"}).code, cli::usage);
}

TEST(Cli, UnfoldModes) {
  auto list = run_cli({"unfold", fixture("volta.musicxml"), "--list"});
  EXPECT_EQ(list.out, "P1\t[0,4) [8,12){2}\nP1\t[0,4) [4,8){1} [0,4) [8,12){2}\n");
  auto sections = run_cli({"unfold", fixture("volta.musicxml"), "--sections"});
  EXPECT_EQ(sections.out, "P1\t[0,4)\nP1\t[4,8){1}\nP1\t[8,12){2}\n");

  TempDir dir;
  auto maximal = run_cli({"unfold", fixture("volta.musicxml"), "--maximal", "-o", dir / "out.musicxml"});
  ASSERT_EQ(maximal.code, cli::ok) << maximal.err;
  auto arr = run_cli({"notearray", dir / "out.musicxml"});
  EXPECT_EQ(std::count(arr.out.begin(), arr.out.end(), '\n'), 1 + 13);

  std::string ds = std::string(read_file(data("minimal.musicxml")));
  auto pos = ds.find("</measure>");
  ds.insert(pos, "<direction><direction-type><words>D.S. al Fine</words></direction-type></direction>");
  EXPECT_EQ(run_cli({"unfold", "-", "--list"}, ds).code, cli::analysis_failure);
}

TEST(Cli, AlignStatsAndConversion) {
  auto stats = run_cli({"align", fixture("perf.match"), "--stats"});
  EXPECT_EQ(stats.code, cli::ok) << stats.err;
  EXPECT_NE(stats.out.find("match,7"), std::string::npos);
  EXPECT_NE(stats.out.find("insertion,1"), std::string::npos);
  EXPECT_NE(stats.out.find("deletion,1"), std::string::npos);

  TempDir dir;
  auto saved = run_cli({"align", fixture("perf.match"), "--save", dir / "again.match"});
  EXPECT_EQ(saved.code, cli::ok) << saved.err;
  EXPECT_EQ(read_file(dir / "again.match"), read_file(data("perf.match")));

  auto perf = run_cli({"--performance", "notearray", fixture("two_tempo.mid")});
  EXPECT_EQ(perf.code, cli::ok) << perf.err;
  EXPECT_NE(perf.out.find("0.75,0.25,64,80,1,0,n3"), std::string::npos);
  auto roll = run_cli({"--performance", "pianoroll", fixture("two_tempo.mid"), "--time-div", "100"});
  EXPECT_EQ(roll.out.substr(0, roll.out.find('\n')), "128,100");

  auto to_midi = run_cli({"--performance", "convert", fixture("perf.match"), dir / "perf.mid"});
  EXPECT_EQ(to_midi.code, cli::ok) << to_midi.err;
  EXPECT_EQ(run_cli({"--performance", "convert", fixture("two_tempo.mid"), dir / "x.musicxml"}).code, cli::usage);
}
