#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "optvalue/dgp.hpp"
#include "optvalue/io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string cli = OPTVALUE_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("optvalue-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_sample_csv(const fs::path& p, std::size_t n, std::uint64_t seed) {
  const optvalue::Dataset d = optvalue::sample(optvalue::DgpKind::DiscreteExceptional, n, seed);
  std::ofstream out(p);
  optvalue::write_observations(out, d);
}

}  // namespace

TEST_CASE("estimate succeeds on well-formed data") {
  TempDir dir;
  write_sample_csv(dir.path / "data.csv", 400, 5);
  const fs::path log = dir.path / "out.txt";
  const int rc =
      run(cli + " estimate -i " + (dir.path / "data.csv").string() + " > " + log.string());
  CHECK(rc == 0);
  const std::string out = slurp(log);
  CHECK(out.find("estimate:") != std::string::npos);
  CHECK(out.find("lower_bound") != std::string::npos);
}

TEST_CASE("estimate exit codes distinguish usage and data errors") {
  TempDir dir;
  const fs::path bad = dir.path / "bad.csv";
  {
    std::ofstream out(bad);
    out << "w,a,y\n0,1,not-a-number\n";
  }
  CHECK(run(cli + " estimate -i " + bad.string() + " 2> /dev/null") == 2);

  const fs::path noheader = dir.path / "noheader.csv";
  {
    std::ofstream out(noheader);
    out << "0,1,1\n1,0,0\n";
  }
  CHECK(run(cli + " estimate -i " + noheader.string() + " 2> /dev/null") == 2);

  const fs::path empty = dir.path / "empty.csv";
  { std::ofstream out(empty); }
  CHECK(run(cli + " estimate -i " + empty.string() + " 2> /dev/null") == 1);

  write_sample_csv(dir.path / "data.csv", 100, 6);
  // initial block at least as large as the sample: the data is too small
  CHECK(run(cli + " estimate -i " + (dir.path / "data.csv").string() +
            " --ell 100 2> /dev/null") == 2);
  CHECK(run(cli + " --definitely-not-a-flag 2> /dev/null") == 1);
  CHECK(run(cli + " estimate -i " + dir.path.string() + "/missing.csv 2> /dev/null") == 2);
}

TEST_CASE("estimate reads stdin and honors the seed environment default") {
  TempDir dir;
  write_sample_csv(dir.path / "data.csv", 400, 7);
  const fs::path a = dir.path / "a.txt", b = dir.path / "b.txt", c = dir.path / "c.txt";
  const std::string base = "cat " + (dir.path / "data.csv").string() + " | " + cli + " estimate";
  CHECK(run("OPTVALUE_SEED=42 " + base + " > " + a.string()) == 0);
  CHECK(run("OPTVALUE_SEED=42 " + base + " > " + b.string()) == 0);
  CHECK(run(base + " --seed 42 > " + c.string()) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) == slurp(c));
}

TEST_CASE("simulate emits one replicate row per method and summarize round-trips") {
  TempDir dir;
  const int rc = run(cli + " simulate --dgp d-e --n 300 --ell 100 --reps 3" +
                     " --methods online,classical --seed 4 --out " + dir.path.string() +
                     " > /dev/null");
  REQUIRE(rc == 0);
  REQUIRE(fs::exists(dir.path / "summary.csv"));
  REQUIRE(fs::exists(dir.path / "replicates.csv"));
  std::ifstream reps(dir.path / "replicates.csv");
  std::string line;
  std::getline(reps, line);
  CHECK(line == optvalue::kReplicatesHeader);
  std::size_t rows = 0;
  while (std::getline(reps, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 6);  // 3 replicates x 2 methods

  const fs::path again = dir.path / "again";
  fs::create_directories(again);
  REQUIRE(run(cli + " summarize -i " + (dir.path / "replicates.csv").string() + " --out " +
              again.string() + " > /dev/null") == 0);
  CHECK(slurp(again / "summary.csv") == slurp(dir.path / "summary.csv"));
}

TEST_CASE("compare-bootstrap writes the sweep artifacts") {
  TempDir dir;
  const std::string base = cli + " compare-bootstrap --dgp d-e --n 120 --ell 30" +
                           " --m-grid 60,120 --reps 4 --draws 40 --seed 2 ";
  REQUIRE(run(base + "--out " + dir.path.string() + " > /dev/null") == 0);
  CHECK(fs::exists(dir.path / "summary.csv"));
  CHECK(fs::exists(dir.path / "chart.svg"));
  const std::string svg = slurp(dir.path / "chart.svg");
  CHECK(svg.find("<svg") != std::string::npos);

  const fs::path plain = dir.path / "plain";
  fs::create_directories(plain);
  REQUIRE(run(base + "--no-chart --out " + plain.string() + " > /dev/null") == 0);
  CHECK(fs::exists(plain / "summary.csv"));
  CHECK_FALSE(fs::exists(plain / "chart.svg"));
}

TEST_CASE("summarize rejects malformed replicate files") {
  TempDir dir;
  const fs::path bad = dir.path / "bad.csv";
  {
    std::ofstream out(bad);
    out << "not,the,right,header\n";
  }
  CHECK(run(cli + " summarize -i " + bad.string() + " 2> /dev/null") == 2);
}
