#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kHgd = HGD_CLI_PATH;

int invoke(const std::string& args) {
  const std::string cmd = "\"" + kHgd.string() + "\" " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct Workspace {
  fs::path root = fs::temp_directory_path() / ("hgd_cli_" + std::to_string(::getpid()));
  Workspace() {
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "mp.toml") << "[game]\nkind = \"MP\"\n[algorithm]\nnames = [\"PHGD\", \"GD\", \"NHGD\", \"PHGF\"]\n"
                                       "[noise]\nsigma = 0.05\n[run]\nmax_iters = 400\nrecord_every = 20\n"
                                       "seeds = [0, 1, 2]\n";
    std::ofstream(root / "broken.toml") << "[game]\nkind = \"MP\"\nmu = -1.0\n";
  }
  ~Workspace() { fs::remove_all(root); }
};

void check_identical_trees(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CAPTURE(e.path().filename().string());
    REQUIRE(fs::exists(b / e.path().filename()));
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files > 0);
}

}  // namespace

TEST_CASE("run, bench and plot-data are byte-identical across invocations") {
  Workspace w;
  const std::string cfg = (w.root / "mp.toml").string();
  for (const char* out : {"r1", "r2"}) {
    REQUIRE(invoke("--quiet --out-dir " + (w.root / out).string() + " run " + cfg) == 0);
    REQUIRE(invoke("--quiet --out-dir " + (w.root / out).string() + " bench " + cfg) == 0);
    REQUIRE(invoke("--quiet plot-data " + (w.root / out / "MP_PHGD_seed0.csv").string() + " " +
                   (w.root / out / "MP_GD_seed2.csv").string() + " -o " + (w.root / out / "plot.csv").string()) == 0);
  }
  check_identical_trees(w.root / "r1", w.root / "r2");
}

TEST_CASE("seed override") {
  Workspace w;
  REQUIRE(invoke("--quiet --seeds 7 --out-dir " + (w.root / "o").string() + " run " + (w.root / "mp.toml").string()) == 0);
  CHECK(fs::exists(w.root / "o" / "MP_PHGD_seed7.csv"));
  CHECK_FALSE(fs::exists(w.root / "o" / "MP_PHGD_seed0.csv"));
}

TEST_CASE("exit codes") {
  Workspace w;
  CHECK(invoke("run " + (w.root / "broken.toml").string()) == 1);
  CHECK(invoke("run " + (w.root / "absent.toml").string()) == 2);
  CHECK(invoke("plot-data " + (w.root / "absent.csv").string() + " -o " + (w.root / "p.csv").string()) == 2);
  CHECK(invoke("frobnicate") == 1);
  CHECK(invoke("--help") == 0);
}

TEST_CASE("verify passes and catches an injected pseudoinverse fault") {
  CHECK(invoke("verify") == 0);
  CHECK(invoke("verify --inject-fault pinv") == 1);
}
