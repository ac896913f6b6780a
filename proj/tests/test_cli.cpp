// End-to-end pipeline through the installed command line tool, at a scale
// small enough for the unit suite.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef PATREC_CLI_PATH
#define PATREC_CLI_PATH ""
#endif

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "geometry.dims = 32 32\n"
    "geometry.num_time_samples = 32\n"
    "geometry.subsample_factor = 2\n"
    "data.n_train = 4\n"
    "data.n_test = 3\n"
    "data.n_transfer = 0\n"
    "dgd.k_max = 2\n"
    "dgd.steps_per_stage = 40\n"
    "dgd.lr = 1e-4\n"
    "unet.epochs = 6\n"
    "unet.lr = 1e-3\n"
    "eval.variational_iterations = 4\n"
    "tv.lambda_count = 2\n";

int run_cli(const std::string& args) {
  std::string cmd = std::string(PATREC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / "patrec_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream cfg(root / "config.txt");
    cfg << kTinyConfig;
  }
  std::string config() const { return (root / "config.txt").string(); }
  std::string path(const std::string& sub) const { return (root / sub).string(); }
};

}  // namespace

TEST_CASE("cli: full pipeline produces the evaluation table") {
  REQUIRE(std::string(PATREC_CLI_PATH) != "");
  Workspace ws;

  REQUIRE(run_cli("--config " + ws.config() + " generate-data --out " + ws.path("data")) == 0);
  CHECK(fs::exists(ws.path("data/train/sample_0003/y.bin")));
  CHECK(fs::exists(ws.path("data/test/sample_0002/x0.meta")));
  CHECK(fs::exists(ws.path("data/geometry.txt")));
  CHECK(fs::exists(ws.path("data/manifest.txt")));

  REQUIRE(run_cli("--config " + ws.config() + " train-dgd --data " + ws.path("data") +
                  " --out " + ws.path("models")) == 0);
  CHECK(fs::exists(ws.path("models/dgd/weights.dgdw")));

  REQUIRE(run_cli("--config " + ws.config() + " train-unet --data " + ws.path("data") +
                  " --out " + ws.path("models")) == 0);
  CHECK(fs::exists(ws.path("models/unet.untw")));

  REQUIRE(run_cli("--config " + ws.config() + " evaluate --data " + ws.path("data") +
                  " --models " + ws.path("models") + " --out " + ws.path("eval")) == 0);
  std::string csv = read_file(ws.path("eval/eval.csv"));
  REQUIRE(!csv.empty());
  CHECK(csv.find("method,sample,err,rel_l2,psnr,ssim,iters,seconds") != std::string::npos);
  // 3 test samples x 5 methods = 15 data rows
  int rows = 0;
  for (char ch : csv)
    if (ch == '\n') ++rows;
  CHECK(rows == 2 + 15);  // comment + header + data

  SUBCASE("reconstruct writes per-iterate snapshots") {
    REQUIRE(run_cli("--config " + ws.config() + " reconstruct --input " +
                    ws.path("data/test/sample_0000") + " --models " + ws.path("models") +
                    " --method dgd --out " + ws.path("rec")) == 0);
    CHECK(fs::exists(ws.path("rec/x_0.pgm")));
    CHECK(fs::exists(ws.path("rec/x_2.pgm")));
    CHECK(fs::exists(ws.path("rec/x_2.bin")));
  }

  SUBCASE("missing inputs exit nonzero") {
    CHECK(run_cli("--config " + ws.config() + " evaluate --data " + ws.path("nope") +
                  " --models " + ws.path("models") + " --out " + ws.path("eval2")) != 0);
  }

  fs::remove_all(ws.root);
}
