#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end tests that drive the installed binary; the path arrives as the
// first non-doctest argument (wired up in CMakeLists).
namespace {

namespace fs = std::filesystem;

std::string g_binary;

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  fs::path tmp = fs::temp_directory_path() / "aqua_cli_out.txt";
  std::string cmd = g_binary + " " + args + " > " + tmp.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(tmp);
  std::ostringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "aqua_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// tiny dataset + short training shared across cases
const fs::path& shared_data() {
  static fs::path data = [] {
    fs::path d = work_dir() / "data";
    RunResult r = run("synth --seed 7 --width 16 --height 12 --train-views 4 "
                      "--test-views 2 --out " + d.string());
    REQUIRE(r.code == 0);
    return d;
  }();
  return data;
}

const fs::path& shared_run() {
  static fs::path out = [] {
    fs::path d = work_dir() / "run";
    fs::path cfg = work_dir() / "train.json";
    std::ofstream(cfg) << R"({"rays_per_batch": 16, "samples_per_ray": 8,)"
                       << R"( "histogram_bins": 8, "sinkhorn_max_iters": 10})";
    RunResult r = run("train --config " + cfg.string() + " --data " +
                      shared_data().string() + " --seed 7 --iters 3 --out " + d.string());
    REQUIRE(r.code == 0);
    return d;
  }();
  return out;
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("train").code == 1);            // missing dataset
  CHECK(run("render --mode sideways").code == 1);
}

TEST_CASE("missing inputs are runtime failures, exit code 2") {
  RunResult r = run("train --data /nonexistent/dataset --out " +
                    (work_dir() / "x").string());
  CHECK(r.code == 2);
  r = run("render --data " + shared_data().string() +
          " --ckpt /nonexistent.aqfd --out " + (work_dir() / "y").string());
  CHECK(r.code == 2);
}

TEST_CASE("synth is deterministic: same seed, identical bytes") {
  fs::path a = work_dir() / "synth_a", b = work_dir() / "synth_b";
  std::string flags = " --seed 11 --width 16 --height 12 --train-views 4 "
                      "--test-views 1 --out ";
  REQUIRE(run("synth" + flags + a.string()).code == 0);
  REQUIRE(run("synth" + flags + b.string()).code == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files > 4 * 4);  // manifest + 4 artifacts per view
}

TEST_CASE("synth honors the paper water preset in the manifest") {
  std::string m = slurp(shared_data() / "manifest.json");
  CHECK(m.find("0.22") != std::string::npos);
  CHECK(m.find("0.013") != std::string::npos);
  CHECK(m.find("0.04") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected by name") {
  fs::path cfg = work_dir() / "bad.json";
  std::ofstream(cfg) << R"({"iters": 3, "sinkhorn_iters": 10})";
  RunResult r = run("train --config " + cfg.string() + " --data " +
                    shared_data().string() + " --out " + (work_dir() / "z").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("sinkhorn_iters") != std::string::npos);
}

TEST_CASE("training writes a log and checkpoints; reruns are bit-identical") {
  REQUIRE(fs::exists(shared_run() / "train_log.txt"));
  REQUIRE(fs::exists(shared_run() / "ckpt_final.aqfd"));

  fs::path again = work_dir() / "run_again";
  fs::path cfg = work_dir() / "train.json";
  RunResult r = run("train --config " + cfg.string() + " --data " +
                    shared_data().string() + " --seed 7 --iters 3 --out " +
                    again.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(shared_run() / "train_log.txt") == slurp(again / "train_log.txt"));
  CHECK(slurp(shared_run() / "ckpt_final.aqfd") == slurp(again / "ckpt_final.aqfd"));
}

TEST_CASE("command line flags override config file values") {
  fs::path cfg = work_dir() / "seed.json";
  std::ofstream(cfg) << R"({"seed": 1, "iters": 2, "rays_per_batch": 16,)"
                     << R"( "samples_per_ray": 8, "histogram_bins": 8,)"
                     << R"( "sinkhorn_max_iters": 10})";
  fs::path o1 = work_dir() / "ov1", o2 = work_dir() / "ov2";
  REQUIRE(run("train --config " + cfg.string() + " --data " + shared_data().string() +
              " --seed 5 --out " + o1.string()).code == 0);
  REQUIRE(run("train --config " + cfg.string() + " --data " + shared_data().string() +
              " --seed 5 --out " + o2.string()).code == 0);
  std::string log = slurp(o1 / "train_log.txt");
  CHECK(log.find("seed=5") != std::string::npos);  // flag beat the file
  CHECK(log == slurp(o2 / "train_log.txt"));
}

TEST_CASE("render produces images in both modes, idempotently") {
  fs::path r1 = work_dir() / "render1", r2 = work_dir() / "render2";
  std::string base = "render --data " + shared_data().string() + " --ckpt " +
                     (shared_run() / "ckpt_final.aqfd").string() + " --split test ";
  REQUIRE(run(base + "--mode restored --out " + r1.string()).code == 0);
  REQUIRE(run(base + "--mode restored --out " + r2.string()).code == 0);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(r1))
    if (e.path().extension() == ".png") {
      ++pngs;
      CHECK(slurp(e.path()) == slurp(r2 / e.path().filename()));
    }
  CHECK(pngs == 2);  // one per test view

  fs::path rd = work_dir() / "render_deg";
  REQUIRE(run(base + "--mode degraded --out " + rd.string()).code == 0);
  bool differs = false;
  for (const auto& e : fs::directory_iterator(rd))
    if (e.path().extension() == ".png")
      differs = differs || slurp(e.path()) != slurp(r1 / e.path().filename());
  CHECK(differs);
}

TEST_CASE("eval and consistency write reports") {
  fs::path ev = work_dir() / "eval";
  RunResult r = run("eval --data " + shared_data().string() + " --ckpt " +
                    (shared_run() / "ckpt_final.aqfd").string() + " --out " + ev.string());
  REQUIRE(r.code == 0);
  std::string txt = slurp(ev / "eval.txt");
  CHECK(txt.find("psnr") != std::string::npos);
  CHECK(txt.find("test-split mean") != std::string::npos);
  CHECK(fs::exists(ev / "eval.json"));

  // consistency masks are sparse; tiny views leave SSIM without usable
  // windows, so give it a larger dataset (the field is resolution-agnostic)
  fs::path big = work_dir() / "data_big";
  REQUIRE(run("synth --seed 7 --width 48 --height 36 --train-views 4 "
              "--test-views 2 --out " + big.string()).code == 0);
  fs::path cs = work_dir() / "cons";
  r = run("consistency --data " + big.string() + " --ckpt " +
          (shared_run() / "ckpt_final.aqfd").string() + " --mode restored --out " +
          cs.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(cs / "consistency.txt").find("mean masked psnr") != std::string::npos);
  CHECK(fs::exists(cs / "consistency.json"));
}

TEST_CASE("the no-smoothing ablation flag runs end to end") {
  fs::path cfg = work_dir() / "train.json";
  fs::path out = work_dir() / "run_nosmooth";
  RunResult r = run("train --config " + cfg.string() + " --data " +
                    shared_data().string() + " --seed 7 --iters 2 --no-smoothing "
                    "--out " + out.string());
  CHECK(r.code == 0);
  CHECK(slurp(out / "train_log.txt").find("smoothing=0") != std::string::npos);
}

int main(int argc, char** argv) {
  doctest::Context ctx;
  ctx.applyCommandLine(argc, argv);
  // last argument that is not a doctest option: the binary under test
  for (int i = argc - 1; i >= 1; --i) {
    std::string a = argv[i];
    if (!a.empty() && a[0] != '-') {
      g_binary = a;
      break;
    }
  }
  if (g_binary.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-aquafield-binary>\n");
    return 2;
  }
  return ctx.run();
}
