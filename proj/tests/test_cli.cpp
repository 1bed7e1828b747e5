#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stgnrde/config.hpp"
#include "stgnrde/error.hpp"

using namespace stgnrde;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "stgnrde_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(STGNRDE_CLI) + " " + args + " > " + (kRoot / "last.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

std::string header(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

// Small but complete training setup shared by the train/eval/predict cases.
fs::path tiny_config() {
  fs::create_directories(kRoot);
  if (!fs::exists(kRoot / "data" / "values.csv")) {
    REQUIRE(run("synth --nodes 3 --timesteps 70 --seed 4 --out " + (kRoot / "data").string()) == 0);
  }
  const fs::path cfg = kRoot / "tiny.cfg";
  std::ofstream(cfg) << "# tiny run\n"
                        "data = data/values.csv\n"
                        "adjacency = data/adjacency.csv\n"
                        "input_len = 6\nhorizon = 3\n"
                        "hidden = 4  # both state sizes\n"
                        "k = 1\nembed_dim = 2\nsig_depth = 2\nsubpath = 2\n"
                        "method = euler\nsteps_per_window = 1\n"
                        "epochs = 3\nbatch_size = 16\nlr = 1e-2\nweight_decay = 0\npatience = 5\nseed = 3\n";
  return cfg;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config text parsing") {
  RunConfig c = parse_config("# comment\n data = x.csv \nhidden = 16\nratios = 7:2:1\nvariant = spatial # trailing\n");
  CHECK(c.data.values == "x.csv");
  CHECK(c.model.dim_h == 16);
  CHECK(c.model.dim_z == 16);
  CHECK(c.split.ratios[0] == 7.0);
  CHECK(c.model.variant == Variant::spatial_only);
  CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just a line\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("ratios = 1:2\n"), ConfigError);
}

TEST_CASE("resolved config text round-trips exactly") {
  RunConfig c = parse_config("data = /d/v.csv\nlr = 0.1\nweight_decay = 3.3e-4\ndrop_rate = 0.3\ngnn = attention\n");
  const std::string text = to_text(c);
  CHECK(to_text(parse_config(text)) == text);
  RunConfig back = parse_config(text);
  CHECK(back.train.lr == 0.1);
  CHECK(back.train.weight_decay == 3.3e-4);
  CHECK(back.model.gnn == GnnKind::attention);
}

TEST_CASE("bundled presets load and carry the documented settings") {
  for (const char* name : {"pemsd3", "pemsd4", "pemsd7", "pemsd8", "pemsd7m", "pemsd7l", "synth"}) {
    RunConfig c = load_config(preset_dir() / (std::string(name) + ".cfg"), {}, false);
    CHECK(c.model.subpath == 2);
  }
  RunConfig p4 = load_config(preset_dir() / "pemsd4.cfg", {}, false);
  CHECK(p4.model.depth_k == 2);
  CHECK(p4.model.embed_dim == 8);
  CHECK(p4.model.sig_depth == 2);
  CHECK(p4.model.dim_h == 64);
  CHECK(p4.model.dim_z == 64);
  CHECK(p4.train.lr == 1e-3);
  CHECK(p4.train.weight_decay == 1e-3);
}

TEST_CASE("synth command") {
  fs::create_directories(kRoot);
  CHECK(run("synth --nodes 8 --timesteps 600 --seed 1 --out " + (kRoot / "s1").string()) == 0);
  CHECK(fs::exists(kRoot / "s1" / "values.csv"));
  CHECK(fs::exists(kRoot / "s1" / "adjacency.csv"));
  CHECK(run("synth --nodes 8 --timesteps 600 --seed 1 --out " + (kRoot / "s2").string()) == 0);
  CHECK(slurp(kRoot / "s1" / "values.csv") == slurp(kRoot / "s2" / "values.csv"));
  CHECK(line_count(kRoot / "s1" / "values.csv") == 600);
  CHECK(run("synth --nodes 1 --out " + (kRoot / "s3").string()) == 1);
  CHECK(run("synth --bogus 3") == 1);
}

TEST_CASE("logsig command") {
  fs::create_directories(kRoot);
  const fs::path data = kRoot / "ls.csv";
  std::ofstream(data) << "a,b\n1,5\n2,5\n4,5\n7,5\n11,5\n";
  CHECK(run("logsig --data " + data.string() + " --depth 1 --subpath 2 --input-len 5 --out " +
            (kRoot / "d1.csv").string()) == 0);
  CHECK(header(kRoot / "d1.csv") == "window,node,coord_0,coord_1");
  CHECK(line_count(kRoot / "d1.csv") == 1 + 2 * 2);
  CHECK(run("logsig --data " + data.string() + " --depth 2 --subpath 2 --input-len 5 --out " +
            (kRoot / "d2.csv").string()) == 0);
  CHECK(header(kRoot / "d2.csv") == "window,node,coord_0,coord_1,coord_2");
  // node 1 is constant: its data-channel coordinates vanish
  std::ifstream in(kRoot / "d2.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string w, n, c0, c1, c2;
    std::getline(ss, w, ',');
    std::getline(ss, n, ',');
    std::getline(ss, c0, ',');
    std::getline(ss, c1, ',');
    std::getline(ss, c2, ',');
    if (n == "1") {
      CHECK(std::fabs(std::stod(c0)) < 1e-12);
      CHECK(std::fabs(std::stod(c2)) < 1e-12);
    }
  }
  CHECK(run("logsig --data " + data.string() + " --depth 0 --out " + (kRoot / "d0.csv").string()) == 1);
}

TEST_CASE("train, eval and predict") {
  const fs::path cfg = tiny_config();
  const fs::path out = kRoot / "run";
  fs::remove_all(out);
  REQUIRE(run("train --quiet --config " + cfg.string() + " --out " + out.string()) == 0);
  for (const char* f : {"checkpoint.bin", "history.csv", "config.resolved", "metrics.json"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK(line_count(out / "history.csv") == 4);

  auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  const fs::path data = kRoot / "data" / "values.csv";
  REQUIRE(run("eval --checkpoint " + (out / "checkpoint.bin").string() + " --data " + data.string() + " --out " +
              (kRoot / "eval.json").string()) == 0);
  auto ev = nlohmann::json::parse(slurp(kRoot / "eval.json"));
  CHECK(ev.at("mae") == metrics.at("mae"));
  CHECK(ev.at("rmse") == metrics.at("rmse"));
  CHECK(ev.at("val") == metrics.at("val"));
  CHECK(ev.at("per_horizon") == metrics.at("per_horizon"));

  REQUIRE(run("predict --checkpoint " + (out / "checkpoint.bin").string() + " --data " + data.string() +
              " --out " + (kRoot / "pred.csv").string()) == 0);
  CHECK(header(kRoot / "pred.csv") == "window,node,horizon,value");
  const std::size_t windows = 70 - 6 - 3 + 1;
  CHECK(line_count(kRoot / "pred.csv") == 1 + windows * 3 * 3);

  // The resolved config alone reproduces the run.
  const fs::path again = kRoot / "again";
  fs::remove_all(again);
  REQUIRE(run("train --quiet --config " + (out / "config.resolved").string() + " --out " + again.string()) == 0);
  CHECK(slurp(again / "history.csv") == slurp(out / "history.csv"));

  fs::copy_file(out / "checkpoint.bin", kRoot / "bad.bin", fs::copy_options::overwrite_existing);
  {
    std::fstream f(kRoot / "bad.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOTMAGIC", 8);
  }
  CHECK(run("eval --checkpoint " + (kRoot / "bad.bin").string() + " --data " + data.string()) == 2);
  CHECK(run("predict --checkpoint " + (kRoot / "bad.bin").string() + " --data " + data.string() + " --out " +
            (kRoot / "x.csv").string()) == 2);
}

TEST_CASE("train variants and cross-validation") {
  const fs::path cfg = tiny_config();
  const fs::path sp = kRoot / "spatial";
  fs::remove_all(sp);
  CHECK(run("train --quiet --config " + cfg.string() + " --variant spatial --drop-rate 0.2 --out " + sp.string()) == 0);
  CHECK(slurp(sp / "config.resolved").find("variant = spatial") != std::string::npos);
  CHECK(slurp(sp / "config.resolved").find("drop_rate = 0.20000000000000001") != std::string::npos);

  const fs::path cv = kRoot / "cv";
  fs::remove_all(cv);
  CHECK(run("train --quiet --config " + cfg.string() + " --cv blocked --epochs 1 --out " + cv.string()) == 0);
  auto m = nlohmann::json::parse(slurp(cv / "metrics.json"));
  CHECK(m.at("folds").size() == 4);
  CHECK(m.at("mean").contains("mae"));
  CHECK(m.at("std").contains("mae"));
  for (int k = 0; k < 4; ++k) CHECK(fs::exists(cv / ("fold_" + std::to_string(k)) / "checkpoint.bin"));
}

TEST_CASE("configuration errors stop before any work") {
  const fs::path cfg = tiny_config();
  const fs::path out = kRoot / "never";
  fs::remove_all(out);
  CHECK(run("train --quiet --config " + cfg.string() + " --set colour=red --out " + out.string()) == 1);
  CHECK(run("train --quiet --config " + cfg.string() + " --variant sideways --out " + out.string()) == 1);
  CHECK(run("train --quiet --config " + cfg.string() + " --drop-rate 1.5 --out " + out.string()) == 1);
  CHECK(run("train --quiet --config " + (kRoot / "nope.cfg").string()) == 1);
  CHECK(run("train --quiet --config " + cfg.string() + " --data " + (kRoot / "nope.csv").string() + " --out " +
            out.string()) == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("verify command") {
  fs::create_directories(kRoot);
  CHECK(run("verify --suite solver") == 0);
  const std::string log = slurp(kRoot / "last.log");
  CHECK(log.find("euler order") != std::string::npos);
  CHECK(log.find("rk4 order") != std::string::npos);
  CHECK(run("verify --suite logsig") == 0);
  CHECK(run("verify --suite grad") == 0);
  CHECK(slurp(kRoot / "last.log").find("max rel err") != std::string::npos);
  CHECK(run("verify --suite nothing") == 1);
}

}
