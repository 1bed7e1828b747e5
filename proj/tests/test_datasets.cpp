#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "stgnrde/error.hpp"
#include "stgnrde/datasets.hpp"
#include "test_util.hpp"

using namespace stgnrde;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("datasets") {

TEST_CASE("load a 3x2 zero CSV, with and without header") {
  TempDir dir("stgnrde_ds_load");
  write(dir.path / "a.csv", "0,0\n0,0\n0,0\n");
  Dataset d = load_values(dir.path / "a.csv", 1);
  CHECK(d.nodes == 2);
  CHECK(d.timesteps == 3);
  for (double x : d.values) CHECK(x == 0.0);
  write(dir.path / "b.csv", "s0,s1\n1,2\n3,4\n");
  Dataset h = load_values(dir.path / "b.csv", 1);
  CHECK(h.timesteps == 2);
  CHECK(h.at(1, 1, 0) == 4.0);
}

TEST_CASE("channel-blocked columns") {
  TempDir dir("stgnrde_ds_blocked");
  // 2 nodes, 2 channels: n0c0, n1c0, n0c1, n1c1
  write(dir.path / "a.csv", "1,2,10,20\n3,4,30,40\n");
  Dataset d = load_values(dir.path / "a.csv", 2);
  CHECK(d.nodes == 2);
  CHECK(d.at(0, 0, 1) == 10.0);
  CHECK(d.at(1, 1, 0) == 4.0);
  CHECK(d.at(1, 1, 1) == 40.0);
  CHECK_THROWS_AS(load_values(dir.path / "a.csv", 3), DataError);
}

TEST_CASE("parse errors carry the row number") {
  TempDir dir("stgnrde_ds_err");
  write(dir.path / "ragged.csv", "1,2\n3,4\n5\n");
  try {
    load_values(dir.path / "ragged.csv", 1);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  write(dir.path / "text.csv", "1,2\n3,x\n");
  try {
    load_values(dir.path / "text.csv", 1);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_values(dir.path / "missing.csv", 1), DataError);
}

TEST_CASE("save then load is bit-identical") {
  TempDir dir("stgnrde_ds_rt");
  Dataset d;
  d.nodes = 3;
  d.timesteps = 5;
  d.channels = 2;
  d.values = testutil::random_values(30, 4, -1e6, 1e6);
  d.values[0] = 1.0 / 3.0;
  d.values[1] = 5e-324;
  save_values(dir.path / "v.csv", d);
  Dataset back = load_values(dir.path / "v.csv", 2);
  CHECK(back.values == d.values);
  std::vector<Edge> edges = {{0, 1, 0.5}, {2, 0, 1.0 / 7.0}};
  save_edges(dir.path / "e.csv", edges);
  CHECK(load_edges(dir.path / "e.csv") == edges);
}

TEST_CASE("normalization uses only the requested range") {
  Dataset d;
  d.nodes = 2;
  d.timesteps = 6;
  d.channels = 1;
  d.values = {1, 2, 3, 100, 200, 300, 4, 5, 6, -100, -200, -300};
  Normalizer n = fit_normalizer(d, 0, 3);
  CHECK(n.mean[0] == doctest::Approx(3.5));
  Dataset changed = d;
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t t = 3; t < 6; ++t) changed.at(v, t, 0) = 1e9;
  Normalizer n2 = fit_normalizer(changed, 0, 3);
  CHECK(n2.mean == n.mean);
  CHECK(n2.stddev == n.stddev);
  Dataset back = denormalize(normalize(d, n), n);
  for (std::size_t i = 0; i < d.values.size(); ++i) CHECK(std::fabs(back.values[i] - d.values[i]) < 1e-12);

  Dataset flat = d;
  std::fill(flat.values.begin(), flat.values.end(), 7.0);
  CHECK_THROWS_AS(fit_normalizer(flat, 0, 6), DataError);
}

TEST_CASE("window counts, offsets and verbatim targets") {
  Dataset d;
  d.nodes = 2;
  d.channels = 1;
  const std::size_t N1 = 12, S = 12;
  for (std::size_t T = N1 + S; T < N1 + S + 5; ++T) {
    d.timesteps = T;
    d.values.resize(2 * T);
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = double(i);
    WindowSet w = make_windows(d, N1, S);
    CHECK(w.size() == T - N1 - S + 1);
    for (std::size_t k = 0; k < w.size(); ++k) {
      CHECK(w.windows[k].offset == k);
      for (std::size_t s = 0; s < S; ++s) CHECK(w.windows[k].target[S + s] == d.at(1, k + N1 + s, 0));
    }
  }
  d.timesteps = N1 + S - 1;
  d.values.resize(2 * d.timesteps);
  CHECK_THROWS_AS(make_windows(d, N1, S), DataError);
}

TEST_CASE("chronological split sizes") {
  auto s = split(10, {});
  REQUIRE(s.size() == 1);
  CHECK(s[0].train == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(s[0].val == std::vector<std::size_t>{6, 7});
  CHECK(s[0].test == std::vector<std::size_t>{8, 9});
  auto big = split(577, {});
  CHECK(big[0].train.size() == 347);
  CHECK(big[0].val.size() == 115);
  CHECK(big[0].test.size() == 115);
  CHECK_THROWS_AS(split(2, {}), DataError);
}

TEST_CASE("rolling and blocked folds") {
  SplitPlan rolling{SplitKind::rolling_cv, {6, 2, 2}, 4};
  auto r = split(200, rolling);
  REQUIRE(r.size() == 4);
  for (std::size_t k = 1; k < 4; ++k) {
    CHECK(r[k].test.front() > r[k - 1].test.front());
    CHECK(r[k].train.front() == 0);
  }
  SplitPlan blocked{SplitKind::blocked_cv, {6, 2, 2}, 4};
  auto b = split(200, blocked);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(b[i].train.size() == b[0].train.size());
    CHECK(b[i].test.size() == b[0].test.size());
    for (std::size_t j = i + 1; j < 4; ++j) {
      std::set<std::size_t> a(b[i].train.begin(), b[i].train.end());
      for (std::size_t x : b[j].train) CHECK(a.count(x) == 0);
    }
  }
  for (const auto& folds : {r, b})
    for (const auto& f : folds) {
      CHECK(f.train.back() < f.val.front());
      CHECK(f.val.back() < f.test.front());
    }
  try {
    split(12, rolling);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("fold 0") != std::string::npos);
  }
}

TEST_CASE("training range stops before the first test timestep") {
  Dataset d;
  d.nodes = 1;
  d.channels = 1;
  d.timesteps = 40;
  d.values.assign(40, 0.0);
  WindowSet w = make_windows(d, 6, 3);
  auto s = split(w.size(), {});
  auto [b, e] = training_range(w, s[0]);
  CHECK(b == 0);
  CHECK(e <= w.windows[s[0].test.front()].offset);
  CHECK(e == std::min(s[0].train.back() + 9, w.windows[s[0].test.front()].offset));
}

TEST_CASE("observation dropping") {
  Dataset d;
  d.nodes = 5;
  d.channels = 1;
  d.timesteps = 1030;
  d.values = testutil::random_values(5 * 1030, 5);
  WindowSet w = make_windows(d, 22, 1);
  WindowSet untouched = w;
  drop_observations(w, 0.0, 1);
  for (const auto& win : w.windows)
    for (auto m : win.mask) CHECK(m == 1);

  drop_observations(w, 0.3, 7);
  std::size_t draws = 0, dropped = 0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const auto& win = w.windows[k];
    CHECK(win.target == untouched.windows[k].target);
    for (std::size_t v = 0; v < 5; ++v) {
      CHECK(win.mask[v * 22] == 1);
      CHECK(win.mask[v * 22 + 21] == 1);
      for (std::size_t t = 1; t < 21; ++t) {
        ++draws;
        dropped += win.mask[v * 22 + t] == 0;
      }
    }
  }
  CHECK(draws >= 100000);
  CHECK(std::fabs(double(dropped) / double(draws) - 0.3) < 0.01);
  WindowSet again = untouched;
  drop_observations(again, 0.3, 7);
  for (std::size_t k = 0; k < w.size(); ++k) CHECK(again.windows[k].mask == w.windows[k].mask);
  CHECK_THROWS_AS(drop_observations(again, 1.0, 7), ConfigError);
}

TEST_CASE("synthetic generator") {
  SynthSpec clean;
  clean.noise_fraction = 0.0;
  clean.coupling = 0.0;
  clean.timesteps = 100;
  SynthData s = synth(clean);
  for (std::size_t v = 0; v < clean.nodes; ++v)
    for (std::size_t t = 0; t + 12 < clean.timesteps; ++t)
      CHECK(s.data.at(v, t + 12, 0) == doctest::Approx(s.data.at(v, t, 0)).epsilon(1e-12));

  SynthSpec spec;
  SynthData n = synth(spec);
  const double sigma = spec.noise_fraction * spec.amplitude;
  const double bound = spec.amplitude * (1.0 + spec.coupling) + 5.0 * sigma;
  for (double x : n.data.values) CHECK(std::fabs(x - spec.base) <= bound);
  CHECK(n.edges.size() == 2 * spec.nodes);

  TempDir dir("stgnrde_ds_synth");
  write_synth(spec, dir.path / "a");
  write_synth(spec, dir.path / "b");
  CHECK(slurp(dir.path / "a" / "values.csv") == slurp(dir.path / "b" / "values.csv"));
  CHECK(slurp(dir.path / "a" / "adjacency.csv") == slurp(dir.path / "b" / "adjacency.csv"));
  // the bound also holds on the written file
  Dataset file = load_values(dir.path / "a" / "values.csv", 1);
  for (double x : file.values) CHECK(std::fabs(x - spec.base) <= bound);

  SynthSpec one;
  one.nodes = 1;
  CHECK_THROWS_AS(synth(one), ConfigError);
}

}
