#include "stgnrde/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>

#include "stgnrde/error.hpp"
#include "stgnrde/logsig.hpp"
#include "stgnrde/solver.hpp"
#include "stgnrde/trainer.hpp"

namespace stgnrde {

namespace {

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Lyndon words counted by brute force: aperiodic words strictly smaller than
// every proper rotation.
std::size_t brute_lyndon_count(std::size_t d, std::size_t depth) {
  std::size_t count = 0;
  for (std::size_t k = 1; k <= depth; ++k) {
    std::vector<std::size_t> w(k, 0);
    while (true) {
      bool lyndon = true;
      for (std::size_t r = 1; r < k && lyndon; ++r) {
        std::vector<std::size_t> rot(w.begin() + static_cast<std::ptrdiff_t>(r), w.end());
        rot.insert(rot.end(), w.begin(), w.begin() + static_cast<std::ptrdiff_t>(r));
        if (!(w < rot)) lyndon = false;
      }
      if (lyndon) ++count;
      std::size_t i = k;
      while (i > 0 && w[i - 1] == d - 1) w[--i] = 0;
      if (i == 0) break;
      ++w[i - 1];
    }
  }
  return count;
}

std::vector<std::vector<double>> random_polyline(std::mt19937_64& rng, std::size_t dim, std::size_t points) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> p(points, std::vector<double>(dim));
  for (auto& row : p)
    for (double& x : row) x = n(rng);
  return p;
}

double max_diff_levels(const TruncatedTensor& a, const std::vector<std::vector<double>>& b) {
  double m = 0.0;
  for (std::size_t k = 1; k <= a.depth(); ++k) {
    auto lv = a.level(k);
    for (std::size_t i = 0; i < lv.size(); ++i) m = std::max(m, std::fabs(lv[i] - b[k - 1][i]));
  }
  return m;
}

void logsig_checks(std::vector<CheckResult>& out) {
  const std::size_t cases[][3] = {{2, 2, 3}, {2, 3, 5}, {3, 2, 6}, {2, 4, 8}};
  for (const auto& c : cases) {
    const std::size_t witt = witt_dimension(c[0], c[1]);
    const std::size_t basis = LyndonBasis(c[0], c[1]).size();
    const std::size_t brute = brute_lyndon_count(c[0], c[1]);
    out.push_back({"logsig", "basis size L(" + std::to_string(c[0]) + "," + std::to_string(c[1]) + ")",
                   witt == c[2] && basis == c[2] && brute == c[2],
                   "witt " + std::to_string(witt) + ", basis " + std::to_string(basis) + ", enumerated " +
                       std::to_string(brute) + ", expected " + std::to_string(c[2])});
  }

  std::mt19937_64 rng(2024);
  double chen = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 2 + static_cast<std::size_t>(trial % 2);
    auto pts = random_polyline(rng, dim, 3 + static_cast<std::size_t>(trial % 5));
    const std::size_t cut = 1 + static_cast<std::size_t>(trial) % (pts.size() - 2);
    std::vector<std::vector<double>> left(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(cut) + 1);
    std::vector<std::vector<double>> right(pts.begin() + static_cast<std::ptrdiff_t>(cut), pts.end());
    TruncatedTensor joined = chen_mul(polyline_signature(left, 3), polyline_signature(right, 3));
    chen = std::max(chen, max_diff_levels(joined, direct_polyline_signature(pts, 3)));
  }
  out.push_back({"logsig", "Chen identity, 100 polylines", chen < 1e-9, "max err " + fmt("%.3g", chen)});

  double chord = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 2 + static_cast<std::size_t>(trial % 3);
    LyndonBasis basis(dim, 4);
    auto coords = polyline_logsig(random_polyline(rng, dim, 2), basis);
    for (std::size_t i = dim; i < coords.size(); ++i) chord = std::max(chord, std::fabs(coords[i]));
  }
  out.push_back({"logsig", "single chord, levels >= 2 vanish", chord < 1e-12, "max |coord| " + fmt("%.3g", chord)});

  double shuffle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto sig = polyline_signature(random_polyline(rng, 2, 6), 2);
    const double lhs = sig.level(1)[0] * sig.level(1)[1];
    const double rhs = sig.level(2)[1] + sig.level(2)[2];
    shuffle = std::max(shuffle, std::fabs(lhs - rhs));
  }
  out.push_back({"logsig", "shuffle S1*S2 = S12 + S21", shuffle < 1e-10, "max err " + fmt("%.3g", shuffle)});

  // (t, t^2) on [0, 1].  Composite Simpson for S12 = int t d(t^2) and
  // S21 = int t^2 dt against the log-signature of a fine chord path.
  const int n = 2000;
  auto simpson = [&](const std::function<double(double)>& f) {
    double s = f(0.0) + f(1.0);
    for (int i = 1; i < n; ++i) s += f(i / double(n)) * (i % 2 ? 4.0 : 2.0);
    return s / (3.0 * n);
  };
  const double s12 = simpson([](double t) { return t * 2.0 * t; });
  const double s21 = simpson([](double t) { return t * t; });
  const double oracle = (s12 - s21) / 2.0;
  std::vector<std::vector<double>> curve;
  for (int i = 0; i <= 4 * n; ++i) {
    const double t = i / double(4 * n);
    curve.push_back({t, t * t});
  }
  const double area = polyline_logsig(curve, LyndonBasis(2, 2))[2];
  const bool area_ok = std::fabs(area - oracle) < 1e-6 && std::fabs(oracle - 1.0 / 6.0) < 1e-6;
  out.push_back({"logsig", "area of (t, t^2) on [0,1]", area_ok,
                 "log-signature " + fmt("%.10f", area) + ", quadrature " + fmt("%.10f", oracle)});
}

void grad_checks(std::vector<CheckResult>& out) {
  ModelConfig cfg;
  cfg.num_nodes = 4;
  cfg.in_channels = 1;
  cfg.horizon = 3;
  cfg.dim_h = 4;
  cfg.dim_z = 4;
  cfg.depth_k = 1;
  cfg.embed_dim = 2;
  cfg.sig_depth = 2;
  cfg.subpath = 2;
  auto run = [&](const ModelConfig& c, Method m, const std::string& label) {
    SolveSpec spec{m, 2};
    GradcheckResult r = gradcheck(c, spec, 7, 6, 2);
    out.push_back({"grad", label + ", " + to_string(m), r.max_rel_error < 1e-4,
                   "max rel err " + fmt("%.3g", r.max_rel_error) + " (" + r.worst_param + ")"});
  };
  for (Variant v : {Variant::full, Variant::temporal_only, Variant::spatial_only}) {
    for (Method m : {Method::euler, Method::rk4}) {
      ModelConfig c = cfg;
      c.variant = v;
      run(c, m, "variant " + to_string(v));
    }
  }
  for (GnnKind g : {GnnKind::chebyshev, GnnKind::plain_gcn, GnnKind::attention}) {
    ModelConfig c = cfg;
    c.gnn = g;
    run(c, Method::rk4, "gnn " + to_string(g));
  }
}

void solver_checks(std::vector<CheckResult>& out) {
  const double euler = convergence_order(Method::euler).order;
  const double rk4 = convergence_order(Method::rk4).order;
  out.push_back({"solver", "euler order", std::fabs(euler - 1.0) <= 0.2, "slope " + fmt("%.4f", euler)});
  out.push_back({"solver", "rk4 order", std::fabs(rk4 - 4.0) <= 0.5, "slope " + fmt("%.4f", rk4)});
}

void metric_checks(std::vector<CheckResult>& out) {
  const double y[] = {2.0, 4.0}, yhat[] = {1.0, 5.0};
  MetricReport r = compute_metrics(yhat, y, 2, 1);
  const bool ok = std::fabs(r.mae - 1.0) < 1e-12 && std::fabs(r.rmse - 1.0) < 1e-12 &&
                  std::fabs(r.mape - 0.375) < 1e-12;
  out.push_back({"metrics", "y=[2,4], yhat=[1,5]", ok,
                 "mae " + fmt("%.6g", r.mae) + ", rmse " + fmt("%.6g", r.rmse) + ", mape " + fmt("%.6g", r.mape)});
  MetricReport p = compute_metrics(y, y, 2, 1);
  out.push_back({"metrics", "perfect prediction", p.mae == 0.0 && p.rmse == 0.0 && p.mape == 0.0,
                 "mae " + fmt("%.3g", p.mae) + ", rmse " + fmt("%.3g", p.rmse) + ", mape " + fmt("%.3g", p.mape)});
}

}  // namespace

std::vector<std::vector<double>> direct_polyline_signature(const std::vector<std::vector<double>>& points,
                                                           std::size_t depth) {
  const std::size_t d = points.at(0).size();
  const std::size_t segs = points.size() - 1;
  std::vector<std::vector<double>> inc(segs, std::vector<double>(d));
  for (std::size_t s = 0; s < segs; ++s)
    for (std::size_t i = 0; i < d; ++i) inc[s][i] = points[s + 1][i] - points[s][i];

  std::vector<std::vector<double>> levels;
  for (std::size_t k = 1; k <= depth; ++k) {
    std::size_t words = 1;
    for (std::size_t j = 0; j < k; ++j) words *= d;
    std::vector<double> level(words, 0.0);
    std::vector<std::size_t> word(k), seq(k);
    for (std::size_t w = 0; w < words; ++w) {
      for (std::size_t j = 0, rest = w; j < k; ++j, rest /= d) word[k - 1 - j] = rest % d;
      // Sum over nondecreasing segment sequences; a run of m equal segments
      // contributes 1/m!.
      double total = 0.0;
      std::function<void(std::size_t, std::size_t, double, std::size_t)> rec =
          [&](std::size_t pos, std::size_t min_seg, double prod, std::size_t run) {
            if (pos == k) {
              total += prod;
              return;
            }
            for (std::size_t s = min_seg; s < segs; ++s) {
              const std::size_t r = (pos > 0 && s == seq[pos - 1]) ? run + 1 : 1;
              seq[pos] = s;
              rec(pos + 1, s, prod * inc[s][word[pos]] / static_cast<double>(r), r);
            }
          };
      rec(0, 0, 1.0, 0);
      level[w] = total;
    }
    levels.push_back(std::move(level));
  }
  return levels;
}

std::vector<CheckResult> run_suite(const std::string& suite) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  if (!all && suite != "logsig" && suite != "grad" && suite != "solver" && suite != "metrics") {
    throw ConfigError("unknown suite '" + suite + "' (expected logsig|grad|solver|metrics|all)");
  }
  if (all || suite == "logsig") logsig_checks(out);
  if (all || suite == "solver") solver_checks(out);
  if (all || suite == "metrics") metric_checks(out);
  if (all || suite == "grad") grad_checks(out);
  return out;
}

bool print_checks(std::ostream& out, const std::vector<CheckResult>& checks) {
  std::size_t width = 0;
  for (const auto& c : checks) width = std::max(width, c.suite.size() + c.name.size() + 1);
  bool ok = true;
  for (const auto& c : checks) {
    std::string label = c.suite + " " + c.name;
    label.resize(width, ' ');
    out << (c.pass ? "PASS  " : "FAIL  ") << label << "  " << c.detail << '\n';
    ok = ok && c.pass;
  }
  out << (ok ? "all checks passed" : "some checks FAILED") << '\n';
  return ok;
}

}  // namespace stgnrde
