#include "stgnrde/logsig.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stgnrde/error.hpp"

namespace stgnrde {

namespace {

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

std::size_t word_index(const std::vector<std::size_t>& letters, std::size_t alphabet) {
  std::size_t idx = 0;
  for (std::size_t l : letters) idx = idx * alphabet + l;
  return idx;
}

void check_compatible(const TruncatedTensor& a, const TruncatedTensor& b) {
  if (a.alphabet() != b.alphabet() || a.depth() != b.depth()) {
    throw DimensionError("truncated tensors differ in alphabet or depth");
  }
}

// Dense product of two homogeneous polynomials of lengths la and lb.
std::vector<double> concat_product(const std::vector<double>& a, std::size_t /*la*/,
                                   const std::vector<double>& b, std::size_t lb,
                                   std::size_t alphabet) {
  const std::size_t nb = ipow(alphabet, lb);
  std::vector<double> out(a.size() * nb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < nb; ++j) out[i * nb + j] += a[i] * b[j];
  }
  return out;
}

int mobius(std::size_t n) {
  int result = 1;
  for (std::size_t p = 2; p * p <= n; ++p) {
    if (n % p == 0) {
      n /= p;
      if (n % p == 0) return 0;
      result = -result;
    }
  }
  if (n > 1) result = -result;
  return result;
}

}  // namespace

// ---- TruncatedTensor ------------------------------------------------------

TruncatedTensor::TruncatedTensor(std::size_t alphabet, std::size_t depth, double level0)
    : alphabet_(alphabet), depth_(depth), level0_(level0) {
  if (alphabet == 0 || depth == 0) throw ContractError("alphabet and depth must be >= 1");
  levels_.resize(depth);
  for (std::size_t k = 1; k <= depth; ++k) levels_[k - 1].assign(ipow(alphabet, k), 0.0);
}

TruncatedTensor TruncatedTensor::identity(std::size_t alphabet, std::size_t depth) {
  return TruncatedTensor(alphabet, depth, 1.0);
}

double TruncatedTensor::max_abs_diff(const TruncatedTensor& other) const {
  check_compatible(*this, other);
  double worst = std::fabs(level0_ - other.level0_);
  for (std::size_t k = 0; k < depth_; ++k)
    for (std::size_t i = 0; i < levels_[k].size(); ++i)
      worst = std::max(worst, std::fabs(levels_[k][i] - other.levels_[k][i]));
  return worst;
}

TruncatedTensor sig_linear(std::span<const double> increment, std::size_t depth) {
  const std::size_t d = increment.size();
  TruncatedTensor out = TruncatedTensor::identity(d, depth);
  std::copy(increment.begin(), increment.end(), out.level(1).begin());
  for (std::size_t k = 2; k <= depth; ++k) {
    auto prev = out.level(k - 1);
    auto cur = out.level(k);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t i = 0; i < prev.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) cur[i * d + j] = prev[i] * increment[j] * inv_k;
  }
  return out;
}

TruncatedTensor chen_mul(const TruncatedTensor& a, const TruncatedTensor& b) {
  check_compatible(a, b);
  const std::size_t d = a.alphabet(), depth = a.depth();
  TruncatedTensor out(d, depth, a.level0() * b.level0());
  for (std::size_t n = 1; n <= depth; ++n) {
    auto dst = out.level(n);
    auto an = a.level(n);
    auto bn = b.level(n);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = an[i] * b.level0() + a.level0() * bn[i];
    for (std::size_t i = 1; i < n; ++i) {
      auto ai = a.level(i);
      auto bj = b.level(n - i);
      const std::size_t nb = bj.size();
      for (std::size_t p = 0; p < ai.size(); ++p) {
        if (ai[p] == 0.0) continue;
        double* row = dst.data() + p * nb;
        for (std::size_t q = 0; q < nb; ++q) row[q] += ai[p] * bj[q];
      }
    }
  }
  return out;
}

TruncatedTensor polyline_signature(const std::vector<std::vector<double>>& points,
                                   std::size_t depth) {
  if (points.empty()) throw ContractError("polyline needs at least one point");
  const std::size_t d = points.front().size();
  TruncatedTensor sig = TruncatedTensor::identity(d, depth);
  std::vector<double> inc(d);
  for (std::size_t p = 1; p < points.size(); ++p) {
    if (points[p].size() != d) throw DimensionError("polyline points differ in dimension");
    for (std::size_t j = 0; j < d; ++j) inc[j] = points[p][j] - points[p - 1][j];
    sig = chen_mul(sig, sig_linear(inc, depth));
  }
  return sig;
}

TruncatedTensor tensor_log(const TruncatedTensor& s) {
  if (std::fabs(s.level0() - 1.0) > 1e-12) {
    throw ContractError("tensor_log requires level-0 term equal to 1");
  }
  TruncatedTensor x = s;
  x.level0() = 0.0;
  // log(1 + x) = sum_{n>=1} (-1)^{n+1} x^n / n, nilpotent past depth.
  TruncatedTensor out(s.alphabet(), s.depth());
  TruncatedTensor power = x;
  for (std::size_t n = 1; n <= s.depth(); ++n) {
    const double coeff = (n % 2 == 1 ? 1.0 : -1.0) / static_cast<double>(n);
    for (std::size_t k = n; k <= s.depth(); ++k) {
      auto src = power.level(k);
      auto dst = out.level(k);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += coeff * src[i];
    }
    if (n < s.depth()) power = chen_mul(power, x);
  }
  return out;
}

TruncatedTensor tensor_exp(const TruncatedTensor& x) {
  if (std::fabs(x.level0()) > 1e-12) throw ContractError("tensor_exp requires zero level-0 term");
  TruncatedTensor out = TruncatedTensor::identity(x.alphabet(), x.depth());
  TruncatedTensor power = x;
  double factorial = 1.0;
  for (std::size_t n = 1; n <= x.depth(); ++n) {
    factorial *= static_cast<double>(n);
    for (std::size_t k = n; k <= x.depth(); ++k) {
      auto src = power.level(k);
      auto dst = out.level(k);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] / factorial;
    }
    if (n < x.depth()) power = chen_mul(power, x);
  }
  return out;
}

// ---- Lyndon basis ---------------------------------------------------------

std::size_t witt_dimension(std::size_t alphabet, std::size_t depth) {
  std::size_t total = 0;
  for (std::size_t k = 1; k <= depth; ++k) {
    long long acc = 0;
    for (std::size_t e = 1; e <= k; ++e) {
      if (k % e == 0) acc += mobius(e) * static_cast<long long>(ipow(alphabet, k / e));
    }
    total += static_cast<std::size_t>(acc / static_cast<long long>(k));
  }
  return total;
}

std::vector<std::vector<std::size_t>> lyndon_words(std::size_t alphabet, std::size_t depth) {
  std::vector<std::vector<std::size_t>> words;
  if (alphabet == 0 || depth == 0) return words;
  // Duval's generation in lexicographic order.
  std::vector<std::size_t> w{0};
  while (!w.empty()) {
    words.push_back(w);
    const std::size_t m = w.size();
    while (w.size() < depth) w.push_back(w[w.size() - m]);
    while (!w.empty() && w.back() == alphabet - 1) w.pop_back();
    if (!w.empty()) ++w.back();
  }
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return words;
}

LyndonBasis::LyndonBasis(std::size_t alphabet, std::size_t depth)
    : alphabet_(alphabet), depth_(depth) {
  if (alphabet == 0 || depth == 0) throw ContractError("Lyndon basis needs alphabet, depth >= 1");
  auto all = lyndon_words(alphabet, depth);
  words_.reserve(all.size());
  // Expansions are built shortest first, so every factor is already known.
  auto find = [this](const std::vector<std::size_t>& letters) -> const LyndonWord& {
    for (const auto& w : words_)
      if (w.letters == letters) return w;
    throw ContractError("missing Lyndon factor");
  };
  auto is_lyndon = [](const std::vector<std::size_t>& w) {
    for (std::size_t r = 1; r < w.size(); ++r) {
      std::vector<std::size_t> rot(w.begin() + r, w.end());
      rot.insert(rot.end(), w.begin(), w.begin() + r);
      if (!(w < rot)) return false;
    }
    return true;
  };
  for (auto& letters : all) {
    LyndonWord lw;
    lw.letters = letters;
    lw.index = word_index(letters, alphabet);
    const std::size_t len = letters.size();
    if (len == 1) {
      lw.expansion.assign(alphabet, 0.0);
      lw.expansion[letters[0]] = 1.0;
    } else {
      // Standard factorization: w = u v with v the longest proper Lyndon suffix.
      std::size_t split = len - 1;
      for (std::size_t s = 1; s < len; ++s) {
        std::vector<std::size_t> suffix(letters.begin() + s, letters.end());
        if (is_lyndon(suffix)) {
          split = s;
          break;
        }
      }
      std::vector<std::size_t> u(letters.begin(), letters.begin() + split);
      std::vector<std::size_t> v(letters.begin() + split, letters.end());
      const auto& pu = find(u).expansion;
      const auto& pv = find(v).expansion;
      auto uv = concat_product(pu, u.size(), pv, v.size(), alphabet);
      auto vu = concat_product(pv, v.size(), pu, u.size(), alphabet);
      for (std::size_t i = 0; i < uv.size(); ++i) uv[i] -= vu[i];
      lw.expansion = std::move(uv);
    }
    words_.push_back(std::move(lw));
  }
}

TruncatedTensor LyndonBasis::expand(std::span<const double> coords) const {
  if (coords.size() != words_.size()) throw DimensionError("coordinate count differs from basis size");
  TruncatedTensor out(alphabet_, depth_);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    auto dst = out.level(words_[i].letters.size());
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += coords[i] * words_[i].expansion[j];
  }
  return out;
}

std::vector<double> lyndon_project(const TruncatedTensor& lie, const LyndonBasis& basis) {
  if (lie.alphabet() != basis.alphabet() || lie.depth() != basis.depth()) {
    throw DimensionError("Lie element and basis differ in alphabet or depth");
  }
  const auto& words = basis.words();
  std::vector<double> coords(words.size(), 0.0);
  // The bracket of w is w plus lexicographically larger words, so solving in
  // increasing order is a forward substitution.
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::size_t len = words[i].letters.size();
    double value = lie.level(len)[words[i].index];
    for (std::size_t j = 0; j < i; ++j) {
      if (words[j].letters.size() == len) value -= coords[j] * words[j].expansion[words[i].index];
    }
    coords[i] = value;
  }
  TruncatedTensor rebuilt = basis.expand(coords);
  double scale = std::fabs(lie.level0());
  for (std::size_t k = 1; k <= lie.depth(); ++k)
    for (double x : lie.level(k)) scale = std::max(scale, std::fabs(x));
  rebuilt.level0() = lie.level0();
  double residual = rebuilt.max_abs_diff(lie);
  if (residual > 1e-8 * std::max(1.0, scale)) {
    throw ContractError("element is not in the free Lie algebra (projection residual " +
                        std::to_string(residual) + ")");
  }
  return coords;
}

std::vector<double> polyline_logsig(const std::vector<std::vector<double>>& points,
                                    const LyndonBasis& basis) {
  return lyndon_project(tensor_log(polyline_signature(points, basis.depth())), basis);
}

std::vector<std::size_t> window_knots(std::size_t intervals, std::size_t subpath) {
  if (subpath < 1) throw ContractError("sub-path length must be at least 1");
  if (intervals < subpath) {
    throw DataError("series of " + std::to_string(intervals) +
                    " intervals is shorter than the sub-path length " + std::to_string(subpath));
  }
  std::vector<std::size_t> knots;
  for (std::size_t k = 0; k < intervals; k += subpath) knots.push_back(k);
  knots.push_back(intervals);
  return knots;
}

LogSigSequence window_logsig(const SplinePath& path, std::size_t subpath, const LyndonBasis& basis,
                             std::size_t substeps) {
  if (basis.alphabet() != path.path_channels()) {
    throw DimensionError("basis alphabet " + std::to_string(basis.alphabet()) +
                         " differs from path channels " + std::to_string(path.path_channels()));
  }
  const auto& grid = path.grid();
  auto knots = window_knots(grid.size() - 1, subpath);
  LogSigSequence seq;
  seq.windows = knots.size() - 1;
  seq.nodes = path.nodes();
  seq.coords = basis.size();
  seq.data.resize(seq.windows * seq.nodes * seq.coords);
  for (std::size_t k : knots) seq.boundaries.push_back(grid[k]);
  for (std::size_t w = 0; w < seq.windows; ++w) {
    seq.divisors.push_back(seq.boundaries[w + 1] - seq.boundaries[w]);
  }
  for (std::size_t w = 0; w < seq.windows; ++w) {
    const std::size_t chords = (knots[w + 1] - knots[w]) * substeps;
    for (std::size_t v = 0; v < seq.nodes; ++v) {
      auto coords = polyline_logsig(
          sample_chords(path, v, seq.boundaries[w], seq.boundaries[w + 1], chords), basis);
      std::copy(coords.begin(), coords.end(),
                seq.data.begin() + static_cast<std::ptrdiff_t>((w * seq.nodes + v) * seq.coords));
    }
  }
  return seq;
}

}  // namespace stgnrde
