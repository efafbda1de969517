#include "mfsim/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfsim/error.hpp"

namespace mfsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonempty(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("DTW needs two non-empty series");
}

}  // namespace

double dtw_accumulated_full(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  std::vector<double> D((n + 1) * (m + 1), kInf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return D[i * (m + 1) + j]; };
  at(0, 0) = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = std::abs(a[i - 1] - b[j - 1]);
      at(i, j) = cost + std::min({at(i - 1, j), at(i, j - 1), at(i - 1, j - 1)});
    }
  }
  return at(n, m);
}

double dtw_accumulated_rolling(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, b);
  const std::size_t m = b.size();
  std::vector<double> prev(m + 1, kInf);
  std::vector<double> cur(m + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = kInf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = std::abs(a[i - 1] - b[j - 1]);
      cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

std::vector<double> dtw_batch(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b, Exec exec) {
  if (a.size() != b.size()) throw ArgumentError("dtw_batch needs equally many series on both sides");
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) require_nonempty(a[i], b[i]);
  const auto norm = [&](std::size_t i) {
    return static_cast<double>(a[i].size() + b[i].size());
  };
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = dtw_accumulated_full(a[i], b[i]) / norm(i);
    return out;
  }
  const auto n = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out[k] = dtw_accumulated_rolling(a[k], b[k]) / norm(k);
  }
  return out;
}

std::vector<double> window_counts(std::span<const int> symbols, std::size_t labels, std::size_t w,
                                  Exec exec) {
  if (w == 0) throw ArgumentError("window must be >= 1");
  if (labels == 0) throw ArgumentError("window_counts needs at least one label");
  const std::size_t n = symbols.size();
  std::vector<double> out(n * labels, 0.0);
  const auto valid = [&](int s) { return s >= 0 && static_cast<std::size_t>(s) < labels; };
  if (exec == Exec::serial) {
    // Sliding window: add the newest symbol, drop the one that fell out.
    std::vector<double> counts(labels, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      if (valid(symbols[t])) counts[static_cast<std::size_t>(symbols[t])] += 1.0;
      if (t >= w && valid(symbols[t - w])) counts[static_cast<std::size_t>(symbols[t - w])] -= 1.0;
      std::copy(counts.begin(), counts.end(), out.begin() + static_cast<std::ptrdiff_t>(t * labels));
    }
    return out;
  }
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ti = 0; ti < nn; ++ti) {
    const auto t = static_cast<std::size_t>(ti);
    const std::size_t begin = t + 1 >= w ? t + 1 - w : 0;
    double* row = out.data() + t * labels;
    for (std::size_t u = begin; u <= t; ++u) {
      if (valid(symbols[u])) row[static_cast<std::size_t>(symbols[u])] += 1.0;
    }
  }
  return out;
}

std::vector<double> weighted_row_sum(std::span<const double> values, std::span<const double> weight,
                                     std::size_t cols, Exec exec) {
  if (cols == 0 || values.size() != weight.size() * cols) {
    throw ArgumentError("weighted_row_sum: values must hold rows x cols entries");
  }
  const std::size_t rows = weight.size();
  std::vector<double> out(cols, 0.0);
  if (exec == Exec::serial) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[c] += weight[r] * values[r * cols + c];
    }
    return out;
  }
  // Each column is summed in row order by one thread, so the result matches the serial one.
  const auto nc = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) acc += weight[r] * values[r * cols + c];
    out[c] = acc;
  }
  return out;
}

}  // namespace mfsim
