#pragma once

// Numeric kernels with a serial reference and an OpenMP variant. Both variants of a kernel
// produce bit-identical results; tests and bench/ compare them.

#include <cstddef>
#include <span>
#include <vector>

namespace mfsim {

enum class Exec { serial, parallel };

/// Accumulated DTW cost (not normalized) from the full (n+1) x (m+1) matrix.
double dtw_accumulated_full(std::span<const double> a, std::span<const double> b);
/// Same recurrence with two rolling rows.
double dtw_accumulated_rolling(std::span<const double> a, std::span<const double> b);

/// Normalized DTW (cost / (len a + len b)) for each aligned pair a[i], b[i].
std::vector<double> dtw_batch(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b, Exec exec);

/// Label counts of the last `w` symbols ending at each index; negative symbols are skipped.
/// Row-major [index][label].
std::vector<double> window_counts(std::span<const int> symbols, std::size_t labels, std::size_t w,
                                  Exec exec);

/// Weighted sum over rows: out[c] = sum_r weight[r] * values[r * cols + c].
std::vector<double> weighted_row_sum(std::span<const double> values, std::span<const double> weight,
                                     std::size_t cols, Exec exec);

}  // namespace mfsim
