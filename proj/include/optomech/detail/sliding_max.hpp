#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

namespace optomech::detail {

/// Max of |x| over a window of `width` samples. Trailing windows cover
/// [i - width + 1, i]; centered windows cover [i - width/2, i + width/2].
/// Monotonic-deque O(n).
inline std::vector<double> sliding_max_abs(std::span<const double> x, std::size_t width, bool centered) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  if (width == 0) width = 1;
  const std::size_t back = centered ? width / 2 : width - 1;
  const std::size_t ahead = centered ? width / 2 : 0;
  std::deque<std::size_t> q;
  std::size_t next = 0;  // next sample to push
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(n - 1, i + ahead);
    while (next <= hi) {
      const double a = std::fabs(x[next]);
      while (!q.empty() && std::fabs(x[q.back()]) <= a) q.pop_back();
      q.push_back(next);
      ++next;
    }
    const std::size_t lo = i >= back ? i - back : 0;
    while (q.front() < lo) q.pop_front();
    out[i] = std::fabs(x[q.front()]);
  }
  return out;
}

}  // namespace optomech::detail
