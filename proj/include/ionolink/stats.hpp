#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ionolink/errors.hpp"
#include "ionolink/numeric.hpp"
#include "ionolink/rng.hpp"

namespace ionolink::stats {

/// Paired per-epoch differences on a shared time grid.
struct PairedSeries {
  std::vector<double> t_s;
  std::vector<double> delta;

  [[nodiscard]] std::size_t size() const { return delta.size(); }

  void validate() const {
    require(t_s.size() == delta.size(), Errc::GridMismatch, "time/delta length mismatch");
    require(!delta.empty(), Errc::EmptySeries, "empty paired series");
    for (double v : delta)
      require(std::isfinite(v), Errc::InvalidConfig, "non-finite delta value");
  }

  [[nodiscard]] double dt() const {
    require(t_s.size() >= 2, Errc::SeriesTooShort, "cannot infer dt from one sample");
    return t_s[1] - t_s[0];
  }
};

struct BootstrapResult {
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double p_value = 1.0;
  double cohens_d = 0.0;
  std::size_t b = 0;
  double block_len_s = 0.0;
};

/// Cohen's d on non-overlapping block means: mean / sample std (n-1).
inline double cohens_d(const PairedSeries& series, double block_len_s) {
  series.validate();
  const double dt = series.dt();
  const auto block = static_cast<std::size_t>(std::max(1.0, std::round(block_len_s / dt)));
  const std::size_t n_blocks = series.size() / block;
  require(n_blocks >= 2, Errc::SeriesTooShort, "need at least 2 non-overlapping blocks");
  std::vector<double> means(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    double s = 0.0;
    for (std::size_t k = b * block; k < (b + 1) * block; ++k) s += series.delta[k];
    means[b] = s / static_cast<double>(block);
  }
  const double sd = num::sample_std(means);
  require(sd > 0.0, Errc::DegenerateVariance, "block means have zero spread");
  return num::mean(means) / sd;
}

/// Paired moving-block bootstrap of the mean with percentile intervals.
///
/// Overlapping blocks of floor(block_len/dt) samples are drawn with
/// replacement and concatenated back to the original length; the two-sided
/// p-value is 2 min(P(mean* <= 0), P(mean* >= 0)) floored at 1/B. Replicates
/// use per-index RNG substreams so results do not depend on any execution
/// order.
inline BootstrapResult moving_block_bootstrap(const PairedSeries& series, double block_len_s,
                                              std::size_t b_replicates, std::uint64_t rng_seed) {
  series.validate();
  require(b_replicates >= 100, Errc::InvalidConfig, "need at least 100 bootstrap replicates");
  const double dt = series.dt();
  const auto block = static_cast<std::size_t>(std::max(1.0, std::round(block_len_s / dt)));
  const std::size_t n = series.size();
  require(n >= 2 * block, Errc::SeriesTooShort, "series shorter than two blocks");
  const std::size_t n_starts = n - block + 1;  // overlapping starts, no wrap-around
  const std::size_t blocks_needed = (n + block - 1) / block;

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series.delta[i];

  std::vector<double> means(b_replicates);
  for (std::size_t rep = 0; rep < b_replicates; ++rep) {
    Rng rng = Rng::substream(rng_seed, rep);
    double total = 0.0;
    std::size_t filled = 0;
    for (std::size_t j = 0; j < blocks_needed; ++j) {
      const auto start = static_cast<std::size_t>(rng.uniform_index(n_starts));
      const std::size_t take = std::min(block, n - filled);  // truncate the last block
      total += prefix[start + take] - prefix[start];
      filled += take;
    }
    means[rep] = total / static_cast<double>(n);
  }

  std::vector<double> sorted = means;
  std::sort(sorted.begin(), sorted.end());
  const auto b = static_cast<double>(b_replicates);
  const auto lo_idx = static_cast<std::size_t>(std::ceil(0.025 * b)) - 1;
  const auto hi_idx = static_cast<std::size_t>(std::floor(0.975 * b)) - 1;

  std::size_t n_le = 0, n_ge = 0;
  for (double m : sorted) {
    if (m <= 0.0) ++n_le;
    if (m >= 0.0) ++n_ge;
  }
  const double frac_le = static_cast<double>(n_le) / b;
  const double frac_ge = static_cast<double>(n_ge) / b;

  BootstrapResult out;
  out.mean = num::mean(series.delta);
  out.ci_low = sorted[std::min(lo_idx, b_replicates - 1)];
  out.ci_high = sorted[std::min(hi_idx, b_replicates - 1)];
  out.p_value = std::clamp(2.0 * std::min(frac_le, frac_ge), 1.0 / b, 1.0);
  out.b = b_replicates;
  out.block_len_s = block_len_s;
  out.cohens_d = 0.0;  // filled by callers that also want the effect size
  return out;
}

/// Holm-Bonferroni step-down decisions, reported in the input order.
struct HolmResult {
  std::vector<bool> reject;
  std::vector<double> p_adjusted;
};

inline HolmResult holm_bonferroni(const std::vector<double>& p_values, double alpha) {
  require(!p_values.empty(), Errc::InsufficientData, "no p-values");
  require(alpha > 0.0 && alpha < 1.0, Errc::InvalidConfig, "alpha must be in (0,1)");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });

  HolmResult res;
  res.reject.assign(m, false);
  res.p_adjusted.assign(m, 1.0);
  bool stopped = false;
  double running_adj = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t idx = order[i];
    const double scale = static_cast<double>(m - i);
    running_adj = std::max(running_adj, std::min(1.0, p_values[idx] * scale));
    res.p_adjusted[idx] = running_adj;
    if (!stopped && p_values[idx] <= alpha / scale)
      res.reject[idx] = true;
    else
      stopped = true;
  }
  return res;
}

/// Epochs where the outage forecast exceeds the gate; time stamps retained
/// so block statistics can still be formed downstream.
inline PairedSeries gated_subset(const PairedSeries& series, const std::vector<double>& p_out,
                                 double tau_gate) {
  series.validate();
  require(p_out.size() == series.size(), Errc::GridMismatch, "p_out not aligned with series");
  PairedSeries out;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (p_out[k] > tau_gate) {
      out.t_s.push_back(series.t_s[k]);
      out.delta.push_back(series.delta[k]);
    }
  }
  require(!out.delta.empty(), Errc::EmptyGate, "no epochs pass the outage gate");
  return out;
}

struct WorstWindow {
  double start_s = 0.0;
  double mean_metric = 0.0;
};

/// Mean of the metric over a window of `window_s` centered at the earliest
/// P_out crest, clipped into the series.
inline WorstWindow worst_window(const std::vector<double>& metric,
                                const std::vector<double>& p_out, double dt_s,
                                double window_s = 60.0) {
  require(metric.size() == p_out.size(), Errc::GridMismatch, "metric/p_out length mismatch");
  const auto w = static_cast<std::size_t>(std::max(1.0, std::round(window_s / dt_s)));
  require(metric.size() > w, Errc::SeriesTooShort, "series shorter than the window");

  std::size_t crest = 0;
  for (std::size_t k = 1; k < p_out.size(); ++k)
    if (p_out[k] > p_out[crest]) crest = k;  // strict: earliest argmax wins ties

  const std::size_t half = w / 2;
  std::size_t start = crest > half ? crest - half : 0;
  start = std::min(start, metric.size() - w);

  double sum = 0.0;
  for (std::size_t k = start; k < start + w; ++k) sum += metric[k];
  return {static_cast<double>(start) * dt_s, sum / static_cast<double>(w)};
}

}  // namespace ionolink::stats
