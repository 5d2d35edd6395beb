#include "deeprec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace deeprec {

std::vector<RatingRecord> generate_synthetic_corpus(const SyntheticCorpusConfig& config) {
  require(config.n_users > 0 && config.n_items > 0 && config.rank > 0, "synthetic corpus: empty shape");
  require(config.span_days > 0, "synthetic corpus: span_days must be positive");
  Rng rng(config.seed);
  const std::size_t k = config.rank;
  const double factor_sd = 1.0 / std::sqrt(static_cast<double>(k));

  std::vector<double> item_factors(config.n_items * k);
  std::vector<double> item_bias(config.n_items);
  for (auto& v : item_factors) v = rng.normal() * factor_sd;
  for (auto& b : item_bias) b = rng.normal() * config.item_bias_sd;

  // Zipf popularity over a random permutation of items, as a cumulative table.
  std::vector<std::size_t> rank_of(config.n_items);
  std::iota(rank_of.begin(), rank_of.end(), 0);
  rng.shuffle(rank_of);
  std::vector<double> cumulative(config.n_items);
  double total = 0.0;
  for (std::size_t i = 0; i < config.n_items; ++i) {
    total += 1.0 / std::pow(static_cast<double>(rank_of[i] + 1), config.popularity_exponent);
    cumulative[i] = total;
  }
  auto draw_item = [&]() {
    const double u = rng.uniform() * total;
    return static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                    cumulative.begin());
  };

  const std::int64_t span_seconds = static_cast<std::int64_t>(config.span_days) * 86400;
  const std::int64_t t0 = config.first_day * 86400;

  std::vector<RatingRecord> records;
  records.reserve(static_cast<std::size_t>(config.n_users * config.mean_ratings_per_user * 1.1));
  std::vector<double> u(k);
  for (std::size_t user = 0; user < config.n_users; ++user) {
    for (auto& x : u) x = rng.normal() * factor_sd;
    const double bias = rng.normal() * config.user_bias_sd;

    // Log-normal activity with the requested mean.
    const double sigma = 0.8;
    const double mu = std::log(config.mean_ratings_per_user) - 0.5 * sigma * sigma;
    auto count = static_cast<std::size_t>(std::exp(mu + sigma * rng.normal()));
    count = std::clamp<std::size_t>(count, config.min_ratings_per_user, config.n_items / 2);

    // Each user is active over a window inside the span.
    const std::int64_t start = static_cast<std::int64_t>(rng.uniform() * static_cast<double>(span_seconds));
    const std::int64_t length =
        std::max<std::int64_t>(86400, static_cast<std::int64_t>(rng.uniform() * static_cast<double>(span_seconds)));

    std::unordered_set<std::size_t> seen;
    std::size_t attempts = 0;
    while (seen.size() < count && attempts < count * 50) {
      ++attempts;
      const std::size_t item = draw_item();
      if (!seen.insert(item).second) continue;
      double dot = 0.0;
      for (std::size_t f = 0; f < k; ++f) dot += u[f] * item_factors[item * k + f];
      const double score = config.global_mean + bias + item_bias[item] +
                           config.interaction_scale * std::tanh(2.0 * dot) +
                           config.noise_sd * rng.normal();
      const double rating = std::clamp(std::round(score), 1.0, 5.0);
      std::int64_t ts = t0 + (start + static_cast<std::int64_t>(rng.uniform() * static_cast<double>(length))) %
                                 span_seconds;
      records.push_back(RatingRecord{"u" + std::to_string(user), "i" + std::to_string(item),
                                     static_cast<float>(rating), ts, std::to_string(ts)});
    }
  }
  std::stable_sort(records.begin(), records.end(),
            [](const RatingRecord& a, const RatingRecord& b) { return a.timestamp < b.timestamp; });
  return records;
}

}  // namespace deeprec
