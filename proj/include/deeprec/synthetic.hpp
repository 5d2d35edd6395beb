#pragma once

#include <cstdint>
#include <vector>

#include "deeprec/data.hpp"

namespace deeprec {

/// Timestamped rating log drawn from a latent-factor model with user and item
/// biases, a saturating interaction term, Zipf item popularity and
/// heavy-tailed user activity. Used for desk-scale experiments where the
/// public rating corpora are not at hand.
struct SyntheticCorpusConfig {
  std::size_t n_users = 6000;
  std::size_t n_items = 1500;
  std::size_t rank = 16;
  double mean_ratings_per_user = 40.0;
  std::size_t min_ratings_per_user = 3;
  double popularity_exponent = 0.9;  // Zipf exponent over item ranks
  double interaction_scale = 1.6;
  double user_bias_sd = 0.45;
  double item_bias_sd = 0.45;
  double noise_sd = 0.45;
  double global_mean = 3.6;
  DayNumber first_day = 12784;  // 2005-01-01
  int span_days = 365;
  std::uint64_t seed = 42;
};

std::vector<RatingRecord> generate_synthetic_corpus(const SyntheticCorpusConfig& config);

}  // namespace deeprec
