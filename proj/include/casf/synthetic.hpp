#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "casf/common.hpp"
#include "casf/dataset.hpp"

namespace casf {

/// Generator for evaluation corpora with a known latent quality.
///
/// Sample i has latent difficulty u_i with zero mean and unit variance
/// (uniform or Gaussian). System j has skill b_j and
/// sensitivity a_j, so its true quality on sample i is q_ij = b_j + a_j u_i.
/// Human score for aspect k is q_ij + aspect offset + N(0, human_noise).
/// Outputs are built from the reference: each reference token survives with
/// probability sigmoid(q_ij + N(0, metric_noise)) and is otherwise replaced
/// by a random vocabulary word, so lexical metrics track q_ij with noise.
enum class LatentShape { gaussian, uniform };

struct SyntheticParams {
  LatentShape latent = LatentShape::uniform;  // unit variance either way
  std::size_t samples = 200;
  std::size_t systems = 5;
  std::size_t aspects = 2;
  std::size_t vocabulary = 400;
  std::size_t min_length = 12;
  std::size_t max_length = 30;
  double skill_sd = 0.25;
  double min_sensitivity = 0.4;
  double max_sensitivity = 1.6;
  double human_noise = 0.5;
  double metric_noise = 0.8;
  double duplicate_rate = 0.05;  // samples reusing an earlier reference
};

namespace detail {

inline std::string synthetic_word(std::size_t k) {
  static const char* const syllables[] = {"ka", "to", "mi", "re", "su", "no", "la", "ve", "di", "po",
                                          "ga", "fe", "ri", "mu", "sa", "te", "lo", "ne", "bi", "zu"};
  std::string w;
  do {
    w += syllables[k % 20];
    k /= 20;
  } while (k > 0);
  return w;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/// Generated corpus plus its ground truth.
struct SyntheticCorpus {
  Dataset dataset;
  std::vector<std::vector<double>> quality;  // q_ij, dataset sample order x system order
};

inline SyntheticCorpus generate_synthetic(const SyntheticParams& p, std::uint64_t seed) {
  if (p.samples == 0 || p.systems < 2 || p.aspects == 0) throw Error("synthetic: need samples, >= 2 systems, >= 1 aspect");
  if (p.min_length < 2 || p.max_length < p.min_length) throw Error("synthetic: bad length range");
  Rng rng(seed);

  std::vector<std::string> systems, aspects;
  for (std::size_t j = 0; j < p.systems; ++j) systems.push_back("sys" + std::to_string(j + 1));
  for (std::size_t k = 0; k < p.aspects; ++k) aspects.push_back("aspect" + std::to_string(k + 1));

  std::vector<double> skill(p.systems), sensitivity(p.systems), offset(p.aspects);
  for (auto& b : skill) b = p.skill_sd * rng.normal();
  for (auto& a : sensitivity) a = p.min_sensitivity + (p.max_sensitivity - p.min_sensitivity) * rng.unit();
  for (auto& o : offset) o = 0.1 * rng.normal();

  std::vector<std::vector<std::string>> refs;
  std::vector<Sample> samples;
  std::vector<std::vector<double>> quality;
  for (std::size_t i = 0; i < p.samples; ++i) {
    std::vector<std::string> ref;
    if (!refs.empty() && rng.unit() < p.duplicate_rate) {
      ref = refs[rng.below(refs.size())];
    } else {
      const std::size_t len = p.min_length + rng.below(p.max_length - p.min_length + 1);
      for (std::size_t t = 0; t < len; ++t) ref.push_back(detail::synthetic_word(rng.below(p.vocabulary)));
    }
    refs.push_back(ref);

    const double u = p.latent == LatentShape::gaussian ? rng.normal() : std::sqrt(3.0) * (2.0 * rng.unit() - 1.0);
    Sample s;
    char id[16];
    std::snprintf(id, sizeof id, "s%04zu", i);
    s.sample_id = id;
    std::string ref_text;
    for (const auto& w : ref) ref_text += (ref_text.empty() ? "" : " ") + w;
    s.source = "source document " + s.sample_id + ": " + ref_text;
    s.references = {ref_text};
    ScoreTable scores;
    quality.emplace_back();
    for (std::size_t j = 0; j < p.systems; ++j) {
      const double q = skill[j] + sensitivity[j] * u;
      quality.back().push_back(q);
      const double keep = detail::sigmoid(q + p.metric_noise * rng.normal());
      std::string out;
      for (const auto& w : ref) {
        const std::string tok = rng.unit() < keep ? w : detail::synthetic_word(rng.below(p.vocabulary));
        out += (out.empty() ? "" : " ") + tok;
      }
      s.outputs[systems[j]] = out;
      for (std::size_t k = 0; k < p.aspects; ++k) {
        scores[systems[j]][aspects[k]] = q + offset[k] + p.human_noise * rng.normal();
      }
    }
    s.human_scores = std::move(scores);
    samples.push_back(std::move(s));
  }
  return {Dataset::make(std::move(samples), aspects), std::move(quality)};
}

inline Dataset make_synthetic(const SyntheticParams& p, std::uint64_t seed) {
  return generate_synthetic(p, seed).dataset;
}

}  // namespace casf
