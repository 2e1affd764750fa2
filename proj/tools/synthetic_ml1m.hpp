#pragma once

#include <cstdint>
#include <filesystem>

namespace ml1m_synth {

// Deterministic ML-1M-format dataset generator for environments without
// the real download. The generated world has additive demographic
// structure per genre (age / occupation / gender effects plus movie and
// user biases), a "Jurassic Park (1993)" entry whose discretized gender
// means sit at 3.8142 (M) and 3.5794 (F) with a moderate age profile and
// mild occupation effects, a Musical genre whose age profile increases
// band by band and whose artist occupation leads, and a Horror genre
// leaning young with tradesman/craftsman on top. Identical options give
// byte-identical files.
struct Options {
  std::uint64_t seed = 20260401;
  int n_users = 6040;
  long long n_ratings = 1000209;
  int n_movies = 3883;
};

void generate(const std::filesystem::path& dir, const Options& opts = {});

}  // namespace ml1m_synth
