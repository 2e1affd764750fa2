#include <CLI11.hpp>
#include <iostream>

#include "synthetic_ml1m.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Write a deterministic synthetic dataset in MovieLens-1M format "
      "(users.dat, movies.dat, ratings.dat)"};
  std::string out_dir;
  ml1m_synth::Options opts;
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", opts.seed, "generator seed");
  app.add_option("--users", opts.n_users, "number of users");
  app.add_option("--ratings", opts.n_ratings, "number of ratings");
  app.add_option("--movies", opts.n_movies, "number of movies");
  CLI11_PARSE(app, argc, argv);

  try {
    ml1m_synth::generate(out_dir, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}
