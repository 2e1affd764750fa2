#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lmmrec/observation.hpp"

namespace lmmrec {

struct UserRecord {
  int user_id = 0;
  char gender = 'M';   // 'M' or 'F'
  int age_band = 1;    // one of {1, 18, 25, 35, 45, 50, 56}
  int occupation = 0;  // 0..20
  std::string zip;     // parsed, never modeled
};

struct MovieRecord {
  int movie_id = 0;
  std::string title;  // UTF-8 (source files are Latin-1)
  std::vector<std::string> genres;
};

struct RatingRecord {
  int user_id = 0;
  int movie_id = 0;
  int rating = 0;           // 1..5
  long long timestamp = 0;  // parsed, never modeled
};

struct MovieLens {
  std::vector<UserRecord> users;
  std::vector<MovieRecord> movies;
  std::vector<RatingRecord> ratings;
  std::unordered_map<int, std::size_t> user_index;
  std::unordered_map<int, std::size_t> movie_index;
};

/// The seven age bands: code and report label, in ascending order.
const std::vector<std::pair<int, std::string>>& age_bands();
/// Occupation labels indexed by code 0..20.
const std::vector<std::string>& occupation_labels();

/// Load users.dat / movies.dat / ratings.dat ("::"-separated) from dir.
/// Malformed or out-of-range records raise DataError naming the file and
/// line; nothing is silently dropped.
MovieLens load_movielens(const std::filesystem::path& dir);

/// Multi-label expansion: each movie lands in every one of its genre
/// buckets. Keys are sorted genre names.
std::map<std::string, std::vector<int>> expand_genres(
    const std::vector<MovieRecord>& movies);

/// Exact full-title lookup ("Jurassic Park (1993)"). DataError if absent.
int resolve_movie_title(const MovieLens& data, const std::string& title);

/// One row per rating of the given movie set, joined with the rater's
/// demographics. Factors are always age (7 levels), occupation (21) and
/// gender (2) in canonical order. Row order follows ratings-file order.
/// Raises DataError on an empty selection or a rating whose user is
/// missing from users.dat.
ObservationTable table_for_movies(const MovieLens& data,
                                  const std::vector<int>& movie_ids);

struct Selector {
  std::optional<int> movie_id;
  std::optional<std::string> movie_title;
  std::optional<std::string> genre;
};

/// Dispatch on a movie / title / genre selector (exactly one set).
ObservationTable build_observation_table(const MovieLens& data,
                                         const Selector& sel);

}  // namespace lmmrec
