#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmmrec/errors.hpp"
#include "lmmrec/ingest.hpp"

using namespace lmmrec;
namespace fs = std::filesystem;

namespace {

class FixtureDir {
 public:
  FixtureDir() {
    dir_ = fs::temp_directory_path() /
           ("lmmrec_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter_++));
    fs::create_directories(dir_);
  }
  ~FixtureDir() { fs::remove_all(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
  }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  static inline int counter_ = 0;
};

const char* kUsers =
    "1::F::1::10::48067\n"
    "2::M::56::16::70072\n"
    "3::M::25::15::55117\n"
    "4::F::45::7::02460\n"
    "5::M::25::20::55455\n";

const char* kMovies =
    "1::Toy Story (1995)::Animation|Children's|Comedy\n"
    "2::Jumanji (1995)::Adventure|Children's|Fantasy\n"
    "3::Heat (1995)::Action|Crime|Thriller\n"
    "4::Horror Show, The (1989)::Horror|Thriller\n"
    "5::Solo Musical (1999)::Musical\n";

const char* kRatings =
    "1::1::5::978300760\n"
    "1::3::4::978302109\n"
    "2::1::3::978301968\n"
    "2::4::4::978300275\n"
    "3::4::5::978824291\n"
    "3::5::2::978302268\n"
    "4::1::4::978244808\n"
    "5::2::3::978824351\n";

FixtureDir make_fixture() {
  FixtureDir d;
  d.write("users.dat", kUsers);
  d.write("movies.dat", kMovies);
  d.write("ratings.dat", kRatings);
  return d;
}

}  // namespace

TEST_CASE("load_movielens: record parsing") {
  const FixtureDir d = make_fixture();
  const MovieLens data = load_movielens(d.path());

  REQUIRE(data.users.size() == 5);
  const UserRecord& u = data.users[0];
  CHECK(u.user_id == 1);
  CHECK(u.gender == 'F');
  CHECK(u.age_band == 1);
  CHECK(u.occupation == 10);
  CHECK(occupation_labels()[10] == "K-12 student");
  CHECK(u.zip == "48067");

  REQUIRE(data.movies.size() == 5);
  CHECK(data.movies[3].title == "Horror Show, The (1989)");
  CHECK(data.movies[0].genres ==
        std::vector<std::string>{"Animation", "Children's", "Comedy"});

  REQUIRE(data.ratings.size() == 8);
  CHECK(data.ratings[1].movie_id == 3);
  CHECK(data.ratings[1].rating == 4);
}

TEST_CASE("load_movielens: positioned errors, not silent drops") {
  {
    FixtureDir d = make_fixture();
    d.write("ratings.dat", "1::1::6::978300760\n");
    CHECK_THROWS_WITH_AS(load_movielens(d.path()),
                         doctest::Contains("line 1"), DataError);
  }
  {
    FixtureDir d = make_fixture();
    d.write("users.dat", std::string(kUsers) + "9::X::25::3::11111\n");
    CHECK_THROWS_WITH_AS(load_movielens(d.path()),
                         doctest::Contains("line 6"), DataError);
  }
  {
    FixtureDir d = make_fixture();
    d.write("users.dat", "1::F::19::3::11111\n");  // bad age band
    CHECK_THROWS_AS(load_movielens(d.path()), DataError);
  }
  {
    FixtureDir d = make_fixture();
    d.write("users.dat", "1::F::25::21::11111\n");  // occupation out of range
    CHECK_THROWS_AS(load_movielens(d.path()), DataError);
  }
  {
    FixtureDir d = make_fixture();
    d.write("movies.dat", "7::No Genre Movie (2000)::\n");
    CHECK_THROWS_AS(load_movielens(d.path()), DataError);
  }
  {
    FixtureDir d = make_fixture();
    fs::remove(d.path() / "ratings.dat");
    CHECK_THROWS_AS(load_movielens(d.path()), DataError);
  }
}

TEST_CASE("load_movielens: latin-1 titles become utf-8") {
  FixtureDir d = make_fixture();
  d.write("movies.dat", "8::Les Mis\xe9rables (1995)::Drama\n");
  const MovieLens data = load_movielens(d.path());
  CHECK(data.movies[0].title == "Les Mis\xc3\xa9rables (1995)");
}

TEST_CASE("expand_genres: multi-label expansion") {
  const FixtureDir d = make_fixture();
  const MovieLens data = load_movielens(d.path());
  const auto buckets = expand_genres(data.movies);

  // movie 4 is Horror|Thriller: present in both buckets
  CHECK(std::count(buckets.at("Horror").begin(), buckets.at("Horror").end(),
                   4) == 1);
  CHECK(std::count(buckets.at("Thriller").begin(),
                   buckets.at("Thriller").end(), 4) == 1);
  // single-genre movie: exactly one bucket
  std::size_t appearances = 0;
  for (const auto& [g, ids] : buckets)
    appearances +=
        static_cast<std::size_t>(std::count(ids.begin(), ids.end(), 5));
  CHECK(appearances == 1);

  // counting identity: sum of bucket sizes == sum of genre counts
  std::size_t bucket_total = 0;
  for (const auto& [g, ids] : buckets) bucket_total += ids.size();
  std::size_t genre_total = 0;
  for (const auto& m : data.movies) genre_total += m.genres.size();
  CHECK(bucket_total == genre_total);
}

TEST_CASE("table_for_movies: join and row counts") {
  const FixtureDir d = make_fixture();
  const MovieLens data = load_movielens(d.path());

  const ObservationTable t = table_for_movies(data, {1});
  CHECK(t.n_rows() == 3);  // users 1, 2, 4 rated movie 1
  REQUIRE(t.factors.size() == 3);
  CHECK(t.factors[0].name == "age");
  CHECK(t.factors[0].levels.size() == 7);
  CHECK(t.factors[1].levels.size() == 21);
  CHECK(t.factors[2].levels == std::vector<std::string>{"M", "F"});

  // first row: user 1, F, band "Under 18", K-12 student
  CHECK(t.response[0] == 5.0);
  CHECK(t.factors[0].levels[static_cast<std::size_t>(t.code(0, 0))] ==
        "Under 18");
  CHECK(t.factors[1].levels[static_cast<std::size_t>(t.code(0, 1))] ==
        "K-12 student");
  CHECK(t.factors[2].levels[static_cast<std::size_t>(t.code(0, 2))] == "F");
}

TEST_CASE("table_for_movies: empty selection and dangling users error") {
  const FixtureDir d = make_fixture();
  const MovieLens data = load_movielens(d.path());
  CHECK_THROWS_AS(table_for_movies(data, {999}), DataError);

  FixtureDir d2 = make_fixture();
  d2.write("ratings.dat", "77::1::4::978300760\n");  // no such user
  const MovieLens bad = load_movielens(d2.path());
  CHECK_THROWS_AS(table_for_movies(bad, {1}), DataError);
}

TEST_CASE("selectors: title, id, genre") {
  const FixtureDir d = make_fixture();
  const MovieLens data = load_movielens(d.path());

  CHECK(resolve_movie_title(data, "Heat (1995)") == 3);
  CHECK_THROWS_AS(resolve_movie_title(data, "Heat"), DataError);

  Selector by_title;
  by_title.movie_title = "Toy Story (1995)";
  CHECK(build_observation_table(data, by_title).n_rows() == 3);

  Selector by_genre;
  by_genre.genre = "Thriller";
  CHECK(build_observation_table(data, by_genre).n_rows() == 3);

  Selector none;
  CHECK_THROWS_AS(build_observation_table(data, none), DataError);
  Selector both;
  both.movie_id = 1;
  both.genre = "Horror";
  CHECK_THROWS_AS(build_observation_table(data, both), DataError);
}

TEST_CASE("observation table csv export") {
  const FixtureDir d = make_fixture();
  const MovieLens data = load_movielens(d.path());
  const ObservationTable t = table_for_movies(data, {5});
  std::ostringstream out;
  t.write_csv(out);
  CHECK(out.str() ==
        "response,age,occupation,gender\n"
        "2,25-34,scientist,M\n");
}
