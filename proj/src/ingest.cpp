#include "lmmrec/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_set>

#include "lmmrec/errors.hpp"

namespace lmmrec {

const std::vector<std::pair<int, std::string>>& age_bands() {
  static const std::vector<std::pair<int, std::string>> bands = {
      {1, "Under 18"}, {18, "18-24"}, {25, "25-34"}, {35, "35-44"},
      {45, "45-49"},   {50, "50-55"}, {56, "56+"}};
  return bands;
}

const std::vector<std::string>& occupation_labels() {
  static const std::vector<std::string> labels = {
      "other or not specified",
      "academic/educator",
      "artist",
      "clerical/admin",
      "college/grad student",
      "customer service",
      "doctor/health care",
      "executive/managerial",
      "farmer",
      "homemaker",
      "K-12 student",
      "lawyer",
      "programmer",
      "retired",
      "sales/marketing",
      "scientist",
      "self-employed",
      "technician/engineer",
      "tradesman/craftsman",
      "unemployed",
      "writer"};
  return labels;
}

namespace {

int age_band_index(int code) {
  const auto& bands = age_bands();
  for (std::size_t i = 0; i < bands.size(); ++i)
    if (bands[i].first == code) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t next = line.find("::", pos);
    if (next == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 2;
  }
  return fields;
}

[[noreturn]] void bad_line(const std::string& file, std::size_t line_no,
                           const std::string& why) {
  throw DataError(file + " line " + std::to_string(line_no) + ": " + why);
}

long long parse_int(const std::string& s, const std::string& file,
                    std::size_t line_no, const char* what) {
  long long value = 0;
  const auto [ptr, ec] =
      std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    bad_line(file, line_no, std::string("malformed ") + what + " '" + s + "'");
  return value;
}

std::string latin1_to_utf8(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (unsigned char c : in) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(line, line_no);
  }
}

}  // namespace

MovieLens load_movielens(const std::filesystem::path& dir) {
  MovieLens data;
  const std::string users_file = (dir / "users.dat").string();
  const std::string movies_file = (dir / "movies.dat").string();
  const std::string ratings_file = (dir / "ratings.dat").string();

  for_each_line(users_file, [&](const std::string& line, std::size_t no) {
    const auto f = split_record(line);
    if (f.size() != 5) bad_line(users_file, no, "expected 5 '::' fields");
    UserRecord u;
    u.user_id = static_cast<int>(parse_int(f[0], users_file, no, "user id"));
    if (f[1] != "M" && f[1] != "F")
      bad_line(users_file, no, "gender must be M or F, got '" + f[1] + "'");
    u.gender = f[1][0];
    u.age_band = static_cast<int>(parse_int(f[2], users_file, no, "age band"));
    if (age_band_index(u.age_band) < 0)
      bad_line(users_file, no,
               "age band " + std::to_string(u.age_band) + " is not one of "
               "{1,18,25,35,45,50,56}");
    u.occupation =
        static_cast<int>(parse_int(f[3], users_file, no, "occupation"));
    if (u.occupation < 0 || u.occupation > 20)
      bad_line(users_file, no, "occupation code " +
                                   std::to_string(u.occupation) +
                                   " outside 0..20");
    u.zip = f[4];
    if (!data.user_index.emplace(u.user_id, data.users.size()).second)
      bad_line(users_file, no,
               "duplicate user id " + std::to_string(u.user_id));
    data.users.push_back(std::move(u));
  });

  for_each_line(movies_file, [&](const std::string& line, std::size_t no) {
    const auto f = split_record(line);
    if (f.size() != 3) bad_line(movies_file, no, "expected 3 '::' fields");
    MovieRecord m;
    m.movie_id = static_cast<int>(parse_int(f[0], movies_file, no, "movie id"));
    m.title = latin1_to_utf8(f[1]);
    std::size_t pos = 0;
    const std::string& genres = f[2];
    while (pos <= genres.size()) {
      const std::size_t next = genres.find('|', pos);
      const std::string g = genres.substr(
          pos, next == std::string::npos ? std::string::npos : next - pos);
      if (g.empty()) bad_line(movies_file, no, "empty genre label");
      m.genres.push_back(g);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (m.genres.empty()) bad_line(movies_file, no, "no genres");
    if (!data.movie_index.emplace(m.movie_id, data.movies.size()).second)
      bad_line(movies_file, no,
               "duplicate movie id " + std::to_string(m.movie_id));
    data.movies.push_back(std::move(m));
  });

  for_each_line(ratings_file, [&](const std::string& line, std::size_t no) {
    const auto f = split_record(line);
    if (f.size() != 4) bad_line(ratings_file, no, "expected 4 '::' fields");
    RatingRecord r;
    r.user_id = static_cast<int>(parse_int(f[0], ratings_file, no, "user id"));
    r.movie_id =
        static_cast<int>(parse_int(f[1], ratings_file, no, "movie id"));
    r.rating = static_cast<int>(parse_int(f[2], ratings_file, no, "rating"));
    if (r.rating < 1 || r.rating > 5)
      bad_line(ratings_file, no,
               "rating " + std::to_string(r.rating) + " outside 1..5");
    r.timestamp = parse_int(f[3], ratings_file, no, "timestamp");
    data.ratings.push_back(r);
  });

  return data;
}

std::map<std::string, std::vector<int>> expand_genres(
    const std::vector<MovieRecord>& movies) {
  std::map<std::string, std::vector<int>> buckets;
  for (const auto& m : movies)
    for (const auto& g : m.genres) buckets[g].push_back(m.movie_id);
  return buckets;
}

int resolve_movie_title(const MovieLens& data, const std::string& title) {
  for (const auto& m : data.movies)
    if (m.title == title) return m.movie_id;
  throw DataError("no movie titled '" + title +
                  "' (titles match exactly, including the year)");
}

ObservationTable table_for_movies(const MovieLens& data,
                                  const std::vector<int>& movie_ids) {
  const std::unordered_set<int> wanted(movie_ids.begin(), movie_ids.end());

  ObservationTable t;
  {
    Factor age{"age", {}};
    for (const auto& [code, label] : age_bands()) age.levels.push_back(label);
    Factor occupation{"occupation", occupation_labels()};
    Factor gender{"gender", {"M", "F"}};
    t.factors = {std::move(age), std::move(occupation), std::move(gender)};
  }

  for (const auto& r : data.ratings) {
    if (!wanted.count(r.movie_id)) continue;
    const auto it = data.user_index.find(r.user_id);
    if (it == data.user_index.end())
      throw DataError("rating references user " + std::to_string(r.user_id) +
                      " that is missing from users.dat");
    const UserRecord& u = data.users[it->second];
    t.add_row(static_cast<double>(r.rating),
              {static_cast<std::int32_t>(age_band_index(u.age_band)),
               static_cast<std::int32_t>(u.occupation),
               static_cast<std::int32_t>(u.gender == 'M' ? 0 : 1)});
  }
  if (t.n_rows() == 0)
    throw DataError("selection matched no ratings");
  return t;
}

ObservationTable build_observation_table(const MovieLens& data,
                                         const Selector& sel) {
  const int set = (sel.movie_id ? 1 : 0) + (sel.movie_title ? 1 : 0) +
                  (sel.genre ? 1 : 0);
  if (set != 1)
    throw DataError("selector must name exactly one of movie id, title, "
                    "or genre");
  if (sel.movie_id) return table_for_movies(data, {*sel.movie_id});
  if (sel.movie_title)
    return table_for_movies(data,
                            {resolve_movie_title(data, *sel.movie_title)});
  const auto buckets = expand_genres(data.movies);
  const auto it = buckets.find(*sel.genre);
  if (it == buckets.end())
    throw DataError("no genre '" + *sel.genre + "' in movies.dat");
  return table_for_movies(data, it->second);
}

}  // namespace lmmrec
