#include "synthetic_ml1m.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "lmmrec/rng.hpp"

namespace ml1m_synth {

namespace {

using lmmrec::Rng;

constexpr int kAgeCodes[7] = {1, 18, 25, 35, 45, 50, 56};
constexpr double kAgeShare[7] = {0.037, 0.183, 0.347, 0.197,
                                 0.091, 0.082, 0.063};
constexpr double kMaleShare = 0.717;

// occupation head counts in a 6040-user population (profile shaped like
// the real survey: students, engineers and managers dominate)
constexpr int kOccCount6040[21] = {711, 528, 267, 173, 759, 112, 236,
                                   679, 17,  92,  195, 129, 388, 142,
                                   302, 144, 241, 502, 70,  72,  281};

const char* kGenres[18] = {"Action",   "Adventure", "Animation",
                           "Children's", "Comedy",  "Crime",
                           "Documentary", "Drama",  "Fantasy",
                           "Film-Noir", "Horror",   "Musical",
                           "Mystery",  "Romance",   "Sci-Fi",
                           "Thriller", "War",       "Western"};
constexpr double kGenreWeight[18] = {0.35, 0.18, 0.06, 0.10, 0.50, 0.10,
                                     0.05, 0.60, 0.05, 0.03, 0.12, 0.07,
                                     0.06, 0.20, 0.14, 0.25, 0.08, 0.04};
constexpr int kMusical = 11;
constexpr int kHorror = 10;
constexpr int kArtist = 2;      // occupation code
constexpr int kCraftsman = 18;  // tradesman/craftsman

constexpr int kJurassicParkId = 1580;
constexpr int kJurassicParkRaters = 2672;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Expected value of clamp(round(X), 1, 5) for X ~ N(mu, s^2).
double discretized_mean(double mu, double s) {
  double e = 1.0 * normal_cdf((1.5 - mu) / s);
  for (int k = 2; k <= 4; ++k)
    e += k * (normal_cdf((k + 0.5 - mu) / s) - normal_cdf((k - 0.5 - mu) / s));
  e += 5.0 * (1.0 - normal_cdf((4.5 - mu) / s));
  return e;
}

// Latent location whose discretized mean hits the target.
double solve_latent_mean(double target, double s) {
  double lo = 0.0, hi = 6.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (discretized_mean(mid, s) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

int discretize(double latent) {
  const int r = static_cast<int>(std::lround(latent));
  return std::clamp(r, 1, 5);
}

// counts per category matching `share` with an exact total
std::vector<int> apportioned(const std::vector<double>& share, int total) {
  std::vector<int> counts(share.size());
  int assigned = 0;
  for (std::size_t i = 0; i < share.size(); ++i) {
    counts[i] = static_cast<int>(std::floor(share[i] * total));
    assigned += counts[i];
  }
  for (std::size_t i = 0; assigned < total; i = (i + 1) % share.size()) {
    ++counts[i];
    ++assigned;
  }
  return counts;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size() - 1; i > 0; --i)
    std::swap(v[i], v[rng.index(i + 1)]);
}

struct World {
  // per-genre effect tables
  std::array<double, 18> base{};
  std::array<std::array<double, 7>, 18> age{};
  std::array<std::array<double, 21>, 18> occ{};
  std::array<double, 18> gender_delta{};  // male - female

  // Jurassic Park
  std::array<double, 2> jp_gender_mu{};  // absolute latent location, M then F
  std::array<double, 7> jp_age{};
  std::array<double, 21> jp_occ{};

  double noise_sd = 0.85;
  double user_bias_sd = 0.20;
  double movie_bias_sd = 0.15;
};

World make_world(Rng& rng) {
  World w;
  for (int g = 0; g < 18; ++g) {
    w.base[g] = 3.55 + rng.normal(0.0, 0.08);
    for (int b = 0; b < 7; ++b) w.age[g][b] = rng.normal(0.0, 0.18);
    for (int o = 0; o < 21; ++o) w.occ[g][o] = rng.normal(0.0, 0.20);
    w.gender_delta[g] = rng.normal(0.0, 0.12);
  }
  // Musical: appreciation increases with age; artists lead.
  const double musical_ladder[7] = {-0.30, -0.20, -0.10, 0.0, 0.10, 0.20, 0.30};
  for (int b = 0; b < 7; ++b) w.age[kMusical][b] = musical_ladder[b];
  w.occ[kMusical][kArtist] = 0.45;
  // Horror: leans young; tradesman/craftsman on top.
  const double horror_ladder[7] = {0.25, 0.17, 0.08, 0.0, -0.08, -0.17, -0.25};
  for (int b = 0; b < 7; ++b) w.age[kHorror][b] = horror_ladder[b];
  w.occ[kHorror][kCraftsman] = 0.40;

  // Jurassic Park: age profile strong enough for the nested-model
  // comparison, occupation effects mild, gender gap pinned to the target
  // discretized means.
  const double jp_ladder[7] = {-0.165, -0.110, -0.055, 0.0, 0.055, 0.110, 0.165};
  double age_mean = 0.0, age_msq = 0.0;
  for (int b = 0; b < 7; ++b) {
    w.jp_age[b] = jp_ladder[b];
    age_mean += kAgeShare[b] * jp_ladder[b];
    age_msq += kAgeShare[b] * jp_ladder[b] * jp_ladder[b];
  }
  double occ_mean = 0.0, occ_msq = 0.0;
  for (int o = 0; o < 21; ++o) {
    w.jp_occ[o] = rng.normal(0.0, 0.107);
    const double share = kOccCount6040[o] / 6040.0;
    occ_mean += share * w.jp_occ[o];
    occ_msq += share * w.jp_occ[o] * w.jp_occ[o];
  }
  const double mix_var = (age_msq - age_mean * age_mean) +
                         (occ_msq - occ_mean * occ_mean) +
                         w.user_bias_sd * w.user_bias_sd +
                         w.noise_sd * w.noise_sd;
  const double mix_shift = age_mean + occ_mean;
  const double s = std::sqrt(mix_var);
  w.jp_gender_mu[0] = solve_latent_mean(3.8142, s) - mix_shift;
  w.jp_gender_mu[1] = solve_latent_mean(3.5794, s) - mix_shift;
  return w;
}

struct UserTraits {
  int age_idx = 0;
  int occ = 0;
  int gender = 0;  // 0 = M, 1 = F
  double bias = 0.0;
};

}  // namespace

void generate(const std::filesystem::path& dir, const Options& opts) {
  if (opts.n_users < 100 || opts.n_movies < 50 ||
      opts.n_ratings < 25LL * opts.n_users ||
      opts.n_ratings > opts.n_users * ((2LL * (opts.n_movies - 1)) / 3))
    throw std::invalid_argument("ml1m_synth: inconsistent options");
  const int jp_id =
      opts.n_movies >= kJurassicParkId ? kJurassicParkId : opts.n_movies / 2;
  const int jp_raters = std::min(kJurassicParkRaters, opts.n_users / 2);
  std::filesystem::create_directories(dir);
  Rng rng(opts.seed);
  const World world = make_world(rng);

  // ---- users ----------------------------------------------------------
  const int n_users = opts.n_users;
  std::vector<int> age_pool, occ_pool, gender_pool;
  {
    std::vector<double> share(kAgeShare, kAgeShare + 7);
    const std::vector<int> counts = apportioned(share, n_users);
    for (int b = 0; b < 7; ++b)
      age_pool.insert(age_pool.end(), counts[b], b);

    std::vector<double> occ_share(21);
    for (int o = 0; o < 21; ++o) occ_share[o] = kOccCount6040[o] / 6040.0;
    const std::vector<int> occ_counts = apportioned(occ_share, n_users);
    for (int o = 0; o < 21; ++o)
      occ_pool.insert(occ_pool.end(), occ_counts[o], o);

    const int n_male = static_cast<int>(std::lround(kMaleShare * n_users));
    gender_pool.assign(n_users, 1);
    std::fill(gender_pool.begin(), gender_pool.begin() + n_male, 0);

    shuffle_vec(age_pool, rng);
    shuffle_vec(occ_pool, rng);
    shuffle_vec(gender_pool, rng);
  }

  std::vector<UserTraits> users(n_users);
  {
    std::ofstream out(dir / "users.dat", std::ios::binary);
    for (int u = 0; u < n_users; ++u) {
      users[u].age_idx = age_pool[u];
      users[u].occ = occ_pool[u];
      users[u].gender = gender_pool[u];
      users[u].bias = rng.normal(0.0, world.user_bias_sd);
      out << (u + 1) << "::" << (users[u].gender == 0 ? 'M' : 'F') << "::"
          << kAgeCodes[users[u].age_idx] << "::" << users[u].occ << "::"
          << (10000 + rng.index(89999)) << '\n';
    }
  }

  // ---- movies ---------------------------------------------------------
  const int n_movies = opts.n_movies;
  std::vector<std::vector<int>> movie_genres(n_movies);
  std::vector<double> movie_bias(n_movies);
  std::vector<double> movie_weight(n_movies);
  {
    const double total_gw =
        std::accumulate(kGenreWeight, kGenreWeight + 18, 0.0);
    auto draw_genre = [&](const std::unordered_set<int>& taken) {
      for (;;) {
        double t = rng.uniform01() * total_gw;
        for (int g = 0; g < 18; ++g) {
          t -= kGenreWeight[g];
          if (t <= 0.0) {
            if (!taken.count(g)) return g;
            break;
          }
        }
      }
    };
    std::vector<int> pop_rank(n_movies);
    std::iota(pop_rank.begin(), pop_rank.end(), 0);
    shuffle_vec(pop_rank, rng);

    std::ofstream out(dir / "movies.dat", std::ios::binary);
    for (int m = 0; m < n_movies; ++m) {
      const int movie_id = m + 1;
      movie_bias[m] = rng.normal(0.0, world.movie_bias_sd);
      movie_weight[m] = 1.0 / std::pow(1.0 + pop_rank[m], 0.8);

      if (movie_id == jp_id) {
        movie_genres[m] = {0, 1, 14};  // Action, Adventure, Sci-Fi
        movie_weight[m] = 0.0;         // raters are assigned separately
        out << movie_id << "::Jurassic Park (1993)::Action|Adventure|Sci-Fi\n";
        continue;
      }

      const double roll = rng.uniform01();
      const int n_genres = roll < 0.60 ? 1 : (roll < 0.90 ? 2 : 3);
      std::unordered_set<int> taken;
      std::vector<int> gs;
      for (int i = 0; i < n_genres; ++i) {
        const int g = draw_genre(taken);
        taken.insert(g);
        gs.push_back(g);
      }
      movie_genres[m] = gs;

      out << movie_id << "::Synth Film " << movie_id << " ("
          << (1930 + rng.index(70)) << ")::";
      for (std::size_t i = 0; i < gs.size(); ++i)
        out << (i ? "|" : "") << kGenres[gs[static_cast<std::size_t>(i)]];
      out << '\n';
    }
  }

  // ---- rating budgets (exact total) ------------------------------------
  // cap well below the catalog size so the no-repeat sampler cannot stall
  const long long total_ratings = opts.n_ratings;
  const long long max_budget =
      std::min<long long>(1500, (2LL * (n_movies - 1)) / 3);
  std::vector<long long> budget(n_users);
  {
    std::vector<double> raw(n_users);
    double raw_sum = 0.0;
    for (int u = 0; u < n_users; ++u) {
      raw[u] = std::exp(rng.normal(4.45, 1.0));
      raw_sum += raw[u];
    }
    long long assigned = 0;
    for (int u = 0; u < n_users; ++u) {
      budget[u] = std::clamp<long long>(
          static_cast<long long>(std::lround(
              raw[u] / raw_sum * static_cast<double>(total_ratings))),
          20, max_budget);
      assigned += budget[u];
    }
    for (int u = 0; assigned != total_ratings;
         u = (u + 1) % n_users) {
      if (assigned < total_ratings && budget[u] < max_budget) {
        ++budget[u];
        ++assigned;
      } else if (assigned > total_ratings && budget[u] > 20) {
        --budget[u];
        --assigned;
      }
    }
  }

  // ---- who rates Jurassic Park -----------------------------------------
  std::vector<char> rates_jp(n_users, 0);
  {
    std::vector<int> ids(n_users);
    std::iota(ids.begin(), ids.end(), 0);
    shuffle_vec(ids, rng);
    for (int i = 0; i < jp_raters; ++i) rates_jp[ids[i]] = 1;
  }

  // ---- ratings ----------------------------------------------------------
  const double total_w =
      std::accumulate(movie_weight.begin(), movie_weight.end(), 0.0);
  std::vector<double> cum_w(movie_weight.size());
  std::partial_sum(movie_weight.begin(), movie_weight.end(), cum_w.begin());
  auto draw_movie = [&](const std::unordered_set<int>& seen) {
    for (;;) {
      const double t = rng.uniform01() * total_w;
      const auto it = std::lower_bound(cum_w.begin(), cum_w.end(), t);
      const int m = static_cast<int>(it - cum_w.begin());
      if (!seen.count(m)) return m;
    }
  };

  std::ofstream out(dir / "ratings.dat", std::ios::binary);
  for (int u = 0; u < n_users; ++u) {
    const UserTraits& tr = users[u];
    long long generic = budget[u] - (rates_jp[u] ? 1 : 0);
    std::unordered_set<int> seen{jp_id - 1};
    std::vector<int> picks;
    picks.reserve(static_cast<std::size_t>(generic) + 1);
    for (long long i = 0; i < generic; ++i) {
      const int m = draw_movie(seen);
      seen.insert(m);
      picks.push_back(m);
    }
    if (rates_jp[u]) picks.push_back(jp_id - 1);
    std::sort(picks.begin(), picks.end());

    for (int m : picks) {
      double latent;
      if (m == jp_id - 1) {
        latent = world.jp_gender_mu[tr.gender] + world.jp_age[tr.age_idx] +
                 world.jp_occ[tr.occ] + tr.bias +
                 rng.normal(0.0, world.noise_sd);
      } else {
        double blend = 0.0;
        for (int g : movie_genres[m])
          blend += world.base[g] + world.age[g][tr.age_idx] +
                   world.occ[g][tr.occ] +
                   (tr.gender == 0 ? 0.5 : -0.5) * world.gender_delta[g];
        blend /= static_cast<double>(movie_genres[m].size());
        latent = blend + movie_bias[m] + tr.bias +
                 rng.normal(0.0, world.noise_sd);
      }
      out << (u + 1) << "::" << (m + 1) << "::" << discretize(latent)
          << "::" << (956700000 + rng.index(48000000)) << '\n';
    }
  }
}

}  // namespace ml1m_synth
