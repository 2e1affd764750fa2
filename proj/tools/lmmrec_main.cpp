#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "lmmrec/errors.hpp"
#include "lmmrec/eval.hpp"
#include "lmmrec/formula.hpp"
#include "lmmrec/ingest.hpp"
#include "lmmrec/recommend.hpp"
#include "lmmrec/reml.hpp"
#include "lmmrec/stats.hpp"

using json = nlohmann::json;
using namespace lmmrec;

namespace {

// CSV carries 6 significant digits for humans and plots; JSON keeps full
// double precision for machines.
std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(header[i]);
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(row[i]);
      }
      out += '\n';
    }
    return out;
  }
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write to " + out_path);
  out << text;
}

struct CommonOpts {
  std::string data_dir;
  std::string format = "csv";
  std::string out_path;
  std::string movie_title;
  int movie_id = 0;
  std::string genre;

  bool has_selector() const {
    return !movie_title.empty() || movie_id > 0 || !genre.empty();
  }
  Selector selector() const {
    Selector s;
    if (movie_id > 0) s.movie_id = movie_id;
    else if (!movie_title.empty()) s.movie_title = movie_title;
    else if (!genre.empty()) s.genre = genre;
    else throw DataError("no movie/genre selector given");
    return s;
  }
  std::string selector_label() const {
    if (movie_id > 0) return "movie:" + std::to_string(movie_id);
    if (!movie_title.empty()) return movie_title;
    return genre;
  }
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_selector = true) {
  // required flags are validated by hand after parsing: CLI11 2.4 checks
  // required() before config-file values reach an invoked subcommand
  cmd->add_option("--data", o.data_dir, "MovieLens-1M directory")
      ->envname("LMMREC_DATA");
  cmd->add_option("--format", o.format, "output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", o.out_path, "write output to a file");
  if (with_selector) {
    cmd->add_option("--movie", o.movie_title, "movie title, exact match");
    cmd->add_option("--movie-id", o.movie_id, "movie id");
    cmd->add_option("--genre", o.genre, "genre name");
  }
}

MovieLens load_data(const CommonOpts& o) {
  if (o.data_dir.empty())
    throw ParseError("missing --data (or the LMMREC_DATA environment "
                     "variable)");
  return load_movielens(o.data_dir);
}

void need(const std::string& value, const char* flag) {
  if (value.empty())
    throw ParseError(std::string("missing ") + flag);
}

// Accept either the report label or the raw dataset code for a level
// (e.g. age "25" -> "25-34", occupation "2" -> "artist").
std::string resolve_level(const std::string& factor, const std::string& value) {
  if (factor == "age") {
    for (const auto& [code, label] : age_bands())
      if (label == value || std::to_string(code) == value) return label;
  } else if (factor == "occupation") {
    const auto& labels = occupation_labels();
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == value || std::to_string(i) == value) return labels[i];
  }
  return value;  // gender and anything else: exact labels only
}

GroupCell parse_cell(const std::string& text) {
  GroupCell cell;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw ParseError("cell entry '" + part + "' is not factor=level");
    const std::string factor = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    cell.values.emplace_back(factor, resolve_level(factor, value));
  }
  return cell;
}

// ---- fit ----------------------------------------------------------------

json fit_to_json(const FitResult& fit, const TestReport& report,
                 const Eigen::MatrixXd& cov) {
  json j;
  j["model"] = report.model_label;
  j["n_obs"] = fit.n_obs;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["sigma2"] = fit.theta.sigma2;
  j["variance_components"] = json::array();
  for (std::size_t k = 0; k < fit.random_terms.size(); ++k) {
    j["variance_components"].push_back(
        {{"factor", fit.random_terms[k].factor},
         {"gamma", fit.theta.gamma(static_cast<Eigen::Index>(k))},
         {"sigma2_u", fit.theta.sigma2 *
                          fit.theta.gamma(static_cast<Eigen::Index>(k))}});
  }
  j["fixed"] = json::array();
  auto push_fixed = [&](const std::string& factor, const std::string& level,
                        Eigen::Index coef) {
    j["fixed"].push_back({{"factor", factor},
                          {"level", level},
                          {"estimate", fit.tau_hat(coef)},
                          {"std_error", std::sqrt(cov(coef, coef))}});
  };
  if (fit.intercept_coef)
    push_fixed("intercept", "intercept", *fit.intercept_coef);
  for (const auto& term : fit.fixed_terms)
    for (std::size_t lev = 0; lev < term.levels.size(); ++lev)
      if (term.coef[lev] >= 0)
        push_fixed(term.factor, term.levels[lev], term.coef[lev]);
  j["aliased"] = fit.dropped_columns;

  j["random"] = json::array();
  Eigen::Index active_pos = fit.n_fixed();
  for (const auto& term : fit.random_terms) {
    for (std::size_t lev = 0; lev < term.levels.size(); ++lev) {
      json row = {{"factor", term.factor},
                  {"level", term.levels[lev]},
                  {"estimate",
                   fit.u_hat(term.offset + static_cast<Eigen::Index>(lev))}};
      if (term.active) {
        row["std_error"] = std::sqrt(
            cov(active_pos + static_cast<Eigen::Index>(lev),
                active_pos + static_cast<Eigen::Index>(lev)));
      }
      j["random"].push_back(row);
    }
    if (term.active)
      active_pos += static_cast<Eigen::Index>(term.levels.size());
  }
  j["stats"] = {{"loglik", report.loglik}, {"aic", report.aic},
                {"bic", report.bic},       {"p_value", report.p_value},
                {"df", report.df}};
  return j;
}

CsvTable fit_to_csv(const FitResult& fit, const TestReport& report,
                    const Eigen::MatrixXd& cov) {
  CsvTable t;
  t.header = {"model", "kind", "factor", "level", "estimate", "std_error"};
  const std::string& model = report.model_label;
  auto row = [&](const std::string& kind, const std::string& factor,
                 const std::string& level, const std::string& est,
                 const std::string& se) {
    t.rows.push_back({model, kind, factor, level, est, se});
  };
  if (fit.intercept_coef)
    row("fixed", "intercept", "intercept", fmt6(fit.tau_hat(*fit.intercept_coef)),
        fmt6(std::sqrt(cov(*fit.intercept_coef, *fit.intercept_coef))));
  for (const auto& term : fit.fixed_terms)
    for (std::size_t lev = 0; lev < term.levels.size(); ++lev) {
      const Eigen::Index coef = term.coef[lev];
      if (coef >= 0)
        row("fixed", term.factor, term.levels[lev], fmt6(fit.tau_hat(coef)),
            fmt6(std::sqrt(cov(coef, coef))));
      else
        row("fixed_aliased", term.factor, term.levels[lev], "", "");
    }
  Eigen::Index active_pos = fit.n_fixed();
  for (const auto& term : fit.random_terms) {
    for (std::size_t lev = 0; lev < term.levels.size(); ++lev) {
      const Eigen::Index idx = term.offset + static_cast<Eigen::Index>(lev);
      std::string se;
      if (term.active)
        se = fmt6(std::sqrt(cov(active_pos + static_cast<Eigen::Index>(lev),
                                active_pos + static_cast<Eigen::Index>(lev))));
      row("random", term.factor, term.levels[lev], fmt6(fit.u_hat(idx)), se);
    }
    if (term.active)
      active_pos += static_cast<Eigen::Index>(term.levels.size());
  }
  for (std::size_t k = 0; k < fit.random_terms.size(); ++k)
    row("variance", fit.random_terms[k].factor, "sigma2_u",
        fmt6(fit.theta.sigma2 * fit.theta.gamma(static_cast<Eigen::Index>(k))),
        "");
  row("variance", "residual", "sigma2", fmt6(fit.theta.sigma2), "");
  row("stat", "", "loglik", fmt6(report.loglik), "");
  row("stat", "", "aic", fmt6(report.aic), "");
  row("stat", "", "bic", fmt6(report.bic), "");
  row("stat", "", "p_value", fmt6(report.p_value), "");
  row("stat", "", "df", std::to_string(report.df), "");
  row("stat", "", "n_obs", std::to_string(fit.n_obs), "");
  row("stat", "", "converged", fit.converged ? "1" : "0", "");
  row("stat", "", "iterations", std::to_string(fit.iterations), "");
  return t;
}

int cmd_fit(const CommonOpts& o, const std::string& formula_text) {
  const ModelFormula f = parse_formula(formula_text);
  const MovieLens data = load_data(o);
  auto table = std::make_shared<const ObservationTable>(
      build_observation_table(data, o.selector()));
  const FitResult fit = fit_reml(f, table);
  const TestReport report = make_test_report(fit);
  const Eigen::MatrixXd cov = estimate_covariance(fit);

  if (o.format == "json")
    emit(fit_to_json(fit, report, cov).dump(2) + "\n", o.out_path);
  else
    emit(fit_to_csv(fit, report, cov).str(), o.out_path);
  return fit.converged ? 0 : 3;
}

// ---- compare --------------------------------------------------------------

int cmd_compare(const CommonOpts& o, const std::string& nested_text,
                const std::string& full_text) {
  const ModelFormula nested_f = parse_formula(nested_text);
  const ModelFormula full_f = parse_formula(full_text);
  const MovieLens data = load_data(o);
  auto table = std::make_shared<const ObservationTable>(
      build_observation_table(data, o.selector()));

  const FitResult nested = fit_reml(nested_f, table);
  const FitResult full = fit_reml(full_f, table);
  const LrtReport lrt = likelihood_ratio_test(nested, full);
  const TestReport rn = make_test_report(nested);
  const TestReport rf = make_test_report(full);

  if (o.format == "json") {
    json j;
    j["models"] = json::array();
    for (const auto* r : {&rn, &rf})
      j["models"].push_back({{"model", r->model_label},
                             {"df", r->df},
                             {"aic", r->aic},
                             {"bic", r->bic},
                             {"loglik", r->loglik},
                             {"wald_p", r->p_value}});
    j["lrt"] = {{"df_nested", lrt.df_nested},
                {"df_full", lrt.df_full},
                {"delta_df", lrt.delta_df},
                {"lr_stat", lrt.lr_stat},
                {"p_value", lrt.p_value},
                {"loglik_ml_nested", lrt.loglik_ml_nested},
                {"loglik_ml_full", lrt.loglik_ml_full},
                {"same_random_structure", lrt.same_random_structure}};
    emit(j.dump(2) + "\n", o.out_path);
  } else {
    CsvTable t;
    t.header = {"model",  "df",      "aic",      "bic",    "loglik",
                "wald_p", "lr_stat", "delta_df", "p_value"};
    t.rows.push_back({rn.model_label, std::to_string(rn.df), fmt6(rn.aic),
                      fmt6(rn.bic), fmt6(rn.loglik), fmt6(rn.p_value),
                      "-----", "-----", "-----"});
    t.rows.push_back({rf.model_label, std::to_string(rf.df), fmt6(rf.aic),
                      fmt6(rf.bic), fmt6(rf.loglik), fmt6(rf.p_value),
                      fmt6(lrt.lr_stat), std::to_string(lrt.delta_df),
                      fmt6(lrt.p_value)});
    std::string text = t.str();
    if (!lrt.same_random_structure)
      text += "# note: random structures differ; the likelihood ratio "
              "compares marginal ML fits\n";
    emit(text, o.out_path);
  }
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

int cmd_evaluate(const CommonOpts& o, const std::string& formula_text,
                 int repeats, double train_fraction, std::uint64_t seed,
                 bool clip, bool all_genres, long long min_ratings) {
  if (repeats < 1) throw ParseError("--repeats must be >= 1");
  const ModelFormula f = parse_formula(formula_text);
  const MovieLens data = load_data(o);

  CrossValidateOptions cv;
  cv.clip = clip;

  std::vector<std::pair<std::string, EvalReport>> reports;
  if (all_genres) {
    const auto buckets = expand_genres(data.movies);
    std::vector<std::pair<std::string, ObservationTable>> targets;
    for (const auto& [genre, ids] : buckets) {
      ObservationTable t = table_for_movies(data, ids);
      if (t.n_rows() >= static_cast<Eigen::Index>(min_ratings))
        targets.emplace_back(genre, std::move(t));
    }
    // independent fits fan out; output order stays by genre name
    std::vector<std::future<EvalReport>> futs;
    futs.reserve(targets.size());
    for (auto& [genre, t] : targets)
      futs.push_back(std::async(std::launch::async, [&, table = &t] {
        return cross_validate(f, *table, repeats, train_fraction, seed, cv);
      }));
    for (std::size_t i = 0; i < targets.size(); ++i)
      reports.emplace_back(targets[i].first, futs[i].get());
  } else {
    const ObservationTable t =
        build_observation_table(data, o.selector());
    reports.emplace_back(o.selector_label(),
                         cross_validate(f, t, repeats, train_fraction, seed, cv));
  }

  if (o.format == "json") {
    json j = json::array();
    for (const auto& [target, r] : reports) {
      json rows = json::array();
      for (const auto& rep : r.repeats)
        rows.push_back({{"repeat", rep.repeat},
                        {"seed", rep.seed},
                        {"mae", rep.mae},
                        {"baseline_mae", rep.baseline_mae},
                        {"n_test", rep.n_test}});
      j.push_back({{"model", r.model_label},
                   {"target", target},
                   {"mae_mean", r.mae_mean},
                   {"mae_min", r.mae_min},
                   {"mae_max", r.mae_max},
                   {"baseline_mean", r.baseline_mean},
                   {"repeats", rows}});
    }
    emit(j.dump(2) + "\n", o.out_path);
  } else {
    CsvTable t;
    t.header = {"model", "target", "repeat", "mae", "baseline_mae", "seed"};
    for (const auto& [target, r] : reports)
      for (const auto& rep : r.repeats)
        t.rows.push_back({r.model_label, target, std::to_string(rep.repeat),
                          fmt6(rep.mae), fmt6(rep.baseline_mae),
                          std::to_string(rep.seed)});
    emit(t.str(), o.out_path);
  }
  return 0;
}

// ---- recommend ---------------------------------------------------------------

int cmd_recommend(const CommonOpts& o, const std::string& formula_text,
                  const std::vector<std::string>& by,
                  const std::string& cell_text, int top,
                  long long min_ratings) {
  const ModelFormula f = parse_formula(formula_text);
  const MovieLens data = load_data(o);

  if (!by.empty()) {
    auto table = std::make_shared<const ObservationTable>(
        build_observation_table(data, o.selector()));
    const FitResult fit = fit_reml(f, table);
    const auto ranking = rank_groups_for_item(fit, by);

    if (o.format == "json") {
      json j = json::array();
      int rank = 1;
      for (const auto& rc : ranking) {
        json cell;
        for (const auto& [factor, level] : rc.cell.values)
          cell[factor] = level;
        j.push_back({{"rank", rank++},
                     {"cell", cell},
                     {"predicted", rc.predicted},
                     {"support", rc.support}});
      }
      emit(j.dump(2) + "\n", o.out_path);
    } else {
      CsvTable t;
      t.header = {"rank"};
      for (const auto& name : by) t.header.push_back(name);
      t.header.push_back("predicted");
      t.header.push_back("support");
      int rank = 1;
      for (const auto& rc : ranking) {
        std::vector<std::string> row{std::to_string(rank++)};
        for (const auto& [factor, level] : rc.cell.values)
          row.push_back(level);
        row.push_back(fmt6(rc.predicted));
        row.push_back(std::to_string(rc.support));
        t.rows.push_back(std::move(row));
      }
      emit(t.str(), o.out_path);
    }
    return 0;
  }

  // cold-start mode: rank genres for a demographic cell
  const GroupCell cell = parse_cell(cell_text);
  const auto buckets = expand_genres(data.movies);
  std::vector<std::pair<std::string, ObservationTable>> targets;
  for (const auto& [genre, ids] : buckets) {
    ObservationTable t = table_for_movies(data, ids);
    if (t.n_rows() >= static_cast<Eigen::Index>(min_ratings))
      targets.emplace_back(genre, std::move(t));
  }
  std::vector<std::future<FitResult>> futs;
  futs.reserve(targets.size());
  for (auto& [genre, t] : targets)
    futs.push_back(std::async(std::launch::async, [&, table = &t] {
      return fit_reml(f, std::make_shared<const ObservationTable>(
                             std::move(*table)));
    }));
  std::map<std::string, FitResult> fits;
  for (std::size_t i = 0; i < targets.size(); ++i)
    fits.emplace(targets[i].first, futs[i].get());

  const auto ranking = rank_items_for_group(fits, cell, top);
  if (o.format == "json") {
    json j = json::array();
    int rank = 1;
    for (const auto& ri : ranking)
      j.push_back({{"rank", rank++},
                   {"genre", ri.item},
                   {"predicted", ri.predicted}});
    emit(j.dump(2) + "\n", o.out_path);
  } else {
    CsvTable t;
    t.header = {"rank", "genre", "predicted"};
    int rank = 1;
    for (const auto& ri : ranking)
      t.rows.push_back(
          {std::to_string(rank++), ri.item, fmt6(ri.predicted)});
    emit(t.str(), o.out_path);
  }
  return 0;
}

// ---- export-table ---------------------------------------------------------

int cmd_export_table(const CommonOpts& o) {
  const MovieLens data = load_data(o);
  const ObservationTable t = build_observation_table(data, o.selector());
  std::ostringstream out;
  t.write_csv(out);
  emit(out.str(), o.out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linear mixed model engine for group recommendation on "
               "MovieLens-1M data"};
  app.require_subcommand(1);
  app.set_config("--config");

  CommonOpts fit_o, cmp_o, eval_o, rec_o, exp_o;
  std::string fit_formula, cmp_nested, cmp_full, eval_formula, rec_formula;
  int eval_repeats = 5, rec_top = 5;
  double eval_fraction = 0.8;
  std::uint64_t eval_seed = 42;
  bool eval_clip = false, eval_all = false;
  long long eval_min = 1, rec_min = 1;
  std::vector<std::string> rec_by;
  std::string rec_cell;

  CLI::App* fit = app.add_subcommand(
      "fit", "fit one model and print estimates and statistics");
  add_common(fit, fit_o);
  fit->add_option("--formula", fit_formula, "model formula");

  CLI::App* cmp = app.add_subcommand(
      "compare", "likelihood-ratio comparison of two nested models");
  add_common(cmp, cmp_o);
  cmp->add_option("--nested", cmp_nested, "nested model formula");
  cmp->add_option("--full", cmp_full, "full model formula");

  CLI::App* ev = app.add_subcommand(
      "evaluate", "cross-validated MAE against the global-mean baseline");
  add_common(ev, eval_o);
  ev->add_option("--formula", eval_formula, "model formula");
  ev->add_option("--repeats", eval_repeats, "holdout repeats");
  ev->add_option("--train-fraction", eval_fraction, "training fraction");
  ev->add_option("--seed", eval_seed, "base split seed");
  ev->add_flag("--clip", eval_clip, "clamp predictions into [1,5]");
  ev->add_flag("--all-genres", eval_all, "sweep every genre bucket");
  ev->add_option("--min-ratings", eval_min,
                 "skip genres with fewer ratings (with --all-genres)");

  CLI::App* rec = app.add_subcommand(
      "recommend", "rank demographic groups for an item, or genres for a "
                   "demographic cell");
  add_common(rec, rec_o);
  rec->add_option("--formula", rec_formula, "model formula");
  rec->add_option("--by", rec_by,
                  "rank the cells of these factors (comma separated)")
      ->delimiter(',');
  rec->add_option("--for", rec_cell,
                  "demographic cell, e.g. \"age=25,gender=M\"");
  rec->add_option("--top", rec_top, "list length for --for mode");
  rec->add_option("--min-ratings", rec_min,
                  "skip genres with fewer ratings (--for mode)");

  CLI::App* exp = app.add_subcommand(
      "export-table", "normalized CSV of the selected observation table");
  add_common(exp, exp_o);

  for (CLI::App* sub : {fit, cmp, ev, rec, exp}) {
    sub->configurable();
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit) {
      need(fit_formula, "--formula");
      return cmd_fit(fit_o, fit_formula);
    }
    if (*cmp) {
      need(cmp_nested, "--nested");
      need(cmp_full, "--full");
      return cmd_compare(cmp_o, cmp_nested, cmp_full);
    }
    if (*ev) {
      need(eval_formula, "--formula");
      return cmd_evaluate(eval_o, eval_formula, eval_repeats, eval_fraction,
                          eval_seed, eval_clip, eval_all, eval_min);
    }
    if (*rec) {
      need(rec_formula, "--formula");
      if (rec_by.empty() == rec_cell.empty())
        throw ParseError("recommend needs exactly one of --by or --for");
      return cmd_recommend(rec_o, rec_formula, rec_by, rec_cell, rec_top,
                           rec_min);
    }
    if (*exp) return cmd_export_table(exp_o);
  } catch (const ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error (ingest/selection): " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
