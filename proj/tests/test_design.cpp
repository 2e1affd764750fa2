#include <doctest.h>

#include <Eigen/Dense>

#include "lmmrec/design.hpp"
#include "lmmrec/errors.hpp"
#include "lmmrec/formula.hpp"
#include "lmmrec/rng.hpp"
#include "support/oracles.hpp"

using lmmrec::DataError;
using lmmrec::DesignMatrices;
using lmmrec::Factor;
using lmmrec::ObservationTable;
using lmmrec::build_design;
using lmmrec::detect_aliasing;
using lmmrec::parse_formula;

namespace {

Eigen::SparseMatrix<double> sparse_from(const Eigen::MatrixXd& m) {
  return m.sparseView();
}

// Demographic-shaped table: 7 age bands, 21 occupations, 2 genders.
ObservationTable demo_table(Eigen::Index n_rows, std::uint64_t seed) {
  ObservationTable t;
  Factor age{"age", {}};
  for (int i = 0; i < 7; ++i) age.levels.push_back("a" + std::to_string(i));
  Factor occ{"occupation", {}};
  for (int i = 0; i < 21; ++i) occ.levels.push_back("o" + std::to_string(i));
  Factor gender{"gender", {"M", "F"}};
  t.factors = {age, occ, gender};
  lmmrec::Rng rng(seed);
  for (Eigen::Index r = 0; r < n_rows; ++r)
    t.add_row(1.0 + static_cast<double>(rng.index(5)),
              {static_cast<std::int32_t>(rng.index(7)),
               static_cast<std::int32_t>(rng.index(21)),
               static_cast<std::int32_t>(rng.index(2))});
  return t;
}

}  // namespace

TEST_CASE("single-movie model shapes: X and Z dimensions") {
  const ObservationTable t = demo_table(200, 11);

  const DesignMatrices m1 =
      build_design(parse_formula("y ~ -1 + age + (1|occupation)"), t);
  CHECK(m1.X.cols() == 7);
  REQUIRE(m1.z_blocks.size() == 1);
  CHECK(m1.z_blocks[0].Z.cols() == 21);

  const DesignMatrices m2 =
      build_design(parse_formula("y ~ -1 + occupation + (1|age)"), t);
  CHECK(m2.X.cols() == 21);
  REQUIRE(m2.z_blocks.size() == 1);
  CHECK(m2.z_blocks[0].Z.cols() == 7);

  const DesignMatrices m6 = build_design(
      parse_formula("y ~ -1 + occupation + (1|age) + (1|gender)"), t);
  Eigen::Index q = 0;
  for (const auto& b : m6.z_blocks) q += b.Z.cols();
  CHECK(q == 9);  // 7 age + 2 gender columns in the composed Z
}

TEST_CASE("intercept-only design") {
  ObservationTable t;
  t.factors = {Factor{"g", {"u", "v"}}};
  t.add_row(1.0, {0});
  t.add_row(2.0, {1});
  t.add_row(3.0, {0});
  const DesignMatrices d = build_design(parse_formula("y ~ 1"), t);
  CHECK(d.X.cols() == 1);
  CHECK(Eigen::MatrixXd(d.X).isOnes());
  CHECK(d.z_blocks.empty());
  CHECK(d.y(0) == 1.0);
  CHECK(d.y(2) == 3.0);
}

TEST_CASE("two dummy-coded fixed factors alias exactly one column") {
  ObservationTable t;
  t.factors = {Factor{"a", {"a0", "a1"}}, Factor{"b", {"b0", "b1"}}};
  t.add_row(1.0, {0, 0});
  t.add_row(2.0, {0, 1});
  t.add_row(3.0, {1, 0});
  t.add_row(4.0, {1, 1});
  const DesignMatrices d = build_design(parse_formula("y ~ -1 + a + b"), t);
  CHECK(d.X.cols() == 4);
  const Eigen::MatrixXd x(d.X);
  CHECK(x.rowwise().sum().isConstant(2.0));
  // rank of [A | B] with both full dummy codings is 3
  CHECK(d.kept_columns.size() == 3);
  CHECK(d.dropped_labels().size() == 1);
}

TEST_CASE("detect_aliasing basics") {
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  CHECK(detect_aliasing(sparse_from(eye)) ==
        std::vector<Eigen::Index>{0, 1, 2});

  // [ones | two-level dummy]: the third column is column0 - column1
  Eigen::MatrixXd m(4, 3);
  m << 1, 1, 0, 1, 1, 0, 1, 0, 1, 1, 0, 1;
  CHECK(detect_aliasing(sparse_from(m)) == std::vector<Eigen::Index>{0, 1});

  Eigen::MatrixXd dup(3, 2);
  dup << 1, 1, 2, 2, 3, 3;
  CHECK(detect_aliasing(sparse_from(dup)) == std::vector<Eigen::Index>{0});

  CHECK(detect_aliasing(sparse_from(Eigen::MatrixXd::Zero(3, 2))).empty());
}

TEST_CASE("single fixed factor without intercept: rows sum to one, nothing dropped") {
  // round-robin codes so every level is observed
  ObservationTable t = demo_table(0, 23);
  lmmrec::Rng rng(23);
  for (int r = 0; r < 63; ++r)
    t.add_row(1.0 + static_cast<double>(rng.index(5)),
              {static_cast<std::int32_t>(r % 7),
               static_cast<std::int32_t>(r % 21),
               static_cast<std::int32_t>(r % 2)});
  const DesignMatrices d =
      build_design(parse_formula("y ~ -1 + occupation"), t);
  const Eigen::MatrixXd x(d.X);
  CHECK(x.rowwise().sum().isConstant(1.0));
  CHECK(d.kept_columns.size() == 21);
}

TEST_CASE("z blocks partition the rows") {
  const ObservationTable t = demo_table(80, 29);
  const DesignMatrices d = build_design(
      parse_formula("y ~ -1 + occupation + (1|age) + (1|gender)"), t);
  for (const auto& blk : d.z_blocks) {
    const Eigen::MatrixXd z(blk.Z);
    CHECK(z.rowwise().sum().isConstant(1.0));
  }
}

TEST_CASE("build_design is deterministic") {
  const ObservationTable t = demo_table(50, 31);
  const auto f = parse_formula("y ~ -1 + age + (1|occupation)");
  const DesignMatrices d1 = build_design(f, t);
  const DesignMatrices d2 = build_design(f, t);
  CHECK((Eigen::MatrixXd(d1.X) - Eigen::MatrixXd(d2.X)).norm() == 0.0);
  CHECK(d1.kept_columns == d2.kept_columns);
  CHECK(d1.x_labels == d2.x_labels);
}

TEST_CASE("kept columns have full rank (random designs)") {
  lmmrec::Rng rng(47);
  for (int rep = 0; rep < 25; ++rep) {
    const auto inst = oracle::random_instance(rng, 40);
    const DesignMatrices d = build_design(inst.formula, inst.table);
    Eigen::MatrixXd xk(d.n_obs(), d.n_fixed_kept());
    const Eigen::MatrixXd full(d.X);
    for (Eigen::Index c = 0; c < d.n_fixed_kept(); ++c)
      xk.col(c) = full.col(d.kept_columns[static_cast<std::size_t>(c)]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(xk);
    CHECK(lu.rank() == d.n_fixed_kept());
  }
}

TEST_CASE("design errors") {
  const ObservationTable t = demo_table(10, 3);
  CHECK_THROWS_AS(build_design(parse_formula("y ~ -1 + nosuch"), t),
                  DataError);
  CHECK_THROWS_AS(build_design(parse_formula("y ~ 1 + (1|nosuch)"), t),
                  DataError);
  ObservationTable empty;
  empty.factors = {Factor{"g", {"u"}}};
  CHECK_THROWS_AS(build_design(parse_formula("y ~ 1"), empty), DataError);
}
