#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lmmrec {

/// Parsed model specification, e.g. "y ~ -1 + age + (1|occupation)".
///
/// fixed_factors are dummy-coded categorical effects; random_factors are
/// per-group random intercepts from (1|name) terms. Identifiers may not
/// repeat across response, fixed and random parts, and a model with no
/// fixed factors must keep the intercept.
struct ModelFormula {
  std::string response;
  bool intercept = true;
  std::vector<std::string> fixed_factors;
  std::vector<std::string> random_factors;

  bool operator==(const ModelFormula&) const = default;
};

/// Parse formula text. Grammar (whitespace-insensitive):
///
///   formula := identifier "~" term ("+" term)*
///   term    := "-1" | "1" | identifier | "(1|" identifier ")"
///
/// "-1" removes the fixed intercept; a bare "1" states it explicitly.
/// Throws ParseError with the offending byte position on any text outside
/// the grammar, on duplicate factors, and on empty models.
ModelFormula parse_formula(std::string_view text);

/// Canonical text form; parse_formula(format_formula(f)) == f.
std::string format_formula(const ModelFormula& f);

}  // namespace lmmrec
