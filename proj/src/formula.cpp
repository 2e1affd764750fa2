#include "lmmrec/formula.hpp"

#include <cctype>
#include <unordered_set>

#include "lmmrec/errors.hpp"

namespace lmmrec {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }

  std::size_t pos() const { return pos_; }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!consume(c))
      throw ParseError(std::string("expected '") + c + "' " + what, pos_);
  }

  std::string identifier(const char* what) {
    skip_ws();
    if (pos_ >= text_.size() || !is_ident_start(text_[pos_]))
      throw ParseError(std::string("expected ") + what, pos_);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ModelFormula parse_formula(std::string_view text) {
  Scanner s(text);
  if (s.at_end()) throw ParseError("empty formula", 0);

  ModelFormula f;
  f.response = s.identifier("response identifier");
  s.expect('~', "after the response");

  std::unordered_set<std::string> seen{f.response};
  auto claim = [&](const std::string& name, std::size_t at) {
    if (!seen.insert(name).second)
      throw ParseError("duplicate factor '" + name + "'", at);
  };

  bool saw_minus_one = false;
  bool saw_plus_one = false;
  bool first_term = true;
  while (first_term || !s.at_end()) {
    if (!first_term) s.expect('+', "between terms");
    first_term = false;

    const std::size_t term_at = s.pos();
    const char c = s.peek();
    if (c == '\0') throw ParseError("empty term", s.pos());

    if (c == '-') {
      s.consume('-');
      s.expect('1', "after '-'");
      if (saw_minus_one) throw ParseError("repeated '-1' term", term_at);
      if (saw_plus_one)
        throw ParseError("'-1' conflicts with an explicit '1' term", term_at);
      saw_minus_one = true;
      f.intercept = false;
    } else if (c == '1') {
      s.consume('1');
      if (saw_plus_one) throw ParseError("repeated '1' term", term_at);
      if (saw_minus_one)
        throw ParseError("'1' conflicts with a '-1' term", term_at);
      saw_plus_one = true;
      f.intercept = true;
    } else if (c == '(') {
      s.consume('(');
      // Only random intercepts are supported; anything but (1|name) is
      // rejected here, including random slopes like (x|g).
      if (!s.consume('1'))
        throw ParseError("random term must start with '(1|'", s.pos());
      s.expect('|', "in random term");
      std::string name = s.identifier("grouping factor in random term");
      s.expect(')', "closing the random term");
      claim(name, term_at);
      f.random_factors.push_back(std::move(name));
    } else if (is_ident_start(c)) {
      std::string name = s.identifier("factor identifier");
      claim(name, term_at);
      f.fixed_factors.push_back(std::move(name));
    } else {
      throw ParseError(std::string("unexpected character '") + c + "'",
                       s.pos());
    }
  }

  if (f.fixed_factors.empty() && !f.intercept)
    throw ParseError("empty model: no fixed factors and no intercept",
                     text.size());
  return f;
}

std::string format_formula(const ModelFormula& f) {
  std::string out = f.response + " ~ ";
  std::vector<std::string> terms;
  if (!f.intercept)
    terms.push_back("-1");
  else if (f.fixed_factors.empty())
    terms.push_back("1");
  for (const auto& name : f.fixed_factors) terms.push_back(name);
  for (const auto& name : f.random_factors) terms.push_back("(1|" + name + ")");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += " + ";
    out += terms[i];
  }
  return out;
}

}  // namespace lmmrec
