#include "polysafe/parser.hpp"

#include <cctype>
#include <charconv>
#include <string>

#include "polysafe/error.hpp"

namespace polysafe {
namespace {

class Parser {
 public:
  Parser(std::string_view text, std::span<const Variable> universe)
      : text_(text), universe_(universe) {}

  Polynomial parse() {
    skip_space();
    if (pos_ == text_.size()) throw ParseError("empty expression", pos_);
    Polynomial out = expression();
    skip_space();
    if (pos_ != text_.size()) {
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    }
    return out;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expression() {
    Polynomial out = term();
    while (true) {
      if (accept('+')) {
        out += term();
      } else if (accept('-')) {
        out -= term();
      } else {
        return out;
      }
    }
  }

  Polynomial term() {
    Polynomial out = unary();
    while (accept('*')) out *= unary();
    return out;
  }

  Polynomial unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Polynomial power() {
    Polynomial base = primary();
    if (accept('^')) {
      skip_space();
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
      if (start == pos_) {
        throw ParseError("expected non-negative integer exponent", start);
      }
      int exponent = 0;
      auto [ptr, ec] =
          std::from_chars(text_.data() + start, text_.data() + pos_, exponent);
      if (ec != std::errc()) throw ParseError("exponent out of range", start);
      base = base.pow(exponent);
    }
    reject_juxtaposition();
    return base;
  }

  void reject_juxtaposition() {
    skip_space();
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '(' ||
        c == '.') {
      throw ParseError("implicit multiplication is not allowed", pos_);
    }
  }

  Polynomial primary() {
    skip_space();
    if (pos_ >= text_.size()) {
      throw ParseError("unexpected end of expression", pos_);
    }
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial inner = expression();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return number();
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      return identifier();
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Polynomial number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      }
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        ++pos_;
      }
      const std::size_t exp_start = pos_;
      digits();
      if (exp_start == pos_) pos_ = save;
    }
    double value = 0.0;
    auto [ptr, ec] =
        std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (ec != std::errc() || ptr != text_.data() + pos_) {
      throw ParseError("malformed number", start);
    }
    return Polynomial(value);
  }

  Polynomial identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view token = text_.substr(start, pos_ - start);
    for (const Variable& v : universe_) {
      if (v.name() == token) return Polynomial(v);
    }
    throw UnknownIdentifierError(std::string(token), start);
  }

  std::string_view text_;
  std::span<const Variable> universe_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_poly(std::string_view expr,
                      std::span<const Variable> universe) {
  return Parser(expr, universe).parse();
}

}  // namespace polysafe
