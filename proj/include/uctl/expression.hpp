#pragma once

// Small arithmetic expression language for config-supplied formulas:
// + - * / ^, unary minus, parentheses, numbers, named variables, the
// constants pi and phi, and abs sign sqrt exp log sin cos tan tanh atan
// min max pow. Compiled once to postfix code; evaluation is const and
// thread-safe.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "uctl/errors.hpp"

namespace uctl {

class Expression {
 public:
  Expression() = default;

  /// Compiles `text` over the given variable names (slot i holds names[i]).
  static Expression compile(const std::string& text, const std::vector<std::string>& names) {
    Expression e;
    e.text_ = text;
    e.arity_ = names.size();
    Parser p{text, names, e.code_};
    p.parse();
    return e;
  }

  [[nodiscard]] double operator()(std::span<const double> values) const {
    if (values.size() < arity_) throw DomainError("expression '" + text_ + "' needs " + std::to_string(arity_) + " values");
    std::vector<double> stack;
    stack.reserve(16);
    for (const auto& op : code_) {
      switch (op.kind) {
        case Op::Const: stack.push_back(op.value); break;
        case Op::Var: stack.push_back(values[op.index]); break;
        case Op::Neg: stack.back() = -stack.back(); break;
        case Op::Call1: stack.back() = apply1(op.index, stack.back()); break;
        default: {
          const double b = stack.back();
          stack.pop_back();
          double& a = stack.back();
          a = apply2(op.kind, op.index, a, b);
        }
      }
    }
    return stack.back();
  }

  [[nodiscard]] double operator()(std::initializer_list<double> values) const {
    return (*this)(std::span<const double>(values.begin(), values.size()));
  }

  [[nodiscard]] const std::string& text() const { return text_; }
  [[nodiscard]] bool empty() const { return code_.empty(); }

 private:
  struct Op {
    enum Kind { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 } kind;
    double value = 0.0;
    std::size_t index = 0;
  };

  static constexpr const char* kUnary[] = {"abs", "sign", "sqrt", "exp", "log", "sin", "cos", "tan", "tanh", "atan"};
  static constexpr const char* kBinary[] = {"min", "max", "pow"};

  static double apply1(std::size_t fn, double v) {
    switch (fn) {
      case 0: return std::abs(v);
      case 1: return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      case 2: return std::sqrt(v);
      case 3: return std::exp(v);
      case 4: return std::log(v);
      case 5: return std::sin(v);
      case 6: return std::cos(v);
      case 7: return std::tan(v);
      case 8: return std::tanh(v);
      default: return std::atan(v);
    }
  }

  static double apply2(Op::Kind kind, std::size_t fn, double a, double b) {
    switch (kind) {
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::Div: return a / b;
      case Op::Pow: return std::pow(a, b);
      default:
        if (fn == 0) return std::min(a, b);
        if (fn == 1) return std::max(a, b);
        return std::pow(a, b);
    }
  }

  struct Parser {
    const std::string& src;
    const std::vector<std::string>& names;
    std::vector<Op>& out;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& what) const {
      throw ConfigError("expression '" + src + "': " + what + " at offset " + std::to_string(pos));
    }

    void skip() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool accept(char c) {
      skip();
      if (pos < src.size() && src[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    void parse() {
      skip();
      if (pos == src.size()) fail("empty expression");
      sum();
      skip();
      if (pos != src.size()) fail(std::string("unexpected '") + src[pos] + "'");
    }

    void sum() {
      product();
      for (;;) {
        if (accept('+')) {
          product();
          out.push_back({Op::Add});
        } else if (accept('-')) {
          product();
          out.push_back({Op::Sub});
        } else {
          return;
        }
      }
    }

    void product() {
      unary();
      for (;;) {
        if (accept('*')) {
          unary();
          out.push_back({Op::Mul});
        } else if (accept('/')) {
          unary();
          out.push_back({Op::Div});
        } else {
          return;
        }
      }
    }

    // -x^2 parses as -(x^2); ^ is right-associative.
    void unary() {
      if (accept('-')) {
        unary();
        out.push_back({Op::Neg});
      } else if (accept('+')) {
        unary();
      } else {
        power();
      }
    }

    void power() {
      primary();
      if (accept('^')) {
        unary();
        out.push_back({Op::Pow});
      }
    }

    void primary() {
      skip();
      if (pos == src.size()) fail("unexpected end");
      const char c = src[pos];
      if (accept('(')) {
        sum();
        if (!accept(')')) fail("missing ')'");
        return;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        const char* begin = src.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("bad number");
        pos += static_cast<std::size_t>(end - begin);
        out.push_back({Op::Const, v});
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_')) ++pos;
        const std::string id = src.substr(start, pos - start);
        if (accept('(')) {
          call(id);
          return;
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
          if (names[i] == id) {
            out.push_back({Op::Var, 0.0, i});
            return;
          }
        }
        if (id == "pi") return out.push_back({Op::Const, std::numbers::pi});
        if (id == "phi") return out.push_back({Op::Const, std::numbers::phi});
        fail("unknown name '" + id + "'");
      }
      fail(std::string("unexpected '") + c + "'");
    }

    void call(const std::string& id) {
      for (std::size_t i = 0; i < std::size(kUnary); ++i) {
        if (id == kUnary[i]) {
          sum();
          if (!accept(')')) fail("'" + id + "' takes one argument");
          out.push_back({Op::Call1, 0.0, i});
          return;
        }
      }
      for (std::size_t i = 0; i < std::size(kBinary); ++i) {
        if (id == kBinary[i]) {
          sum();
          if (!accept(',')) fail("'" + id + "' takes two arguments");
          sum();
          if (!accept(')')) fail("'" + id + "' takes two arguments");
          out.push_back({Op::Call2, 0.0, i});
          return;
        }
      }
      fail("unknown function '" + id + "'");
    }
  };

  std::string text_;
  std::size_t arity_ = 0;
  std::vector<Op> code_;
};

}  // namespace uctl
