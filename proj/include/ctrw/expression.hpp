#pragma once

// Minimal arithmetic expression language used by scenario configs for
// index-dependent rules (p_i, scale a_i) and for user tail functions.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Expressions compile to a postfix program evaluated on a fixed-size stack,
// so evaluation is allocation-free and safe to call concurrently.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctrw/error.hpp"

namespace ctrw {

class Expression {
 public:
  static constexpr std::size_t kMaxStack = 64;

  Expression() = default;

  /// Compiles `source` with the given free variable names (e.g. {"i"}).
  Expression(std::string_view source, std::initializer_list<std::string_view> variables)
      : source_(source), variables_(variables.begin(), variables.end()) {
    Parser parser{source_, variables_, program_};
    parser.parse();
    max_depth_ = check_depth();
  }

  static Expression constant(double value) {
    Expression e;
    e.source_ = std::to_string(value);
    e.program_.push_back({Op::Const, value, 0});
    e.max_depth_ = 1;
    return e;
  }

  const std::string& source() const { return source_; }
  bool empty() const { return program_.empty(); }

  double operator()(double x) const { return evaluate(std::span<const double>(&x, 1)); }

  double evaluate(std::span<const double> values) const {
    if (program_.empty()) throw ArgumentError("evaluating an empty expression");
    if (values.size() < variables_.size()) {
      throw ArgumentError("expression '" + source_ + "' needs " +
                          std::to_string(variables_.size()) + " variables");
    }
    std::array<double, kMaxStack> stack;
    std::size_t top = 0;
    for (const Instr& in : program_) {
      switch (in.op) {
        case Op::Const: stack[top++] = in.value; break;
        case Op::Var: stack[top++] = values[in.arg]; break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Add: --top; stack[top - 1] += stack[top]; break;
        case Op::Sub: --top; stack[top - 1] -= stack[top]; break;
        case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
        case Op::Div: --top; stack[top - 1] /= stack[top]; break;
        case Op::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
        case Op::Min: --top; stack[top - 1] = std::min(stack[top - 1], stack[top]); break;
        case Op::Max: --top; stack[top - 1] = std::max(stack[top - 1], stack[top]); break;
        case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
        case Op::Log: stack[top - 1] = std::log(stack[top - 1]); break;
        case Op::Log1p: stack[top - 1] = std::log1p(stack[top - 1]); break;
        case Op::Expm1: stack[top - 1] = std::expm1(stack[top - 1]); break;
        case Op::Sqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
        case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
        case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
        case Op::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
        case Op::Erfc: stack[top - 1] = std::erfc(stack[top - 1]); break;
      }
    }
    return stack[0];
  }

 private:
  enum class Op : std::uint8_t {
    Const, Var, Neg, Add, Sub, Mul, Div, Pow, Min, Max,
    Exp, Log, Log1p, Expm1, Sqrt, Sin, Cos, Abs, Erfc
  };

  struct Instr {
    Op op;
    double value;
    std::size_t arg;
  };

  struct Function {
    std::string_view name;
    Op op;
    int arity;
  };

  static constexpr std::array<Function, 13> kFunctions{{
      {"exp", Op::Exp, 1},   {"log", Op::Log, 1},     {"log1p", Op::Log1p, 1},
      {"expm1", Op::Expm1, 1}, {"sqrt", Op::Sqrt, 1}, {"sin", Op::Sin, 1},
      {"cos", Op::Cos, 1},   {"abs", Op::Abs, 1},     {"erfc", Op::Erfc, 1},
      {"pow", Op::Pow, 2},   {"min", Op::Min, 2},     {"max", Op::Max, 2},
      {"ln", Op::Log, 1},
  }};

  class Parser {
   public:
    Parser(std::string_view src, const std::vector<std::string>& vars, std::vector<Instr>& out)
        : src_(src), vars_(vars), out_(out) {}

    void parse() {
      skip_ws();
      if (pos_ == src_.size()) fail("empty expression");
      expr();
      skip_ws();
      if (pos_ != src_.size()) fail("unexpected trailing input");
    }

   private:
    [[noreturn]] void fail(const std::string& what) const {
      throw ValidationError("expression '" + std::string(src_) + "': " + what + " at offset " +
                            std::to_string(pos_));
    }

    void skip_ws() {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == c) {
        ++pos_;
        return true;
      }
      return false;
    }

    void expect(char c) {
      if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    void expr() {
      term();
      for (;;) {
        if (accept('+')) {
          term();
          out_.push_back({Op::Add, 0.0, 0});
        } else if (accept('-')) {
          term();
          out_.push_back({Op::Sub, 0.0, 0});
        } else {
          return;
        }
      }
    }

    void term() {
      unary();
      for (;;) {
        if (accept('*')) {
          unary();
          out_.push_back({Op::Mul, 0.0, 0});
        } else if (accept('/')) {
          unary();
          out_.push_back({Op::Div, 0.0, 0});
        } else {
          return;
        }
      }
    }

    void unary() {
      if (accept('-')) {
        unary();
        out_.push_back({Op::Neg, 0.0, 0});
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
        out_.push_back({Op::Pow, 0.0, 0});
      }
    }

    void primary() {
      skip_ws();
      if (pos_ >= src_.size()) fail("unexpected end of input");
      const char c = src_[pos_];
      if (accept('(')) {
        expr();
        expect(')');
        return;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        number();
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          ++pos_;
        }
        const std::string_view name = src_.substr(start, pos_ - start);
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == '(') {
          call(name);
          return;
        }
        for (std::size_t k = 0; k < vars_.size(); ++k) {
          if (vars_[k] == name) {
            out_.push_back({Op::Var, 0.0, k});
            return;
          }
        }
        if (name == "pi") {
          out_.push_back({Op::Const, 3.14159265358979323846, 0});
          return;
        }
        fail("unknown name '" + std::string(name) + "'");
      }
      fail(std::string("unexpected character '") + c + "'");
    }

    void call(std::string_view name) {
      const Function* fn = nullptr;
      for (const Function& f : kFunctions) {
        if (f.name == name) fn = &f;
      }
      if (fn == nullptr) fail("unknown function '" + std::string(name) + "'");
      expect('(');
      expr();
      for (int k = 1; k < fn->arity; ++k) {
        expect(',');
        expr();
      }
      expect(')');
      out_.push_back({fn->op, 0.0, 0});
    }

    void number() {
      const char* first = src_.data() + pos_;
      const char* last = src_.data() + src_.size();
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc()) fail("malformed number");
      pos_ += static_cast<std::size_t>(ptr - first);
      out_.push_back({Op::Const, value, 0});
    }

    std::string_view src_;
    const std::vector<std::string>& vars_;
    std::vector<Instr>& out_;
    std::size_t pos_ = 0;
  };

  std::size_t check_depth() const {
    std::size_t depth = 0;
    std::size_t peak = 0;
    for (const Instr& in : program_) {
      switch (in.op) {
        case Op::Const:
        case Op::Var: ++depth; break;
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div:
        case Op::Pow: case Op::Min: case Op::Max: --depth; break;
        default: break;
      }
      peak = std::max(peak, depth);
    }
    if (peak > kMaxStack) throw ValidationError("expression '" + source_ + "' is nested too deeply");
    return peak;
  }

  std::string source_;
  std::vector<std::string> variables_;
  std::vector<Instr> program_;
  std::size_t max_depth_ = 0;
};

}  // namespace ctrw
