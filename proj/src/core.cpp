#include "veriflow/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>
#include <sstream>

namespace veriflow {

ParseError::ParseError(std::size_t off, std::string exp)
    : std::runtime_error("parse error at offset " + std::to_string(off) + ": expected " + exp),
      offset(off),
      expected(std::move(exp)) {}

// ---------------------------------------------------------------- Equation

Rational Equation::coeff(const std::string& var) const {
  auto it = coeffs.find(var);
  return it == coeffs.end() ? Rational{} : it->second;
}

Equation Equation::scaled(const Rational& c) const {
  Equation out;
  if (c.is_zero()) return out;
  for (const auto& [v, a] : coeffs) out.coeffs.emplace(v, a * c);
  out.constant = constant * c;
  return out;
}

Equation Equation::plus_multiple(const Equation& other, const Rational& c) const {
  Equation out = *this;
  for (const auto& [v, a] : other.coeffs) {
    Rational next = out.coeff(v) + a * c;
    if (next.is_zero())
      out.coeffs.erase(v);
    else
      out.coeffs[v] = next;
  }
  out.constant = constant + other.constant * c;
  return out;
}

Equation Equation::substituted(const std::string& var, const Rational& value) const {
  Equation out = *this;
  auto it = out.coeffs.find(var);
  if (it == out.coeffs.end()) return out;
  out.constant = out.constant - it->second * value;
  out.coeffs.erase(it);
  return out;
}

Equation Equation::canonical() const {
  if (coeffs.empty() || coeffs.begin()->second.sign() > 0) return *this;
  return scaled(Rational(-1));
}

std::string Equation::str() const {
  std::string out;
  bool first = true;
  for (const auto& [v, a] : coeffs) {
    Rational mag = a;
    if (first) {
      if (a == Rational(-1))
        out += "-";
      else if (a != Rational(1))
        out += a.str() + "*";
    } else {
      out += a.sign() < 0 ? "-" : "+";
      mag = a.abs();
      if (mag != Rational(1)) out += mag.str() + "*";
    }
    out += v;
    first = false;
  }
  if (first) out += "0";
  out += "=";
  out += constant.str();
  return out;
}

std::optional<std::pair<std::string, Rational>> single_variable_solution(const Equation& eq) {
  if (eq.coeffs.size() != 1) return std::nullopt;
  const auto& [v, a] = *eq.coeffs.begin();
  return std::make_pair(v, eq.constant / a);
}

// ------------------------------------------------------------------ parser

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Move move() {
    skip_ws();
    std::size_t op_at = pos_;
    std::string name = ident("operator name");
    auto op = op_from_name(name);
    if (!op) throw ParseError(op_at, "operator (scale|addmul|isolate|subst)");
    expect('(', "'('");
    Move m;
    m.op = *op;
    skip_ws();
    if (peek() != '|') {
      m.args.push_back(arg());
      skip_ws();
      while (peek() == ',') {
        ++pos_;
        m.args.push_back(arg());
        skip_ws();
      }
    }
    expect('|', "',' or '|'");
    m.claim = equation();
    expect(')', "')'");
    end();
    return m;
  }

  Equation whole_equation() {
    Equation eq = equation();
    end();
    return eq;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_ws() {
    while (!at_end() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  void expect(char c, const char* what) {
    skip_ws();
    if (peek() != c || at_end()) throw ParseError(pos_, what);
    ++pos_;
  }

  void end() {
    skip_ws();
    if (!at_end()) throw ParseError(pos_, "end of input");
  }

  std::string ident(const char* what) {
    skip_ws();
    if (at_end() || !is_ident_start(peek())) throw ParseError(pos_, what);
    std::size_t start = pos_;
    while (!at_end() && is_ident_char(peek())) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  // digits[/digits], no sign
  Rational unsigned_rational(const char* what) {
    skip_ws();
    std::size_t start = pos_;
    if (at_end() || !is_digit(peek())) throw ParseError(pos_, what);
    while (!at_end() && is_digit(peek())) ++pos_;
    if (peek() == '/') {
      ++pos_;
      if (at_end() || !is_digit(peek())) throw ParseError(pos_, "denominator digits");
      while (!at_end() && is_digit(peek())) ++pos_;
    }
    try {
      return Rational::parse(text_.substr(start, pos_ - start));
    } catch (const std::invalid_argument&) {
      throw ParseError(start, "nonzero denominator");
    } catch (const OverflowError&) {
      throw ParseError(start, "rational within 64-bit range");
    }
  }

  Rational signed_rational(const char* what) {
    skip_ws();
    bool neg = false;
    if (peek() == '+' || peek() == '-') {
      neg = peek() == '-';
      ++pos_;
    }
    Rational r = unsigned_rational(what);
    return neg ? -r : r;
  }

  Arg arg() {
    skip_ws();
    if (is_ident_start(peek())) return ident("argument");
    if (is_digit(peek()) || peek() == '+' || peek() == '-') return signed_rational("argument");
    throw ParseError(pos_, "argument (number or variable)");
  }

  Equation equation() {
    Equation eq;
    skip_ws();
    int sign = 1;
    bool signed_start = false;
    if (peek() == '+' || peek() == '-') {
      sign = peek() == '-' ? -1 : 1;
      signed_start = true;
      ++pos_;
    }
    bool first = true;
    while (true) {
      skip_ws();
      Rational c(1);
      if (is_digit(peek())) {
        c = unsigned_rational("coefficient");
        skip_ws();
        if (first && !signed_start && c.is_zero() && peek() == '=') break;  // empty left side "0"
        if (peek() == '*') ++pos_;
      }
      std::string v = ident("variable");
      Rational next = eq.coeff(v) + (sign < 0 ? -c : c);
      if (next.is_zero())
        eq.coeffs.erase(v);
      else
        eq.coeffs[v] = next;
      first = false;
      skip_ws();
      if (peek() == '+' || peek() == '-') {
        sign = peek() == '-' ? -1 : 1;
        ++pos_;
        continue;
      }
      break;
    }
    expect('=', "'='");
    eq.constant = signed_rational("right-hand side number");
    return eq;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Equation parse_equation(std::string_view text) { return Parser(text).whole_equation(); }

Move parse_move(std::string_view text) { return Parser(text).move(); }

// -------------------------------------------------------------------- ops

namespace {
constexpr std::array<std::string_view, 4> kOpNames = {"scale", "addmul", "isolate", "subst"};
}

std::string_view op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == name) return static_cast<Op>(i);
  return std::nullopt;
}

std::size_t op_arity(Op op) { return op == Op::addmul ? 3 : 2; }

namespace {

std::string render_args(const Move& m) {
  std::string out(op_name(m.op));
  out += "(";
  for (std::size_t i = 0; i < m.args.size(); ++i) {
    if (i) out += ",";
    if (const auto* r = std::get_if<Rational>(&m.args[i]))
      out += r->str();
    else
      out += std::get<std::string>(m.args[i]);
  }
  return out;
}

}  // namespace

std::string serialize_move(const Move& m) { return render_args(m) + "|" + m.claim.str() + ")"; }

std::string move_template(const Move& m) { return render_args(m) + ")"; }

// ------------------------------------------------------------------ state

std::string GoalSpec::str() const { return "goal: " + target + "=" + (value ? value->str() : std::string("?")); }

bool State::in_scope(const std::string& var) const { return std::binary_search(scope.begin(), scope.end(), var); }

bool same_state(const State& a, const State& b) {
  return a.trace == b.trace && a.context.bindings == b.context.bindings && a.goal == b.goal;
}

std::string serialize_state(const State& w) {
  std::string out;
  for (const auto& eq : w.trace) {
    out += eq.str();
    out += "\n";
  }
  out += "ctx:";
  bool first = true;
  for (const auto& [v, val] : w.context.bindings) {
    out += first ? " " : ",";
    out += v + "=" + val.str();
    first = false;
  }
  out += "\n";
  out += w.goal.str();
  return out;
}

State make_state(std::vector<Equation> trace, GoalSpec goal, std::vector<std::string> scope, int budget) {
  std::sort(scope.begin(), scope.end());
  scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
  State w;
  w.remaining_budget = budget;
  w.trace = std::move(trace);
  for (const auto& eq : w.trace) w.context.invariants.insert(eq.canonical());
  w.goal = std::move(goal);
  w.scope = std::move(scope);
  return w;
}

State parse_state(std::string_view text, std::vector<std::string> scope, int remaining_budget) {
  std::vector<std::string> lines;
  {
    std::string cur;
    for (char c : text) {
      if (c == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) lines.push_back(cur);
  }
  if (lines.size() < 3) throw ParseError(text.size(), "equations, ctx line, and goal line");
  std::vector<Equation> trace;
  std::size_t offset = 0;
  std::size_t i = 0;
  for (; i + 2 < lines.size(); ++i) {
    try {
      trace.push_back(parse_equation(lines[i]));
    } catch (const ParseError& e) {
      throw ParseError(offset + e.offset, e.expected);
    }
    offset += lines[i].size() + 1;
  }
  const std::string& ctx = lines[i];
  const std::string& goal = lines[i + 1];
  if (ctx.rfind("ctx:", 0) != 0) throw ParseError(offset, "'ctx:'");
  std::map<std::string, Rational> bindings;
  std::string body = ctx.substr(4);
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    item = item.substr(b);
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError(offset + 4, "binding var=value");
    try {
      bindings[item.substr(0, eq)] = Rational::parse(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ParseError(offset + 4, "binding value");
    }
  }
  offset += ctx.size() + 1;
  if (goal.rfind("goal: ", 0) != 0) throw ParseError(offset, "'goal: '");
  auto eq = goal.find('=', 6);
  if (eq == std::string::npos) throw ParseError(offset + 6, "goal var=value");
  GoalSpec g;
  g.target = goal.substr(6, eq - 6);
  std::string val = goal.substr(eq + 1);
  if (val != "?") {
    try {
      g.value = Rational::parse(val);
    } catch (const std::exception&) {
      throw ParseError(offset + eq + 1, "goal value or '?'");
    }
  }
  State w = make_state(std::move(trace), std::move(g), std::move(scope), remaining_budget);
  w.context.bindings = std::move(bindings);
  return w;
}

Canonicalized canonicalize_with_permutation(const State& w) {
  Canonicalized out{w, {}};
  std::vector<Equation> eqs;
  std::vector<std::string> keys;
  eqs.reserve(w.trace.size());
  for (const auto& eq : w.trace) {
    eqs.push_back(eq.canonical());
    keys.push_back(eqs.back().str());
  }
  std::vector<std::size_t> order(eqs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  out.new_index.assign(eqs.size(), 0);
  out.state.trace.clear();
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    out.new_index[order[pos]] = pos;
    out.state.trace.push_back(eqs[order[pos]]);
  }
  std::set<Equation> inv;
  for (const auto& eq : w.context.invariants) inv.insert(eq.canonical());
  out.state.context.invariants = std::move(inv);
  return out;
}

State canonicalize(const State& w) { return canonicalize_with_permutation(w).state; }

Move remap_move(const Move& m, const std::vector<std::size_t>& new_index) {
  Move out = m;
  std::size_t n_index = m.op == Op::addmul ? 2 : 1;
  for (std::size_t i = 0; i < n_index && i < out.args.size(); ++i) {
    const auto* r = std::get_if<Rational>(&out.args[i]);
    if (!r || !r->is_integer() || r->num() < 1 || static_cast<std::size_t>(r->num()) > new_index.size()) continue;
    out.args[i] = Rational(static_cast<std::int64_t>(new_index[static_cast<std::size_t>(r->num() - 1)] + 1));
  }
  return out;
}

std::optional<std::size_t> index_arg(const State& w, const Arg& a) {
  const auto* r = std::get_if<Rational>(&a);
  if (!r || !r->is_integer() || r->num() < 1 || static_cast<std::size_t>(r->num()) > w.trace.size())
    return std::nullopt;
  return static_cast<std::size_t>(r->num() - 1);
}

std::optional<Equation> recompute(const State& w, const Move& m) {
  if (m.args.size() != op_arity(m.op)) return std::nullopt;
  auto i = index_arg(w, m.args[0]);
  if (!i) return std::nullopt;
  const Equation& target = w.trace[*i];
  try {
    switch (m.op) {
      case Op::scale: {
        const auto* c = std::get_if<Rational>(&m.args[1]);
        if (!c || c->is_zero()) return std::nullopt;
        return target.scaled(*c);
      }
      case Op::addmul: {
        auto j = index_arg(w, m.args[1]);
        const auto* c = std::get_if<Rational>(&m.args[2]);
        if (!j || *j == *i || !c || c->is_zero()) return std::nullopt;
        return target.plus_multiple(w.trace[*j], *c);
      }
      case Op::isolate: {
        const auto* v = std::get_if<std::string>(&m.args[1]);
        if (!v || !w.in_scope(*v)) return std::nullopt;
        Rational a = target.coeff(*v);
        if (a.is_zero()) return std::nullopt;
        return target.scaled(a.reciprocal());
      }
      case Op::subst: {
        const auto* v = std::get_if<std::string>(&m.args[1]);
        if (!v || !w.in_scope(*v) || !target.has(*v)) return std::nullopt;
        auto b = w.context.bindings.find(*v);
        if (b == w.context.bindings.end()) return std::nullopt;
        return target.substituted(*v, b->second);
      }
    }
  } catch (const OverflowError&) {
    return std::nullopt;
  }
  return std::nullopt;
}

State apply(const State& w, const Move& m) {
  if (m.args.empty()) throw StructuralError("move has no target index");
  auto i = index_arg(w, m.args[0]);
  if (!i) throw StructuralError("equation index out of range");
  if (m.op == Op::addmul && (m.args.size() < 2 || !index_arg(w, m.args[1])))
    throw StructuralError("source equation index out of range");
  State out = w;
  out.trace[*i] = m.claim;
  out.context.invariants.insert(m.claim.canonical());
  if (auto sol = single_variable_solution(m.claim)) out.context.bindings.emplace(sol->first, sol->second);
  out.depth = w.depth + 1;
  return out;
}

bool goal_test(const State& w, const GoalSpec& g) {
  auto it = w.context.bindings.find(g.target);
  if (it == w.context.bindings.end()) return false;
  return !g.value || *g.value == it->second;
}

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::solved: return "solved";
    case Outcome::budget_exhausted: return "budget_exhausted";
    case Outcome::step_limit: return "step_limit";
    case Outcome::dead_end: return "dead_end";
  }
  return "unknown";
}

}  // namespace veriflow
