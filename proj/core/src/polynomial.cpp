#include "pwamc/polynomial.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pwamc {

int Monomial::degree() const {
  int d = 0;
  for (int e : exponents) d += e;
  return d;
}

bool GradedLexLess::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  // Within a degree, earlier variables rank higher: x^2 < x*u < u^2.
  return a.exponents > b.exponents;
}

Polynomial::Polynomial(int nvars) : nvars_(nvars) {
  if (nvars < 0) throw std::invalid_argument("Polynomial: nvars must be >= 0");
}

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  if (c != 0.0) p.terms_[Monomial(nvars)] = c;
  return p;
}

Polynomial Polynomial::variable(int nvars, int index, double coeff) {
  if (index < 0 || index >= nvars)
    throw std::out_of_range("Polynomial::variable: index out of range");
  Monomial m(nvars);
  m.exponents[index] = 1;
  return term(std::move(m), coeff);
}

Polynomial Polynomial::term(Monomial m, double coeff) {
  for (int e : m.exponents)
    if (e < 0) throw std::invalid_argument("Polynomial: negative exponent");
  Polynomial p(m.nvars());
  if (coeff != 0.0) p.terms_[std::move(m)] = coeff;
  return p;
}

int Polynomial::degree() const {
  if (terms_.empty()) return -1;
  return terms_.rbegin()->first.degree();  // graded order: last term is maximal
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::set_coefficient(const Monomial& m, double c) {
  if (m.nvars() != nvars_)
    throw std::invalid_argument("set_coefficient: monomial size mismatch");
  if (c == 0.0)
    terms_.erase(m);
  else
    terms_[m] = c;
}

namespace {
void check_same_vars(const Polynomial& p, const Polynomial& q, const char* op) {
  if (p.nvars() != q.nvars()) {
    std::ostringstream os;
    os << op << ": variable-count mismatch (" << p.nvars() << " vs "
       << q.nvars() << ")";
    throw std::invalid_argument(os.str());
  }
}
}  // namespace

Polynomial Polynomial::operator+(const Polynomial& q) const {
  check_same_vars(*this, q, "Polynomial::add");
  Polynomial r = *this;
  for (const auto& [m, c] : q.terms_) {
    double& slot = r.terms_[m];
    slot += c;
    if (slot == 0.0) r.terms_.erase(m);
  }
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& q) const {
  return *this + (-q);
}

Polynomial Polynomial::operator-() const { return *this * -1.0; }

Polynomial Polynomial::operator*(const Polynomial& q) const {
  check_same_vars(*this, q, "Polynomial::multiply");
  Polynomial r(nvars_);
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : q.terms_) {
      Monomial m(nvars_);
      for (int i = 0; i < nvars_; ++i)
        m.exponents[i] = ma.exponents[i] + mb.exponents[i];
      double& slot = r.terms_[m];
      slot += ca * cb;
      if (slot == 0.0) r.terms_.erase(m);
    }
  }
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(nvars_);
  if (s == 0.0) return r;
  for (const auto& [m, c] : terms_) r.terms_[m] = c * s;
  return r;
}

Polynomial Polynomial::partial_derivative(int var) const {
  if (var < 0 || var >= nvars_)
    throw std::out_of_range("partial_derivative: variable index out of range");
  Polynomial r(nvars_);
  for (const auto& [m, c] : terms_) {
    const int e = m.exponents[var];
    if (e == 0) continue;
    Monomial dm = m;
    dm.exponents[var] = e - 1;
    r.terms_[dm] = c * e;
  }
  return r;
}

double Polynomial::evaluate(const Eigen::VectorXd& point) const {
  if (point.size() != nvars_)
    throw std::invalid_argument("evaluate: point length mismatch");
  for (int i = 0; i < nvars_; ++i)
    if (!std::isfinite(point[i]))
      throw std::invalid_argument("evaluate: non-finite input");
  double sum = 0.0, comp = 0.0;  // Kahan
  for (const auto& [m, c] : terms_) {
    double t = c;
    for (int i = 0; i < nvars_; ++i) {
      for (int k = 0; k < m.exponents[i]; ++k) t *= point[i];
    }
    const double y = t - comp;
    const double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
  }
  return sum;
}

Polynomial Polynomial::substitute_affine(const Eigen::MatrixXd& S,
                                         const Eigen::VectorXd& c) const {
  if (S.rows() != nvars_ || S.cols() != nvars_ || c.size() != nvars_)
    throw std::invalid_argument("substitute_affine: dimension mismatch");
  std::vector<Polynomial> images;
  images.reserve(nvars_);
  for (int i = 0; i < nvars_; ++i) {
    Polynomial img = Polynomial::constant(nvars_, c[i]);
    for (int j = 0; j < nvars_; ++j)
      if (S(i, j) != 0.0) img = img + Polynomial::variable(nvars_, j, S(i, j));
    images.push_back(std::move(img));
  }
  Polynomial r(nvars_);
  for (const auto& [m, coeff] : terms_) {
    Polynomial t = Polynomial::constant(nvars_, coeff);
    for (int i = 0; i < nvars_; ++i)
      for (int k = 0; k < m.exponents[i]; ++k) t = t * images[i];
    r = r + t;
  }
  return r;
}

Polynomial Polynomial::partial_evaluate_prefix(const Eigen::VectorXd& values) const {
  const int nfix = static_cast<int>(values.size());
  if (nfix > nvars_)
    throw std::invalid_argument("partial_evaluate_prefix: too many values");
  const int nrem = nvars_ - nfix;
  Polynomial r(nrem);
  for (const auto& [m, c] : terms_) {
    double coeff = c;
    for (int i = 0; i < nfix; ++i)
      for (int k = 0; k < m.exponents[i]; ++k) coeff *= values[i];
    Monomial rm(nrem);
    for (int i = 0; i < nrem; ++i) rm.exponents[i] = m.exponents[nfix + i];
    if (coeff == 0.0) continue;
    double& slot = r.terms_[rm];
    slot += coeff;
    if (slot == 0.0) r.terms_.erase(rm);
  }
  return r;
}

namespace {
std::string var_name(int index, int n_state) {
  std::ostringstream os;
  if (index < n_state)
    os << 'x' << (index + 1);
  else
    os << 'u' << (index - n_state + 1);
  return os.str();
}

std::string format_coeff(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

std::string Polynomial::to_string(int n_state) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  // Highest degree first reads more naturally.
  for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
    const Monomial& m = it->first;
    double c = it->second;
    if (first) {
      if (c < 0) {
        os << '-';
        c = -c;
      }
    } else {
      os << (c < 0 ? " - " : " + ");
      c = std::abs(c);
    }
    first = false;
    const bool is_const = m.degree() == 0;
    if (is_const || c != 1.0) {
      os << format_coeff(c);
      if (!is_const) os << '*';
    }
    bool first_var = true;
    for (int i = 0; i < nvars_; ++i) {
      if (m.exponents[i] == 0) continue;
      if (!first_var) os << '*';
      first_var = false;
      os << var_name(i, n_state);
      if (m.exponents[i] > 1) os << '^' << m.exponents[i];
    }
  }
  return os.str();
}

bool Polynomial::operator==(const Polynomial& q) const {
  return nvars_ == q.nvars_ && terms_ == q.terms_;
}

// ---------------------------------------------------------------------------
// Recursive-descent parser for the problem-file polynomial grammar.

namespace {
class Parser {
 public:
  Parser(const std::string& text, int n_state, int n_input)
      : text_(text), n_state_(n_state), n_input_(n_input) {}

  Polynomial run() {
    Polynomial p = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return p;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "polynomial parse error at position " << pos_ << ": " << what
       << " in \"" << text_ << "\"";
    throw std::invalid_argument(os.str());
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  Polynomial expr() {
    Polynomial p = eat('-') ? -term() : (void(eat('+')), term());
    for (;;) {
      if (eat('+'))
        p = p + term();
      else if (eat('-'))
        p = p - term();
      else
        return p;
    }
  }

  Polynomial term() {
    Polynomial p = factor();
    while (eat('*')) p = p * factor();
    return p;
  }

  Polynomial factor() {
    Polynomial base = atom();
    if (eat('^')) {
      const int e = integer();
      Polynomial r = Polynomial::constant(nvars(), 1.0);
      for (int k = 0; k < e; ++k) r = r * base;
      return r;
    }
    return base;
  }

  int nvars() const { return n_state_ + n_input_; }

  Polynomial atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Polynomial p = expr();
      if (!eat(')')) fail("expected ')'");
      return p;
    }
    if (c == '-') {
      ++pos_;
      return -factor();
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (c == 'x' || c == 'u') return variable();
    fail("expected number, variable, or '('");
  }

  Polynomial number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E' ||
            ((text_[pos_] == '+' || text_[pos_] == '-') &&
             (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E'))))
      ++pos_;
    try {
      std::size_t used = 0;
      const double v = std::stod(text_.substr(start, pos_ - start), &used);
      if (used != pos_ - start) fail("malformed number");
      return Polynomial::constant(nvars(), v);
    } catch (const std::logic_error&) {
      pos_ = start;
      fail("malformed number");
    }
  }

  int integer() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) fail("expected exponent");
    return std::stoi(text_.substr(start, pos_ - start));
  }

  Polynomial variable() {
    const char kind = text_[pos_++];
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) fail("variable needs an index, e.g. x1");
    const int idx = std::stoi(text_.substr(start, pos_ - start));
    const int limit = (kind == 'x') ? n_state_ : n_input_;
    if (idx < 1 || idx > limit) fail("variable index out of range");
    const int flat = (kind == 'x') ? idx - 1 : n_state_ + idx - 1;
    return Polynomial::variable(nvars(), flat);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int n_state_, n_input_;
};
}  // namespace

Polynomial Polynomial::parse(const std::string& text, int n_state, int n_input) {
  return Parser(text, n_state, n_input).run();
}

std::int64_t monomial_count(int nvars, int degree) {
  std::int64_t r = 1;
  for (int i = 1; i <= nvars; ++i) r = r * (degree + i) / i;
  return r;
}

namespace {
void enumerate_degree(Monomial& cur, int pos, int remaining,
                      std::vector<Monomial>& out) {
  if (pos == cur.nvars() - 1) {
    cur.exponents[pos] = remaining;
    out.push_back(cur);
    cur.exponents[pos] = 0;
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur.exponents[pos] = e;
    enumerate_degree(cur, pos + 1, remaining - e, out);
  }
  cur.exponents[pos] = 0;
}
}  // namespace

std::vector<Monomial> monomials_up_to(int nvars, int degree) {
  if (degree < 0) throw std::invalid_argument("monomials_up_to: degree < 0");
  std::vector<Monomial> out;
  out.reserve(static_cast<std::size_t>(monomial_count(nvars, degree)));
  Monomial cur(nvars);
  if (nvars == 0) {
    out.push_back(cur);
    return out;
  }
  for (int d = 0; d <= degree; ++d) enumerate_degree(cur, 0, d, out);
  return out;
}

}  // namespace pwamc
