#include "cglpulse/polynomial.hpp"

#include <cmath>
#include <sstream>

namespace cgl {

void Poly4::add(const Exponent& e, double c) {
  if (c == 0.0) return;
  auto it = terms_.find(e);
  if (it == terms_.end()) {
    terms_.emplace(e, c);
  } else if ((it->second += c) == 0.0) {
    terms_.erase(it);
  }
}

Poly4 Poly4::constant(double c) {
  Poly4 p;
  p.add({0, 0, 0, 0}, c);
  return p;
}

Poly4 Poly4::var(int k) {
  Poly4 p;
  Exponent e{0, 0, 0, 0};
  e[k] = 1;
  p.add(e, 1.0);
  return p;
}

Poly4 Poly4::operator+(const Poly4& o) const {
  Poly4 p = *this;
  for (const auto& [e, c] : o.terms_) p.add(e, c);
  return p;
}

Poly4 Poly4::operator-(const Poly4& o) const { return *this + o * -1.0; }

Poly4 Poly4::operator*(const Poly4& o) const {
  Poly4 p;
  for (const auto& [e1, c1] : terms_)
    for (const auto& [e2, c2] : o.terms_) {
      Exponent e;
      for (int k = 0; k < 4; ++k) e[k] = e1[k] + e2[k];
      p.add(e, c1 * c2);
    }
  return p;
}

Poly4 Poly4::operator*(double c) const {
  Poly4 p;
  for (const auto& [e, v] : terms_) p.add(e, v * c);
  return p;
}

Poly4 Poly4::derivative(int k) const {
  Poly4 p;
  for (const auto& [e, c] : terms_) {
    if (e[k] == 0) continue;
    Exponent d = e;
    --d[k];
    p.add(d, c * e[k]);
  }
  return p;
}

Poly4 Poly4::abs() const {
  Poly4 p;
  for (const auto& [e, c] : terms_) p.add(e, std::abs(c));
  return p;
}

double Poly4::eval(const std::array<double, 4>& v) const {
  double s = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < e[k]; ++j) t *= v[k];
    s += t;
  }
  return s;
}

std::string Poly4::to_string() const {
  static const char* names[4] = {"xi", "eta", "tau", "eps"};
  std::ostringstream os;
  bool first = true;
  for (const auto& [e, c] : terms_) {
    os << (first ? "" : " + ") << c;
    for (int k = 0; k < 4; ++k)
      if (e[k]) os << "*" << names[k] << (e[k] > 1 ? "^" + std::to_string(e[k]) : "");
    first = false;
  }
  return first ? "0" : os.str();
}

}  // namespace cgl
