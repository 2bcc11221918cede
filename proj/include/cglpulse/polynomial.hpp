#pragma once

#include <array>
#include <map>
#include <string>

namespace cgl {

// Real polynomial in the four unknowns (ξ, η, τ, ε) of the pulse problem.
class Poly4 {
public:
  using Exponent = std::array<int, 4>;
  enum Var { Xi = 0, Eta = 1, Tau = 2, Eps = 3 };

  Poly4() = default;
  static Poly4 constant(double c);
  static Poly4 var(int k);

  Poly4 operator+(const Poly4& o) const;
  Poly4 operator-(const Poly4& o) const;
  Poly4 operator*(const Poly4& o) const;
  Poly4 operator*(double c) const;
  Poly4 operator-() const { return *this * -1.0; }

  Poly4 derivative(int k) const;
  // Same monomials with |coefficient|: bounds |p| on boxes centred at 0.
  Poly4 abs() const;
  double eval(const std::array<double, 4>& v) const;
  bool is_zero() const { return terms_.empty(); }
  const std::map<Exponent, double>& terms() const { return terms_; }
  std::string to_string() const;

private:
  void add(const Exponent& e, double c);
  std::map<Exponent, double> terms_;
};

inline Poly4 operator*(double c, const Poly4& p) { return p * c; }

}  // namespace cgl
