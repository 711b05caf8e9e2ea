#include "pointlab/tape.hpp"

#include <algorithm>
#include <stdexcept>

namespace pointlab::ad {

std::vector<double> Tape::backward(int root) const {
  std::vector<double> adj(vals_.size(), 0.0);
  adj[root] = 1.0;
  for (int i = root; i >= 0; --i) {
    const double a = adj[i];
    if (a == 0.0) continue;
    const Node& n = nodes_[i];
    if (n.p0 >= 0) adj[n.p0] += a * n.d0;
    if (n.p1 >= 0) adj[n.p1] += a * n.d1;
  }
  return adj;
}

Value operator+(Value a, Value b) {
  return {a.tape, a.tape->push(a.v() + b.v(), a.idx, 1.0, b.idx, 1.0)};
}
Value operator-(Value a, Value b) {
  return {a.tape, a.tape->push(a.v() - b.v(), a.idx, 1.0, b.idx, -1.0)};
}
Value operator*(Value a, Value b) {
  return {a.tape, a.tape->push(a.v() * b.v(), a.idx, b.v(), b.idx, a.v())};
}
Value operator/(Value a, Value b) {
  const double bv = b.v();
  return {a.tape, a.tape->push(a.v() / bv, a.idx, 1.0 / bv, b.idx, -a.v() / (bv * bv))};
}
Value operator-(Value a) { return {a.tape, a.tape->push(-a.v(), a.idx, -1.0)}; }

Value operator+(Value a, double b) { return {a.tape, a.tape->push(a.v() + b, a.idx, 1.0)}; }
Value operator+(double a, Value b) { return b + a; }
Value operator-(Value a, double b) { return {a.tape, a.tape->push(a.v() - b, a.idx, 1.0)}; }
Value operator-(double a, Value b) { return {b.tape, b.tape->push(a - b.v(), b.idx, -1.0)}; }
Value operator*(Value a, double b) { return {a.tape, a.tape->push(a.v() * b, a.idx, b)}; }
Value operator*(double a, Value b) { return b * a; }
Value operator/(Value a, double b) { return a * (1.0 / b); }
Value operator/(double a, Value b) {
  const double bv = b.v();
  return {b.tape, b.tape->push(a / bv, b.idx, -a / (bv * bv))};
}

Value exp(Value a) {
  const double e = std::exp(a.v());
  return {a.tape, a.tape->push(e, a.idx, e)};
}
Value log(Value a) { return {a.tape, a.tape->push(std::log(a.v()), a.idx, 1.0 / a.v())}; }
Value log1p(Value a) {
  return {a.tape, a.tape->push(std::log1p(a.v()), a.idx, 1.0 / (1.0 + a.v()))};
}
Value sqrt(Value a) {
  const double s = std::sqrt(a.v());
  return {a.tape, a.tape->push(s, a.idx, 0.5 / s)};
}
Value tanh(Value a) {
  const double t = std::tanh(a.v());
  return {a.tape, a.tape->push(t, a.idx, 1.0 - t * t)};
}

static double sigmoid_d(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Value sigmoid(Value a) {
  const double s = sigmoid_d(a.v());
  return {a.tape, a.tape->push(s, a.idx, s * (1.0 - s))};
}

static double softplus_d(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Value softplus(Value a) {
  return {a.tape, a.tape->push(softplus_d(a.v()), a.idx, sigmoid_d(a.v()))};
}
Value relu(Value a) {
  const double x = a.v();
  return {a.tape, a.tape->push(x > 0.0 ? x : 0.0, a.idx, x > 0.0 ? 1.0 : 0.0)};
}
Value erf(Value a) {
  const double x = a.v();
  const double d = 2.0 / std::sqrt(M_PI) * std::exp(-x * x);
  return {a.tape, a.tape->push(std::erf(x), a.idx, d)};
}
Value pow(Value a, double p) {
  const double x = a.v();
  return {a.tape, a.tape->push(std::pow(x, p), a.idx, p * std::pow(x, p - 1.0))};
}
Value max(Value a, double floor) {
  const double x = a.v();
  return {a.tape, a.tape->push(x > floor ? x : floor, a.idx, x > floor ? 1.0 : 0.0)};
}

Value softplus_scaled(Value x, Value s) { return s * softplus(x / s); }

Value gumbel_softplus(Value x, Value alpha, Value s) {
  // (1 + a e^x)^(-1/a) = exp(-softplus(x + log a) / a), stable for large x.
  Value shrink = exp(-softplus(x + log(alpha)) / alpha);
  return (1.0 - shrink) * (1.0 + softplus_scaled(x, s));
}

Value log_sum_exp(const std::vector<Value>& xs) {
  double m = xs[0].v();
  for (const Value& x : xs) m = std::max(m, x.v());
  Value acc = constant(*xs[0].tape, 0.0);
  for (const Value& x : xs) acc = acc + exp(x - m);
  return log(acc) + m;
}

std::vector<Value> softmax(const std::vector<Value>& xs) {
  Value lse = log_sum_exp(xs);
  std::vector<Value> out;
  out.reserve(xs.size());
  for (const Value& x : xs) out.push_back(exp(x - lse));
  return out;
}

Value dot(const std::vector<Value>& a, const std::vector<Value>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  Value acc = constant(*a[0].tape, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) acc = acc + a[i] * b[i];
  return acc;
}

Dual make_dual(Tape& t, double value, double tangent) {
  return {constant(t, value), constant(t, tangent)};
}
Dual dual_const(Value v) { return {v, constant(*v.tape, 0.0)}; }

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator+(Dual a, Value b) { return {a.v + b, a.d}; }
Dual operator*(Dual a, Value b) { return {a.v * b, a.d * b}; }
Dual operator*(Value a, Dual b) { return b * a; }
Dual operator*(Dual a, double b) { return {a.v * b, a.d * b}; }

Dual exp(Dual a) {
  Value e = exp(a.v);
  return {e, e * a.d};
}
Dual log(Dual a) { return {log(a.v), a.d / a.v}; }
Dual tanh(Dual a) {
  Value t = tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}
Dual sigmoid(Dual a) {
  Value s = sigmoid(a.v);
  return {s, s * (1.0 - s) * a.d};
}
Dual softplus(Dual a) { return {softplus(a.v), sigmoid(a.v) * a.d}; }
Dual softplus_scaled(Dual x, Value s) {
  return {softplus_scaled(x.v, s), sigmoid(x.v / s) * x.d};
}

Dual gumbel_softplus(Dual x, Value alpha, Value s) {
  Dual shifted = {x.v + log(alpha), x.d};
  Dual shrink = exp(softplus(shifted) * (-1.0 / alpha));
  Dual left = {1.0 - shrink.v, -shrink.d};
  Dual right = softplus_scaled(x, s) + constant(*x.v.tape, 1.0);
  return left * right;
}

}  // namespace pointlab::ad
