#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace pointlab::ad {

// Reverse-mode tape. Every node stores at most two parents together with the
// local partial derivatives computed during the forward pass.
class Tape {
 public:
  struct Node {
    int p0 = -1;
    int p1 = -1;
    double d0 = 0.0;
    double d1 = 0.0;
  };

  int push(double value, int p0 = -1, double d0 = 0.0, int p1 = -1, double d1 = 0.0) {
    nodes_.push_back({p0, p1, d0, d1});
    vals_.push_back(value);
    return static_cast<int>(vals_.size()) - 1;
  }

  double value(int idx) const { return vals_[idx]; }
  std::size_t size() const { return vals_.size(); }

  // Adjoints of `root` with respect to every node on the tape.
  std::vector<double> backward(int root) const;

  // Marks allow discarding evaluation-only scratch work.
  std::size_t mark() const { return vals_.size(); }
  void rewind(std::size_t m) {
    nodes_.resize(m);
    vals_.resize(m);
  }

  void clear() {
    nodes_.clear();
    vals_.clear();
  }

 private:
  std::vector<Node> nodes_;
  std::vector<double> vals_;
};

// Handle to a tape node.
struct Value {
  Tape* tape = nullptr;
  int idx = -1;

  double v() const { return tape->value(idx); }
};

inline Value constant(Tape& t, double x) { return {&t, t.push(x)}; }

Value operator+(Value a, Value b);
Value operator-(Value a, Value b);
Value operator*(Value a, Value b);
Value operator/(Value a, Value b);
Value operator-(Value a);

Value operator+(Value a, double b);
Value operator+(double a, Value b);
Value operator-(Value a, double b);
Value operator-(double a, Value b);
Value operator*(Value a, double b);
Value operator*(double a, Value b);
Value operator/(Value a, double b);
Value operator/(double a, Value b);

Value exp(Value a);
Value log(Value a);
Value log1p(Value a);
Value sqrt(Value a);
Value tanh(Value a);
Value sigmoid(Value a);
Value softplus(Value a);   // log(1 + e^x), stable
Value relu(Value a);
Value erf(Value a);
Value pow(Value a, double p);
Value max(Value a, double floor);

// Scaled (mark-specific) softplus s * log(1 + exp(x / s)), s > 0.
Value softplus_scaled(Value x, Value s);

// Gumbel-Softplus: [1 - (1 + a e^x)^(-1/a)] * [1 + softplus_scaled(x, s)].
// Non-saturating and strictly increasing for a, s > 0.
Value gumbel_softplus(Value x, Value alpha, Value s);

// Numerically stable log(sum_i exp(x_i)).
Value log_sum_exp(const std::vector<Value>& xs);

// Softmax over xs; outputs sum to one.
std::vector<Value> softmax(const std::vector<Value>& xs);

Value dot(const std::vector<Value>& a, const std::vector<Value>& b);

// Forward-mode pair carried on the tape: value and tangent with respect to the
// query time. Both components stay differentiable with respect to parameters,
// which is how cumulative decoders obtain an intensity that the NLL can
// back-propagate through.
struct Dual {
  Value v;
  Value d;
};

Dual make_dual(Tape& t, double value, double tangent);
Dual dual_const(Value v);

Dual operator+(Dual a, Dual b);
Dual operator-(Dual a, Dual b);
Dual operator*(Dual a, Dual b);
Dual operator+(Dual a, Value b);
Dual operator*(Dual a, Value b);
Dual operator*(Value a, Dual b);
Dual operator*(Dual a, double b);

Dual exp(Dual a);
Dual log(Dual a);
Dual tanh(Dual a);
Dual sigmoid(Dual a);
Dual softplus(Dual a);
Dual softplus_scaled(Dual x, Value s);
Dual gumbel_softplus(Dual x, Value alpha, Value s);

}  // namespace pointlab::ad
