#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mfpinn::ad {

// Arena-based reverse-mode tape for scalars. Loss expressions over network
// jet outputs are recorded here; one backward sweep yields d(loss)/d(input)
// for every registered input. Local partials are stored at record time, so
// the reverse pass is a single reverse iteration over the node list.
class Tape;

struct Var {
  Tape* tape = nullptr;
  int id = -1;
  double v = 0.0;
};

class Tape {
 public:
  struct Node {
    int a = -1, b = -1;
    double pa = 0.0, pb = 0.0;
  };

  Var input(double value) { return make(value, -1, 0.0, -1, 0.0); }

  Var constant(double value) { return make(value, -1, 0.0, -1, 0.0); }

  Var make(double value, int a, double pa, int b, double pb) {
    nodes_.push_back({a, b, pa, pb});
    values_.push_back(value);
    return Var{this, static_cast<int>(nodes_.size()) - 1, value};
  }

  // Seeds d(y)/d(y)=1 and accumulates adjoints into every node.
  void backward(const Var& y) {
    grads_.assign(nodes_.size(), 0.0);
    if (y.id < 0) return;
    grads_[static_cast<std::size_t>(y.id)] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      const double g = grads_[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.a >= 0) grads_[static_cast<std::size_t>(n.a)] += g * n.pa;
      if (n.b >= 0) grads_[static_cast<std::size_t>(n.b)] += g * n.pb;
    }
  }

  double grad(const Var& x) const {
    if (x.id < 0 || static_cast<std::size_t>(x.id) >= grads_.size()) return 0.0;
    return grads_[static_cast<std::size_t>(x.id)];
  }

  void clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

inline Var operator+(Var x, Var y) {
  return x.tape->make(x.v + y.v, x.id, 1.0, y.id, 1.0);
}
inline Var operator-(Var x, Var y) {
  return x.tape->make(x.v - y.v, x.id, 1.0, y.id, -1.0);
}
inline Var operator*(Var x, Var y) {
  return x.tape->make(x.v * y.v, x.id, y.v, y.id, x.v);
}
inline Var operator/(Var x, Var y) {
  return x.tape->make(x.v / y.v, x.id, 1.0 / y.v, y.id, -x.v / (y.v * y.v));
}
inline Var operator-(Var x) { return x.tape->make(-x.v, x.id, -1.0, -1, 0.0); }

inline Var operator+(Var x, double c) {
  return x.tape->make(x.v + c, x.id, 1.0, -1, 0.0);
}
inline Var operator+(double c, Var x) { return x + c; }
inline Var operator-(Var x, double c) { return x + (-c); }
inline Var operator-(double c, Var x) {
  return x.tape->make(c - x.v, x.id, -1.0, -1, 0.0);
}
inline Var operator*(Var x, double c) {
  return x.tape->make(x.v * c, x.id, c, -1, 0.0);
}
inline Var operator*(double c, Var x) { return x * c; }
inline Var operator/(Var x, double c) { return x * (1.0 / c); }

inline Var square(Var x) { return x.tape->make(x.v * x.v, x.id, 2.0 * x.v, -1, 0.0); }

inline Var tanh(Var x) {
  const double t = std::tanh(x.v);
  return x.tape->make(t, x.id, 1.0 - t * t, -1, 0.0);
}

inline Var exp(Var x) {
  const double e = std::exp(x.v);
  return x.tape->make(e, x.id, e, -1, 0.0);
}

}  // namespace mfpinn::ad
