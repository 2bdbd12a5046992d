#include <doctest.h>

#include <cmath>

#include "mfpinn/tape.hpp"

using namespace mfpinn;

TEST_CASE("tape gradients of basic expressions") {
  ad::Tape tape;
  ad::Var x = tape.input(1.5);
  ad::Var y = tape.input(-0.75);

  SUBCASE("product rule") {
    ad::Var f = x * y;
    tape.backward(f);
    CHECK(tape.grad(x) == doctest::Approx(-0.75));
    CHECK(tape.grad(y) == doctest::Approx(1.5));
  }
  SUBCASE("quotient") {
    ad::Var f = x / y;
    tape.backward(f);
    CHECK(tape.grad(x) == doctest::Approx(1.0 / -0.75));
    CHECK(tape.grad(y) == doctest::Approx(-1.5 / (0.75 * 0.75)));
  }
  SUBCASE("mixed composition") {
    // f = (x - 2y)^2 + tanh(x*y)
    ad::Var f = square(x - 2.0 * y) + tanh(x * y);
    tape.backward(f);
    const double t = std::tanh(1.5 * -0.75);
    const double df_dx = 2.0 * (1.5 + 1.5) + (1.0 - t * t) * -0.75;
    const double df_dy = 2.0 * (1.5 + 1.5) * -2.0 + (1.0 - t * t) * 1.5;
    CHECK(tape.grad(x) == doctest::Approx(df_dx).epsilon(1e-12));
    CHECK(tape.grad(y) == doctest::Approx(df_dy).epsilon(1e-12));
  }
}

TEST_CASE("tape gradient matches central differences") {
  auto f = [](double a, double b) {
    return (a * b + std::exp(-a)) * std::tanh(b) - a / (b + 3.0);
  };
  auto f_tape = [](ad::Tape& t, ad::Var a, ad::Var b) {
    return (a * b + exp(-a)) * tanh(b) - a / (b + 3.0);
  };
  const double a0 = 0.8, b0 = -0.3, h = 1e-6;
  ad::Tape tape;
  ad::Var a = tape.input(a0), b = tape.input(b0);
  ad::Var out = f_tape(tape, a, b);
  CHECK(out.v == doctest::Approx(f(a0, b0)).epsilon(1e-14));
  tape.backward(out);
  const double da = (f(a0 + h, b0) - f(a0 - h, b0)) / (2 * h);
  const double db = (f(a0, b0 + h) - f(a0, b0 - h)) / (2 * h);
  CHECK(tape.grad(a) == doctest::Approx(da).epsilon(1e-8));
  CHECK(tape.grad(b) == doctest::Approx(db).epsilon(1e-8));
}

TEST_CASE("fan-out accumulates adjoints") {
  ad::Tape tape;
  ad::Var x = tape.input(2.0);
  ad::Var f = x * x * x;  // two mul nodes, x used three times
  tape.backward(f);
  CHECK(tape.grad(x) == doctest::Approx(12.0));
}

TEST_CASE("clear resets the arena for reuse") {
  ad::Tape tape;
  ad::Var x = tape.input(3.0);
  tape.backward(square(x));
  CHECK(tape.grad(x) == doctest::Approx(6.0));
  tape.clear();
  CHECK(tape.size() == 0);
  ad::Var y = tape.input(4.0);
  tape.backward(y * 2.0);
  CHECK(tape.grad(y) == doctest::Approx(2.0));
}
