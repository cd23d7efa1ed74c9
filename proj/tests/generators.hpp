#pragma once

// Random payoff generators for property tests.

#include <random>

#include "gexp/payoff.hpp"

namespace gexp::gen {

struct PayoffGenerator {
  std::mt19937_64 rng;
  int max_arity = 1;
  bool allow_exp = true;

  explicit PayoffGenerator(std::uint64_t seed, int arity = 1) : rng(seed), max_arity(arity) {}

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

  double literal() {
    // Quarter steps keep printed literals short; sign included.
    return 0.25 * uniform(-12, 12);
  }

  PayoffExpr leaf() {
    if (uniform(0, 2) == 0) return dsl::constant(literal());
    return dsl::x(uniform(1, max_arity));
  }

  PayoffExpr any(int depth) {
    if (depth <= 0) return leaf();
    using namespace dsl;
    switch (uniform(0, 9)) {
      case 0: return any(depth - 1) + any(depth - 1);
      case 1: return any(depth - 1) - any(depth - 1);
      case 2: return any(depth - 1) * leaf();
      case 3: return -any(depth - 1);
      case 4: return dsl::abs(any(depth - 1));
      case 5: return dsl::min({any(depth - 1), any(depth - 1)});
      case 6: return dsl::max({any(depth - 1), any(depth - 1), leaf()});
      case 7: return dsl::pow(any(depth - 1), uniform(0, 3));
      case 8:
        if (allow_exp) return dsl::exp(dsl::constant(0.25) * dsl::min({leaf(), dsl::constant(2.0)}));
        return leaf();
      default: return leaf();
    }
  }

  /// Lipschitz-type payoffs with at most linear growth, for PDE property tests.
  PayoffExpr lipschitz(int depth) {
    using namespace dsl;
    if (depth <= 0) {
      const double a = literal();
      return uniform(0, 3) == 0 ? constant(a) : constant(0.25 * uniform(-4, 4)) * x(1) + constant(a);
    }
    switch (uniform(0, 5)) {
      case 0: return lipschitz(depth - 1) + lipschitz(depth - 1);
      case 1: return -lipschitz(depth - 1);
      case 2: return dsl::abs(lipschitz(depth - 1));
      case 3: return dsl::min({lipschitz(depth - 1), lipschitz(depth - 1)});
      case 4: return dsl::max({lipschitz(depth - 1), lipschitz(depth - 1)});
      default: return constant(0.5) * lipschitz(depth - 1);
    }
  }
};

}  // namespace gexp::gen
