#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedgid {

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed plus context tags (round, client id, ...).
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

// Seeded generator with pinned sampling code. std::mt19937_64 output is fixed
// by the standard; the std::*_distribution adapters are not, so the mappings
// below live here to keep every stream reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform integer in [0, n), unbiased via rejection
  std::uint64_t below(std::uint64_t n);

  // uniform double in [0, 1) with 53 random bits
  double uniform();
  double uniform(double lo, double hi);

  double normal();              // Box-Muller, no caching
  double gamma(double shape);   // Marsaglia-Tsang, unit scale, shape > 0

  // proportions on the simplex, Dirichlet(alpha, ..., alpha)
  std::vector<double> dirichlet(double alpha, std::size_t k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace fedgid
