#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace bomi {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Seeded normal-variate stream. Distinct (seed, tags...) tuples give
/// independent streams, which keeps per-trial noise aligned across runs that
/// differ only in parameters.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  template <typename... Tags>
  static RandomStream Derived(std::uint64_t seed, Tags... tags) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tags)...};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return RandomStream((static_cast<std::uint64_t>(words[0]) << 32) | words[1]);
  }

  double Normal() { return normal_(engine_); }

  VectorXd Normal(Eigen::Index size) {
    VectorXd v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = normal_(engine_);
    return v;
  }

  /// Uniform integer in [0, n).
  int UniformIndex(int n) {
    std::uniform_int_distribution<int> dist(0, n - 1);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// FNV-1a, used for provenance hashes in artifact metadata.
inline std::uint64_t Fnv1a(std::string_view bytes,
                           std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string HexDigest(std::uint64_t h);

}  // namespace bomi
