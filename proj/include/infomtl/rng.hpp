#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace infomtl {

// Deterministic random stream with name-based forking. Forked streams depend
// only on the parent's base seed and the fork name, never on how many draws
// the parent has consumed, so adding a consumer to one stream cannot shift
// another (the "named streams" discipline used by the trainer).
class RngStream {
 public:
  explicit RngStream(uint64_t seed);

  RngStream fork(std::string_view name) const;
  RngStream fork(std::string_view name, uint64_t index) const;

  uint64_t next_u64();
  double uniform();                 // [0, 1), 53-bit resolution
  double normal();                  // standard normal, Box-Muller
  int uniform_int(int n);           // [0, n), unbiased
  bool bernoulli(double p);

  uint64_t base_seed() const { return base_seed_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  uint64_t base_seed_;
  std::mt19937_64 eng_;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

uint64_t hash_name(std::string_view name);  // FNV-1a 64
uint64_t splitmix64(uint64_t x);

}  // namespace infomtl
