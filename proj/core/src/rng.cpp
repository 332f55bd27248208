#include "nirvar/rng.hpp"

namespace nirvar {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a, used only to turn stream names into keys.
std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(mix(seed + kGolden)) {}

Rng::result_type Rng::operator()() {
  ++counter_;
  return mix(key_ + counter_ * kGolden);
}

Rng Rng::split(std::uint64_t key) const {
  return Rng(mix(key_ ^ mix(key * kGolden + 0x2545F4914F6CDD1DULL)), true);
}

Rng Rng::split(std::string_view name) const { return split(hash_name(name)); }

double Rng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::normal() { return normal_(*this); }

}  // namespace nirvar
