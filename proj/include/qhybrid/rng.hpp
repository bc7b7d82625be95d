#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace qhybrid {

// Deterministic RNG used everywhere seeds matter. Distributions are
// hand-rolled on top of mt19937_64 so results do not depend on the
// standard library's (implementation-defined) distribution algorithms.
class rng {
public:
    explicit rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // uniform integer in [0, n)
    std::size_t index(std::size_t n) {
        return n == 0 ? 0 : static_cast<std::size_t>(eng_() % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // derive an independent stream for a tagged sub-task (splitmix64 step)
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Fixed stream tags so modules never collide on seeds derived from one run
// seed. Sub-streams derive again from these (e.g. per class, per epoch).
namespace seed_tag {
inline constexpr std::uint64_t model_init = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t shuffle = 3;
inline constexpr std::uint64_t augment = 4;
inline constexpr std::uint64_t subset = 5;
inline constexpr std::uint64_t test_data = 6;
} // namespace seed_tag

} // namespace qhybrid
