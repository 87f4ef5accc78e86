#pragma once

#include <cstdint>
#include <vector>

namespace cglp {

// splitmix64 (Steele, Lea, Flood 2014). Chosen over std::mt19937_64 so that
// bounded draws are bit-portable across standard libraries: all sampling
// paths consume this generator only.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Unbiased bounded draw via rejection.
    uint64_t next_below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [-a, a).
    double next_uniform(double a) { return (2.0 * next_double() - 1.0) * a; }

    // Sample k distinct indices from [0, n) by partial Fisher-Yates; output in
    // draw order.
    std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
        if (k > n) k = n;
        std::vector<size_t> pool(n);
        for (size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<size_t> out;
        out.reserve(k);
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(next_below(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

    // Derive an independent stream (e.g. one per seed node) without
    // perturbing this generator's sequence.
    Rng fork(uint64_t salt) const {
        Rng r(state_ ^ (salt * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
        r.next_u64();
        return r;
    }

private:
    uint64_t state_;
};

}  // namespace cglp
