// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "espo/errors.hpp"

namespace espo::nn {

// Deterministic random source. All draws are derived from raw mt19937_64
// output with fixed arithmetic, so streams are reproducible across platforms
// and the full state round-trips through a string (used by rollout records).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    // Uniform on [0, 1): 53-bit mantissa construction.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]: never returns 0, safe as a masking rate t.
    double uniform_open0(){ return 1.0 - uniform01(); }

    // Uniform integer in [0, n). Masked rejection keeps the draw unbiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw InputDomainError("uniform_int: n must be positive");
        if (n == 1) return 0;
        std::uint64_t mask = ~std::uint64_t{0} >> countl_zero(n - 1);
        for (;;) {
            std::uint64_t v = engine_() & mask;
            if (v < n) return v;
        }
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u = uniform_open0();
        double v = uniform01();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mean + stddev * r * std::cos(a);
    }

    // Normal clipped to +/- 2 stddev by re-draw.
    double truncated_normal(double mean, double stddev) {
        for (;;) {
            double z = normal(0.0, 1.0);
            if (std::fabs(z) <= 2.0) return mean + stddev * z;
        }
    }

    // k distinct values from {0..n-1}, returned sorted ascending.
    std::vector<int> sample_without_replacement(int n, int k) {
        if (k < 0 || k > n) throw InputDomainError("sample_without_replacement: k out of range");
        std::vector<int> pool(static_cast<std::size_t>(n));
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < k; ++i) {
            std::uint64_t j = uniform_int(static_cast<std::uint64_t>(n - i));
            std::swap(pool[static_cast<std::size_t>(i)],
                      pool[static_cast<std::size_t>(i) + j]);
        }
        std::vector<int> out(pool.begin(), pool.begin() + k);
        std::sort(out.begin(), out.end());
        return out;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::uint64_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Forks an independent stream; mixing keeps child streams uncorrelated
    // for distinct salts.
    Rng fork(std::uint64_t salt) {
        std::uint64_t s = engine_() ^ (salt * 0x9e3779b97f4a7c15ULL + 0x2545F4914F6CDD1DULL);
        return Rng(s);
    }

    std::string save_state() const {
        std::ostringstream os;
        os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
        os.precision(17);
        os << spare_;
        return os.str();
    }

    void restore_state(const std::string& s) {
        std::istringstream is(s);
        int flag = 0;
        is >> engine_ >> flag >> spare_;
        if (!is) throw InputDomainError("rng: malformed state string");
        has_spare_ = flag != 0;
    }

private:
    static int countl_zero(std::uint64_t x) {
        int n = 0;
        if (x == 0) return 64;
        while (!(x & (std::uint64_t{1} << 63))) { x <<= 1; ++n; }
        return n;
    }

    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace espo::nn
