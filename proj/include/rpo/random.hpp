#pragma once

#include "rpo/linalg.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace rpo {

// Seeded generator with platform-independent output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // uniform on [0,1) from the top 53 bits
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do v = next();
        while (v >= limit);
        return v % n;
    }

    Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols)
    {
        Matrix A(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) A(i, j) = uniform();
        return A;
    }

    // uniform on [-1,1)
    Matrix symmetric_uniform_matrix(Eigen::Index rows, Eigen::Index cols)
    {
        return 2.0 * uniform_matrix(rows, cols).array() - 1.0;
    }

    // k distinct values from [0, n), in draw order
    std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k)
    {
        std::vector<std::uint64_t> pool(n);
        for (std::uint64_t i = 0; i < n; ++i) pool[i] = i;
        for (std::uint64_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + below(n - i)]);
        pool.resize(k);
        return pool;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace rpo
