#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace fdlab {

// splitmix64 step (Steele, Lea & Flood). Used both to derive independent
// stream seeds from a master seed and to scramble user-provided seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seed for sub-stream `index` of `master`. Streams for distinct indices are
// statistically independent, so batch items can be generated in any order
// (or in parallel) without changing results.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (index * 0xD1B54A32D192ED03ULL);
    std::uint64_t a = splitmix64(s);
    return splitmix64(s) ^ a;
}

// Deterministic random stream.
//
// mt19937_64's output sequence is fixed by the standard, and the bit->double
// conversions below are explicit, so a given seed reproduces the same
// doubles on any conforming implementation. (std::normal_distribution would
// not give that guarantee, which matters for the frozen test fixtures.)
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; generates two per transform, caches one.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // iid standard-normal vector / matrix. Matrices are filled row by row;
    // keep that order stable, fixtures depend on it.
    Eigen::VectorXd normal_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
        return m;
    }

    // Uniform on the unit sphere in R^n.
    Eigen::VectorXd unit_vector(Eigen::Index n) {
        for (;;) {
            Eigen::VectorXd v = normal_vector(n);
            double norm = v.norm();
            if (norm > 1e-12) return v / norm;
        }
    }

    std::uint64_t integer_below(std::uint64_t bound) {
        // Rejection-free modulo is fine here: bound is tiny vs 2^64, the bias
        // is ~bound/2^64 and irrelevant for test-case selection.
        return gen_() % bound;
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace fdlab
