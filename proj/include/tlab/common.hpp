#ifndef TLAB_COMMON_HPP
#define TLAB_COMMON_HPP

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tlab {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Error types.  Pipelines map OutOfScope/DivergentSum to exit code 2
// (assumption violated), everything else to exit code 1.
// ---------------------------------------------------------------------------

struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidWord : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidSystem : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TruncationError : std::runtime_error {
    TruncationError(const std::string& msg, std::uint64_t required)
        : std::runtime_error(msg), required_cutoff(required) {}
    std::uint64_t required_cutoff;
};

struct DivergentSum : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PositivityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidSpectralData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Theorem hypotheses violated (e.g. |t| below the UNI threshold).
struct OutOfScope : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.  std::mt19937_64 has a pinned bitstream; the
// distributions below avoid the implementation-defined std:: ones so that
// seeded runs produce byte-identical output everywhere.
// ---------------------------------------------------------------------------

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        // splitmix64; tiny, stable, good enough for test-function sampling
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double normal();

    Complex cnormal() { return {normal(), normal()}; }

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Small utilities
// ---------------------------------------------------------------------------

// Shortest-roundtrip-ish float formatting, locale independent.
std::string fmt_double(double x);

// Runs fn(i) for i in [0, n) across hardware threads.  Work items must be
// independent; iteration order within a thread is ascending so results are
// deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

constexpr double kPi = 3.14159265358979323846264338327950288;

}  // namespace tlab

#endif
