#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tforge {

// mt19937_64 with hand-rolled variate transforms. The std:: distributions are
// implementation-defined, which would break the byte-identical reproducibility
// contract across standard libraries; these transforms are frozen.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Box-Muller; one draw consumed per call pair, cached second variate
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    bool bernoulli(double p) {
        return uniform() < p;
    }

    // categorical over weights summing to ~1
    template <typename Container>
    size_t categorical(const Container& weights) {
        double u = uniform();
        double acc = 0.0;
        size_t last = 0;
        for (size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            last = i;
            if (u < acc) return i;
        }
        return last;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace tforge
