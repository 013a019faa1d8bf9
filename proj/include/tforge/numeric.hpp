#pragma once

#include <algorithm>
#include <cmath>

namespace tforge {

inline double sigmoid(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow for large |x|
inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// binary cross-entropy expressed on the logit: softplus(z) - y*z
inline double bce_with_logit(double logit, double y) {
    return softplus(logit) - y * logit;
}

inline double huber(double r, double delta = 1.0) {
    double a = std::abs(r);
    if (a <= delta) return 0.5 * r * r;
    return delta * (a - 0.5 * delta);
}

inline double huber_grad(double r, double delta = 1.0) {
    if (std::abs(r) <= delta) return r;
    return r > 0.0 ? delta : -delta;
}

inline double sign(double x) {
    if (x > 0.0) return 1.0;
    if (x < 0.0) return -1.0;
    return 0.0;
}

}  // namespace tforge
