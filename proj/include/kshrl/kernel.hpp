#pragma once

#include <span>

#include <Eigen/Dense>

namespace kshrl {

enum class KernelFamily { gaussian, epanechnikov, boxcar };

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double bandwidth = 0.2;

    void validate() const;
    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

/// K_h(u) = K(u / h) / h.
double kernel_weight(const KernelSpec& spec, double u);

struct KernelWeights {
    Eigen::VectorXd w;
    /// (sum w)^2 / sum w^2
    double ess = 0.0;
};

/// w[i] = K_h(x[i] - z). Throws NumericalError when every weight is zero.
KernelWeights weight_vector(const KernelSpec& spec, std::span<const double> candidates, double z);
KernelWeights weight_vector(const KernelSpec& spec, const Eigen::VectorXd& candidates, double z);

}  // namespace kshrl
