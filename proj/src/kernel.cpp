#include "kshrl/kernel.hpp"

#include <cmath>
#include <sstream>

#include "kshrl/error.hpp"

namespace kshrl {

void KernelSpec::validate() const {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw InputError("kernel: bandwidth must be positive and finite");
    }
}

double kernel_weight(const KernelSpec& spec, double u) {
    const double v = u / spec.bandwidth;
    double k = 0.0;
    switch (spec.family) {
        case KernelFamily::gaussian: k = std::exp(-0.5 * v * v); break;
        case KernelFamily::epanechnikov: k = std::abs(v) <= 1.0 ? 0.75 * (1.0 - v * v) : 0.0; break;
        case KernelFamily::boxcar: k = std::abs(v) <= 1.0 ? 0.5 : 0.0; break;
    }
    return k / spec.bandwidth;
}

KernelWeights weight_vector(const KernelSpec& spec, std::span<const double> candidates, double z) {
    spec.validate();
    if (candidates.empty()) throw InputError("weight_vector: empty dataset");
    KernelWeights out;
    out.w.resize(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out.w(static_cast<Eigen::Index>(i)) = kernel_weight(spec, candidates[i] - z);
    }
    const double sum = out.w.sum();
    if (!(sum > 0.0)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "no data within kernel support at z=" << z;
        throw NumericalError(msg.str());
    }
    out.ess = sum * sum / out.w.squaredNorm();
    return out;
}

KernelWeights weight_vector(const KernelSpec& spec, const Eigen::VectorXd& candidates, double z) {
    return weight_vector(spec, std::span<const double>(candidates.data(), static_cast<std::size_t>(candidates.size())), z);
}

}  // namespace kshrl
