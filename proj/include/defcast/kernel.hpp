#ifndef DEFCAST_KERNEL_HPP_
#define DEFCAST_KERNEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "defcast/errors.hpp"

namespace defcast {

/// Points of the data space stored contiguously, `dim` coordinates each.
class PointSet {
public:
    explicit PointSet(std::size_t dim = 1) : dim_(dim) {
        if (dim_ == 0) throw rejected_input("point dimension must be positive");
    }

    PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
        if (dim_ == 0) throw rejected_input("point dimension must be positive");
        if (coords_.size() % dim_ != 0)
            throw rejected_input("coordinate count is not a multiple of the dimension");
    }

    /// One-dimensional points.
    static PointSet scalars(std::vector<double> xs) { return PointSet(1, std::move(xs)); }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return coords_.size() / dim_; }
    bool empty() const noexcept { return coords_.empty(); }

    std::span<const double> operator[](std::size_t i) const noexcept {
        return {coords_.data() + i * dim_, dim_};
    }

    void push_back(std::span<const double> x) {
        if (x.size() != dim_) throw rejected_input("point has the wrong dimension");
        coords_.insert(coords_.end(), x.begin(), x.end());
    }

    const std::vector<double>& coords() const noexcept { return coords_; }

private:
    std::size_t dim_;
    std::vector<double> coords_;
};

enum class KernelKind { Sobolev, Gaussian, Linear, Custom };

using KernelFunction = std::function<double(std::span<const double>, std::span<const double>)>;

/// A symmetric positive definite function on R^dim.
///
/// Sobolev: ½ exp(-|x - x'|), the kernel of the Sobolev space with norm
/// sqrt(∫f² + ∫f'²) when dim = 1. Gaussian: exp(-|x - x'|² / (2 width²)).
/// Linear: x·x' + offset.
class Kernel {
public:
    static Kernel sobolev(std::size_t dim = 1) { return Kernel(KernelKind::Sobolev, 0.0, dim); }

    static Kernel gaussian(double width, std::size_t dim = 1) {
        if (!(width > 0.0) || !std::isfinite(width))
            throw rejected_input("gaussian kernel width must be positive");
        return Kernel(KernelKind::Gaussian, width, dim);
    }

    static Kernel linear(double offset = 0.0, std::size_t dim = 1) {
        if (!(offset >= 0.0) || !std::isfinite(offset))
            throw rejected_input("linear kernel offset must be non-negative");
        return Kernel(KernelKind::Linear, offset, dim);
    }

    static Kernel custom(KernelFunction fn, std::size_t dim, std::string name = "custom") {
        if (!fn) throw rejected_input("custom kernel needs an evaluator");
        Kernel k(KernelKind::Custom, 0.0, dim);
        k.fn_ = std::make_shared<const KernelFunction>(std::move(fn));
        k.name_ = std::move(name);
        return k;
    }

    /// Declares that data lie in [lo, hi]^dim. Needed for `c_f` of kernels
    /// whose diagonal is not constant.
    Kernel with_range(double lo, double hi) const {
        if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw rejected_input("declared data range must be a finite interval");
        Kernel k = *this;
        k.range_ = std::make_pair(lo, hi);
        return k;
    }

    KernelKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return dim_; }
    double width() const noexcept { return param_; }
    double offset() const noexcept { return param_; }
    const std::optional<std::pair<double, double>>& range() const noexcept { return range_; }

    std::string name() const {
        switch (kind_) {
        case KernelKind::Sobolev: return "sobolev";
        case KernelKind::Gaussian: return "gaussian";
        case KernelKind::Linear: return "linear";
        case KernelKind::Custom: return name_;
        }
        return name_;
    }

    double operator()(std::span<const double> x, std::span<const double> y) const {
        if (x.size() != dim_ || y.size() != dim_)
            throw rejected_input("kernel evaluated at a point of the wrong dimension");
        switch (kind_) {
        case KernelKind::Sobolev: return 0.5 * std::exp(-distance(x, y));
        case KernelKind::Gaussian: {
            const double d = distance(x, y);
            return std::exp(-d * d / (2.0 * param_ * param_));
        }
        case KernelKind::Linear: {
            double s = param_;
            for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
            return s;
        }
        case KernelKind::Custom: return (*fn_)(x, y);
        }
        return 0.0;
    }

    double operator()(double x, double y) const {
        return (*this)(std::span<const double>(&x, 1), std::span<const double>(&y, 1));
    }

    /// Same RKHS: same kind, parameters, dimension and (for custom kernels)
    /// the same evaluator object. The declared range is not part of identity.
    friend bool operator==(const Kernel& a, const Kernel& b) {
        return a.kind_ == b.kind_ && a.param_ == b.param_ && a.dim_ == b.dim_ && a.fn_ == b.fn_;
    }

private:
    Kernel(KernelKind kind, double param, std::size_t dim) : kind_(kind), param_(param), dim_(dim) {
        if (dim_ == 0) throw rejected_input("kernel dimension must be positive");
    }

    static double distance(std::span<const double> x, std::span<const double> y) {
        if (x.size() == 1) return std::abs(x[0] - y[0]);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
        return std::sqrt(s);
    }

    KernelKind kind_;
    double param_;
    std::size_t dim_;
    std::shared_ptr<const KernelFunction> fn_;
    std::string name_;
    std::optional<std::pair<double, double>> range_;
};

/// C_F = sup_x sqrt(K(x,x)). Returns +inf when the diagonal is not known to
/// be bounded (no declared range for a linear or custom kernel).
inline double c_f(const Kernel& kernel) {
    switch (kernel.kind()) {
    case KernelKind::Sobolev: return std::sqrt(0.5);
    case KernelKind::Gaussian: return 1.0;
    case KernelKind::Linear:
    case KernelKind::Custom: break;
    }
    if (!kernel.range()) return std::numeric_limits<double>::infinity();

    const std::size_t dim = kernel.dim();
    auto diag = [&](const std::vector<double>& x) { return kernel(x, x); };

    // Product grid with about 10^4 points, then a few rounds of local
    // refinement around the best point.
    const auto per_axis = static_cast<std::size_t>(
        std::max(2.0, std::floor(std::pow(1e4, 1.0 / static_cast<double>(dim)))));
    std::vector<double> lo(dim, kernel.range()->first);
    std::vector<double> hi(dim, kernel.range()->second);
    std::vector<double> best(dim, lo[0]);
    double best_val = -std::numeric_limits<double>::infinity();
    for (int round = 0; round < 6; ++round) {
        std::vector<std::size_t> idx(dim, 0);
        std::vector<double> x(dim);
        for (;;) {
            for (std::size_t d = 0; d < dim; ++d) {
                const double t = static_cast<double>(idx[d]) / static_cast<double>(per_axis - 1);
                x[d] = lo[d] + t * (hi[d] - lo[d]);
            }
            const double v = diag(x);
            if (v > best_val) {
                best_val = v;
                best = x;
            }
            std::size_t d = 0;
            while (d < dim && ++idx[d] == per_axis) idx[d++] = 0;
            if (d == dim) break;
        }
        for (std::size_t d = 0; d < dim; ++d) {
            const double step = (hi[d] - lo[d]) / static_cast<double>(per_axis - 1);
            lo[d] = std::max(kernel.range()->first, best[d] - step);
            hi[d] = std::min(kernel.range()->second, best[d] + step);
        }
    }
    if (best_val < 0.0) throw internal_error("kernel has a negative diagonal value");
    return std::sqrt(best_val);
}

/// G[i][j] = K(points[i], points[j]).
inline Eigen::MatrixXd gram(const Kernel& kernel, const PointSet& points) {
    if (points.empty()) throw rejected_input("gram matrix of an empty point set");
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = kernel(points[static_cast<std::size_t>(i)],
                                    points[static_cast<std::size_t>(j)]);
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

/// f = Σ_i α_i K(z_i, ·), an element of the RKHS of `kernel`.
class KernelExpansion {
public:
    KernelExpansion(Kernel kernel, PointSet centers, std::vector<double> weights)
        : kernel_(std::move(kernel)), centers_(std::move(centers)), weights_(std::move(weights)) {
        if (centers_.size() != weights_.size())
            throw rejected_input("expansion needs one weight per center");
        if (centers_.dim() != kernel_.dim())
            throw rejected_input("expansion centers do not match the kernel dimension");
    }

    /// The zero function.
    static KernelExpansion zero(Kernel kernel) {
        const std::size_t dim = kernel.dim();
        return KernelExpansion(std::move(kernel), PointSet(dim), {});
    }

    const Kernel& kernel() const noexcept { return kernel_; }
    const PointSet& centers() const noexcept { return centers_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return weights_.size(); }

    double operator()(std::span<const double> x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) s += weights_[i] * kernel_(centers_[i], x);
        return s;
    }

    double operator()(double x) const { return (*this)(std::span<const double>(&x, 1)); }

    KernelExpansion scaled(double factor) const {
        std::vector<double> w = weights_;
        for (double& v : w) v *= factor;
        return KernelExpansion(kernel_, centers_, std::move(w));
    }

private:
    Kernel kernel_;
    PointSet centers_;
    std::vector<double> weights_;
};

inline double eval_expansion(const KernelExpansion& f, std::span<const double> x) { return f(x); }
inline double eval_expansion(const KernelExpansion& f, double x) { return f(x); }

/// ⟨f, g⟩ in the RKHS, Σ_ij α_i β_j K(z_i, w_j).
inline double inner_product(const KernelExpansion& f, const KernelExpansion& g) {
    if (!(f.kernel() == g.kernel()))
        throw rejected_input("inner product of expansions over different kernels");
    long double s = 0.0L;
    for (std::size_t i = 0; i < f.size(); ++i) {
        long double row = 0.0L;
        for (std::size_t j = 0; j < g.size(); ++j)
            row += static_cast<long double>(g.weights()[j]) *
                   f.kernel()(f.centers()[i], g.centers()[j]);
        s += static_cast<long double>(f.weights()[i]) * row;
    }
    return static_cast<double>(s);
}

/// sqrt(αᵀ G α). A quadratic form below -1e-8 means the kernel is not
/// positive definite.
inline double rkhs_norm(const KernelExpansion& f) {
    const double q = inner_product(f, f);
    if (q < -1e-8)
        throw internal_error("negative RKHS quadratic form " + std::to_string(q) +
                             "; kernel is not positive definite");
    return std::sqrt(std::max(q, 0.0));
}

/// Kernel interpolant through (centers[i], targets[i]) with a small ridge
/// term for conditioning.
inline KernelExpansion fit_interpolant(const Kernel& kernel, const PointSet& centers,
                                       std::span<const double> targets, double ridge = 1e-10) {
    if (centers.size() != targets.size())
        throw rejected_input("interpolant needs one target per center");
    Eigen::MatrixXd g = gram(kernel, centers);
    g.diagonal().array() += ridge;
    const Eigen::VectorXd rhs =
        Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
    const Eigen::VectorXd alpha = g.ldlt().solve(rhs);
    return KernelExpansion(kernel, centers, std::vector<double>(alpha.data(), alpha.data() + alpha.size()));
}

} // namespace defcast

#endif // DEFCAST_KERNEL_HPP_
