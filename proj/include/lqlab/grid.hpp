#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lqlab {

/// Uniform 1D mesh over [x_min, x_max].
///
/// node(i) = x_min + i * dx with dx = (x_max - x_min) / (n_nodes - 1). Every
/// field type in the library is indexed by node number on one of these.
class Grid1D {
public:
    Grid1D(double x_min, double x_max, std::size_t n_nodes)
        : x_min_(x_min), x_max_(x_max), n_nodes_(n_nodes) {
        if (!(x_min < x_max)) {
            throw std::invalid_argument("Grid1D: x_min must be < x_max");
        }
        if (n_nodes < 3) {
            throw std::invalid_argument("Grid1D: need at least 3 nodes, got " +
                                        std::to_string(n_nodes));
        }
        dx_ = (x_max - x_min) / static_cast<double>(n_nodes - 1);
    }

    /// Grid whose spacing is as close as possible to `dx`.
    static Grid1D with_spacing(double x_min, double x_max, double dx) {
        if (!(dx > 0.0)) {
            throw std::invalid_argument("Grid1D: spacing must be positive");
        }
        const auto cells = static_cast<std::size_t>(std::llround((x_max - x_min) / dx));
        return Grid1D(x_min, x_max, cells + 1);
    }

    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    double dx() const noexcept { return dx_; }
    std::size_t size() const noexcept { return n_nodes_; }

    double node(std::size_t i) const noexcept {
        return x_min_ + static_cast<double>(i) * dx_;
    }

    std::vector<double> nodes() const {
        std::vector<double> out(n_nodes_);
        for (std::size_t i = 0; i < n_nodes_; ++i) out[i] = node(i);
        return out;
    }

    /// Index of the node nearest to x after clamping x into the domain.
    /// An exact midpoint goes to the smaller index.
    std::size_t nearest(double x) const noexcept {
        const double clamped = std::clamp(x, x_min_, x_max_);
        const double k = (clamped - x_min_) / dx_;
        auto i = static_cast<std::size_t>(std::floor(k));
        if (k - static_cast<double>(i) > 0.5) ++i;
        return std::min(i, n_nodes_ - 1);
    }

    friend bool operator==(const Grid1D&, const Grid1D&) = default;

private:
    double x_min_;
    double x_max_;
    std::size_t n_nodes_;
    double dx_ = 0.0;
};

/// Per-node real data attached to a grid. The tag keeps value and policy
/// fields from being mixed up.
template <class Tag>
class NodeField {
public:
    explicit NodeField(Grid1D grid, double fill = 0.0)
        : grid_(grid), data_(grid.size(), fill) {}

    NodeField(Grid1D grid, std::vector<double> data) : grid_(grid), data_(std::move(data)) {
        if (data_.size() != grid_.size()) {
            throw std::invalid_argument("NodeField: data size does not match grid");
        }
    }

    /// Samples f at every node.
    template <class F>
    static NodeField sample(Grid1D grid, F&& f) {
        NodeField out(grid);
        for (std::size_t i = 0; i < grid.size(); ++i) out.data_[i] = f(grid.node(i));
        return out;
    }

    const Grid1D& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    friend bool operator==(const NodeField&, const NodeField&) = default;

private:
    Grid1D grid_;
    std::vector<double> data_;
};

using ValueField = NodeField<struct ValueTag>;
using PolicyField = NodeField<struct PolicyTag>;

/// max_i |a_i - b_i|
inline double sup_distance(std::span<const double> a, std::span<const double> b) {
    double out = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) out = std::max(out, std::abs(a[i] - b[i]));
    return out;
}

/// max_i |a_i|; NaN propagates so callers can detect non-finite data.
inline double sup_norm(std::span<const double> a) {
    double out = 0.0;
    for (double v : a) {
        if (std::isnan(v)) return v;
        out = std::max(out, std::abs(v));
    }
    return out;
}

/// Half-open node range [first, last) covering the central `fraction` of a
/// grid with n nodes; the same count is dropped from each end.
struct IndexRange {
    std::size_t first;
    std::size_t last;
    std::size_t size() const noexcept { return last - first; }
};

inline IndexRange interior_range(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("interior fraction must lie in (0, 1]");
    }
    auto drop = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - fraction) / 2.0));
    if (2 * drop >= n) drop = (n - 1) / 2;
    return {drop, n - drop};
}

}  // namespace lqlab
