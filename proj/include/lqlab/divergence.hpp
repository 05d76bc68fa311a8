#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>

namespace lqlab {

/// Outcome shared by every iterative routine in the library.
enum class SolveStatus { Converged, Diverged, NotConverged };

inline const char* to_string(SolveStatus s) noexcept {
    switch (s) {
        case SolveStatus::Converged: return "converged";
        case SolveStatus::Diverged: return "diverged";
        case SolveStatus::NotConverged: return "not_converged";
    }
    return "unknown";
}

/// Trips once an iterate exceeds `threshold` in sup-norm or holds a
/// non-finite entry. Stays tripped; the first trip iteration is kept.
class DivergenceMonitor {
public:
    static constexpr double kDefaultThreshold = 1e6;

    explicit DivergenceMonitor(double threshold = kDefaultThreshold) : threshold_(threshold) {}

    bool observe(double value, std::size_t iteration) noexcept {
        if (!std::isfinite(value) || std::abs(value) > threshold_) trip(iteration);
        return tripped_;
    }

    bool observe(std::span<const double> iterate, std::size_t iteration) noexcept {
        for (double v : iterate) {
            if (!std::isfinite(v) || std::abs(v) > threshold_) {
                trip(iteration);
                break;
            }
        }
        return tripped_;
    }

    double threshold() const noexcept { return threshold_; }
    bool tripped() const noexcept { return tripped_; }
    std::optional<std::size_t> trip_iteration() const noexcept { return trip_iteration_; }

private:
    void trip(std::size_t iteration) noexcept {
        if (!tripped_) {
            tripped_ = true;
            trip_iteration_ = iteration;
        }
    }

    double threshold_;
    bool tripped_ = false;
    std::optional<std::size_t> trip_iteration_;
};

}  // namespace lqlab
