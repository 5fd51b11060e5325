#pragma once

#include <atomic>
#include <chrono>

#include "ctxlake/types.hpp"

namespace ctxlake {

/// Injected time source. All kernel and scenario times are logical
/// milliseconds read from one of these; nothing in the library calls the
/// system clock directly.
class Clock {
public:
    virtual ~Clock() = default;
    virtual LogicalTime now() const = 0;
};

/// Clock driven by the discrete-event scheduler. advance_to() enforces
/// monotonicity: time never moves backwards.
class SimulatedClock : public Clock {
public:
    explicit SimulatedClock(std::uint64_t start_ms = 0) : now_ms_(start_ms) {}

    LogicalTime now() const override { return LogicalTime{now_ms_.load(std::memory_order_acquire)}; }

    void advance_to(LogicalTime t) {
        std::uint64_t prev = now_ms_.load(std::memory_order_relaxed);
        while (prev < t.millis &&
               !now_ms_.compare_exchange_weak(prev, t.millis, std::memory_order_release)) {
        }
    }

private:
    std::atomic<std::uint64_t> now_ms_;
};

/// Monotonic wall-clock adapter for live use, in milliseconds since process
/// start.
class SystemClock : public Clock {
public:
    SystemClock() : epoch_(std::chrono::steady_clock::now()) {}

    LogicalTime now() const override {
        auto elapsed = std::chrono::steady_clock::now() - epoch_;
        return LogicalTime{static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count())};
    }

private:
    std::chrono::steady_clock::time_point epoch_;
};

}  // namespace ctxlake
