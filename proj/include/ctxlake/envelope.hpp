#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ctxlake/types.hpp"

namespace ctxlake {

/// The operational envelope: Δ bounds decision_time − retrieval_time for
/// every premise (strict), C bounds concurrently in-flight decisions.
struct EnvelopeConfig {
    std::uint64_t delta_ms = 100;
    std::uint32_t max_concurrent = 4;

    void validate() const {
        if (delta_ms < 1 || max_concurrent < 1) {
            throw Error(ErrorCode::kInvalidConfig,
                        "envelope requires delta_ms >= 1 and max_concurrent >= 1");
        }
    }
};

/// Admission control for the concurrency envelope. Acquisition beyond the
/// limit fails fast (no queuing): queued decisions would burn their own
/// decision window and surface later as stale premises, so degradation is
/// made explicit instead.
class SlotLimiter {
public:
    explicit SlotLimiter(std::uint32_t max_concurrent) : limit_(max_concurrent) {}

    class Slot {
    public:
        Slot(Slot&& other) noexcept : owner_(other.owner_) { other.owner_ = nullptr; }
        Slot& operator=(Slot&& other) noexcept {
            if (this != &other) {
                release();
                owner_ = other.owner_;
                other.owner_ = nullptr;
            }
            return *this;
        }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;
        ~Slot() { release(); }

    private:
        friend class SlotLimiter;
        explicit Slot(SlotLimiter* owner) : owner_(owner) {}
        void release() {
            if (owner_) owner_->release_one();
            owner_ = nullptr;
        }
        SlotLimiter* owner_;
    };

    /// Nullopt means OverEnvelope: the caller sheds the decision attempt.
    std::optional<Slot> try_acquire() {
        std::uint32_t current = in_flight_.load(std::memory_order_relaxed);
        while (true) {
            if (current >= limit_) {
                shed_.fetch_add(1, std::memory_order_relaxed);
                return std::nullopt;
            }
            if (in_flight_.compare_exchange_weak(current, current + 1,
                                                 std::memory_order_acq_rel)) {
                break;
            }
        }
        std::uint32_t now = current + 1;
        std::uint32_t peak = peak_.load(std::memory_order_relaxed);
        while (now > peak &&
               !peak_.compare_exchange_weak(peak, now, std::memory_order_acq_rel)) {
        }
        return Slot(this);
    }

    std::uint32_t limit() const { return limit_; }
    std::uint32_t in_flight() const { return in_flight_.load(std::memory_order_acquire); }
    std::uint32_t peak_in_flight() const { return peak_.load(std::memory_order_acquire); }
    std::uint64_t shed_count() const { return shed_.load(std::memory_order_acquire); }

private:
    void release_one() { in_flight_.fetch_sub(1, std::memory_order_acq_rel); }

    std::uint32_t limit_;
    std::atomic<std::uint32_t> in_flight_{0};
    std::atomic<std::uint32_t> peak_{0};
    std::atomic<std::uint64_t> shed_{0};
};

/// Observable counters backing the envelope claims.
struct EnvelopeMetrics {
    std::uint64_t decisions = 0;
    std::uint64_t admitted = 0;
    std::uint64_t rejected = 0;
    std::map<std::string, std::uint64_t> violations_by_code;
    std::uint64_t over_envelope = 0;  // decision attempts shed by admission control
    std::uint32_t peak_in_flight = 0;
    std::uint64_t max_premise_age_ms = 0;
    std::uint64_t retrievals = 0;
    std::uint64_t max_retrieval_latency_ms = 0;
};

class MetricsCollector {
public:
    void record_retrieval(std::uint64_t latency_ms) {
        std::lock_guard lock(mutex_);
        ++metrics_.retrievals;
        metrics_.max_retrieval_latency_ms =
            std::max(metrics_.max_retrieval_latency_ms, latency_ms);
    }

    void record_decision(bool admitted, std::span<const std::string> violation_names,
                         std::uint64_t max_premise_age_ms) {
        std::lock_guard lock(mutex_);
        ++metrics_.decisions;
        if (admitted) {
            ++metrics_.admitted;
        } else {
            ++metrics_.rejected;
        }
        for (const std::string& name : violation_names) ++metrics_.violations_by_code[name];
        metrics_.max_premise_age_ms = std::max(metrics_.max_premise_age_ms, max_premise_age_ms);
    }

    void record_over_envelope() {
        std::lock_guard lock(mutex_);
        ++metrics_.over_envelope;
    }

    void record_peak(std::uint32_t peak) {
        std::lock_guard lock(mutex_);
        metrics_.peak_in_flight = std::max(metrics_.peak_in_flight, peak);
    }

    /// Consistent copy of the counters at call time.
    EnvelopeMetrics snapshot() const {
        std::lock_guard lock(mutex_);
        return metrics_;
    }

private:
    mutable std::mutex mutex_;
    EnvelopeMetrics metrics_;
};

}  // namespace ctxlake
