#pragma once

#include <chrono>
#include <string>

#include "riskbench/pricing.hpp"

namespace riskbench::detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void require_kind(const ProblemSpec& spec, ProblemKind kind, const char* engine) {
    if (spec.kind != kind) {
        throw Error(ErrorCode::kConfig, std::string(engine) + ": wrong problem kind " +
                                            std::string(kind_name(spec.kind)));
    }
}

inline void require_scalar(const MarketParams& mkt, const char* engine) {
    if (!mkt.scalar()) {
        throw Error(ErrorCode::kDimension, std::string(engine) + ": needs a single-asset market");
    }
}

/// Integer-valued method parameter with a lower bound.
inline long count_param(const ProblemSpec& spec, const char* name, double fallback, long min) {
    const double v = spec.param(name, fallback);
    if (!(v >= static_cast<double>(min)) || v > 1e12) {
        throw Error(ErrorCode::kConfig, std::string("method parameter ") + name + " out of range");
    }
    return static_cast<long>(v);
}

}  // namespace riskbench::detail
