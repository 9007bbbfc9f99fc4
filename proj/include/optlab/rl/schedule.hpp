#pragma once

#include <cstdint>

namespace optlab::rl {

// Linear exploration anneal for option selection; exact at both endpoints.
struct EpsilonSchedule {
    double start = 1.0;
    double finish = 0.05;
    int64_t anneal_steps = 50000;

    double at(int64_t t) const {
        if (t <= 0) return start;
        if (t >= anneal_steps) return finish;
        return start - (start - finish) *
                           (static_cast<double>(t) / static_cast<double>(anneal_steps));
    }
};

}  // namespace optlab::rl
