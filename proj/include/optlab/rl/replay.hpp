// Replay storage for the option advisors: a FIFO ring per agent plus a
// global-transition ring for the joint advisor. Sampling is uniform without
// replacement within a call.
#pragma once

#include <optional>
#include <vector>

#include "optlab/common.hpp"

namespace optlab::rl {

struct Transition {
    std::vector<double> obs;
    std::vector<double> next_obs;
    int action = 0;
    double reward = 0.0;
    int agent = 0;
    bool done = false;
    int option = -1;  // advising option active when the step was taken
};

struct GlobalTransition {
    std::vector<double> state;
    std::vector<double> next_state;
    std::vector<int> actions;
    double team_reward = 0.0;
    size_t joint_option = 0;
    bool done = false;
};

template <typename T>
class Ring {
public:
    explicit Ring(size_t capacity) : capacity_(capacity ? capacity : 1) {}
    void push(T item) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            items_[head_] = std::move(item);
            head_ = (head_ + 1) % capacity_;
        }
    }
    size_t size() const { return items_.size(); }
    size_t capacity() const { return capacity_; }
    // Index 0 = oldest.
    const T& at(size_t i) const { return items_[(head_ + i) % items_.size()]; }

private:
    size_t capacity_;
    size_t head_ = 0;  // insertion point once full; oldest element when full
    std::vector<T> items_;
};

// Draw k distinct indices from [0, n) uniformly (partial Fisher-Yates).
std::vector<size_t> sample_without_replacement(size_t n, size_t k, Rng& rng);

struct Batch {
    std::vector<const Transition*> items;
    bool partial = false;  // fewer items than requested were available
};

class ReplayBuffer {
public:
    // `capacity` is the total budget, split evenly across agent partitions.
    ReplayBuffer(size_t capacity, int num_agents);

    void push(const Transition& t);
    size_t size() const;
    size_t agent_size(int agent) const { return parts_[static_cast<size_t>(agent)].size(); }
    int num_agents() const { return static_cast<int>(parts_.size()); }

    // Uniform over the union of partitions; per_agent mode draws
    // floor(count / num_agents) from each partition instead. Returns nullopt
    // when nothing is stored yet (retry later).
    std::optional<Batch> sample(int count, bool per_agent, Rng& rng) const;

    // Uniform over one agent's partition only.
    std::optional<Batch> sample_agent(int agent, int count, Rng& rng) const;

private:
    std::vector<Ring<Transition>> parts_;
};

class GlobalBuffer {
public:
    explicit GlobalBuffer(size_t capacity) : ring_(capacity) {}
    void push(GlobalTransition t) { ring_.push(std::move(t)); }
    size_t size() const { return ring_.size(); }
    std::optional<std::vector<const GlobalTransition*>> sample(int count, Rng& rng) const;

private:
    Ring<GlobalTransition> ring_;
};

}  // namespace optlab::rl
