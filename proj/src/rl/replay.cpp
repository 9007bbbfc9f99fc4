#include "optlab/rl/replay.hpp"

#include <numeric>

namespace optlab::rl {

std::vector<size_t> sample_without_replacement(size_t n, size_t k, Rng& rng) {
    k = std::min(k, n);
    if (k == 0) return {};
    // Rejection sampling for small draws from large pools; the O(n)
    // Fisher-Yates walk only when the draw covers a sizeable fraction.
    if (k * 8 < n) {
        std::vector<size_t> out;
        out.reserve(k);
        while (out.size() < k) {
            const size_t candidate = static_cast<size_t>(rng.uniform_int(static_cast<int>(n)));
            bool fresh = true;
            for (size_t seen : out)
                if (seen == candidate) {
                    fresh = false;
                    break;
                }
            if (fresh) out.push_back(candidate);
        }
        return out;
    }
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + static_cast<size_t>(rng.uniform_int(static_cast<int>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

ReplayBuffer::ReplayBuffer(size_t capacity, int num_agents) {
    if (num_agents <= 0) throw ConfigError("ReplayBuffer: num_agents must be positive");
    const size_t per = std::max<size_t>(1, capacity / static_cast<size_t>(num_agents));
    for (int i = 0; i < num_agents; ++i) parts_.emplace_back(per);
}

void ReplayBuffer::push(const Transition& t) {
    if (t.agent < 0 || t.agent >= num_agents())
        throw ConfigError("ReplayBuffer: transition agent id out of range");
    parts_[static_cast<size_t>(t.agent)].push(t);
}

size_t ReplayBuffer::size() const {
    size_t s = 0;
    for (const auto& p : parts_) s += p.size();
    return s;
}

std::optional<Batch> ReplayBuffer::sample(int count, bool per_agent, Rng& rng) const {
    if (count <= 0) throw UsageError("ReplayBuffer::sample: count must be positive");
    if (size() == 0) return std::nullopt;

    Batch out;
    if (per_agent) {
        const size_t per = std::max<size_t>(1, static_cast<size_t>(count) / parts_.size());
        for (const auto& part : parts_) {
            if (part.size() < per) out.partial = true;
            for (size_t i : sample_without_replacement(part.size(), per, rng))
                out.items.push_back(&part.at(i));
        }
    } else {
        // Treat partitions as one concatenated index space.
        std::vector<size_t> offsets{0};
        for (const auto& part : parts_) offsets.push_back(offsets.back() + part.size());
        const size_t total = offsets.back();
        if (total < static_cast<size_t>(count)) out.partial = true;
        for (size_t flat : sample_without_replacement(total, static_cast<size_t>(count), rng)) {
            size_t p = 0;
            while (flat >= offsets[p + 1]) ++p;
            out.items.push_back(&parts_[p].at(flat - offsets[p]));
        }
    }
    if (out.items.empty()) return std::nullopt;
    return out;
}

std::optional<Batch> ReplayBuffer::sample_agent(int agent, int count, Rng& rng) const {
    if (count <= 0) throw UsageError("ReplayBuffer::sample_agent: count must be positive");
    if (agent < 0 || agent >= num_agents())
        throw ConfigError("ReplayBuffer::sample_agent: bad agent id");
    const auto& part = parts_[static_cast<size_t>(agent)];
    if (part.size() == 0) return std::nullopt;
    Batch out;
    if (part.size() < static_cast<size_t>(count)) out.partial = true;
    for (size_t i : sample_without_replacement(part.size(), static_cast<size_t>(count), rng))
        out.items.push_back(&part.at(i));
    return out;
}

std::optional<std::vector<const GlobalTransition*>> GlobalBuffer::sample(int count,
                                                                         Rng& rng) const {
    if (count <= 0) throw UsageError("GlobalBuffer::sample: count must be positive");
    if (ring_.size() == 0) return std::nullopt;
    std::vector<const GlobalTransition*> out;
    for (size_t i : sample_without_replacement(ring_.size(), static_cast<size_t>(count), rng))
        out.push_back(&ring_.at(i));
    return out;
}

}  // namespace optlab::rl
