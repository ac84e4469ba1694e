#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "sorl/errors.hpp"
#include "sorl/mdp.hpp"

namespace sorl {

/// Bounded FIFO of transitions; once full, the oldest entry is overwritten.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw InputError("replay capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
    }

    void push(Transition t) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(t));
        } else {
            items_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
        ++pushed_;
    }

    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return items_.empty(); }
    /// Total number of pushes, including overwritten entries.
    std::size_t pushed() const noexcept { return pushed_; }

    /// i-th entry from oldest to newest.
    const Transition& at(std::size_t i) const {
        if (i >= items_.size()) throw InputError("replay index out of range");
        return items_[(head_ + i) % items_.size()];
    }

    /// n draws uniformly with replacement, appended to out.
    void sample(std::size_t n, std::mt19937_64& rng, std::vector<const Transition*>& out) const {
        if (items_.empty()) throw InputError("cannot sample from an empty replay buffer");
        std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
        for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng)]);
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::size_t pushed_ = 0;
    std::vector<Transition> items_;
};

}  // namespace sorl
