#pragma once

#include <vector>

#include "sfmap/common.hpp"

namespace sfmap {

struct TrainingRecord {
    Vec3 point;
    float target_sdf = 0.0f;
    int material_label = -1;  // -1: free-space record, no material supervision
};

/// Bounded ring buffer: oldest-first eviction, uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity) : capacity_(capacity) {
        if (capacity <= 0) throw ContractError("replay buffer: capacity must be positive");
        storage_.reserve(size_t(capacity));
    }

    void push(const TrainingRecord& r) {
        if (int(storage_.size()) < capacity_) {
            storage_.push_back(r);
        } else {
            storage_[next_] = r;
            next_ = (next_ + 1) % size_t(capacity_);
        }
    }

    size_t size() const { return storage_.size(); }
    bool empty() const { return storage_.empty(); }
    int capacity() const { return capacity_; }

    const TrainingRecord& sample(Rng& rng) const {
        if (storage_.empty()) throw ContractError("replay buffer: sampling from empty buffer");
        return storage_[size_t(rng.below(storage_.size()))];
    }

    const TrainingRecord& at(size_t i) const { return storage_[i]; }

private:
    std::vector<TrainingRecord> storage_;
    size_t next_ = 0;
    int capacity_;
};

}  // namespace sfmap
