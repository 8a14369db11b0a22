#pragma once

#include <cstddef>
#include <vector>

#include "ners/rng.hpp"

namespace ners {

// Binary sum tree over per-slot priorities. Leaves hold nonnegative values,
// every internal node holds the sum of its children, so a proportional draw
// and a point update are both O(log capacity).
//
// Flat layout: tree_[1] is the root, node i has children 2i and 2i+1, leaves
// occupy [leaf_base_, leaf_base_ + padded capacity). Slots are written ring
// buffer style: when full, insert overwrites the oldest slot.
class SumTree {
public:
    explicit SumTree(std::size_t capacity);

    // Stores value at the next write position (overwriting the oldest slot
    // when full) and returns the slot index used. value must be >= 0.
    std::size_t insert(double value);

    // Replaces the value of an occupied slot. O(log capacity).
    void update(std::size_t slot, double value);

    // Draws `count` slot indices i.i.d. with probability leaf/total.
    // Duplicates are possible. Requires a nonempty tree with total > 0.
    std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

    // Stratified variant: one draw from each of `count` equal prefix-sum
    // segments. With uniform leaves and count == size every slot appears.
    std::vector<std::size_t> sample_indices_stratified(std::size_t count, Rng& rng) const;

    double leaf(std::size_t slot) const;
    double total() const { return tree_[1]; }
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t write_cursor() const { return write_; }

private:
    std::size_t descend(double value) const;
    void write_leaf(std::size_t slot, double value);

    std::size_t capacity_;   // caller-visible max slots
    std::size_t padded_;     // power of two >= capacity_
    std::size_t leaf_base_;  // == padded_
    std::size_t size_ = 0;
    std::size_t write_ = 0;
    std::vector<double> tree_;
};

}  // namespace ners
