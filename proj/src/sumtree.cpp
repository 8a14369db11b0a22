#include "ners/sumtree.hpp"

#include <cmath>
#include <stdexcept>

namespace ners {

namespace {
std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}
}  // namespace

SumTree::SumTree(std::size_t capacity)
    : capacity_(capacity), padded_(next_pow2(capacity == 0 ? 1 : capacity)), leaf_base_(padded_) {
    if (capacity == 0) throw std::invalid_argument("SumTree: capacity must be positive");
    tree_.assign(2 * padded_, 0.0);
}

void SumTree::write_leaf(std::size_t slot, double value) {
    std::size_t node = leaf_base_ + slot;
    tree_[node] = value;
    // Ancestors are recomputed as child sums, not adjusted by deltas, so the
    // parent-sum invariant holds exactly after any update sequence.
    node >>= 1;
    while (node >= 1) {
        tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
        if (node == 1) break;
        node >>= 1;
    }
}

std::size_t SumTree::insert(double value) {
    if (!(value >= 0.0)) throw std::domain_error("SumTree::insert: value must be >= 0");
    const std::size_t slot = write_;
    write_leaf(slot, value);
    write_ = (write_ + 1) % capacity_;
    if (size_ < capacity_) ++size_;
    return slot;
}

void SumTree::update(std::size_t slot, double value) {
    if (slot >= size_) throw std::out_of_range("SumTree::update: slot not occupied");
    if (!(value >= 0.0)) throw std::domain_error("SumTree::update: value must be >= 0");
    write_leaf(slot, value);
}

double SumTree::leaf(std::size_t slot) const {
    if (slot >= size_) throw std::out_of_range("SumTree::leaf: slot not occupied");
    return tree_[leaf_base_ + slot];
}

std::size_t SumTree::descend(double value) const {
    std::size_t node = 1;
    while (node < leaf_base_) {
        const std::size_t left = 2 * node;
        if (value < tree_[left]) {
            node = left;
        } else {
            value -= tree_[left];
            node = left + 1;
        }
    }
    std::size_t slot = node - leaf_base_;
    if (slot >= size_) slot = size_ - 1;  // guards the v == total edge
    return slot;
}

std::vector<std::size_t> SumTree::sample_indices(std::size_t count, Rng& rng) const {
    if (size_ == 0 || !(total() > 0.0))
        throw std::runtime_error("SumTree::sample_indices: empty tree or zero total");
    if (count == 0) throw std::invalid_argument("SumTree::sample_indices: count must be >= 1");
    std::vector<std::size_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = descend(rng.uniform01() * total());
    return out;
}

std::vector<std::size_t> SumTree::sample_indices_stratified(std::size_t count, Rng& rng) const {
    if (size_ == 0 || !(total() > 0.0))
        throw std::runtime_error("SumTree::sample_indices: empty tree or zero total");
    if (count == 0) throw std::invalid_argument("SumTree::sample_indices: count must be >= 1");
    std::vector<std::size_t> out(count);
    const double seg = total() / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = descend((static_cast<double>(i) + rng.uniform01()) * seg);
    return out;
}

}  // namespace ners
