#include <doctest.h>

#include <cmath>
#include <vector>

#include "ners/sumtree.hpp"
#include "test_util.hpp"

using ners::Rng;
using ners::SumTree;

TEST_CASE("insert stores values and accumulates the total") {
    SumTree tree(8);
    CHECK(tree.insert(1.0) == 0);
    CHECK(tree.total() == doctest::Approx(1.0));

    SumTree pair(8);
    pair.insert(2.0);
    pair.insert(3.0);
    CHECK(pair.total() == doctest::Approx(5.0));
    CHECK(pair.size() == 2);
}

TEST_CASE("insert wraps around ring-buffer style at capacity") {
    SumTree tree(4);
    for (int i = 0; i < 4; ++i) tree.insert(1.0);
    CHECK(tree.insert(1.0) == 0);  // fifth insert overwrites the oldest slot
    CHECK(tree.size() == 4);
    CHECK(tree.total() == doctest::Approx(4.0));
}

TEST_CASE("insert rejects negative values") {
    SumTree tree(4);
    CHECK_THROWS_AS(tree.insert(-0.5), std::domain_error);
}

TEST_CASE("update replaces a leaf and fixes ancestor sums") {
    SumTree tree(4);
    for (int i = 0; i < 4; ++i) tree.insert(1.0);
    tree.update(2, 5.0);
    CHECK(tree.total() == doctest::Approx(8.0));
    CHECK(tree.leaf(2) == doctest::Approx(5.0));
}

TEST_CASE("a zero-priority leaf is never sampled") {
    SumTree tree(4);
    for (int i = 0; i < 4; ++i) tree.insert(1.0);
    tree.update(1, 0.0);
    Rng rng(3);
    for (std::size_t idx : tree.sample_indices(20000, rng)) CHECK(idx != 1);
}

TEST_CASE("update on an unoccupied slot or with a negative value is rejected") {
    SumTree tree(8);
    tree.insert(1.0);
    CHECK_THROWS_AS(tree.update(1, 1.0), std::out_of_range);
    CHECK_THROWS_AS(tree.update(0, -1.0), std::domain_error);
}

TEST_CASE("root matches a brute-force sum after many random updates") {
    SumTree tree(1024);
    Rng rng(17);
    std::vector<double> mirror;
    for (int op = 0; op < 10000; ++op) {
        const double value = rng.uniform(0.0, 10.0);
        if (mirror.empty() || rng.uniform01() < 0.3) {
            const std::size_t slot = tree.insert(value);
            if (mirror.size() < 1024)
                mirror.push_back(value);
            else
                mirror[slot] = value;
        } else {
            const std::size_t slot = rng.uniform_index(mirror.size());
            tree.update(slot, value);
            mirror[slot] = value;
        }
    }
    double brute = 0.0;
    for (double v : mirror) brute += v;
    CHECK(std::abs(tree.total() - brute) <= 1e-9 * std::max(1.0, std::abs(brute)));
    for (std::size_t i = 0; i < mirror.size(); ++i) CHECK(tree.leaf(i) == mirror[i]);
}

TEST_CASE("uniform leaves sample uniformly") {
    SumTree tree(4);
    for (int i = 0; i < 4; ++i) tree.insert(1.0);
    Rng rng(5);
    std::vector<long> counts(4, 0);
    const long draws = 100000;
    for (std::size_t idx : tree.sample_indices(draws, rng)) counts[idx]++;
    for (long c : counts) {
        const double freq = static_cast<double>(c) / draws;
        CHECK(freq > 0.24);
        CHECK(freq < 0.26);
    }
}

TEST_CASE("two leaves with exponentiated priorities give the analytic split") {
    // Raw priorities {4, 1} at alpha = 0.5 enter the tree as {2, 1}.
    SumTree tree(2);
    tree.insert(2.0);
    tree.insert(1.0);
    Rng rng(6);
    long first = 0;
    const long draws = 100000;
    for (std::size_t idx : tree.sample_indices(draws, rng))
        if (idx == 0) ++first;
    const double freq = static_cast<double>(first) / draws;
    CHECK(freq == doctest::Approx(2.0 / 3.0).epsilon(0.02));
}

TEST_CASE("a single nonzero leaf is always chosen") {
    SumTree tree(8);
    tree.insert(0.0);
    tree.insert(3.5);
    tree.insert(0.0);
    Rng rng(7);
    for (std::size_t idx : tree.sample_indices(1000, rng)) CHECK(idx == 1);
}

TEST_CASE("sampling frequencies pass a chi-square test against leaf probabilities") {
    SumTree tree(64);
    Rng rng(19);
    for (int i = 0; i < 64; ++i) tree.insert(rng.uniform(0.5, 2.0));
    std::vector<double> probs(64);
    for (int i = 0; i < 64; ++i) probs[i] = tree.leaf(i) / tree.total();

    std::vector<long> counts(64, 0);
    const long draws = 100000;
    for (std::size_t idx : tree.sample_indices(draws, rng)) counts[idx]++;
    const double stat = testutil::chi2_statistic(counts, probs, draws);
    CHECK(testutil::chi2_pvalue(stat, 63.0) > 0.001);
}

TEST_CASE("parent sums stay exact under random op interleavings") {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t capacity = 1 + rng.uniform_index(70);
        SumTree tree(capacity);
        std::vector<double> mirror;
        for (int op = 0; op < 300; ++op) {
            if (mirror.empty() || rng.uniform01() < 0.5) {
                const double v = rng.uniform(0.0, 5.0);
                const std::size_t slot = tree.insert(v);
                if (mirror.size() < capacity)
                    mirror.push_back(v);
                else
                    mirror[slot] = v;
            } else {
                const std::size_t slot = rng.uniform_index(mirror.size());
                const double v = rng.uniform(0.0, 5.0);
                tree.update(slot, v);
                mirror[slot] = v;
            }
            double brute = 0.0;
            for (double v : mirror) brute += v;
            CHECK(std::abs(tree.total() - brute) <= 1e-9 * std::max(1.0, brute));
        }
    }
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    SumTree tree(16);
    Rng init(29);
    for (int i = 0; i < 16; ++i) tree.insert(init.uniform(0.1, 3.0));
    Rng a(99), b(99);
    CHECK(tree.sample_indices(500, a) == tree.sample_indices(500, b));
}

TEST_CASE("stratified draws with uniform leaves cover every slot") {
    SumTree tree(32);
    for (int i = 0; i < 32; ++i) tree.insert(1.0);
    Rng rng(31);
    const std::vector<std::size_t> picks = tree.sample_indices_stratified(32, rng);
    std::vector<bool> seen(32, false);
    for (std::size_t idx : picks) seen[idx] = true;
    for (bool s : seen) CHECK(s);
}

TEST_CASE("sampling an empty or zero-total tree is a state error") {
    SumTree empty(4);
    Rng rng(1);
    CHECK_THROWS_AS(empty.sample_indices(1, rng), std::runtime_error);
    SumTree zeros(4);
    zeros.insert(0.0);
    CHECK_THROWS_AS(zeros.sample_indices(1, rng), std::runtime_error);
}
