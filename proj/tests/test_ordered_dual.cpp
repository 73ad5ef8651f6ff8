#include "bvm/ordered_dual.hpp"

#include <gtest/gtest.h>

#include <stdexcept>
#include <vector>

namespace bvm {
namespace {

// A line of demes with one cell each; positions are deme offsets from 10.
const Torus line(40, 1);
Site at(int x) { return {x + 10, 0}; }

std::vector<int> positions(const OrderedDual& d) {
    std::vector<int> out;
    for (const Site& s : d.particles) out.push_back(s.deme - 10);
    return out;
}

void act(OrderedDual& d, DualMove move, int from, int to) {
    ASSERT_TRUE(apply_at_site(d, move, at(from), at(to)));
}

TEST(OrderRules, WorkedSequenceFromOne) {
    OrderedDual d{{at(1)}};
    act(d, DualMove::birth, 1, 0);
    EXPECT_EQ(positions(d), (std::vector<int>{0, 1}));
    act(d, DualMove::jump, 1, 2);
    EXPECT_EQ(positions(d), (std::vector<int>{0, 2}));
    act(d, DualMove::jump, 0, -1);
    EXPECT_EQ(positions(d), (std::vector<int>{-1, 2}));
    act(d, DualMove::birth, 2, 3);
    EXPECT_EQ(positions(d), (std::vector<int>{-1, 3, 2}));
    act(d, DualMove::birth, -1, 0);
    EXPECT_EQ(positions(d), (std::vector<int>{0, -1, 3, 2}));
    act(d, DualMove::jump, 0, 1);
    EXPECT_EQ(positions(d), (std::vector<int>{1, -1, 3, 2}));
    act(d, DualMove::jump, 2, 3);
    EXPECT_EQ(positions(d), (std::vector<int>{1, -1, 3}));
    act(d, DualMove::birth, -1, -2);
    EXPECT_EQ(positions(d), (std::vector<int>{1, -2, -1, 3}));
}

TEST(OrderRules, BirthPutsOffspringFirst) {
    OrderedDual d{{at(0), at(5)}};
    apply_order_rules(d, DualEvent{DualMove::birth, 0, at(-1)});
    EXPECT_EQ(positions(d), (std::vector<int>{-1, 0, 5}));
}

TEST(OrderRules, CoalescenceDropsLargerIndex) {
    // Index 4 (1-based) jumps onto index 2: the mover is dropped.
    OrderedDual d{{at(0), at(1), at(2), at(3)}};
    apply_order_rules(d, DualEvent{DualMove::jump, 3, at(1)});
    EXPECT_EQ(positions(d), (std::vector<int>{0, 1, 2}));
    // Index 2 jumps onto index 4: index 4 is dropped, the mover keeps index 2.
    OrderedDual e{{at(0), at(1), at(2), at(3)}};
    apply_order_rules(e, DualEvent{DualMove::jump, 1, at(3)});
    EXPECT_EQ(positions(e), (std::vector<int>{0, 3, 2}));
}

TEST(OrderRules, BirthOntoOccupiedSiteMerges) {
    // Offspring at index 1 lands on the particle at old index 1 (now 2): that one goes.
    OrderedDual d{{at(0), at(1), at(4)}};
    apply_order_rules(d, DualEvent{DualMove::birth, 1, at(4)});
    EXPECT_EQ(positions(d), (std::vector<int>{0, 4, 1}));
    // Offspring lands on an earlier particle: the offspring goes.
    OrderedDual e{{at(0), at(1)}};
    apply_order_rules(e, DualEvent{DualMove::birth, 1, at(0)});
    EXPECT_EQ(positions(e), (std::vector<int>{0, 1}));
}

TEST(OrderRules, RejectsBadEvents) {
    OrderedDual d{{at(0)}};
    EXPECT_THROW(apply_order_rules(d, DualEvent{DualMove::jump, 1, at(2)}), std::out_of_range);
    EXPECT_THROW(apply_order_rules(d, DualEvent{DualMove::jump, 0, at(0)}), std::invalid_argument);
    EXPECT_FALSE(apply_at_site(d, DualMove::jump, at(7), at(8)));
}

TEST(DualFunctionals, ExamplesFromAncestry) {
    std::vector<std::uint8_t> xi(line.size(), 0), eta(line.size(), 0);
    const OrderedDual d{{at(1), at(-2)}};
    EXPECT_EQ(eval_F(d, line, xi), 1.0);
    EXPECT_EQ(eval_G(d, line, xi, eta), 0.0);
    EXPECT_EQ(first_occupied(d, line, xi), nullptr);

    xi[line.index(at(1))] = eta[line.index(at(1))] = 1;
    EXPECT_EQ(eval_G(d, line, xi, eta), 1.0);

    xi[line.index(at(1))] = eta[line.index(at(1))] = 0;
    xi[line.index(at(-2))] = eta[line.index(at(-2))] = 1;
    EXPECT_EQ(eval_F(d, line, xi), 0.0);
    EXPECT_EQ(eval_G(d, line, xi, eta), 1.0);
    ASSERT_NE(first_occupied(d, line, xi), nullptr);
    EXPECT_EQ(*first_occupied(d, line, xi), at(-2));
}

// F + sum_j xi0(y_j) prod_{i<j} (1 - xi0(y_i)) = 1 for every binary xi0.
TEST(DualFunctionals, TelescopingIdentityIsExact) {
    const OrderedDual d{{at(3), at(0), at(5), at(-1), at(2)}};
    std::vector<std::uint8_t> xi(line.size(), 0);
    const std::vector<int> xs{3, 0, 5, -1, 2};
    for (unsigned mask = 0; mask < 32; ++mask) {
        for (std::size_t j = 0; j < xs.size(); ++j) xi[line.index(at(xs[j]))] = (mask >> j) & 1u;
        const double F = eval_F(d, line, xi);
        const double G_all = eval_G(d, line, xi, xi);
        EXPECT_TRUE(F == 0.0 || F == 1.0);
        EXPECT_EQ(F + G_all, 1.0) << "mask " << mask;
    }
}

}  // namespace
}  // namespace bvm
