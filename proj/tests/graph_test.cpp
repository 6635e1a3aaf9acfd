#include "lgm/graph.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <queue>
#include <random>

using namespace lgm;

namespace {

// Independent girth oracle: for each edge, remove it and BFS the shortest
// alternative path between its endpoints; the minimum closure is the girth.
int brute_force_girth(const LatentGraph& G) {
    int best = std::numeric_limits<int>::max();
    for (const auto& [u, v] : G.edges()) {
        std::map<int, int> dist;
        std::queue<int> q;
        dist[u] = 0;
        q.push(u);
        while (!q.empty()) {
            int x = q.front();
            q.pop();
            for (int y : G.neighbors(x)) {
                if (x == u && y == v) continue;
                if (x == v && y == u) continue;
                if (!dist.count(y)) {
                    dist[y] = dist[x] + 1;
                    q.push(y);
                }
            }
        }
        if (dist.count(v)) best = std::min(best, dist[v] + 1);
    }
    return best;
}

LatentGraph random_graph(int n, double edge_prob, std::mt19937_64& rng) {
    LatentGraph G;
    for (int i = 0; i < n; ++i) G.add_node(i, true);
    std::uniform_real_distribution<double> unif(0, 1);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (unif(rng) < edge_prob) G.add_edge(i, j);
    return G;
}

}  // namespace

TEST(LatentGraph, RejectsMalformedInput) {
    LatentGraph G;
    G.add_node(0, true);
    G.add_node(1, false);
    EXPECT_THROW(G.add_node(0, true), std::invalid_argument);
    EXPECT_THROW(G.add_edge(0, 0), std::invalid_argument);
    EXPECT_THROW(G.add_edge(0, 7), std::invalid_argument);
    G.add_edge(0, 1);
    EXPECT_THROW(G.add_edge(1, 0), std::invalid_argument);
}

TEST(GenLatentCycle, MatchesConstruction) {
    LatentGraph G = gen_latent_cycle(10, 2);
    EXPECT_EQ(G.node_count(), 30u);
    EXPECT_EQ(G.hidden_nodes().size(), 10u);
    for (int h : G.hidden_nodes()) EXPECT_EQ(G.degree(h), 4);
    EXPECT_EQ(girth(G), std::optional<int>(10));
    EXPECT_EQ(depth(G), 1);

    LatentGraph small = gen_latent_cycle(3, 2);
    EXPECT_EQ(small.node_count(), 9u);
    EXPECT_EQ(girth(small), std::optional<int>(3));

    EXPECT_THROW(gen_latent_cycle(10, 0), std::invalid_argument);
}

TEST(GenLatentCycle, GirthAndDepthAcrossTheFamily) {
    for (int g : {3, 5, 10, 33, 100})
        for (int k = 1; k <= 4; ++k) {
            LatentGraph G = gen_latent_cycle(g, k);
            ASSERT_EQ(girth(G), std::optional<int>(g)) << "g=" << g << " k=" << k;
            ASSERT_EQ(depth(G), 1);
        }
}

TEST(GenRandomRegular, ProducesRequestedFamily) {
    LatentGraph G = gen_random_regular_girth(20, 3, 3, 7);
    EXPECT_EQ(G.node_count(), 20u);
    for (int v : G.nodes()) EXPECT_EQ(G.degree(v), 3);
    EXPECT_GE(girth_or_max(G), 3);

    // K4 is the only 3-regular graph on 4 nodes and has girth 3.
    EXPECT_THROW(gen_random_regular_girth(4, 3, 4, 1, 50), GenerationError);

    LatentGraph a = gen_random_regular_girth(16, 3, 4, 42);
    LatentGraph b = gen_random_regular_girth(16, 3, 4, 42);
    EXPECT_TRUE(a == b);
    EXPECT_THROW(gen_random_regular_girth(5, 3, 3, 1), std::invalid_argument);
}

TEST(Girth, KnownCases) {
    EXPECT_EQ(girth(gen_observed_cycle(6)), std::optional<int>(6));

    // C6 plus a chord between opposite nodes: two 4-cycles.
    LatentGraph G = gen_observed_cycle(6);
    G.add_edge(0, 3);
    EXPECT_EQ(girth(G), std::optional<int>(brute_force_girth(G)));
    EXPECT_EQ(girth(G), std::optional<int>(4));

    LatentGraph tree;
    for (int i = 0; i < 5; ++i) tree.add_node(i, true);
    for (int i = 1; i < 5; ++i) tree.add_edge(0, i);
    EXPECT_FALSE(girth(tree).has_value());
}

TEST(Girth, MatchesBruteForceOnRandomGraphs) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(3, 10);
    std::uniform_real_distribution<double> prob(0.15, 0.6);
    for (int trial = 0; trial < 200; ++trial) {
        LatentGraph G = random_graph(size(rng), prob(rng), rng);
        auto fast = girth(G);
        int slow = brute_force_girth(G);
        if (slow == std::numeric_limits<int>::max())
            EXPECT_FALSE(fast.has_value());
        else
            EXPECT_EQ(fast, std::optional<int>(slow)) << "trial " << trial;
    }
}

TEST(Depth, KnownCases) {
    EXPECT_EQ(depth(gen_latent_cycle(10, 2)), 1);
    EXPECT_EQ(depth(gen_observed_cycle(5)), 0);

    // chain h1 - h2 - v with only v observed
    LatentGraph chain;
    chain.add_node(0, false);
    chain.add_node(1, false);
    chain.add_node(2, true);
    chain.add_edge(0, 1);
    chain.add_edge(1, 2);
    EXPECT_EQ(depth(chain), 2);

    LatentGraph none;
    none.add_node(0, false);
    EXPECT_THROW(depth(none), std::invalid_argument);
}

TEST(BallAndInduced, CoversSpecExamples) {
    LatentGraph C10 = gen_observed_cycle(10);
    Ball b0 = ball_and_induced(C10, 3, 0);
    EXPECT_EQ(b0.members, std::vector<int>{3});
    EXPECT_EQ(b0.boundary, std::vector<int>{3});
    EXPECT_EQ(b0.induced.node_count(), 1u);

    Ball b2 = ball_and_induced(C10, 0, 2);
    EXPECT_EQ(b2.members, (std::vector<int>{0, 1, 2, 8, 9}));
    EXPECT_EQ(b2.boundary, (std::vector<int>{2, 8}));
    EXPECT_EQ(b2.induced.edge_count(), 4u);  // the 5-node path

    Ball whole = ball_and_induced(C10, 0, 10);
    EXPECT_EQ(whole.members.size(), 10u);
    EXPECT_EQ(whole.induced.edge_count(), 10u);
}

TEST(BallAndInduced, BoundaryAndEdgeInvariants) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        LatentGraph G = random_graph(9, 0.3, rng);
        for (int l = 0; l <= 3; ++l) {
            Ball b = ball_and_induced(G, 0, l);
            for (int v : b.boundary)
                EXPECT_TRUE(std::binary_search(b.members.begin(), b.members.end(), v));
            // induced edges are exactly the original edges inside the ball
            for (const auto& [u, v] : G.edges()) {
                bool inside = std::binary_search(b.members.begin(), b.members.end(), u) &&
                              std::binary_search(b.members.begin(), b.members.end(), v);
                EXPECT_EQ(b.induced.has_edge(u, v), inside);
            }
        }
    }
}

TEST(SampleObservedUniform, RespectsSeedAndRho) {
    LatentGraph G = gen_observed_cycle(40);
    EXPECT_THROW(sample_observed_uniform(G, 0.0, 1), std::invalid_argument);
    EXPECT_THROW(sample_observed_uniform(G, 1.5, 1), std::invalid_argument);

    LatentGraph all = sample_observed_uniform(G, 1.0, 3);
    EXPECT_EQ(all.observed_nodes().size(), 40u);
    EXPECT_EQ(depth(all), 0);

    LatentGraph a = sample_observed_uniform(G, 0.5, 11);
    LatentGraph b = sample_observed_uniform(G, 0.5, 11);
    EXPECT_TRUE(a == b);

    // binomial tail at m = 10^4: observed fraction within [0.48, 0.52]
    LatentGraph big;
    for (int i = 0; i < 10000; ++i) big.add_node(i, false);
    LatentGraph s = sample_observed_uniform(big, 0.5, 99);
    double frac = static_cast<double>(s.observed_nodes().size()) / 10000.0;
    EXPECT_GT(frac, 0.48);
    EXPECT_LT(frac, 0.52);
}

TEST(DepthBound, FormulaAndDegenerateCases) {
    DepthBoundQuery q;
    q.m = 1024;
    q.rho = 0.5;
    q.degree_min = 3;
    q.degree_max = 3;
    q.girth = 10;
    q.epsilon = 0.2;
    DepthBound b = depth_bound(q);
    // direct evaluation of the closed form
    double expect =
        std::log(std::log(4.0 * std::pow(1024.0, 1.2) * 3.0) / std::abs(std::log(0.5))) /
        std::log(2.0);
    EXPECT_NEAR(b.bound, expect, 1e-12);
    EXPECT_NEAR(b.bound, 3.9622, 1e-3);
    EXPECT_NEAR(b.probability, 0.75, 1e-12);

    q.rho = 1.0;
    EXPECT_EQ(depth_bound(q).bound, 0.0);

    q.rho = 0.5;
    q.epsilon = 50.0;  // far beyond the admissible exponent
    EXPECT_THROW(depth_bound(q), std::invalid_argument);
}

TEST(GraphStats, SummarizesTheCycleFamily) {
    GraphStats s = graph_stats(gen_latent_cycle(10, 2));
    EXPECT_EQ(s.p, 20);
    EXPECT_EQ(s.m, 30);
    EXPECT_EQ(s.girth, std::optional<int>(10));
    EXPECT_EQ(s.degree_min, 1);
    EXPECT_EQ(s.degree_max, 4);
    EXPECT_EQ(s.depth, 1);
    EXPECT_NEAR(s.rho, 2.0 / 3.0, 1e-15);
}
