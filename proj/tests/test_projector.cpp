#include "doctest.h"

#include <cmath>
#include <fstream>

#include "gwm/projector.hpp"
#include "gwm/stable_hash.hpp"

#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace gwm;
using helpers::text_node;

namespace {

HopStack tiny_stack(std::size_t n, std::size_t d, std::size_t hops, std::uint64_t seed) {
    HopStack stack;
    stack.hop_count = hops;
    SplitMix rng(splitmix64(seed) ^ 0x57ac);
    std::vector<std::string> order;
    for (std::size_t i = 0; i < n; ++i) order.push_back("s" + std::to_string(i));
    stack.node_order = order;
    for (std::size_t l = 0; l <= hops; ++l) {
        Matrix m(n, d);
        for (auto& v : m.data) v = rng.next_signed_unit();
        stack.hops.push_back(std::move(m));
    }
    return stack;
}

// straight-line forward pass, no shared code with the library
std::vector<std::vector<double>> naive_fuse_node(const HopStack& stack, const Projector& p,
                                                 std::size_t row) {
    std::vector<std::vector<double>> tokens;
    for (std::size_t l = 0; l <= stack.hop_count; ++l) {
        std::vector<double> t(p.output_dim, 0.0);
        for (std::size_t r = 0; r < p.output_dim; ++r) {
            double z = p.biases[l][r];
            for (std::size_t c = 0; c < p.input_dim; ++c) {
                z += p.weights[l].at(r, c) * stack.hops[l].at(row, c);
            }
            t[r] = p.nonlinearity == Nonlinearity::Tanh ? std::tanh(z) : z;
        }
        tokens.push_back(std::move(t));
    }
    return tokens;
}

} // namespace

TEST_CASE("fuse: zero parameters emit zero tokens") {
    const HopStack stack = tiny_stack(3, 4, 2, 1);
    const Projector p = Projector::zeros(4, 3, 2);
    const GraphTokens tokens = fuse(stack, p, TargetScope::node("s1"));
    REQUIRE(tokens.count() == 3);
    for (const auto& t : tokens.tokens) {
        for (double v : t) CHECK(v == 0.0);
    }
}

TEST_CASE("fuse: identity weights with linear nonlinearity reproduce hop rows") {
    const HopStack stack = tiny_stack(3, 4, 2, 7);
    Projector p = Projector::zeros(4, 4, 2, Nonlinearity::Identity);
    for (std::size_t l = 0; l <= 2; ++l) {
        for (std::size_t i = 0; i < 4; ++i) p.weights[l].at(i, i) = 1.0;
    }
    const GraphTokens tokens = fuse(stack, p, TargetScope::node("s2"));
    for (std::size_t l = 0; l <= 2; ++l) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(tokens.tokens[l][c] == doctest::Approx(stack.hops[l].at(2, c)).epsilon(1e-15));
        }
    }
}

TEST_CASE("fuse: seeded random parameters match the straight-line oracle") {
    const HopStack stack = tiny_stack(5, 6, 3, 42);
    const Projector p = Projector::seeded(6, 4, 3, 99);
    const GraphTokens tokens = fuse(stack, p, TargetScope::node("s3"));
    const auto expected = naive_fuse_node(stack, p, 3);
    REQUIRE(tokens.count() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        for (std::size_t j = 0; j < expected[i].size(); ++j) {
            CHECK(tokens.tokens[i][j] == doctest::Approx(expected[i][j]).epsilon(1e-14));
        }
    }
}

TEST_CASE("fuse: graph scope mean-pools before projecting") {
    const HopStack stack = tiny_stack(4, 3, 1, 5);
    Projector p = Projector::zeros(3, 3, 1, Nonlinearity::Identity);
    for (std::size_t l = 0; l <= 1; ++l) {
        for (std::size_t i = 0; i < 3; ++i) p.weights[l].at(i, i) = 1.0;
    }
    const GraphTokens tokens = fuse(stack, p, TargetScope::graph());
    for (std::size_t l = 0; l <= 1; ++l) {
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < 4; ++r) mean += stack.hops[l].at(r, c);
            mean /= 4.0;
            CHECK(tokens.tokens[l][c] == doctest::Approx(mean).epsilon(1e-14));
        }
    }
}

TEST_CASE("fuse: edge scope concatenates both endpoints' sequences") {
    const HopStack stack = tiny_stack(4, 3, 2, 6);
    const Projector p = Projector::seeded(3, 2, 2, 17);
    const GraphTokens tokens = fuse(stack, p, TargetScope::edge("s0", "s2"));
    REQUIRE(tokens.count() == 6);  // 2 * (hops + 1)
    const auto first = naive_fuse_node(stack, p, 0);
    const auto second = naive_fuse_node(stack, p, 2);
    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(tokens.tokens[l][j] == doctest::Approx(first[l][j]).epsilon(1e-14));
            CHECK(tokens.tokens[3 + l][j] == doctest::Approx(second[l][j]).epsilon(1e-14));
        }
    }
}

TEST_CASE("fuse rejects unresolved scopes and dimension mismatches") {
    const HopStack stack = tiny_stack(3, 4, 2, 1);
    const Projector p = Projector::seeded(4, 3, 2, 1);
    try {
        fuse(stack, p, TargetScope::node("nonesuch"));
        FAIL("expected ScopeUnresolved");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ScopeUnresolved);
    }
    const Projector wrong = Projector::seeded(5, 3, 2, 1);
    try {
        fuse(stack, wrong, TargetScope::node("s0"));
        FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DimensionMismatch);
    }
}

TEST_CASE("every parameter of a 3x4 two-hop projector passes the finite-difference check") {
    const HopStack stack = tiny_stack(5, 4, 2, 2718);
    Projector p = Projector::seeded(4, 3, 2, 31);

    std::vector<ProjectorTrainingPair> pairs;
    SplitMix rng(0x7a26e7);
    for (const char* id : {"s0", "s2", "s4"}) {
        ProjectorTrainingPair pair;
        pair.stack = stack;
        pair.scope = TargetScope::node(id);
        pair.target.assign(3, 0.0);
        for (auto& v : pair.target) v = rng.next_signed_unit();
        pairs.push_back(std::move(pair));
    }
    // one graph-scope pair exercises pooling in the gradient too
    ProjectorTrainingPair pooled;
    pooled.stack = stack;
    pooled.scope = TargetScope::graph();
    pooled.target.assign(3, 0.25);
    pairs.push_back(std::move(pooled));

    const ProjectorGradient grad = projector_proxy_gradient(pairs, p);
    const double eps = 1e-5;
    auto central_difference = [&](double* slot) {
        const double saved = *slot;
        *slot = saved + eps;
        const double up = projector_proxy_loss(pairs, p);
        *slot = saved - eps;
        const double down = projector_proxy_loss(pairs, p);
        *slot = saved;
        return (up - down) / (2.0 * eps);
    };

    for (std::size_t l = 0; l <= 2; ++l) {
        for (std::size_t i = 0; i < p.weights[l].data.size(); ++i) {
            const double fd = central_difference(&p.weights[l].data[i]);
            const double an = grad.weights[l].data[i];
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
            CHECK(std::abs(fd - an) / scale < 1e-4);
        }
        for (std::size_t i = 0; i < p.biases[l].size(); ++i) {
            const double fd = central_difference(&p.biases[l][i]);
            const double an = grad.biases[l][i];
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
            CHECK(std::abs(fd - an) / scale < 1e-4);
        }
    }
}

TEST_CASE("single-pair linear training drives the loss to zero") {
    const HopStack stack = tiny_stack(4, 3, 2, 11);
    Projector p = Projector::seeded(3, 2, 2, 5, Nonlinearity::Identity);
    ProjectorTrainingPair pair;
    pair.stack = stack;
    pair.scope = TargetScope::node("s1");
    pair.target = {0.3, -0.7};
    const Projector trained = train_projector_proxy({pair}, p, 5000, 0.5);
    CHECK(projector_proxy_loss({pair}, trained) < 1e-6);
}

TEST_CASE("zero learning rate leaves parameters and loss unchanged") {
    const HopStack stack = tiny_stack(4, 3, 1, 3);
    const Projector p = Projector::seeded(3, 2, 1, 6);
    ProjectorTrainingPair pair;
    pair.stack = stack;
    pair.scope = TargetScope::node("s0");
    pair.target = {0.1, 0.2};
    const double before = projector_proxy_loss({pair}, p);
    const Projector after = train_projector_proxy({pair}, p, 50, 0.0);
    CHECK(projector_proxy_loss({pair}, after) == before);
    for (std::size_t l = 0; l <= 1; ++l) {
        CHECK(after.weights[l].data == p.weights[l].data);
        CHECK(after.biases[l] == p.biases[l]);
    }
}

TEST_CASE("training never returns parameters worse than the input") {
    const HopStack stack = tiny_stack(6, 4, 2, 23);
    const Projector p = Projector::seeded(4, 3, 2, 8);
    std::vector<ProjectorTrainingPair> pairs;
    SplitMix rng(0xfeed);
    for (int i = 0; i < 4; ++i) {
        ProjectorTrainingPair pair;
        pair.stack = stack;
        pair.scope = TargetScope::node("s" + std::to_string(i));
        pair.target.assign(3, rng.next_signed_unit());
        pairs.push_back(std::move(pair));
    }
    const double before = projector_proxy_loss(pairs, p);
    const Projector after = train_projector_proxy(pairs, p, 200, 0.3);
    CHECK(projector_proxy_loss(pairs, after) <= before);
}

TEST_CASE("divergence raises NonFiniteLoss carrying the last finite parameters") {
    const HopStack stack = tiny_stack(4, 3, 1, 9);
    const Projector p = Projector::seeded(3, 2, 1, 2, Nonlinearity::Identity);
    ProjectorTrainingPair pair;
    pair.stack = stack;
    pair.scope = TargetScope::node("s0");
    pair.target = {5.0, -5.0};
    try {
        train_projector_proxy({pair}, p, 2000, 1e9);
        FAIL("expected NonFiniteLoss");
    } catch (const NonFiniteLossError& e) {
        CHECK(e.code() == Errc::NonFiniteLoss);
        for (double v : e.last_finite().weights[0].data) CHECK(std::isfinite(v));
    }
}

TEST_CASE("projector checkpoints round-trip through the binary format") {
    Projector p = Projector::seeded(6, 4, 3, 77);
    const std::string path = helpers::temp_path("projector") + ".gwmp";
    save_projector(p, path);
    const Projector loaded = load_projector(path);
    CHECK(loaded.input_dim == 6);
    CHECK(loaded.output_dim == 4);
    CHECK(loaded.hop_count == 3);
    for (std::size_t l = 0; l <= 3; ++l) {
        for (std::size_t i = 0; i < p.weights[l].data.size(); ++i) {
            // float32 storage: promoted values match to float precision
            CHECK(loaded.weights[l].data[i] ==
                  doctest::Approx(p.weights[l].data[i]).epsilon(1e-7));
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("truncated projector checkpoints raise SchemaViolation") {
    Projector p = Projector::seeded(4, 3, 1, 1);
    const std::string path = helpers::temp_path("projector-trunc") + ".gwmp";
    save_projector(p, path);
    // chop the tail off
    {
        std::ifstream is(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    try {
        load_projector(path);
        FAIL("expected SchemaViolation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SchemaViolation);
    }
    std::remove(path.c_str());
}
