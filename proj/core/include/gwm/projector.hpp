#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwm/embed.hpp"
#include "gwm/matrix.hpp"

namespace gwm {

enum class Nonlinearity { Tanh, Identity };

// Cross-modal fusion projector: one affine map per hop level into decoder
// token space, with an elementwise nonlinearity. Hop index is semantic
// (graph distance), so the maps are not shared.
struct Projector {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    std::size_t hop_count = 0;  // maps exist for levels 0..hop_count
    Nonlinearity nonlinearity = Nonlinearity::Tanh;
    std::vector<Matrix> weights;              // each output_dim x input_dim
    std::vector<std::vector<double>> biases;  // each output_dim

    static Projector zeros(std::size_t input_dim, std::size_t output_dim, std::size_t hop_count,
                           Nonlinearity nl = Nonlinearity::Tanh);
    // Small random init, deterministic given the seed.
    static Projector seeded(std::size_t input_dim, std::size_t output_dim, std::size_t hop_count,
                            std::uint64_t seed, Nonlinearity nl = Nonlinearity::Tanh);

    void validate() const;  // shape consistency + finite parameters
};

enum class ScopeKind { Node, Edge, Graph };

// What the fused tokens describe: one node, an edge's two endpoints, or a
// pooled node set (empty set = whole graph).
struct TargetScope {
    ScopeKind kind = ScopeKind::Graph;
    std::vector<std::string> node_ids;

    static TargetScope node(std::string id) { return {ScopeKind::Node, {std::move(id)}}; }
    static TargetScope edge(std::string a, std::string b) {
        return {ScopeKind::Edge, {std::move(a), std::move(b)}};
    }
    static TargetScope graph(std::vector<std::string> ids = {}) {
        return {ScopeKind::Graph, std::move(ids)};
    }
};

// Fused per-hop tokens in decoder space. Node/graph scope yields L+1 tokens;
// edge scope concatenates both endpoints' sequences (2(L+1) tokens).
struct GraphTokens {
    std::vector<std::vector<double>> tokens;
    std::size_t dim = 0;

    std::size_t count() const { return tokens.size(); }
};

GraphTokens fuse(const HopStack& stack, const Projector& projector, const TargetScope& scope);

// ---- proxy trainer -----------------------------------------------------------
//
// The real downstream objective needs decoder weights, which live out of
// process. The proxy keeps the training locus (projector parameters only):
// full-batch gradient descent on the MSE between the mean fused token and a
// target vector.

struct ProjectorTrainingPair {
    HopStack stack;
    TargetScope scope;
    std::vector<double> target;  // dim = projector output_dim
};

double projector_proxy_loss(const std::vector<ProjectorTrainingPair>& pairs,
                            const Projector& projector);

// Analytic full-batch gradient; layout mirrors Projector (per-hop W then b).
struct ProjectorGradient {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

ProjectorGradient projector_proxy_gradient(const std::vector<ProjectorTrainingPair>& pairs,
                                           const Projector& projector);

// Thrown when the loss stops being finite; carries the last finite state.
class NonFiniteLossError : public Error {
public:
    NonFiniteLossError(std::string message, Projector last_finite)
        : Error(Errc::NonFiniteLoss, std::move(message)), last_finite_(std::move(last_finite)) {}
    const Projector& last_finite() const { return last_finite_; }

private:
    Projector last_finite_;
};

// Returns parameters whose training-set loss is <= the input's. seed is
// accepted for interface stability; training is full-batch and deterministic.
Projector train_projector_proxy(const std::vector<ProjectorTrainingPair>& pairs,
                                Projector projector, std::size_t steps, double learning_rate,
                                std::uint64_t seed = 0);

// Checkpoint format: magic "GWMP", version u32, hop_count u32, input u32,
// output u32, then per level W row-major float32 little-endian followed by b.
void save_projector(const Projector& projector, const std::string& path);
Projector load_projector(const std::string& path);

} // namespace gwm
