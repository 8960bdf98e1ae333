#include "gwm/projector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "binary_io.hpp"
#include "gwm/stable_hash.hpp"

namespace gwm {

namespace {

constexpr std::uint32_t kProjectorVersion = 1;
constexpr char kProjectorMagic[4] = {'G', 'W', 'M', 'P'};

double apply_nl(Nonlinearity nl, double z) {
    return nl == Nonlinearity::Tanh ? std::tanh(z) : z;
}

double apply_nl_derivative(Nonlinearity nl, double z) {
    if (nl == Nonlinearity::Identity) return 1.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

std::size_t resolve_index(const HopStack& stack, const std::string& id) {
    for (std::size_t i = 0; i < stack.node_order.size(); ++i) {
        if (stack.node_order[i] == id) return i;
    }
    raise(Errc::ScopeUnresolved, "node '" + id + "' not in the stack's node order");
}

// The pooled per-hop input rows a scope selects: one row per emitted token.
// Token i uses hop level i % (L+1); edge scope appends the second endpoint's
// sequence after the first.
std::vector<std::vector<double>> scope_inputs(const HopStack& stack, const TargetScope& scope) {
    const std::size_t levels = stack.hop_count + 1;
    std::vector<std::vector<double>> inputs;

    auto push_node_rows = [&](std::size_t row) {
        for (std::size_t l = 0; l < levels; ++l) {
            auto r = stack.hops[l].row(row);
            inputs.emplace_back(r.begin(), r.end());
        }
    };

    switch (scope.kind) {
        case ScopeKind::Node: {
            if (scope.node_ids.size() != 1) {
                raise(Errc::ScopeUnresolved, "node scope takes exactly one id");
            }
            push_node_rows(resolve_index(stack, scope.node_ids[0]));
            break;
        }
        case ScopeKind::Edge: {
            if (scope.node_ids.size() != 2) {
                raise(Errc::ScopeUnresolved, "edge scope takes exactly two ids");
            }
            push_node_rows(resolve_index(stack, scope.node_ids[0]));
            push_node_rows(resolve_index(stack, scope.node_ids[1]));
            break;
        }
        case ScopeKind::Graph: {
            std::vector<std::size_t> rows;
            if (scope.node_ids.empty()) {
                rows.resize(stack.node_order.size());
                for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            } else {
                for (const auto& id : scope.node_ids) rows.push_back(resolve_index(stack, id));
            }
            if (rows.empty()) {
                raise(Errc::ScopeUnresolved, "graph scope over an empty stack");
            }
            // unweighted mean pool, then project
            const std::size_t d = stack.hops[0].cols;
            for (std::size_t l = 0; l < levels; ++l) {
                std::vector<double> pooled(d, 0.0);
                for (std::size_t row : rows) {
                    auto r = stack.hops[l].row(row);
                    for (std::size_t c = 0; c < d; ++c) pooled[c] += r[c];
                }
                for (auto& v : pooled) v /= static_cast<double>(rows.size());
                inputs.push_back(std::move(pooled));
            }
            break;
        }
    }
    return inputs;
}

} // namespace

Projector Projector::zeros(std::size_t input_dim, std::size_t output_dim, std::size_t hop_count,
                           Nonlinearity nl) {
    Projector p;
    p.input_dim = input_dim;
    p.output_dim = output_dim;
    p.hop_count = hop_count;
    p.nonlinearity = nl;
    p.weights.assign(hop_count + 1, Matrix(output_dim, input_dim));
    p.biases.assign(hop_count + 1, std::vector<double>(output_dim, 0.0));
    return p;
}

Projector Projector::seeded(std::size_t input_dim, std::size_t output_dim, std::size_t hop_count,
                            std::uint64_t seed, Nonlinearity nl) {
    Projector p = zeros(input_dim, output_dim, hop_count, nl);
    SplitMix rng(splitmix64(seed) ^ 0x70726f6aull);  // "proj"
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (auto& w : p.weights) {
        for (auto& v : w.data) v = rng.next_signed_unit() * scale;
    }
    for (auto& b : p.biases) {
        for (auto& v : b) v = rng.next_signed_unit() * 0.01;
    }
    return p;
}

void Projector::validate() const {
    if (weights.size() != hop_count + 1 || biases.size() != hop_count + 1) {
        raise(Errc::DimensionMismatch, "projector must carry hop_count+1 affine maps");
    }
    for (std::size_t l = 0; l <= hop_count; ++l) {
        if (weights[l].rows != output_dim || weights[l].cols != input_dim ||
            biases[l].size() != output_dim) {
            raise(Errc::DimensionMismatch, "projector map " + std::to_string(l) + " has bad shape");
        }
        for (double v : weights[l].data) {
            if (!std::isfinite(v)) raise(Errc::NonFiniteLoss, "non-finite projector weight");
        }
        for (double v : biases[l]) {
            if (!std::isfinite(v)) raise(Errc::NonFiniteLoss, "non-finite projector bias");
        }
    }
}

GraphTokens fuse(const HopStack& stack, const Projector& projector, const TargetScope& scope) {
    projector.validate();
    if (stack.hops.size() != stack.hop_count + 1) {
        raise(Errc::ShapeMismatch, "hop stack entry count disagrees with hop_count");
    }
    if (stack.hops[0].cols != projector.input_dim) {
        raise(Errc::DimensionMismatch, "stack dim " + std::to_string(stack.hops[0].cols) +
                                           " vs projector input " +
                                           std::to_string(projector.input_dim));
    }
    if (stack.hop_count != projector.hop_count) {
        raise(Errc::DimensionMismatch, "stack hop count " + std::to_string(stack.hop_count) +
                                           " vs projector hop count " +
                                           std::to_string(projector.hop_count));
    }

    const std::size_t levels = stack.hop_count + 1;
    GraphTokens out;
    out.dim = projector.output_dim;
    const auto inputs = scope_inputs(stack, scope);
    out.tokens.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::size_t l = i % levels;
        const Matrix& w = projector.weights[l];
        const auto& b = projector.biases[l];
        std::vector<double> token(projector.output_dim, 0.0);
        for (std::size_t r = 0; r < projector.output_dim; ++r) {
            double z = b[r];
            const double* wr = w.data.data() + r * w.cols;
            for (std::size_t c = 0; c < w.cols; ++c) z += wr[c] * inputs[i][c];
            token[r] = apply_nl(projector.nonlinearity, z);
        }
        out.tokens.push_back(std::move(token));
    }
    return out;
}

double projector_proxy_loss(const std::vector<ProjectorTrainingPair>& pairs,
                            const Projector& projector) {
    if (pairs.empty()) {
        raise(Errc::ShapeMismatch, "proxy loss needs at least one training pair");
    }
    double total = 0.0;
    for (const auto& pair : pairs) {
        if (pair.target.size() != projector.output_dim) {
            raise(Errc::DimensionMismatch, "target dim disagrees with projector output");
        }
        const GraphTokens tokens = fuse(pair.stack, projector, pair.scope);
        std::vector<double> mean(projector.output_dim, 0.0);
        for (const auto& t : tokens.tokens) {
            for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += t[j];
        }
        for (auto& v : mean) v /= static_cast<double>(tokens.tokens.size());
        double err = 0.0;
        for (std::size_t j = 0; j < mean.size(); ++j) {
            const double d = mean[j] - pair.target[j];
            err += d * d;
        }
        total += err / static_cast<double>(projector.output_dim);
    }
    return total / static_cast<double>(pairs.size());
}

ProjectorGradient projector_proxy_gradient(const std::vector<ProjectorTrainingPair>& pairs,
                                           const Projector& projector) {
    if (pairs.empty()) {
        raise(Errc::ShapeMismatch, "proxy gradient needs at least one training pair");
    }
    ProjectorGradient grad;
    grad.weights.assign(projector.hop_count + 1, Matrix(projector.output_dim, projector.input_dim));
    grad.biases.assign(projector.hop_count + 1, std::vector<double>(projector.output_dim, 0.0));

    const std::size_t levels = projector.hop_count + 1;
    const double pair_norm = 1.0 / static_cast<double>(pairs.size());
    const double dim_norm = 1.0 / static_cast<double>(projector.output_dim);

    for (const auto& pair : pairs) {
        const auto inputs = scope_inputs(pair.stack, pair.scope);
        const std::size_t token_count = inputs.size();

        // forward pass keeping pre-activations
        std::vector<std::vector<double>> zs(token_count);
        std::vector<double> mean(projector.output_dim, 0.0);
        for (std::size_t i = 0; i < token_count; ++i) {
            const std::size_t l = i % levels;
            const Matrix& w = projector.weights[l];
            const auto& b = projector.biases[l];
            zs[i].assign(projector.output_dim, 0.0);
            for (std::size_t r = 0; r < projector.output_dim; ++r) {
                double z = b[r];
                const double* wr = w.data.data() + r * w.cols;
                for (std::size_t c = 0; c < w.cols; ++c) z += wr[c] * inputs[i][c];
                zs[i][r] = z;
                mean[r] += apply_nl(projector.nonlinearity, z);
            }
        }
        for (auto& v : mean) v /= static_cast<double>(token_count);

        // d loss / d mean_j = 2 (mean_j - target_j) / (P * d_out)
        std::vector<double> dmean(projector.output_dim);
        for (std::size_t j = 0; j < dmean.size(); ++j) {
            dmean[j] = 2.0 * (mean[j] - pair.target[j]) * pair_norm * dim_norm;
        }

        const double token_norm = 1.0 / static_cast<double>(token_count);
        for (std::size_t i = 0; i < token_count; ++i) {
            const std::size_t l = i % levels;
            Matrix& gw = grad.weights[l];
            auto& gb = grad.biases[l];
            for (std::size_t r = 0; r < projector.output_dim; ++r) {
                const double dz =
                    dmean[r] * token_norm * apply_nl_derivative(projector.nonlinearity, zs[i][r]);
                gb[r] += dz;
                double* gwr = gw.data.data() + r * gw.cols;
                for (std::size_t c = 0; c < gw.cols; ++c) gwr[c] += dz * inputs[i][c];
            }
        }
    }
    return grad;
}

Projector train_projector_proxy(const std::vector<ProjectorTrainingPair>& pairs,
                                Projector projector, std::size_t steps, double learning_rate,
                                std::uint64_t /*seed*/) {
    if (steps == 0) {
        raise(Errc::ShapeMismatch, "training needs steps >= 1");
    }
    if (learning_rate < 0.0) {
        raise(Errc::ShapeMismatch, "learning rate must be >= 0");
    }
    projector.validate();

    Projector best = projector;
    double best_loss = projector_proxy_loss(pairs, projector);
    if (!std::isfinite(best_loss)) {
        throw NonFiniteLossError("initial loss is not finite", projector);
    }

    for (std::size_t step = 0; step < steps; ++step) {
        const ProjectorGradient grad = projector_proxy_gradient(pairs, projector);
        for (std::size_t l = 0; l <= projector.hop_count; ++l) {
            for (std::size_t i = 0; i < projector.weights[l].data.size(); ++i) {
                projector.weights[l].data[i] -= learning_rate * grad.weights[l].data[i];
            }
            for (std::size_t i = 0; i < projector.biases[l].size(); ++i) {
                projector.biases[l][i] -= learning_rate * grad.biases[l][i];
            }
        }
        const double loss = projector_proxy_loss(pairs, projector);
        if (!std::isfinite(loss)) {
            throw NonFiniteLossError("loss diverged at step " + std::to_string(step), best);
        }
        if (loss < best_loss) {
            best_loss = loss;
            best = projector;
        }
    }
    return best;
}

void save_projector(const Projector& projector, const std::string& path) {
    projector.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        raise(Errc::IoError, "cannot open '" + path + "' for writing");
    }
    os.write(kProjectorMagic, 4);
    detail::write_u32(os, kProjectorVersion);
    detail::write_u32(os, static_cast<std::uint32_t>(projector.hop_count));
    detail::write_u32(os, static_cast<std::uint32_t>(projector.input_dim));
    detail::write_u32(os, static_cast<std::uint32_t>(projector.output_dim));
    for (std::size_t l = 0; l <= projector.hop_count; ++l) {
        for (double v : projector.weights[l].data) detail::write_f32(os, static_cast<float>(v));
        for (double v : projector.biases[l]) detail::write_f32(os, static_cast<float>(v));
    }
    if (!os) {
        raise(Errc::IoError, "write failed for '" + path + "'");
    }
}

Projector load_projector(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        raise(Errc::IoError, "cannot open '" + path + "'");
    }
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kProjectorMagic, 4) != 0) {
        raise(Errc::SchemaViolation, "'" + path + "' is not a projector checkpoint");
    }
    const std::uint32_t version = detail::read_u32(is, "projector version");
    if (version != kProjectorVersion) {
        raise(Errc::SchemaViolation, "unsupported projector version " + std::to_string(version));
    }
    const std::uint32_t hop_count = detail::read_u32(is, "projector hop count");
    const std::uint32_t input_dim = detail::read_u32(is, "projector input dim");
    const std::uint32_t output_dim = detail::read_u32(is, "projector output dim");
    Projector p = Projector::zeros(input_dim, output_dim, hop_count);
    for (std::size_t l = 0; l <= p.hop_count; ++l) {
        for (auto& v : p.weights[l].data) v = detail::read_f32(is, "projector weights");
        for (auto& v : p.biases[l]) v = detail::read_f32(is, "projector biases");
    }
    // trailing garbage means the file is not what the header claims
    is.peek();
    if (!is.eof()) {
        raise(Errc::SchemaViolation, "'" + path + "' has trailing bytes");
    }
    p.validate();
    return p;
}

} // namespace gwm
