#include "gwm/edge_builder.hpp"

#include <algorithm>
#include <cmath>

#include "gwm/stable_hash.hpp"

namespace gwm {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        raise(Errc::DimensionMismatch, "cosine: vector lengths disagree");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;  // degenerate vectors rank last
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

std::vector<double> node_vector(const MultiModalNode& n, Modality modality,
                                const ConcatLayout& layout) {
    if (modality == Modality::Concat) return concat_embedding(n, layout);
    const auto& slot = n.embedding(modality);
    if (!slot) {
        raise(Errc::MissingEmbedding, "node '" + n.id + "' lacks " +
                                          std::string(modality_name(modality)) + " embedding");
    }
    return *slot;
}

} // namespace

GraphState knn_implicit_edges(const GraphState& state, Modality modality, std::size_t k,
                              double threshold) {
    const auto order = state.node_order();
    const std::size_t n = order.size();
    if (k == 0 || k >= n) {
        raise(Errc::DegenerateK, "k=" + std::to_string(k) + " with " + std::to_string(n) + " nodes");
    }

    const ConcatLayout layout = concat_layout(state);
    std::vector<std::vector<double>> vectors;
    vectors.reserve(n);
    for (const auto& id : order) {
        vectors.push_back(node_vector(state.node(id), modality, layout));
    }

    // exact brute-force kNN; all-pairs similarity fits comfortably at this scale
    Matrix sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double s = cosine_similarity(vectors[i], vectors[j]);
            sim.at(i, j) = s;
            sim.at(j, i) = s;
        }
    }

    struct Candidate {
        double sim;
        std::size_t idx;
    };

    // union of directed kNN lists, canonicalized to undirected pairs
    std::set<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Candidate> cands;
        cands.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && sim.at(i, j) >= threshold) cands.push_back({sim.at(i, j), j});
        }
        std::sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
            if (a.sim != b.sim) return a.sim > b.sim;
            return order[a.idx] < order[b.idx];
        });
        const std::size_t take = std::min(k, cands.size());
        for (std::size_t t = 0; t < take; ++t) {
            const std::size_t j = cands[t].idx;
            pairs.insert({std::min(i, j), std::max(i, j)});
        }
    }

    std::vector<Edge> fresh;
    for (const auto& [i, j] : pairs) {
        if (state.has_edge(order[i], order[j], EdgeKind::Implicit)) continue;
        // cosine can exceed 1 by a few ulps on identical vectors
        const double w = std::clamp(sim.at(i, j), 0.0, 1.0);
        fresh.push_back(Edge{order[i], order[j], EdgeKind::Implicit, w, std::nullopt});
    }
    if (fresh.empty()) return state;
    return add_edges(state, std::move(fresh));
}

NormalizedAdjacency normalize_adjacency(const Adjacency& adj) {
    const SparseMatrix& a = adj.matrix;
    if (!a.is_symmetric()) {
        raise(Errc::AsymmetricInput, "adjacency must be symmetric");
    }
    for (double v : a.values()) {
        if (v < 0.0) raise(Errc::AsymmetricInput, "adjacency entries must be non-negative");
    }
    const std::vector<double> degrees = a.row_sums();
    std::vector<double> inv_sqrt(degrees.size(), 0.0);
    for (std::size_t i = 0; i < degrees.size(); ++i) {
        // d_i = 0 leaves row and column i all-zero
        inv_sqrt[i] = degrees[i] > 0.0 ? 1.0 / std::sqrt(degrees[i]) : 0.0;
    }
    NormalizedAdjacency out;
    out.matrix = a.map_values([&](const SparseMatrix& m, std::size_t entry) {
        const std::size_t r = m.entry_row(entry);
        const std::size_t c = m.col_idx()[entry];
        return m.values()[entry] * inv_sqrt[r] * inv_sqrt[c];
    });
    out.node_order = adj.node_order;
    out.built_from_version = adj.built_from_version;
    return out;
}

double spectral_radius_estimate(const NormalizedAdjacency& norm, std::size_t iters,
                                std::uint64_t seed) {
    const SparseMatrix& a = norm.matrix;
    const std::size_t n = a.rows();
    if (n == 0) return 0.0;
    if (iters == 0) {
        raise(Errc::ShapeMismatch, "power iteration needs at least one step");
    }

    SplitMix rng(splitmix64(seed) ^ 0x5eedc0ffee5eedull);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.next_signed_unit();

    std::vector<double> y(n, 0.0);
    double estimate = 0.0;
    for (std::size_t it = 0; it < iters; ++it) {
        double nx = 0.0;
        for (double v : x) nx += v * v;
        nx = std::sqrt(nx);
        if (nx == 0.0) return 0.0;  // start vector (or iterate) annihilated
        for (auto& v : x) v /= nx;

        a.multiply_into(x, 1, y);
        double ny = 0.0;
        for (double v : y) ny += v * v;
        estimate = std::sqrt(ny);  // ||A x|| with ||x|| = 1
        std::swap(x, y);
    }
    return estimate;
}

} // namespace gwm
