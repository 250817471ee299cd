#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "eqsearch/embedding_store.hpp"

namespace eqsearch {

struct RpTreeConfig {
    int trees = 16;
    int leaf_size = 32;
    std::uint64_t seed = 0;
};

// Forest of random-hyperplane trees. Inner-product stores are indexed in an
// augmented space (extra coordinate sqrt(M^2 - |x|^2)) where the largest
// inner product is the nearest neighbor; cosine stores on unit vectors.
class RpTreeIndex {
public:
    static RpTreeIndex build(const EmbeddingStore& store, const RpTreeConfig& config = {});

    // Shared margin priority queue across all trees until `search_budget`
    // distinct candidates (0 means 16 * k * leaf_size), then exact rescoring.
    std::vector<SearchHit> query(const EmbeddingStore& store, const Vector<float>& q, std::size_t k,
                                 std::size_t search_budget = 0) const;

    const RpTreeConfig& config() const noexcept { return config_; }
    std::size_t size() const noexcept { return n_; }
    std::size_t tree_count() const noexcept { return roots_.size(); }
    // Ids held by the leaves of tree t (each stored row exactly once).
    std::vector<std::size_t> leaf_items(std::size_t tree) const;

    void save(const std::filesystem::path& path) const;
    static RpTreeIndex load(const std::filesystem::path& path);

private:
    struct Node {
        std::int32_t left = -1, right = -1;  // -1 for leaves
        std::uint32_t begin = 0, end = 0;    // leaf item range
        float offset = 0;
    };

    Vector<float> transform_query(const Vector<float>& q) const;
    void build_tree(const Matrix<float>& points, std::vector<std::uint32_t>& items, std::uint32_t lo,
                    std::uint32_t hi, std::uint64_t& state);

    RpTreeConfig config_;
    std::size_t n_ = 0;
    int dim_ = 0;          // dimension of the indexed space
    bool augmented_ = false;
    bool unit_ = false;
    std::vector<Node> nodes_;
    std::vector<float> normals_;  // nodes_.size() x dim_
    std::vector<std::uint32_t> items_;
    std::vector<std::int32_t> roots_;
};

}  // namespace eqsearch
