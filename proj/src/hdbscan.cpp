#include "guardcert/hdbscan.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <tuple>

namespace guardcert {

namespace {

// Points stored column-wise so every point is a contiguous vector; the dot
// kernel then matches cosine_distance() bit for bit.
class CosineSpace {
public:
    explicit CosineSpace(const Eigen::Ref<const Matrix>& points)
        : cols_(points.transpose()), norms_(cols_.cols()) {
        require_finite(points, "points");
        for (Eigen::Index i = 0; i < cols_.cols(); ++i) {
            norms_[i] = cols_.col(i).norm();
            if (norms_[i] == 0.0) {
                throw DomainError("point " + std::to_string(i) +
                                  " has zero norm; cosine distance is undefined");
            }
        }
    }

    Eigen::Index size() const { return cols_.cols(); }

    double distance(Eigen::Index i, Eigen::Index j) const {
        if (i == j) {
            return 0.0;
        }
        if (i > j) {
            std::swap(i, j);
        }
        const double cos = cols_.col(i).dot(cols_.col(j)) / (norms_[i] * norms_[j]);
        return std::clamp(1.0 - cos, 0.0, 2.0);
    }

private:
    Matrix cols_;
    Vector norms_;
};

using EdgeKey = std::tuple<double, Eigen::Index, Eigen::Index>;

EdgeKey key_of(double w, Eigen::Index a, Eigen::Index b) {
    return {w, std::min(a, b), std::max(a, b)};
}

std::vector<double> core_from_space(const CosineSpace& space, int min_samples) {
    const Eigen::Index n = space.size();
    std::vector<double> core(static_cast<std::size_t>(n), 0.0);
    if (n < 2) {
        return core;
    }
    const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(min_samples, n - 1));
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        row.clear();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) {
                row.push_back(space.distance(i, j));
            }
        }
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end());
        core[static_cast<std::size_t>(i)] = row[k - 1];
    }
    return core;
}

std::vector<MstEdge> mst_from_space(const CosineSpace& space, const std::vector<double>& core) {
    const Eigen::Index n = space.size();
    if (static_cast<Eigen::Index>(core.size()) != n) {
        throw DimensionError("core distance count does not match point count");
    }
    std::vector<MstEdge> edges;
    if (n < 2) {
        return edges;
    }
    edges.reserve(static_cast<std::size_t>(n - 1));

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
    std::vector<double> best_w(static_cast<std::size_t>(n), inf);
    std::vector<Eigen::Index> best_from(static_cast<std::size_t>(n), -1);

    auto mr = [&](Eigen::Index a, Eigen::Index b) {
        return std::max({core[static_cast<std::size_t>(a)], core[static_cast<std::size_t>(b)],
                         space.distance(a, b)});
    };

    Eigen::Index current = 0;
    in_tree[0] = 1;
    for (Eigen::Index step = 1; step < n; ++step) {
        Eigen::Index next = -1;
        for (Eigen::Index v = 0; v < n; ++v) {
            const auto uv = static_cast<std::size_t>(v);
            if (in_tree[uv]) {
                continue;
            }
            const double w = mr(current, v);
            if (best_from[uv] < 0 || key_of(w, current, v) < key_of(best_w[uv], best_from[uv], v)) {
                best_w[uv] = w;
                best_from[uv] = current;
            }
            if (next < 0 || key_of(best_w[uv], best_from[uv], v) <
                                key_of(best_w[static_cast<std::size_t>(next)],
                                       best_from[static_cast<std::size_t>(next)], next)) {
                next = v;
            }
        }
        const auto un = static_cast<std::size_t>(next);
        in_tree[un] = 1;
        edges.push_back({std::min(best_from[un], next), std::max(best_from[un], next), best_w[un]});
        current = next;
    }
    std::sort(edges.begin(), edges.end(), [](const MstEdge& x, const MstEdge& y) {
        return key_of(x.weight, x.a, x.b) < key_of(y.weight, y.a, y.b);
    });
    return edges;
}

// Binary single-linkage dendrogram. Leaves are 0..n-1, internal nodes n..2n-2.
struct Dendrogram {
    std::vector<Eigen::Index> left, right;
    std::vector<double> distance;
    std::vector<long> size;
    Eigen::Index leaves = 0;

    Eigen::Index root() const { return static_cast<Eigen::Index>(size.size()) - 1; }
};

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void attach(std::size_t child_root, std::size_t new_root) { parent_[child_root] = new_root; }

private:
    std::vector<std::size_t> parent_;
};

Dendrogram single_linkage(Eigen::Index n, const std::vector<MstEdge>& edges) {
    Dendrogram tree;
    tree.leaves = n;
    const auto total = static_cast<std::size_t>(2 * n - 1);
    tree.left.assign(total, -1);
    tree.right.assign(total, -1);
    tree.distance.assign(total, 0.0);
    tree.size.assign(total, 1);
    UnionFind uf(total);
    std::size_t next = static_cast<std::size_t>(n);
    for (const MstEdge& e : edges) {
        const std::size_t ra = uf.find(static_cast<std::size_t>(e.a));
        const std::size_t rb = uf.find(static_cast<std::size_t>(e.b));
        tree.left[next] = static_cast<Eigen::Index>(ra);
        tree.right[next] = static_cast<Eigen::Index>(rb);
        tree.distance[next] = e.weight;
        tree.size[next] = tree.size[ra] + tree.size[rb];
        uf.attach(ra, next);
        uf.attach(rb, next);
        ++next;
    }
    return tree;
}

double lambda_of(double distance) { return 1.0 / std::max(distance, kMinLinkDistance); }

struct CondensedTree {
    std::vector<int> parent;        // parent cluster, -1 for the root
    std::vector<double> birth;      // lambda at which the cluster appears
    std::vector<double> stability;  // sum over departing members of (lambda - birth)
    std::vector<int> point_cluster; // cluster each point falls out of
};

void collect_leaves(const Dendrogram& tree, Eigen::Index node, std::vector<Eigen::Index>& out) {
    std::vector<Eigen::Index> stack{node};
    while (!stack.empty()) {
        const Eigen::Index cur = stack.back();
        stack.pop_back();
        if (cur < tree.leaves) {
            out.push_back(cur);
        } else {
            stack.push_back(tree.right[static_cast<std::size_t>(cur)]);
            stack.push_back(tree.left[static_cast<std::size_t>(cur)]);
        }
    }
}

CondensedTree condense(const Dendrogram& tree, int min_cluster_size) {
    CondensedTree ct;
    ct.parent.push_back(-1);
    ct.birth.push_back(0.0);
    ct.stability.push_back(0.0);
    ct.point_cluster.assign(static_cast<std::size_t>(tree.leaves), -1);

    auto new_cluster = [&](int parent, double lambda) {
        ct.parent.push_back(parent);
        ct.birth.push_back(lambda);
        ct.stability.push_back(0.0);
        return static_cast<int>(ct.parent.size()) - 1;
    };
    auto drop_points = [&](Eigen::Index node, int cluster, double lambda) {
        std::vector<Eigen::Index> pts;
        collect_leaves(tree, node, pts);
        for (Eigen::Index p : pts) {
            ct.point_cluster[static_cast<std::size_t>(p)] = cluster;
        }
        const auto uc = static_cast<std::size_t>(cluster);
        ct.stability[uc] += (lambda - ct.birth[uc]) * static_cast<double>(pts.size());
    };

    // (dendrogram node, cluster it currently belongs to), processed top-down.
    std::vector<std::pair<Eigen::Index, int>> work{{tree.root(), 0}};
    std::size_t head = 0;
    while (head < work.size()) {
        // Only nodes with at least min_cluster_size >= 2 members are queued.
        const auto [node, cluster] = work[head++];
        const auto un = static_cast<std::size_t>(node);
        const double lambda = lambda_of(tree.distance[un]);
        const Eigen::Index l = tree.left[un];
        const Eigen::Index r = tree.right[un];
        const bool big_l = tree.size[static_cast<std::size_t>(l)] >= min_cluster_size;
        const bool big_r = tree.size[static_cast<std::size_t>(r)] >= min_cluster_size;
        if (big_l && big_r) {
            for (Eigen::Index child : {l, r}) {
                const int c = new_cluster(cluster, lambda);
                const auto uc = static_cast<std::size_t>(cluster);
                ct.stability[uc] += (lambda - ct.birth[uc]) *
                                    static_cast<double>(tree.size[static_cast<std::size_t>(child)]);
                work.emplace_back(child, c);
            }
        } else if (!big_l && !big_r) {
            drop_points(l, cluster, lambda);
            drop_points(r, cluster, lambda);
        } else {
            const Eigen::Index keep = big_l ? l : r;
            const Eigen::Index drop = big_l ? r : l;
            drop_points(drop, cluster, lambda);
            work.emplace_back(keep, cluster);
        }
    }
    return ct;
}

std::vector<char> select_excess_of_mass(const CondensedTree& ct) {
    const std::size_t count = ct.parent.size();
    std::vector<std::vector<int>> children(count);
    for (std::size_t c = 1; c < count; ++c) {
        children[static_cast<std::size_t>(ct.parent[c])].push_back(static_cast<int>(c));
    }
    std::vector<char> selected(count, 0);
    if (children[0].empty()) {
        // No split survives min_cluster_size: the whole set is one cluster.
        selected[0] = 1;
        return selected;
    }
    std::vector<double> stability = ct.stability;
    for (std::size_t c = count - 1; c >= 1; --c) {
        double subtree = 0.0;
        for (int child : children[c]) {
            subtree += stability[static_cast<std::size_t>(child)];
        }
        if (!children[c].empty() && subtree > stability[c]) {
            stability[c] = subtree;
        } else {
            selected[c] = 1;
            std::vector<int> stack(children[c].begin(), children[c].end());
            while (!stack.empty()) {
                const auto d = static_cast<std::size_t>(stack.back());
                stack.pop_back();
                selected[d] = 0;
                stack.insert(stack.end(), children[d].begin(), children[d].end());
            }
        }
    }
    return selected;
}

}  // namespace

double cosine_distance(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() != b.size()) {
        throw DimensionError("cosine_distance: dimension mismatch");
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw DomainError("cosine distance is undefined for zero-norm vectors");
    }
    const double cos = a.dot(b) / (na * nb);
    return std::clamp(1.0 - cos, 0.0, 2.0);
}

std::vector<double> core_distances(const Eigen::Ref<const Matrix>& points, int min_samples) {
    if (min_samples < 1) {
        throw DomainError("min_samples must be positive");
    }
    return core_from_space(CosineSpace(points), min_samples);
}

std::vector<MstEdge> mutual_reachability_mst(const Eigen::Ref<const Matrix>& points,
                                             const std::vector<double>& core) {
    return mst_from_space(CosineSpace(points), core);
}

ClusterResult hdbscan(const Eigen::Ref<const Matrix>& points, int min_cluster_size) {
    const Eigen::Index n = points.rows();
    if (min_cluster_size < 2) {
        throw DomainError("min_cluster_size must be at least 2");
    }
    if (n < min_cluster_size) {
        throw DomainError("hdbscan needs at least min_cluster_size (" +
                          std::to_string(min_cluster_size) + ") points, got " + std::to_string(n));
    }
    const CosineSpace space(points);

    ClusterResult result;
    result.min_cluster_size = min_cluster_size;
    result.core_distances = core_from_space(space, min_cluster_size);

    double max_distance = 0.0;
    for (Eigen::Index j = 1; j < n && max_distance <= kMinLinkDistance; ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            max_distance = std::max(max_distance, space.distance(i, j));
        }
    }
    if (max_distance <= kMinLinkDistance) {
        result.labels.assign(static_cast<std::size_t>(n), 0);
        result.num_clusters = 1;
        return result;
    }

    const auto edges = mst_from_space(space, result.core_distances);
    const Dendrogram tree = single_linkage(n, edges);
    const CondensedTree ct = condense(tree, min_cluster_size);
    const std::vector<char> selected = select_excess_of_mass(ct);

    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    for (Eigen::Index p = 0; p < n; ++p) {
        for (int c = ct.point_cluster[static_cast<std::size_t>(p)]; c >= 0;
             c = ct.parent[static_cast<std::size_t>(c)]) {
            if (selected[static_cast<std::size_t>(c)]) {
                owner[static_cast<std::size_t>(p)] = c;
                break;
            }
        }
    }

    // Renumber by first appearance, i.e. smallest member index.
    std::vector<int> rename(ct.parent.size(), -1);
    int next = 0;
    result.labels.assign(static_cast<std::size_t>(n), -1);
    for (std::size_t p = 0; p < owner.size(); ++p) {
        if (owner[p] < 0) {
            continue;
        }
        auto& r = rename[static_cast<std::size_t>(owner[p])];
        if (r < 0) {
            r = next++;
        }
        result.labels[p] = r;
    }
    result.num_clusters = next;
    return result;
}

}  // namespace guardcert
