#include "sls/locality.hpp"

#include <deque>
#include <limits>
#include <stdexcept>

namespace sls {

namespace {
constexpr int kUnreachable = std::numeric_limits<int>::max() / 4;
}

std::vector<std::vector<int>> hop_distances(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n || b >= n)
            throw std::invalid_argument("hop_distances: edge endpoint out of range");
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<std::vector<int>> dist(n, std::vector<int>(n, kUnreachable));
    for (int s = 0; s < n; ++s) {
        std::deque<int> queue{s};
        dist[s][s] = 0;
        while (!queue.empty()) {
            const int v = queue.front();
            queue.pop_front();
            for (int nb : adj[v]) {
                if (dist[s][nb] > dist[s][v] + 1) {
                    dist[s][nb] = dist[s][v] + 1;
                    queue.push_back(nb);
                }
            }
        }
    }
    return dist;
}

LocalityMask build_locality_mask(int n, const std::vector<std::pair<int, int>>& edges,
                                 const std::vector<int>& actuated_nodes,
                                 const LocalityParams& params, int T) {
    if (T < 1) throw std::invalid_argument("build_locality_mask: T must be positive");
    if (params.locality_d < 0 || params.comm_delay < 0 || params.actuation_delay < 0)
        throw std::invalid_argument("build_locality_mask: delays must be nonnegative");
    for (int node : actuated_nodes)
        if (node < 0 || node >= n)
            throw std::invalid_argument("build_locality_mask: actuated node out of range");

    const auto dist = hop_distances(n, edges);
    const int m = static_cast<int>(actuated_nodes.size());

    LocalityMask mask;
    mask.Sx.reserve(T);
    mask.Su.reserve(T);
    for (int k = 1; k <= T; ++k) {
        Eigen::MatrixXi Sx = Eigen::MatrixXi::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const int d = dist[i][j];
                if (d > params.locality_d) continue;
                if (params.comm_delay > 0 && d * params.comm_delay > k - 1) continue;
                Sx(i, j) = 1;
            }
        }
        Eigen::MatrixXi Su = Eigen::MatrixXi::Zero(m, n);
        for (int c = 0; c < m; ++c) {
            for (int j = 0; j < n; ++j) {
                const int d = dist[actuated_nodes[c]][j];
                if (d > params.locality_d) continue;
                if (params.actuation_delay + (params.comm_delay > 0 ? d * params.comm_delay : 0) >
                    k - 1)
                    continue;
                Su(c, j) = 1;
            }
        }
        mask.Sx.push_back(std::move(Sx));
        mask.Su.push_back(std::move(Su));
    }
    return mask;
}

std::vector<std::pair<int, int>> chain_edges(int n) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return edges;
}

}  // namespace sls
