#pragma once

#include <Eigen/Dense>
#include <vector>

namespace sls {

// Per-tap binary support masks for the CLM matrices. Sx[k-1](i,j) = 1 allows
// R_k(i,j) to be nonzero; Su[k-1](c,j) likewise for M_k(c,j). Entry (i,j) of
// tap k is allowed when information about a disturbance at node j can have
// reached node i (or actuator c) by then: one hop per comm_delay steps, an
// extra actuation_delay for inputs, and never beyond locality_d hops.
struct LocalityMask {
    std::vector<Eigen::MatrixXi> Sx;
    std::vector<Eigen::MatrixXi> Su;

    int T() const { return static_cast<int>(Sx.size()); }
};

struct LocalityParams {
    int locality_d = 0;      // max hops a disturbance may influence
    int comm_delay = 1;      // steps per hop of information travel (0 = instant)
    int actuation_delay = 0; // extra steps before an actuator may respond
};

// All-pairs hop distances by BFS; unreachable pairs get a large sentinel.
std::vector<std::vector<int>> hop_distances(int n, const std::vector<std::pair<int, int>>& edges);

LocalityMask build_locality_mask(int n, const std::vector<std::pair<int, int>>& edges,
                                 const std::vector<int>& actuated_nodes,
                                 const LocalityParams& params, int T);

// Chain graph edges 0-1, 1-2, ..., (n-2)-(n-1).
std::vector<std::pair<int, int>> chain_edges(int n);

}  // namespace sls
