#pragma once

#include "sls/locality.hpp"
#include "sls/simulate.hpp"

namespace sls {

// Provenance of a localized synthesis: the graph, the actuator placement and
// the delay/locality parameters the support masks were built from.
struct LocalitySpec {
    std::vector<std::pair<int, int>> edges;
    std::vector<int> actuated_nodes;
    LocalityParams params;
};

// Round-based per-node execution of a (saturation-projection) blend whose
// matrices comply with the locality masks. Each node keeps only its own rows
// of the internal estimate and reads a neighbor's entry w_hat_s[j] no earlier
// than s + comm_delay * dist(i, j); the mask support makes every term the
// controller needs satisfy that rule, and every read is checked against it.
// The trajectory matches the centralized realization up to roundoff.
//
// Throws std::invalid_argument if the blend uses the radial projection (its
// zone split needs the whole vector) or if any entry violates the mask.
Trajectory distributed_run(const SimConfig& cfg, const BlendClm& blend, const LocalitySpec& loc,
                           const DisturbanceGen& gen);

// Exact support compliance: every entry outside the masks is exactly zero.
bool mask_compliant(const BlendClm& blend, const LocalityMask& mask);

}  // namespace sls
