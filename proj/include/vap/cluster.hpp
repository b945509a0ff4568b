#pragma once

#include <vector>

#include <vap/types.hpp>

namespace vap::cluster {

// Hierarchical density clustering over the columns of `points` under the L1
// metric. Builds the single-linkage hierarchy of mutual reachability
// distances (core distance = distance to the (min_cluster_size-1)-th nearest
// other point), condenses it with the given minimum cluster size and selects
// clusters by excess of mass; the root is never selected. Labels are dense in
// [0, n_clusters); points in no selected cluster get -1.
struct HdbscanResult {
    std::vector<int> labels;
    int n_clusters = 0;
};

HdbscanResult hdbscan(const Mat& points, int min_cluster_size = 2);

}  // namespace vap::cluster
