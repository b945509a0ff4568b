#pragma once

#include <utility>

#include <vap/data/dataset.hpp>
#include <vap/errors.hpp>
#include <vap/mapping.hpp>
#include <vap/types.hpp>

namespace vap {

// The set of latent points reachable from the dataset: one column per encoded
// observation, kept in dataset order so callers can map points back to their
// originating tuples. Distances are L1 throughout.
class CoveredSpace {
public:
    CoveredSpace() = default;
    CoveredSpace(Mat points, float eps);

    // Encodes both sides of every tuple; column 2i is tuple i's first
    // observation, column 2i+1 the second.
    static CoveredSpace from_dataset(const mapping::MmModel& mm, const data::Dataset& ds,
                                     float eps);

    Index size() const { return points_.cols(); }
    float eps() const { return eps_; }
    const Mat& points() const { return points_; }
    Vec point(Index i) const { return points_.col(i); }

    // Index and L1 distance of the closest covered point; ties resolve to the
    // lowest index. Throws EmptyIndex on an empty space.
    std::pair<Index, float> nearest(const Vec& z) const;

    // True when z lies within eps of some covered point.
    bool contains(const Vec& z) const;

private:
    Mat points_;
    float eps_ = 0;
};

}  // namespace vap
