#include "vap/covered.hpp"

namespace vap {

CoveredSpace::CoveredSpace(Mat points, float eps) : points_(std::move(points)), eps_(eps) {
    if (eps_ < 0) throw ShapeError("covered space radius must be nonnegative");
}

CoveredSpace CoveredSpace::from_dataset(const mapping::MmModel& mm, const data::Dataset& ds,
                                        float eps) {
    const Index n = static_cast<Index>(ds.tuples.size());
    if (n == 0) return CoveredSpace(Mat(0, 0), eps);
    const Index dim = ds.tuples.front().obs_a.pixels.size();
    Mat pixels(dim, 2 * n);
    for (Index i = 0; i < n; ++i) {
        pixels.col(2 * i) = ds.tuples[static_cast<size_t>(i)].obs_a.pixels;
        pixels.col(2 * i + 1) = ds.tuples[static_cast<size_t>(i)].obs_b.pixels;
    }
    return CoveredSpace(mapping::encode_batch(mm, pixels), eps);
}

std::pair<Index, float> CoveredSpace::nearest(const Vec& z) const {
    if (points_.cols() == 0) throw EmptyIndex("nearest in an empty covered space");
    if (z.size() != points_.rows())
        throw ShapeError("query has " + std::to_string(z.size()) + " entries, points have " +
                         std::to_string(points_.rows()));
    Index best = 0;
    const float dist = (points_.colwise() - z).cwiseAbs().colwise().sum().minCoeff(&best);
    return {best, dist};
}

bool CoveredSpace::contains(const Vec& z) const {
    return points_.cols() > 0 && nearest(z).second <= eps_;
}

}  // namespace vap
