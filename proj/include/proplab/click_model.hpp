#pragma once

#include <iosfwd>
#include <vector>

#include "proplab/core_types.hpp"
#include "proplab/rng.hpp"

namespace proplab {

// Examination probability per rank. Anchored: at(1) == 1.0 exactly, every
// entry in (0, 1]. Construction normalizes any raw parameterization by its
// rank-1 value, since the propensity vector is identifiable only up to scale.
class PropensitySurface {
public:
    static PropensitySurface from_raw(std::vector<double> raw);

    double at(int rank) const { return values_.at(static_cast<size_t>(rank) - 1); }
    int page_size() const { return static_cast<int>(values_.size()); }
    const std::vector<double>& values() const { return values_; }

private:
    explicit PropensitySurface(std::vector<double> v) : values_(std::move(v)) {}
    std::vector<double> values_;
};

struct DecayParams {
    double gamma = 1.0;  // >= 0
};

// Per-row scale times a per-row column profile; encodes non-monotone
// within-row shapes (e.g. a right-edge rise) that a 1-D decay cannot.
struct GridSurfaceParams {
    std::vector<double> row_factors;                 // one per row, in (0,1]
    std::vector<std::vector<double>> column_profiles;  // per row, one per column
};

// values[p] = 1 / p^gamma.
PropensitySurface exponential_surface(int page_size, const DecayParams& params);

PropensitySurface grid_surface(const GridLayout& layout,
                               const GridSurfaceParams& params);

double click_probability(double relevance, const PropensitySurface& surface,
                         int rank);

bool sample_click(double p_click, RngStream& rng);

// CSV columns: rank,row,col,propensity
void write_surface_csv(std::ostream& os, const PropensitySurface& surface,
                       const GridLayout& layout);
PropensitySurface read_surface_csv(std::istream& is);
PropensitySurface read_surface_csv_file(const std::string& path);

}  // namespace proplab
