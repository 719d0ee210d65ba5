#pragma once

#include "switchlab/geometry.hpp"

#include <iosfwd>
#include <vector>

namespace switchlab {

/// Boolean grid of bins^d cells over a space, row-major with axis 0 fastest.
class GridMask {
public:
    GridMask(const Space& space, int bins);

    const Space& space() const { return space_; }
    int bins() const { return bins_; }
    int dim() const { return space_.dim(); }
    long cells() const { return static_cast<long>(on_.size()); }

    bool operator[](long c) const { return on_[c] != 0; }
    void set(long c, bool v = true) { on_[c] = v ? 1 : 0; }
    long count() const;
    long cell_of(const Vec& x) const;
    Vec center(long c) const;
    /// Cell index from per-axis indices; wraps on tori, -1 outside a box.
    long index(int i, int j = 0) const;

    /// Cells within one step (8-neighbourhood in 2D) of a set cell.
    GridMask dilated(int steps = 1) const;
    GridMask intersect(const GridMask& o) const;
    long symmetric_difference(const GridMask& o) const;
    /// Fraction of this mask's cells lying in o.
    double covered_by(const GridMask& o) const;
    /// Connected components under 8-neighbourhood (wrapping on tori).
    int components() const;

    bool operator==(const GridMask& o) const { return bins_ == o.bins_ && on_ == o.on_; }

private:
    Space space_;
    int bins_;
    std::vector<char> on_;
};

/// CSV rows (row, col, flag); row indexes axis 1, col axis 0. In 1D row = 0.
void write_mask_csv(std::ostream& os, const GridMask& m);

}  // namespace switchlab
