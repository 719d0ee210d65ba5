#include "switchlab/mask.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace switchlab {

GridMask::GridMask(const Space& space, int bins) : space_(space), bins_(bins) {
    require(bins >= 1, "mask needs at least one bin");
    on_.assign(space.dim() == 1 ? bins : static_cast<long>(bins) * bins, 0);
}

long GridMask::count() const {
    long n = 0;
    for (char c : on_) n += c;
    return n;
}

long GridMask::index(int i, int j) const {
    if (space_.periodic()) {
        i = ((i % bins_) + bins_) % bins_;
        j = ((j % bins_) + bins_) % bins_;
    } else if (i < 0 || i >= bins_ || j < 0 || j >= bins_) {
        return -1;
    }
    return dim() == 1 ? i : i + static_cast<long>(bins_) * j;
}

long GridMask::cell_of(const Vec& x) const {
    int idx[2] = {0, 0};
    for (int a = 0; a < dim(); ++a) {
        const double u = (x[a] - space_.lower()[a]) / space_.extent(a) * bins_;
        long i = static_cast<long>(std::floor(u));
        if (space_.periodic()) i = ((i % bins_) + bins_) % bins_;
        else i = std::clamp<long>(i, 0, bins_ - 1);
        idx[a] = static_cast<int>(i);
    }
    return index(idx[0], idx[1]);
}

Vec GridMask::center(long c) const {
    Vec x(dim());
    const long i = c % bins_, j = c / bins_;
    x[0] = space_.lower()[0] + (i + 0.5) * space_.extent(0) / bins_;
    if (dim() == 2) x[1] = space_.lower()[1] + (j + 0.5) * space_.extent(1) / bins_;
    return x;
}

GridMask GridMask::dilated(int steps) const {
    GridMask cur = *this;
    const int r = dim() == 2 ? 1 : 0;
    for (int s = 0; s < steps; ++s) {
        GridMask next = cur;
        for (long c = 0; c < cells(); ++c) {
            if (!cur[c]) continue;
            const int i = static_cast<int>(c % bins_), j = static_cast<int>(c / bins_);
            for (int dj = -r; dj <= r; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const long n = index(i + di, j + dj);
                    if (n >= 0) next.set(n);
                }
        }
        cur = std::move(next);
    }
    return cur;
}

GridMask GridMask::intersect(const GridMask& o) const {
    require(o.bins_ == bins_ && o.dim() == dim(), "masks have different grids");
    GridMask out = *this;
    for (long c = 0; c < cells(); ++c) out.on_[c] = on_[c] && o.on_[c];
    return out;
}

long GridMask::symmetric_difference(const GridMask& o) const {
    require(o.bins_ == bins_ && o.dim() == dim(), "masks have different grids");
    long n = 0;
    for (long c = 0; c < cells(); ++c) n += (on_[c] != 0) != (o.on_[c] != 0);
    return n;
}

double GridMask::covered_by(const GridMask& o) const {
    require(o.bins_ == bins_ && o.dim() == dim(), "masks have different grids");
    const long n = count();
    if (n == 0) return 1.0;
    long in = 0;
    for (long c = 0; c < cells(); ++c) in += on_[c] && o.on_[c];
    return static_cast<double>(in) / n;
}

int GridMask::components() const {
    std::vector<int> label(on_.size(), -1);
    const int r = dim() == 2 ? 1 : 0;
    int n = 0;
    std::vector<long> stack;
    for (long s = 0; s < cells(); ++s) {
        if (!on_[s] || label[s] >= 0) continue;
        label[s] = n;
        stack.push_back(s);
        while (!stack.empty()) {
            const long c = stack.back();
            stack.pop_back();
            const int i = static_cast<int>(c % bins_), j = static_cast<int>(c / bins_);
            for (int dj = -r; dj <= r; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const long m = index(i + di, j + dj);
                    if (m >= 0 && on_[m] && label[m] < 0) {
                        label[m] = n;
                        stack.push_back(m);
                    }
                }
        }
        ++n;
    }
    return n;
}

void write_mask_csv(std::ostream& os, const GridMask& m) {
    os << "row,col,flag\n";
    for (long c = 0; c < m.cells(); ++c) os << c / m.bins() << ',' << c % m.bins() << ',' << (m[c] ? 1 : 0) << '\n';
}

}  // namespace switchlab
