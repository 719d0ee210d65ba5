#pragma once

#include "switchlab/mask.hpp"
#include "switchlab/pdmp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace switchlab {

/// [F, G](x) = DG(x) F(x) - DF(x) G(x) with the catalog's exact Jacobians.
Vec lie_bracket(const FieldSpec& f, const FieldSpec& g, const Vec& x);

/// F_0 = the mode fields; F_n = F_{n-1} plus [F, G] for F in F_0 and G in
/// F_{n-1}. Brackets of a field with itself and repeated pairs are skipped.
/// Generated members differentiate their own values by central differences.
class BracketFamily {
public:
    struct Member {
        int generation = 0;
        int left = -1;   // index of F in [F, G], -1 for base fields
        int right = -1;  // index of G
        std::string label;
    };

    static constexpr double kDiffStep = 1e-5;

    BracketFamily(std::vector<FieldSpec> fields, int n);

    int generation() const { return n_; }
    int size() const { return static_cast<int>(members_.size()); }
    int dim() const { return base_.front().dim(); }
    const Member& member(int i) const { return members_[i]; }
    /// Members of generation <= g.
    int size_through(int g) const;

    Vec value(int i, const Vec& x) const;
    Mat jacobian(int i, const Vec& x) const;
    /// Columns are the values of every member at x.
    Eigen::MatrixXd evaluate(const Vec& x) const;

private:
    std::vector<FieldSpec> base_;
    std::vector<Member> members_;
    int n_;
};

struct BracketRank {
    int rank = 0;
    std::vector<int> witness;  // member indices of linearly independent columns
    std::vector<std::string> labels;
    Eigen::VectorXd singular_values;
};

/// Rank of F_n(x), counting singular values above 1e-8. n <= 3.
BracketRank weak_bracket_rank(const std::vector<FieldSpec>& fields, int n, const Vec& x);
BracketRank weak_bracket_rank(const BracketFamily& family, const Vec& x);

struct ReachableMask {
    GridMask mask;
    Vec seed;
    int iterations = 0;
    bool iteration_cap = false;
    std::vector<long> counts;  // set cells after each iteration
};

struct ReachOpts {
    int threads = 0;
};

/// Grid fixed point over actual trajectories. Each reachable cell keeps the
/// first trajectory point that entered it (the seed for its own cell). Every
/// mode's flow from that point is followed in steps of dt until a step ends
/// outside the cell (at most 1000 steps), and each cell it crosses becomes
/// reachable. Each iteration expands the cells added by the previous one.
ReachableMask reachable_set(const Characteristics& ch, const Vec& x0, int grid_res, double dt,
                            int max_iter, const ReachOpts& opts = {});

struct GammaEstimate {
    GridMask mask;  // intersection over seeds
    std::vector<ReachableMask> per_seed;
    int components = 0;
    bool connected = false;
    bool empty_intersection = false;
    bool iteration_cap = false;
};

/// At least four seeds; runs are independent and intersected in seed order.
GammaEstimate gamma_estimate(const Characteristics& ch, const std::vector<Vec>& seeds, int grid_res,
                             double dt = 0.05, int max_iter = 100000, const ReachOpts& opts = {});

/// n deterministic points spread over the space (Halton, bases 2 and 3),
/// kept 1/64 of the extent away from box faces.
std::vector<Vec> spread_seeds(const Space& space, int n);

}  // namespace switchlab
