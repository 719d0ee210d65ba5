#pragma once

#include "switchlab/core.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace switchlab {

/// Flat compact state space: the circle, the 2-torus, or an axis-aligned box
/// that every field on it must enter strictly through the boundary.
class Space {
public:
    enum class Kind { Torus1, Torus2, TrappingBox };

    static Space torus1();
    static Space torus2();
    static Space box(const Vec& lower, const Vec& upper);

    Kind kind() const { return kind_; }
    int dim() const { return static_cast<int>(lower_.size()); }
    bool periodic() const { return kind_ != Kind::TrappingBox; }
    const Vec& lower() const { return lower_; }
    const Vec& upper() const { return upper_; }
    double extent(int axis) const { return upper_[axis] - lower_[axis]; }
    double volume() const;

    /// Reduces torus coordinates into [0,1)^d; identity on boxes.
    Vec reduce(const Vec& x) const;
    bool contains(const Vec& x, double tol = 0.0) const;

    std::string describe() const;

private:
    Kind kind_ = Kind::Torus1;
    Vec lower_, upper_;
};

/// Scalar profiles available for one-dimensional fields.
enum class Profile {
    Trig,  // a + b sin(2 pi x + phase), params {a, b, phase}
    Poly,  // sum_k c_k x^k, params {c_0, c_1, ...}
};

struct ConstantField { Vec velocity; };
/// F(x, y) = (speed, -amplitude sin(2 pi y)) on the 2-torus.
struct ShearSinField { double speed; double amplitude; };
/// F(x) = A (x - anchor).
struct AffineField { Mat matrix; Vec anchor; };
struct Circle1DField { Profile profile; std::vector<double> params; };
/// Scalar circle field whose time-one map is x -> x / alpha near 0, with a
/// repelling zero at 1/2. See counter_campbell_profile() for the construction.
struct CounterCampbellField { double alpha; };

/// A vector field from the closed catalog. Value, Jacobian and divergence are
/// exact closed forms.
class FieldSpec {
public:
    using Variant = std::variant<ConstantField, ShearSinField, AffineField,
                                 Circle1DField, CounterCampbellField>;

    static FieldSpec constant(const Vec& velocity);
    static FieldSpec shear_sin(double speed, double amplitude);
    static FieldSpec affine(const Mat& matrix, const Vec& anchor);
    static FieldSpec circle1d(Profile profile, std::vector<double> params);
    static FieldSpec counter_campbell(double alpha);

    int dim() const;
    Vec value(const Vec& x) const;
    Mat jacobian(const Vec& x) const;
    double divergence(const Vec& x) const;
    bool is_constant() const { return std::holds_alternative<ConstantField>(v_); }

    const Variant& variant() const { return v_; }
    std::string describe() const;

private:
    explicit FieldSpec(Variant v) : v_(std::move(v)) {}
    Variant v_;
};

/// Scalar profile of the counter-Campbell generator and its derivative.
/// f(x) = -ln(alpha) [ b(s) s + (1 - b(s)) sin(2 pi x) / (2 pi) ], where s is
/// the signed circular distance from 0 and b is a C-infinity bump equal to 1
/// for |s| <= 0.1 and 0 for |s| >= 0.3. Zeros only at 0 and 1/2, f'(0) =
/// -ln(alpha), f'(1/2) = ln(alpha).
struct ProfileValue { double value; double derivative; };
ProfileValue counter_campbell_profile(double alpha, double x);

struct IntegratorOpts {
    double step = 1e-3;
    long max_steps = 200'000'000;
};

struct FlowResult {
    Vec endpoint;
    Mat tangent;          // D Phi^t(x)
    double log_jacobian;  // int_0^t div F(Phi^s x) ds
};

/// Fixed-step RK4 on the joint system (state, tangent, divergence integral).
/// Torus endpoints are reduced to [0,1)^d. Throws StepCountOverflow or
/// BoundaryExit.
FlowResult flow(const Space& space, const FieldSpec& field, const Vec& x, double t,
                const IntegratorOpts& opts = {});

/// As flow() but torus coordinates are left unwrapped (the lift).
FlowResult flow_lift(const Space& space, const FieldSpec& field, const Vec& x, double t,
                     const IntegratorOpts& opts = {});

/// As flow() but returns nullopt instead of throwing BoundaryExit.
std::optional<FlowResult> try_flow(const Space& space, const FieldSpec& field, const Vec& x,
                                   double t, const IntegratorOpts& opts = {});

/// State-only RK4 (no tangent); reduced endpoint.
Vec advance(const Space& space, const FieldSpec& field, const Vec& x, double t,
            const IntegratorOpts& opts = {});

/// Number of RK4 steps used for a flow of duration t.
long step_count(double t, const IntegratorOpts& opts);

/// One RK4 step of the state alone (unwrapped).
Vec rk4_state_step(const FieldSpec& field, const Vec& x, double dt);

/// State-only RK4 from x over duration t, calling visit(x_prev, x_next, dt)
/// after each step. Coordinates are unwrapped; callers reduce as needed.
template <typename Visitor>
Vec advance_visit(const Space& space, const FieldSpec& field, Vec x, double t,
                  const IntegratorOpts& opts, Visitor&& visit) {
    if (t == 0.0) return x;
    const long n = step_count(t, opts);
    const double dt = t / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
        Vec next = rk4_state_step(field, x, dt);
        if (!space.periodic() && !space.contains(next, 1e-9))
            throw BoundaryExit("trajectory left the trapping box at " + std::to_string(next[0]));
        visit(x, next, dt);
        x = std::move(next);
    }
    return x;
}

/// Checks on a boundary grid (1000 points in total) that the field points
/// strictly inward on every face of a trapping box.
bool points_inward(const Space& space, const FieldSpec& field, int n_points = 1000);

/// A deterministic map of the state space: a flow-time map or one of a few
/// closed-form circle maps.
class MapHandle {
public:
    struct Step {
        Vec image;
        Mat tangent;
        double log_jacobian;
    };

    static MapHandle from_flow(const Space& space, const FieldSpec& field, double t,
                               const IntegratorOpts& opts = {});
    static MapHandle identity(const Space& space);
    static MapHandle rotation(double theta);
    /// x -> m x + eps sin(2 pi x) / (2 pi) on the circle (degree m).
    static MapHandle expanding(int multiplier, double eps = 0.0);

    Step step(const Vec& x) const;
    Vec apply(const Vec& x) const { return step(x).image; }
    Mat tangent(const Vec& x) const { return step(x).tangent; }
    double log_jacobian(const Vec& x) const { return step(x).log_jacobian; }

    /// Lift of a circle map: unwrapped image of x in R.
    double lift(double x) const;
    /// Derivative of the lift (circle maps only).
    double lift_derivative(double x) const;

    const Space& space() const { return space_; }
    int dim() const { return space_.dim(); }
    int degree() const;
    bool is_flow() const { return kind_ == Kind::Flow; }
    const FieldSpec* field() const { return field_ ? &*field_ : nullptr; }
    double time() const { return time_; }
    const IntegratorOpts& opts() const { return opts_; }
    std::string describe() const;

private:
    enum class Kind { Flow, Identity, Rotation, Expanding };
    MapHandle(Kind kind, Space space) : kind_(kind), space_(std::move(space)) {}

    Kind kind_;
    Space space_;
    std::optional<FieldSpec> field_;
    double time_ = 0.0;
    IntegratorOpts opts_;
    double theta_ = 0.0;
    int multiplier_ = 1;
    double eps_ = 0.0;
};

MapHandle flow_map_as_function(const Space& space, const FieldSpec& field, double t,
                               const IntegratorOpts& opts = {});

}  // namespace switchlab
