#include "switchlab/geometry.hpp"

#include <cmath>
#include <sstream>

namespace switchlab {

// ---------------------------------------------------------------------------
// Space

Space Space::torus1() {
    Space s;
    s.kind_ = Kind::Torus1;
    s.lower_ = Vec::Zero(1);
    s.upper_ = Vec::Ones(1);
    return s;
}

Space Space::torus2() {
    Space s;
    s.kind_ = Kind::Torus2;
    s.lower_ = Vec::Zero(2);
    s.upper_ = Vec::Ones(2);
    return s;
}

Space Space::box(const Vec& lower, const Vec& upper) {
    require(lower.size() == upper.size() && (lower.size() == 1 || lower.size() == 2),
            "box corners must have matching dimension 1 or 2");
    require((upper.array() > lower.array()).all(), "box upper corner must exceed lower corner");
    Space s;
    s.kind_ = Kind::TrappingBox;
    s.lower_ = lower;
    s.upper_ = upper;
    return s;
}

double Space::volume() const { return (upper_ - lower_).prod(); }

Vec Space::reduce(const Vec& x) const {
    if (!periodic()) return x;
    Vec r(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double v = x[i] - std::floor(x[i]);
        r[i] = v >= 1.0 ? 0.0 : v;
    }
    return r;
}

bool Space::contains(const Vec& x, double tol) const {
    if (x.size() != lower_.size()) return false;
    if (periodic()) return x.allFinite();
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!(x[i] >= lower_[i] - tol && x[i] <= upper_[i] + tol)) return false;
    return true;
}

std::string Space::describe() const {
    std::ostringstream os;
    switch (kind_) {
    case Kind::Torus1: return "torus1";
    case Kind::Torus2: return "torus2";
    case Kind::TrappingBox:
        os << "box[";
        for (int i = 0; i < dim(); ++i)
            os << (i ? "x" : "") << "(" << lower_[i] << "," << upper_[i] << ")";
        os << "]";
        return os.str();
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Counter-Campbell profile

namespace {

constexpr double kBumpInner = 0.1;
constexpr double kBumpOuter = 0.3;

double psi(double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; }
double dpsi(double u) { return u > 0.0 ? std::exp(-1.0 / u) / (u * u) : 0.0; }

// Smooth step: 0 for u <= 0, 1 for u >= 1.
ProfileValue smooth_step(double u) {
    if (u <= 0.0) return {0.0, 0.0};
    if (u >= 1.0) return {1.0, 0.0};
    const double a = psi(u), b = psi(1.0 - u);
    const double da = dpsi(u), db = -dpsi(1.0 - u);
    const double s = a + b;
    return {a / s, (da * s - a * (da + db)) / (s * s)};
}

}  // namespace

ProfileValue counter_campbell_profile(double alpha, double x) {
    const double rate = std::log(alpha);
    const double s = x - std::round(x);  // signed circular distance to 0
    const double width = kBumpOuter - kBumpInner;
    const ProfileValue step = smooth_step((kBumpOuter - std::abs(s)) / width);
    const double bump = step.value;
    const double dbump = -(s >= 0 ? 1.0 : -1.0) * step.derivative / width;
    const double sn = std::sin(kTwoPi * x) / kTwoPi;
    const double cs = std::cos(kTwoPi * x);
    const double g = bump * s + (1.0 - bump) * sn;
    const double dg = dbump * s + bump - dbump * sn + (1.0 - bump) * cs;
    return {-rate * g, -rate * dg};
}

// ---------------------------------------------------------------------------
// FieldSpec

FieldSpec FieldSpec::constant(const Vec& velocity) {
    require(velocity.size() == 1 || velocity.size() == 2, "constant field needs dimension 1 or 2");
    return FieldSpec(ConstantField{velocity});
}

FieldSpec FieldSpec::shear_sin(double speed, double amplitude) {
    return FieldSpec(ShearSinField{speed, amplitude});
}

FieldSpec FieldSpec::affine(const Mat& matrix, const Vec& anchor) {
    require(matrix.rows() == matrix.cols() && matrix.rows() == anchor.size() &&
                (anchor.size() == 1 || anchor.size() == 2),
            "affine field needs a square 1x1 or 2x2 matrix and matching anchor");
    return FieldSpec(AffineField{matrix, anchor});
}

FieldSpec FieldSpec::circle1d(Profile profile, std::vector<double> params) {
    if (profile == Profile::Trig)
        require(params.size() == 3, "trig profile takes {a, b, phase}");
    else
        require(!params.empty(), "poly profile needs at least one coefficient");
    return FieldSpec(Circle1DField{profile, std::move(params)});
}

FieldSpec FieldSpec::counter_campbell(double alpha) {
    require(alpha > 1.0, "counter-Campbell generator needs alpha > 1");
    return FieldSpec(CounterCampbellField{alpha});
}

int FieldSpec::dim() const {
    return std::visit(
        [](const auto& f) -> int {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantField>) return static_cast<int>(f.velocity.size());
            else if constexpr (std::is_same_v<T, ShearSinField>) return 2;
            else if constexpr (std::is_same_v<T, AffineField>) return static_cast<int>(f.anchor.size());
            else return 1;
        },
        v_);
}

namespace {

ProfileValue circle_profile(const Circle1DField& f, double x) {
    const auto& p = f.params;
    if (f.profile == Profile::Trig) {
        const double arg = kTwoPi * x + p[2];
        return {p[0] + p[1] * std::sin(arg), kTwoPi * p[1] * std::cos(arg)};
    }
    double v = 0.0, dv = 0.0;
    for (std::size_t k = p.size(); k-- > 0;) {
        dv = dv * x + v;
        v = v * x + p[k];
    }
    return {v, dv};
}

}  // namespace

Vec FieldSpec::value(const Vec& x) const {
    return std::visit(
        [&](const auto& f) -> Vec {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantField>) {
                return f.velocity;
            } else if constexpr (std::is_same_v<T, ShearSinField>) {
                Vec v(2);
                v << f.speed, -f.amplitude * std::sin(kTwoPi * x[1]);
                return v;
            } else if constexpr (std::is_same_v<T, AffineField>) {
                return f.matrix * (x - f.anchor);
            } else if constexpr (std::is_same_v<T, Circle1DField>) {
                return Vec::Constant(1, circle_profile(f, x[0]).value);
            } else {
                return Vec::Constant(1, counter_campbell_profile(f.alpha, x[0]).value);
            }
        },
        v_);
}

Mat FieldSpec::jacobian(const Vec& x) const {
    return std::visit(
        [&](const auto& f) -> Mat {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantField>) {
                const auto d = f.velocity.size();
                return Mat::Zero(d, d);
            } else if constexpr (std::is_same_v<T, ShearSinField>) {
                Mat j = Mat::Zero(2, 2);
                j(1, 1) = -kTwoPi * f.amplitude * std::cos(kTwoPi * x[1]);
                return j;
            } else if constexpr (std::is_same_v<T, AffineField>) {
                return f.matrix;
            } else if constexpr (std::is_same_v<T, Circle1DField>) {
                return Mat::Constant(1, 1, circle_profile(f, x[0]).derivative);
            } else {
                return Mat::Constant(1, 1, counter_campbell_profile(f.alpha, x[0]).derivative);
            }
        },
        v_);
}

double FieldSpec::divergence(const Vec& x) const {
    return std::visit(
        [&](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantField>) return 0.0;
            else if constexpr (std::is_same_v<T, ShearSinField>)
                return -kTwoPi * f.amplitude * std::cos(kTwoPi * x[1]);
            else if constexpr (std::is_same_v<T, AffineField>) return f.matrix.trace();
            else if constexpr (std::is_same_v<T, Circle1DField>) return circle_profile(f, x[0]).derivative;
            else return counter_campbell_profile(f.alpha, x[0]).derivative;
        },
        v_);
}

std::string FieldSpec::describe() const {
    std::ostringstream os;
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ConstantField>) {
                os << "constant(" << f.velocity.transpose() << ")";
            } else if constexpr (std::is_same_v<T, ShearSinField>) {
                os << "shear_sin(c=" << f.speed << ", s=" << f.amplitude << ")";
            } else if constexpr (std::is_same_v<T, AffineField>) {
                os << "affine(A=[" << f.matrix.reshaped().transpose() << "], p=[" << f.anchor.transpose() << "])";
            } else if constexpr (std::is_same_v<T, Circle1DField>) {
                os << (f.profile == Profile::Trig ? "trig(" : "poly(");
                for (std::size_t i = 0; i < f.params.size(); ++i) os << (i ? "," : "") << f.params[i];
                os << ")";
            } else {
                os << "counter_campbell(alpha=" << f.alpha << ")";
            }
        },
        v_);
    return os.str();
}

// ---------------------------------------------------------------------------
// Integration

long step_count(double t, const IntegratorOpts& opts) {
    require(std::isfinite(t), "flow time must be finite");
    require(opts.step > 0.0, "integrator step must be positive");
    const double n = std::ceil(std::abs(t) / opts.step - 1e-9);
    if (n > static_cast<double>(opts.max_steps))
        throw StepCountOverflow("flow of duration " + std::to_string(t) + " needs " +
                                std::to_string(n) + " steps, cap is " +
                                std::to_string(opts.max_steps));
    return std::max<long>(1, static_cast<long>(n));
}

Vec rk4_state_step(const FieldSpec& field, const Vec& x, double dt) {
    const Vec k1 = field.value(x);
    const Vec k2 = field.value(x + 0.5 * dt * k1);
    const Vec k3 = field.value(x + 0.5 * dt * k2);
    const Vec k4 = field.value(x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

struct JointState {
    Vec x;
    Mat m;
    double l;
};

struct JointDeriv {
    Vec dx;
    Mat dm;
    double dl;
};

JointDeriv joint_rhs(const FieldSpec& f, const Vec& x, const Mat& m) {
    return {f.value(x), f.jacobian(x) * m, f.divergence(x)};
}

void rk4_joint_step(const FieldSpec& f, JointState& s, double dt) {
    const JointDeriv k1 = joint_rhs(f, s.x, s.m);
    const JointDeriv k2 = joint_rhs(f, s.x + 0.5 * dt * k1.dx, s.m + 0.5 * dt * k1.dm);
    const JointDeriv k3 = joint_rhs(f, s.x + 0.5 * dt * k2.dx, s.m + 0.5 * dt * k2.dm);
    const JointDeriv k4 = joint_rhs(f, s.x + dt * k3.dx, s.m + dt * k3.dm);
    const double w = dt / 6.0;
    s.x += w * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    s.m += w * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
    s.l += w * (k1.dl + 2.0 * k2.dl + 2.0 * k3.dl + k4.dl);
}

// Returns false when a trapping-box trajectory leaves the box.
bool integrate(const Space& space, const FieldSpec& field, const Vec& x, double t,
               const IntegratorOpts& opts, FlowResult& out) {
    require(x.size() == field.dim() && x.size() == space.dim(),
            "point, field and space dimensions disagree");
    const auto d = x.size();
    if (field.is_constant() || t == 0.0) {
        // RK4 is exact for constant fields.
        out.endpoint = t == 0.0 ? x : Vec(x + t * field.value(x));
        out.tangent = Mat::Identity(d, d);
        out.log_jacobian = 0.0;
        if (t != 0.0) step_count(t, opts);
        return space.periodic() || space.contains(out.endpoint, 1e-9);
    }
    const long n = step_count(t, opts);
    const double dt = t / static_cast<double>(n);
    JointState s{x, Mat::Identity(d, d), 0.0};
    for (long i = 0; i < n; ++i) {
        rk4_joint_step(field, s, dt);
        if (!space.periodic() && !space.contains(s.x, 1e-9)) return false;
    }
    out.endpoint = s.x;
    out.tangent = s.m;
    out.log_jacobian = s.l;
    return true;
}

}  // namespace

FlowResult flow_lift(const Space& space, const FieldSpec& field, const Vec& x, double t,
                     const IntegratorOpts& opts) {
    FlowResult r;
    if (!integrate(space, field, x, t, opts, r))
        throw BoundaryExit("trajectory from a trapping-box point left the box (invalid trapping configuration)");
    return r;
}

FlowResult flow(const Space& space, const FieldSpec& field, const Vec& x, double t,
                const IntegratorOpts& opts) {
    FlowResult r = flow_lift(space, field, x, t, opts);
    r.endpoint = space.reduce(r.endpoint);
    return r;
}

std::optional<FlowResult> try_flow(const Space& space, const FieldSpec& field, const Vec& x,
                                   double t, const IntegratorOpts& opts) {
    FlowResult r;
    if (!integrate(space, field, x, t, opts, r)) return std::nullopt;
    r.endpoint = space.reduce(r.endpoint);
    return r;
}

Vec advance(const Space& space, const FieldSpec& field, const Vec& x, double t,
            const IntegratorOpts& opts) {
    if (field.is_constant()) {
        Vec y = x + t * field.value(x);
        if (!space.periodic() && !space.contains(y, 1e-9))
            throw BoundaryExit("trajectory left the trapping box");
        return space.reduce(y);
    }
    return space.reduce(advance_visit(space, field, x, t, opts, [](const Vec&, const Vec&, double) {}));
}

bool points_inward(const Space& space, const FieldSpec& field, int n_points) {
    if (space.periodic()) return true;
    const int d = space.dim();
    if (d == 1) {
        return field.value(space.lower())[0] > 0.0 && field.value(space.upper())[0] < 0.0;
    }
    const int per_face = std::max(2, n_points / 4);
    for (int axis = 0; axis < 2; ++axis) {
        const int other = 1 - axis;
        for (int side = 0; side < 2; ++side) {
            const double sign = side == 0 ? 1.0 : -1.0;
            for (int i = 0; i < per_face; ++i) {
                Vec p(2);
                p[axis] = side == 0 ? space.lower()[axis] : space.upper()[axis];
                p[other] = space.lower()[other] +
                           space.extent(other) * static_cast<double>(i) / (per_face - 1);
                if (!(sign * field.value(p)[axis] > 0.0)) return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// MapHandle

MapHandle MapHandle::from_flow(const Space& space, const FieldSpec& field, double t,
                               const IntegratorOpts& opts) {
    require(field.dim() == space.dim(), "field dimension does not match the space");
    step_count(t, opts);
    MapHandle m(Kind::Flow, space);
    m.field_ = field;
    m.time_ = t;
    m.opts_ = opts;
    return m;
}

MapHandle MapHandle::identity(const Space& space) { return MapHandle(Kind::Identity, space); }

MapHandle MapHandle::rotation(double theta) {
    MapHandle m(Kind::Rotation, Space::torus1());
    m.theta_ = theta;
    return m;
}

MapHandle MapHandle::expanding(int multiplier, double eps) {
    require(multiplier >= 1, "expanding map needs a positive multiplier");
    require(std::abs(eps) < multiplier, "perturbation would break monotonicity");
    MapHandle m(Kind::Expanding, Space::torus1());
    m.multiplier_ = multiplier;
    m.eps_ = eps;
    return m;
}

MapHandle::Step MapHandle::step(const Vec& x) const {
    const auto d = x.size();
    switch (kind_) {
    case Kind::Flow: {
        FlowResult r = flow(space_, *field_, x, time_, opts_);
        return {r.endpoint, r.tangent, r.log_jacobian};
    }
    case Kind::Identity: return {x, Mat::Identity(d, d), 0.0};
    case Kind::Rotation:
    case Kind::Expanding: {
        const double der = lift_derivative(x[0]);
        return {space_.reduce(Vec::Constant(1, lift(x[0]))), Mat::Constant(1, 1, der),
                std::log(std::abs(der))};
    }
    }
    throw InvalidArgument("unknown map kind");
}

double MapHandle::lift(double x) const {
    require(space_.kind() == Space::Kind::Torus1, "lift is defined for circle maps only");
    switch (kind_) {
    case Kind::Flow: return flow_lift(space_, *field_, Vec::Constant(1, x), time_, opts_).endpoint[0];
    case Kind::Identity: return x;
    case Kind::Rotation: return x + theta_;
    case Kind::Expanding: return multiplier_ * x + eps_ * std::sin(kTwoPi * x) / kTwoPi;
    }
    return x;
}

double MapHandle::lift_derivative(double x) const {
    switch (kind_) {
    case Kind::Flow: return flow_lift(space_, *field_, Vec::Constant(1, x), time_, opts_).tangent(0, 0);
    case Kind::Identity:
    case Kind::Rotation: return 1.0;
    case Kind::Expanding: return multiplier_ + eps_ * std::cos(kTwoPi * x);
    }
    return 1.0;
}

int MapHandle::degree() const { return kind_ == Kind::Expanding ? multiplier_ : 1; }

std::string MapHandle::describe() const {
    std::ostringstream os;
    switch (kind_) {
    case Kind::Flow: os << "flow(" << field_->describe() << ", t=" << time_ << ") on " << space_.describe(); break;
    case Kind::Identity: os << "identity on " << space_.describe(); break;
    case Kind::Rotation: os << "rotation(" << theta_ << ")"; break;
    case Kind::Expanding: os << "expanding(m=" << multiplier_ << ", eps=" << eps_ << ")"; break;
    }
    return os.str();
}

MapHandle flow_map_as_function(const Space& space, const FieldSpec& field, double t,
                               const IntegratorOpts& opts) {
    return MapHandle::from_flow(space, field, t, opts);
}

}  // namespace switchlab
