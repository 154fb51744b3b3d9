#include "wpproa/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace wpproa {

namespace {

void require(bool ok, const std::string& field, const std::string& constraint) {
    if (!ok) throw config_error(field + ": " + constraint);
}

bool finite(double v) { return std::isfinite(v); }

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void WtParams::validate(const std::string& prefix) const {
    require(finite(kp) && kp > 0.0, prefix + ".kp", "must be > 0");
    require(finite(ki) && ki > 0.0, prefix + ".ki", "must be > 0");
    require(finite(r_lg) && r_lg >= 0.0, prefix + ".r_lg", "must be >= 0");
    require(finite(l_g) && l_g >= 0.0, prefix + ".l_g", "must be >= 0");
    require(n_turbines >= 1, prefix + ".n_turbines", "must be >= 1");
    require(finite(i_max) && i_max > 0.0, prefix + ".i_max", "must be > 0");
    require(finite(x2_max) && x2_max > 0.0, prefix + ".x2_max", "must be > 0");
    require(finite(id_c) && std::abs(id_c) <= i_max, prefix + ".id_c", "|id_c| must be <= i_max");
    require(finite(iq_c) && std::abs(iq_c) <= i_max, prefix + ".iq_c", "|iq_c| must be <= i_max");
    require(finite(k_factor) && k_factor >= 0.0, prefix + ".k_factor", "must be >= 0");
    require(finite(id_ramp) && id_ramp >= 0.0, prefix + ".id_ramp", "must be >= 0");
}

void StatcomParams::validate(const std::string& prefix) const {
    require(finite(kp) && kp > 0.0, prefix + ".kp", "must be > 0");
    require(finite(ki) && ki > 0.0, prefix + ".ki", "must be > 0");
    require(finite(r_ls) && r_ls >= 0.0, prefix + ".r_ls", "must be >= 0");
    require(finite(l_s) && l_s >= 0.0, prefix + ".l_s", "must be >= 0");
    require(finite(iq_st), prefix + ".iq_st", "must be finite");
    require(finite(iq_fault), prefix + ".iq_fault", "must be finite");
    require(finite(y2_max) && y2_max > 0.0, prefix + ".y2_max", "must be > 0");
}

void GridBoundary::validate(const std::string& prefix) const {
    for (int i = 0; i < 2; ++i) {
        require(finite(v_mag_0[i]) && v_mag_0[i] >= 0.0, prefix + ".v_mag_0", "must be >= 0");
        require(finite(theta_g0[i]), prefix + ".theta_g0", "must be finite");
    }
    require(finite(omega_0) && omega_0 > 0.0, prefix + ".omega_0", "must be > 0");
    require(finite(v_dot), prefix + ".v_dot", "must be finite");
    require(finite(omega_dot), prefix + ".omega_dot", "must be finite");
}

void NetworkCoupling::validate(const std::string& prefix) const {
    for (double v : {r11, r12, r21, r22, l11, l12, l21, l22})
        require(finite(v), prefix, "all entries must be finite");
    require(r11 >= 0.0, prefix + ".r11", "must be >= 0");
    require(r22 >= 0.0, prefix + ".r22", "must be >= 0");
    require(l11 > 0.0, prefix + ".l11", "must be > 0");
    require(l22 > 0.0, prefix + ".l22", "must be > 0");
}

void PlantModel::validate() const {
    wt.validate();
    statcom.validate();
    grid.validate();
    network.validate();
}

double saturate(double x, double x_max) {
    if (!(x_max > 0.0)) throw config_error("saturate: x_max must be > 0");
    double v = x_max * std::tanh(x / x_max);
    // tanh rounds to exactly 1 for large arguments; keep the bound strict.
    if (std::abs(v) >= x_max) v = std::copysign(std::nextafter(x_max, 0.0), x);
    return v;
}

WtParams aggregate_scaling(const WtParams& params) {
    if (params.aggregated)
        throw config_error("aggregate_scaling: params are already aggregated");
    params.validate();
    WtParams out = params;
    const double n = static_cast<double>(params.n_turbines);
    out.id_c *= n;
    out.iq_c *= n;
    out.i_max *= n;
    out.id_ramp *= n;
    out.r_lg /= n;
    out.l_g /= n;
    out.aggregated = true;
    return out;
}

// ---------------------------------------------------------------------------
// Injection schedule

std::pair<double, double> InjectionSchedule::fault_currents(const WtParams& wt, double v_fault) {
    // Grid-code reactive injection, limited to 1 pu (and to the converter
    // rating); active current fills the remaining headroom, floored at zero.
    double iq = std::min(wt.k_factor * v_fault, 1.0);
    iq = std::min(iq, wt.i_max);
    const double radicand = wt.i_max * wt.i_max - iq * iq;
    const double id = radicand > 0.0 ? std::sqrt(radicand) : 0.0;
    return {id, iq};
}

void InjectionSchedule::finalize() {
    rates_zero_ = grid_.v_dot == 0.0 && grid_.omega_dot == 0.0;
    for (Segment& seg : segments_) {
        for (int b = 0; b < 2; ++b) {
            seg.v0_const[b] = Vec2{seg.v0_mag[b] * std::cos(grid_.theta_g0[b]),
                                   seg.v0_mag[b] * std::sin(grid_.theta_g0[b])};
        }
    }
}

InjectionSchedule InjectionSchedule::steady(const PlantModel& plant) {
    if (std::hypot(plant.wt.id_c, plant.wt.iq_c) > plant.wt.i_max + 1e-9)
        throw config_error("schedule: composite current magnitude exceeds i_max");
    InjectionSchedule s;
    s.grid_ = plant.grid;
    s.segments_.push_back({-kInf, kInf, plant.wt.id_c, 0.0, plant.wt.iq_c, plant.statcom.iq_st,
                           plant.grid.v_mag_0, {}, ScheduleMode::normal});
    s.finalize();
    return s;
}

InjectionSchedule InjectionSchedule::sustained_fault(const PlantModel& plant, double t_on,
                                                     double v_fault) {
    if (!(v_fault >= 0.0)) throw config_error("schedule.v_fault: must be >= 0");
    if (std::hypot(plant.wt.id_c, plant.wt.iq_c) > plant.wt.i_max + 1e-9)
        throw config_error("schedule: composite current magnitude exceeds i_max");
    InjectionSchedule s;
    s.grid_ = plant.grid;
    const auto [id_f, iq_f] = fault_currents(plant.wt, v_fault);
    s.fault_id_ = id_f;
    s.fault_iq_ = iq_f;
    s.segments_.push_back({-kInf, t_on, plant.wt.id_c, 0.0, plant.wt.iq_c, plant.statcom.iq_st,
                           plant.grid.v_mag_0, {}, ScheduleMode::normal});
    s.segments_.push_back({t_on, kInf, id_f, 0.0, iq_f, plant.statcom.iq_fault,
                           {v_fault, v_fault}, {}, ScheduleMode::fault});
    s.breakpoints_ = {t_on};
    s.finalize();
    return s;
}

InjectionSchedule InjectionSchedule::fault_cleared_at(const PlantModel& plant, double t_on,
                                                      double v_fault, double t_clear) {
    if (t_clear < t_on) throw config_error("schedule: t_fault_on must be < t_clear");
    if (std::hypot(plant.wt.id_c, plant.wt.iq_c) > plant.wt.i_max + 1e-9)
        throw config_error("schedule: composite current magnitude exceeds i_max");
    InjectionSchedule s;
    s.grid_ = plant.grid;
    const auto [id_f, iq_f] = fault_currents(plant.wt, v_fault);
    s.segments_.push_back({-kInf, t_on, plant.wt.id_c, 0.0, plant.wt.iq_c, plant.statcom.iq_st,
                           plant.grid.v_mag_0, {}, ScheduleMode::normal});
    double id_at_clear = plant.wt.id_c;
    if (t_clear > t_on) {
        s.fault_id_ = id_f;
        s.fault_iq_ = iq_f;
        s.segments_.push_back({t_on, t_clear, id_f, 0.0, iq_f, plant.statcom.iq_fault,
                               {v_fault, v_fault}, {}, ScheduleMode::fault});
        id_at_clear = id_f;
    }
    if (std::hypot(id_at_clear, plant.wt.iq_c) > plant.wt.i_max + 1e-9)
        throw config_error(
            "schedule: post-fault reactive step combined with the fault active current exceeds "
            "i_max");
    // Reactive current steps back to its setpoint at clearing; active current
    // is continuous and ramps towards the setpoint at the configured rate.
    const double gap = plant.wt.id_c - id_at_clear;
    double duration = 0.0;
    if (gap != 0.0 && plant.wt.id_ramp > 0.0) duration = std::abs(gap) / plant.wt.id_ramp;
    s.ramp_duration_ = duration;
    const double t_ramp_end = t_clear + duration;
    if (duration > 0.0) {
        const double slope = (gap > 0.0 ? 1.0 : -1.0) * plant.wt.id_ramp;
        s.segments_.push_back({t_clear, t_ramp_end, id_at_clear, slope, plant.wt.iq_c,
                               plant.statcom.iq_st, plant.grid.v_mag_0, {},
                               ScheduleMode::post_fault_ramp});
    }
    s.segments_.push_back({t_ramp_end, kInf, plant.wt.id_c, 0.0, plant.wt.iq_c,
                           plant.statcom.iq_st, plant.grid.v_mag_0, {}, ScheduleMode::normal});
    s.breakpoints_ = {t_on, t_clear, t_ramp_end};
    s.breakpoints_.erase(std::unique(s.breakpoints_.begin(), s.breakpoints_.end()),
                         s.breakpoints_.end());
    s.finalize();
    return s;
}

Injections InjectionSchedule::at(double t) const {
    const Segment* seg = &segments_.back();
    for (const Segment& candidate : segments_) {
        if (t < candidate.t_end) {
            seg = &candidate;
            break;
        }
    }
    Injections inj;
    inj.mode = seg->mode;
    const double dt_seg = std::isfinite(seg->t_start) ? t - seg->t_start : 0.0;
    inj.id = seg->id0 + seg->did * dt_seg;
    inj.did = seg->did;
    inj.iq = seg->iq;
    inj.ist_q = seg->ist_q;
    if (rates_zero_) {
        inj.v0 = seg->v0_const;
        return inj;
    }
    for (int b = 0; b < 2; ++b) {
        double mag = seg->v0_mag[b];
        if (seg->mode != ScheduleMode::fault) mag += grid_.v_dot * t;
        double ang = grid_.theta_g0[b];
        if (grid_.omega_dot != 0.0) ang += 0.5 * grid_.omega_dot * t * t;
        inj.v0[b] = Vec2{mag * std::cos(ang), mag * std::sin(ang)};
    }
    return inj;
}

// ---------------------------------------------------------------------------
// Network and converter right-hand sides

namespace {

// One converter's contribution to a bus voltage. u = current rotated to the
// system frame, w = rotated current derivative; the rotation-rate term adds
// the PLL rate to the nominal cross-coupling frequency.
inline void add_branch(Vec2& v, double r, double l, double omega0, double rate, const Vec2& u,
                       const Vec2& w) {
    const double cross = (omega0 + rate) * l;
    v.d += r * u.d - cross * u.q + l * w.d;
    v.q += r * u.q + cross * u.d + l * w.q;
}

inline Vec2 rotate(double c, double s, const Vec2& v) {
    return {c * v.d - s * v.q, s * v.d + c * v.q};
}

inline BusVoltages bus_voltages_core(double cx1, double sx1, double cy1, double sy1,
                                     const Vec2& rates, const Vec2& i_wt, const Vec2& di_wt,
                                     const Vec2& i_st, const Vec2& di_st,
                                     const NetworkCoupling& net, double omega_0,
                                     const std::array<Vec2, 2>& v0) {
    const Vec2 u_wt = rotate(cx1, sx1, i_wt);
    const Vec2 w_wt = rotate(cx1, sx1, di_wt);
    const Vec2 u_st = rotate(cy1, sy1, i_st);
    const Vec2 w_st = rotate(cy1, sy1, di_st);

    BusVoltages out{v0[0], v0[1]};
    add_branch(out.wt, net.r11, net.l11, omega_0, rates.d, u_wt, w_wt);
    add_branch(out.wt, net.r12, net.l12, omega_0, rates.q, u_st, w_st);
    add_branch(out.st, net.r21, net.l21, omega_0, rates.d, u_wt, w_wt);
    add_branch(out.st, net.r22, net.l22, omega_0, rates.q, u_st, w_st);
    return out;
}

// Swing-like core shared by the magnitude/angle and dq evaluation paths.
// v_sin = V sin(theta_pll - theta_bus), v_cos = V cos(theta_pll - theta_bus);
// sin_delta is only needed when the boundary magnitude rate is nonzero.
inline std::pair<double, double> wt_core(double x2, double v_sin, double v_cos, double sin_delta,
                                         const WtParams& p, double omega_g, double v_dot,
                                         double omega_dot, const Injections& inj) {
    const double m = 1.0 - p.kp * p.l_g * inj.id;
    if (std::abs(m) < 1e-12)
        throw numeric_error("wt_rhs: singular equivalent inertia (1 - kp*l_g*id = 0)");
    const double t_m = p.kp * (p.r_lg * inj.diq + p.l_g * inj.d2iq + p.l_g * inj.did * omega_g) +
                       p.ki * (p.r_lg * inj.iq + p.l_g * inj.diq + p.l_g * inj.id * omega_g);
    const double t_e = p.ki * v_sin + p.kp * v_dot * sin_delta + m * omega_dot;
    const double d = p.kp * (v_cos - p.l_g * inj.did) - p.ki * p.l_g * inj.id;
    return {x2, (t_m - t_e - d * x2) / m};
}

inline std::pair<double, double> statcom_core(double y2, double v_sin, double v_cos,
                                              double sin_delta, const StatcomParams& p,
                                              double v_dot, double omega_dot,
                                              const Injections& inj) {
    const double t_m = p.kp * (p.r_ls * inj.dist_q + p.l_s * inj.d2ist_q) +
                       p.ki * (p.r_ls * inj.ist_q + p.l_s * inj.dist_q);
    const double t_e = p.ki * v_sin + p.kp * v_dot * sin_delta + omega_dot;
    const double d = p.kp * v_cos;
    return {y2, t_m - t_e - d * y2};
}

inline SystemState eval_rhs(const PlantModel& plant, const InjectionSchedule& schedule,
                            Direction direction, const std::optional<FrozenBus>& frozen, double t,
                            const SystemState& s) {
    const Injections inj = schedule.at(t);
    const double x2 = saturate(s.x3, plant.wt.x2_max);
    const double y2 = saturate(s.y3, plant.statcom.y2_max);
    if (!(std::abs(x2) < plant.wt.x2_max) || !(std::abs(y2) < plant.statcom.y2_max))
        throw numeric_error("system_rhs: saturation bound violated");

    const double cx1 = std::cos(s.x1), sx1 = std::sin(s.x1);
    const double cy1 = std::cos(s.y1), sy1 = std::sin(s.y1);

    BusVoltages bus;
    if (frozen) {
        bus = BusVoltages{frozen->v_wt, frozen->v_st};
    } else {
        bus = bus_voltages_core(cx1, sx1, cy1, sy1, Vec2{x2, y2}, Vec2{inj.id, inj.iq},
                                Vec2{inj.did, inj.diq}, Vec2{0.0, inj.ist_q},
                                Vec2{0.0, inj.dist_q}, plant.network, plant.grid.omega_0, inj.v0);
    }

    // V sin(x1 - theta) = sin(x1) v_d - cos(x1) v_q (and cos analogously);
    // avoids the magnitude/angle round trip in the integration path.
    const double vsin_w = sx1 * bus.wt.d - cx1 * bus.wt.q;
    const double vcos_w = cx1 * bus.wt.d + sx1 * bus.wt.q;
    const double vsin_s = sy1 * bus.st.d - cy1 * bus.st.q;
    const double vcos_s = cy1 * bus.st.d + sy1 * bus.st.q;

    double sind_w = 0.0, sind_s = 0.0;
    if (plant.grid.v_dot != 0.0) {
        const double vw = bus.wt.norm();
        const double vs = bus.st.norm();
        sind_w = vw > 0.0 ? vsin_w / vw : 0.0;
        sind_s = vs > 0.0 ? vsin_s / vs : 0.0;
    }

    const double omega_g = plant.grid.omega_0 + plant.grid.omega_dot * t;
    const auto [dx1, dx3] =
        wt_core(x2, vsin_w, vcos_w, sind_w, plant.wt, omega_g, plant.grid.v_dot,
                plant.grid.omega_dot, inj);
    const auto [dy1, dy3] = statcom_core(y2, vsin_s, vcos_s, sind_s, plant.statcom,
                                         plant.grid.v_dot, plant.grid.omega_dot, inj);

    SystemState out{dx1, dx3, dy1, dy3};
    if (direction == Direction::reverse) out = out * -1.0;
    return out;
}

}  // namespace

BusVoltages bus_voltages(const SystemState& state, const Vec2& rates, const Vec2& i_wt,
                         const Vec2& di_wt, const Vec2& i_st, const Vec2& di_st,
                         const NetworkCoupling& net, double omega_0,
                         const std::array<Vec2, 2>& v0) {
    net.validate();
    return bus_voltages_core(std::cos(state.x1), std::sin(state.x1), std::cos(state.y1),
                             std::sin(state.y1), rates, i_wt, di_wt, i_st, di_st, net, omega_0,
                             v0);
}

std::pair<double, double> wt_rhs(const SystemState& state, double v_mag, double v_ang,
                                 const WtParams& p, const GridBoundary& grid,
                                 const Injections& inj, double t) {
    const double x2 = saturate(state.x3, p.x2_max);
    const double delta = state.x1 - v_ang;
    const double sind = std::sin(delta);
    const double cosd = std::cos(delta);
    const double omega_g = grid.omega_0 + grid.omega_dot * t;
    return wt_core(x2, v_mag * sind, v_mag * cosd, sind, p, omega_g, grid.v_dot, grid.omega_dot,
                   inj);
}

std::pair<double, double> statcom_rhs(const SystemState& state, double v_mag, double v_ang,
                                      const StatcomParams& p, const GridBoundary& grid,
                                      const Injections& inj, double t) {
    (void)t;
    const double y2 = saturate(state.y3, p.y2_max);
    const double delta = state.y1 - v_ang;
    const double sind = std::sin(delta);
    const double cosd = std::cos(delta);
    return statcom_core(y2, v_mag * sind, v_mag * cosd, sind, p, grid.v_dot, grid.omega_dot, inj);
}

Dynamics::Dynamics(const PlantModel& plant, InjectionSchedule schedule, Direction direction)
    : plant_(plant), schedule_(std::move(schedule)), direction_(direction) {}

void Dynamics::set_linear(const std::array<std::array<double, 4>, 4>& a, const SystemState& eq) {
    linear_ = true;
    a_ = a;
    eq_ = eq;
}

SystemState Dynamics::rhs(double t, const SystemState& s) const {
    if (linear_) {
        const double z0 = s.x1 - eq_.x1, z1 = s.x3 - eq_.x3;
        const double z2 = s.y1 - eq_.y1, z3 = s.y3 - eq_.y3;
        SystemState out{
            a_[0][0] * z0 + a_[0][1] * z1 + a_[0][2] * z2 + a_[0][3] * z3,
            a_[1][0] * z0 + a_[1][1] * z1 + a_[1][2] * z2 + a_[1][3] * z3,
            a_[2][0] * z0 + a_[2][1] * z1 + a_[2][2] * z2 + a_[2][3] * z3,
            a_[3][0] * z0 + a_[3][1] * z1 + a_[3][2] * z2 + a_[3][3] * z3,
        };
        if (direction_ == Direction::reverse) out = out * -1.0;
        return out;
    }
    return eval_rhs(plant_, schedule_, direction_, frozen_, t, s);
}

SystemState system_rhs(double t, const SystemState& s, const PlantModel& plant,
                       const InjectionSchedule& schedule, Direction direction,
                       const std::optional<FrozenBus>& frozen) {
    return eval_rhs(plant, schedule, direction, frozen, t, s);
}

}  // namespace wpproa
