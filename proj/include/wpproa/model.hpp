#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "wpproa/common.hpp"

namespace wpproa {

// Internal unit convention, applied once at config load:
//   voltages/currents/resistances  per unit on the common system base
//   inductances                    L / Z_base  (seconds)
//   PLL gains                      (rad/s)/pu and (rad/s^2)/pu
//   angles rad, time s, angular frequencies rad/s

inline constexpr double kDefaultSatLimit = 2.0 * kPi * 5.0;  // rad/s

struct Vec2 {
    double d{0.0};
    double q{0.0};

    Vec2 operator+(const Vec2& o) const { return {d + o.d, q + o.q}; }
    Vec2 operator-(const Vec2& o) const { return {d - o.d, q - o.q}; }
    Vec2 operator*(double s) const { return {d * s, q * s}; }
    double norm() const { return std::hypot(d, q); }
    double angle() const { return std::atan2(q, d); }
};

// Aggregated wind-turbine converter: PLL gains, machine-side branch, current
// setpoints and fault-injection settings.
struct WtParams {
    double kp{0.0};        // (rad/s)/pu
    double ki{0.0};        // (rad/s^2)/pu
    double r_lg{0.0};      // pu
    double l_g{0.0};       // s
    double id_c{0.0};      // pu
    double iq_c{0.0};      // pu
    double i_max{1.0};     // pu
    double k_factor{2.0};  // pu reactive current per pu retained voltage
    double id_ramp{0.0};   // pu/s, post-fault active-current ramp
    int n_turbines{1};
    double x2_max{kDefaultSatLimit};  // rad/s
    bool aggregated{false};

    void validate(const std::string& prefix = "wt") const;
};

struct StatcomParams {
    double kp{0.0};
    double ki{0.0};
    double r_ls{0.0};   // pu
    double l_s{0.0};    // s
    double iq_st{0.0};  // pu, steady-state reactive setpoint
    double iq_fault{0.0};  // pu, reactive current held during severe faults
    double y2_max{kDefaultSatLimit};

    void validate(const std::string& prefix = "statcom") const;
};

// Thevenin boundary behind the fitted network: open-circuit voltage per bus
// (0 = WT bus, 1 = STATCOM bus) plus slow magnitude/frequency rates for ramp
// studies. Rates default to zero (stiff grid).
struct GridBoundary {
    std::array<double, 2> v_mag_0{1.0, 1.0};   // pu
    std::array<double, 2> theta_g0{0.0, 0.0};  // rad
    double omega_0{2.0 * kPi * 50.0};          // rad/s
    double v_dot{0.0};                         // pu/s
    double omega_dot{0.0};                     // rad/s^2

    void validate(const std::string& prefix = "grid") const;
};

// 2x2 RL equivalent of the collector network seen from the two converter
// buses. Resistances pu, inductances seconds.
struct NetworkCoupling {
    double r11{0.0}, r12{0.0}, r21{0.0}, r22{0.0};
    double l11{0.0}, l12{0.0}, l21{0.0}, l22{0.0};

    void validate(const std::string& prefix = "network") const;
};

// Dynamic states: PLL angles and unsaturated frequency deviations. The
// saturated rates x2/y2 are derived, not stored.
struct SystemState {
    double x1{0.0};  // rad
    double x3{0.0};  // rad/s
    double y1{0.0};  // rad
    double y3{0.0};  // rad/s

    SystemState operator+(const SystemState& o) const { return {x1 + o.x1, x3 + o.x3, y1 + o.y1, y3 + o.y3}; }
    SystemState operator-(const SystemState& o) const { return {x1 - o.x1, x3 - o.x3, y1 - o.y1, y3 - o.y3}; }
    SystemState operator*(double s) const { return {x1 * s, x3 * s, y1 * s, y3 * s}; }
    double inf_norm() const {
        return std::max(std::max(std::abs(x1), std::abs(x3)), std::max(std::abs(y1), std::abs(y3)));
    }
    bool finite() const {
        return std::isfinite(x1) && std::isfinite(x3) && std::isfinite(y1) && std::isfinite(y3);
    }
};

// Everything the coupled ODE needs besides the state.
struct PlantModel {
    WtParams wt;
    StatcomParams statcom;
    GridBoundary grid;
    NetworkCoupling network;

    void validate() const;
};

// x_max * tanh(x/x_max), clamped one ulp inside +-x_max so the saturated
// value is strictly below the limit even when tanh rounds to 1.
double saturate(double x, double x_max);

// Scales per-turbine quantities to the plant aggregate: currents and ramp
// by N, branch impedance by 1/N. Must be applied exactly once.
WtParams aggregate_scaling(const WtParams& params);

enum class ScheduleMode { normal, fault, post_fault_ramp };

// Injections and open-circuit boundary in effect at one instant. Derivatives
// are carried analytically (zero for constant segments, constant for ramps).
struct Injections {
    double id{0.0}, iq{0.0};
    double did{0.0}, diq{0.0};
    double d2id{0.0}, d2iq{0.0};
    double ist_q{0.0};
    double dist_q{0.0};
    double d2ist_q{0.0};
    std::array<Vec2, 2> v0{};  // resolved open-circuit voltages (system frame)
    ScheduleMode mode{ScheduleMode::normal};
};

// Piecewise current/boundary program: steady operation, an optional fault
// interval with the grid-code injection law, and the post-fault ramp back to
// the setpoints. Fault currents are computed from the scheduled retained
// voltage, keeping the ODE right-hand side explicit.
class InjectionSchedule {
  public:
    static InjectionSchedule steady(const PlantModel& plant);
    // Fault applied at t_on and never cleared (for fault-on trajectories).
    static InjectionSchedule sustained_fault(const PlantModel& plant, double t_on, double v_fault);
    // Fault on [t_on, t_clear), then boundary restored, reactive current
    // stepped back and active current ramped to its setpoint.
    static InjectionSchedule fault_cleared_at(const PlantModel& plant, double t_on, double v_fault,
                                              double t_clear);

    Injections at(double t) const;
    // Segment boundaries (fault on/clear, ramp end); integration lands on these.
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    // Active current at the end of the fault interval (continuity anchor).
    double fault_id() const { return fault_id_; }
    double fault_iq() const { return fault_iq_; }
    double ramp_duration() const { return ramp_duration_; }

  private:
    struct Segment {
        double t_start;
        double t_end;
        double id0;  // active current at t_start
        double did;  // slope within the segment
        double iq;
        double ist_q;
        std::array<double, 2> v0_mag;
        std::array<Vec2, 2> v0_const;  // precomputed when boundary rates are zero
        ScheduleMode mode;
    };

    InjectionSchedule() = default;
    static std::pair<double, double> fault_currents(const WtParams& wt, double v_fault);
    void finalize();

    std::vector<Segment> segments_;
    std::vector<double> breakpoints_;
    GridBoundary grid_;
    bool rates_zero_{true};
    double fault_id_{0.0};
    double fault_iq_{0.0};
    double ramp_duration_{0.0};
};

struct BusVoltages {
    Vec2 wt;
    Vec2 st;
};

// Collector-network algebraic equation: open-circuit voltage plus, for each
// injecting converter, the resistive/cross-coupling drop, the rotation-rate
// term and the L di/dt term, all rotated from the converter frame by the
// PLL angles. rates = (x2, y2).
BusVoltages bus_voltages(const SystemState& state, const Vec2& rates, const Vec2& i_wt,
                         const Vec2& di_wt, const Vec2& i_st, const Vec2& di_st,
                         const NetworkCoupling& net, double omega_0,
                         const std::array<Vec2, 2>& v0);

// WT swing-like PLL equation. Returns (dx1/dt, dx3/dt) given the bus voltage
// magnitude and angle this converter measures.
std::pair<double, double> wt_rhs(const SystemState& state, double v_mag, double v_ang,
                                 const WtParams& p, const GridBoundary& grid,
                                 const Injections& inj, double t);

std::pair<double, double> statcom_rhs(const SystemState& state, double v_mag, double v_ang,
                                      const StatcomParams& p, const GridBoundary& grid,
                                      const Injections& inj, double t);

enum class Direction { forward, reverse };

// Bus voltages pinned to fixed values (system frame); used to evaluate the
// per-converter dynamics against a stiff measured voltage.
struct FrozenBus {
    Vec2 v_wt;
    Vec2 v_st;
};

// Bound right-hand-side evaluator. Owns the schedule; optionally evaluates
// with frozen bus voltages, or as the linearised flow dx = A (x - x_eq).
class Dynamics {
  public:
    Dynamics(const PlantModel& plant, InjectionSchedule schedule,
             Direction direction = Direction::forward);

    SystemState rhs(double t, const SystemState& s) const;

    void freeze_bus(const FrozenBus& frozen) { frozen_ = frozen; }
    void set_linear(const std::array<std::array<double, 4>, 4>& a, const SystemState& eq);

    Direction direction() const { return direction_; }
    const InjectionSchedule& schedule() const { return schedule_; }
    const PlantModel& plant() const { return plant_; }

  private:
    PlantModel plant_;
    InjectionSchedule schedule_;
    Direction direction_;
    std::optional<FrozenBus> frozen_;
    bool linear_{false};
    std::array<std::array<double, 4>, 4> a_{};
    SystemState eq_{};
};

// Full coupled right-hand side: schedule -> bus voltages -> both converter
// equations. Reverse mode returns the exact negation.
SystemState system_rhs(double t, const SystemState& s, const PlantModel& plant,
                       const InjectionSchedule& schedule, Direction direction = Direction::forward,
                       const std::optional<FrozenBus>& frozen = std::nullopt);

}  // namespace wpproa
