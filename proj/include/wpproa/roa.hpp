#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wpproa/loadflow.hpp"
#include "wpproa/lyapunov.hpp"
#include "wpproa/model.hpp"

namespace wpproa {

struct IntegrateOptions {
    double dt{1e-4};
    double escape_bound{1e3};          // infinity norm in shifted coordinates
    SystemState escape_center{};       // usually the equilibrium
    int record_stride{1};              // 0 records endpoints only
    std::vector<double> breakpoints;   // integration lands exactly on these
};

struct Trajectory {
    std::vector<double> times;
    std::vector<SystemState> states;
    Direction direction{Direction::forward};
    bool terminated_early{false};
    std::string termination_reason;
    std::size_t termination_step{0};

    const SystemState& back() const { return states.back(); }
};

// Fixed-step classical 4th-order integration of the bound dynamics over
// [t0, t1]. Early termination (with a recorded reason) on escape from the
// configured bound or on non-finite states.
Trajectory integrate(const Dynamics& dynamics, const SystemState& x0, double t0, double t1,
                     const IntegrateOptions& options = {});

struct Hyperplane {
    Eigen::Vector4d normal;
    double intercept{0.0};
    double thickness{0.0};  // slab half-width

    void validate() const;
};

struct TlRoaOptions {
    double horizon{2.25};
    int n_samples{4096};
    double dt{1e-4};
    double escape_bound{1e3};
    SampleStrategy strategy{SampleStrategy::fibonacci_hypersphere};
    std::uint64_t seed{1};
    double forward_check_fraction{0.05};
    bool record_tubes{false};
    int tube_stride{100};
    int workers{0};        // 0 = default_workers()
    bool linearized{false};  // integrate dx = A (x - eq) instead of the full model
};

// Time-limited stability region: endpoints of reverse-time trajectories
// seeded on the initial ellipsoid boundary. Samples that escape during the
// reverse pass are excluded and reported.
struct TlRoa {
    double horizon{0.0};
    double dt{1e-4};
    Ellipsoid seed_ellipsoid;
    Equilibrium equilibrium;
    std::vector<Eigen::Vector4d> seeds_shifted;
    std::vector<SystemState> boundary_cloud;  // physical coordinates
    std::vector<std::size_t> escaped_seeds;
    std::vector<Trajectory> tubes;  // optional, strided
    double forward_check_worst{0.0};  // max V/level over the audited subset
    bool linearized{false};
};

TlRoa build_tlroa(const PlantModel& plant, const Equilibrium& eq, const Ellipsoid& e,
                  const TlRoaOptions& options = {});

struct Membership {
    bool inside{false};
    double crossing_time{-1.0};  // first time the energy drops to the seed level
    bool escaped{false};
};

struct MemberOptions {
    double dt{1e-4};
    double escape_bound{1e3};
    double horizon{-1.0};  // <0: use the region's horizon
    double level_slack{0.0};  // accept V <= level * (1 + slack)
};

// Exact membership by forward simulation: a state is inside iff its forward
// trajectory reaches the seed ellipsoid within the horizon. An optional
// schedule override evaluates membership under non-steady dynamics (e.g. a
// post-fault current ramp).
Membership is_member(const SystemState& x, const TlRoa& roa, const PlantModel& plant,
                     const MemberOptions& options = {},
                     const std::optional<InjectionSchedule>& schedule = std::nullopt,
                     double t_start = 0.0);

// Visualisation coordinates (x1, x2, y1, y2) with saturated rates.
Eigen::Vector4d visual_point(const SystemState& s, const PlantModel& plant);
std::vector<Eigen::Vector4d> visual_cloud(const std::vector<SystemState>& states,
                                          const PlantModel& plant);

// Points whose distance to the hyperplane is at most the slab half-width.
std::vector<Eigen::Vector4d> slice(const std::vector<Eigen::Vector4d>& cloud,
                                   const Hyperplane& h);

enum class Axis { x1 = 0, x2 = 1, y1 = 2, y2 = 3 };
Axis axis_from_name(const std::string& name);
std::string axis_name(Axis a);

// Order-preserving coordinate projection onto an axis pair.
std::vector<Eigen::Vector2d> project(const std::vector<Eigen::Vector4d>& points, Axis a, Axis b);

}  // namespace wpproa
