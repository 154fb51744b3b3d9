#include "wpproa/roa.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

namespace wpproa {

namespace {

inline SystemState rk4_step(const Dynamics& dyn, double t, double h, const SystemState& x) {
    const SystemState k1 = dyn.rhs(t, x);
    const SystemState k2 = dyn.rhs(t + 0.5 * h, x + k1 * (0.5 * h));
    const SystemState k3 = dyn.rhs(t + 0.5 * h, x + k2 * (0.5 * h));
    const SystemState k4 = dyn.rhs(t + h, x + k3 * h);
    return x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

// Steps through [t0, t1], landing exactly on the listed breakpoints and on
// t1. observer(t, state, step_index) is called after every accepted step and
// may stop the run. Returns false when the run terminated early.
template <typename Observer>
bool step_through(const Dynamics& dyn, SystemState& x, double t0, double t1,
                  const IntegrateOptions& opt, std::string& reason, std::size_t& term_step,
                  Observer&& observer) {
    std::vector<double> marks;
    for (double b : opt.breakpoints)
        if (b > t0 && b < t1) marks.push_back(b);
    std::sort(marks.begin(), marks.end());
    marks.push_back(t1);

    double t = t0;
    std::size_t step_index = 0;
    for (double mark : marks) {
        const double span = mark - t;
        if (span <= 0.0) continue;
        const auto n_steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / opt.dt - 1e-9)));
        for (std::size_t i = 0; i < n_steps; ++i) {
            const double step_end = (i + 1 == n_steps) ? mark : t + opt.dt;
            const double h = step_end - t;
            x = rk4_step(dyn, t, h, x);
            t = step_end;
            ++step_index;
            if (!x.finite()) {
                std::ostringstream os;
                os << "non-finite state at step " << step_index;
                reason = os.str();
                term_step = step_index;
                return false;
            }
            if ((x - opt.escape_center).inf_norm() > opt.escape_bound) {
                std::ostringstream os;
                os << "escape bound " << opt.escape_bound << " exceeded at step " << step_index;
                reason = os.str();
                term_step = step_index;
                return false;
            }
            if (!observer(t, x, step_index)) {
                term_step = step_index;
                return true;
            }
        }
    }
    return true;
}

}  // namespace

Trajectory integrate(const Dynamics& dynamics, const SystemState& x0, double t0, double t1,
                     const IntegrateOptions& options) {
    if (!(options.dt > 0.0)) throw config_error("integrate.dt: must be > 0");
    if (!(t1 > t0)) throw config_error("integrate: t1 must be > t0");

    Trajectory traj;
    traj.direction = dynamics.direction();
    traj.times.push_back(t0);
    traj.states.push_back(x0);

    if (!x0.finite()) {
        traj.terminated_early = true;
        traj.termination_reason = "non-finite initial state";
        return traj;
    }

    SystemState x = x0;
    const int stride = options.record_stride;
    const bool ok = step_through(
        dynamics, x, t0, t1, options, traj.termination_reason, traj.termination_step,
        [&](double t, const SystemState& s, std::size_t step) {
            if (stride > 0 && step % static_cast<std::size_t>(stride) == 0) {
                traj.times.push_back(t);
                traj.states.push_back(s);
            }
            return true;
        });

    traj.terminated_early = !ok;
    const double t_last = traj.times.back();
    const double t_end = ok ? t1 : t_last;  // state already advanced on failure paths
    if (ok && (traj.times.back() != t1)) {
        traj.times.push_back(t1);
        traj.states.push_back(x);
    } else if (!ok) {
        // keep the last finite/net state for diagnostics
        if (x.finite() && traj.times.back() < t_end) {
            traj.times.push_back(t_end);
            traj.states.push_back(x);
        }
    }
    return traj;
}

void Hyperplane::validate() const {
    if (!(normal.norm() > 0.0)) throw config_error("hyperplane.normal: must be nonzero");
    if (!(thickness > 0.0)) throw config_error("hyperplane.thickness: must be > 0");
}

TlRoa build_tlroa(const PlantModel& plant, const Equilibrium& eq, const Ellipsoid& e,
                  const TlRoaOptions& options) {
    if (!(options.horizon >= 0.0)) throw config_error("roa.horizon: must be >= 0");
    if (options.n_samples < 1) throw config_error("roa.n_samples: must be >= 1");

    TlRoa roa;
    roa.horizon = options.horizon;
    roa.dt = options.dt;
    roa.seed_ellipsoid = e;
    roa.equilibrium = eq;
    roa.linearized = options.linearized;
    roa.seeds_shifted = sample_boundary(e, options.n_samples, options.strategy, options.seed);

    const auto n = roa.seeds_shifted.size();
    if (options.horizon == 0.0) {
        // identity flow: the cloud is the seed set itself
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = roa.seeds_shifted[i];
            roa.boundary_cloud.push_back(unshift({s(0), s(1), s(2), s(3)}, eq));
            roa.cloud_seed_index.push_back(i);
        }
        return roa;
    }

    Dynamics reverse_dyn(plant, InjectionSchedule::steady(plant), Direction::reverse);
    std::optional<LinearModel> lin;
    if (options.linearized) {
        lin = linearize(plant, eq);
        std::array<std::array<double, 4>, 4> a{};
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) a[r][c] = lin->a_full(r, c);
        reverse_dyn.set_linear(a, eq.state());
    }

    IntegrateOptions iopt;
    iopt.dt = options.dt;
    iopt.escape_bound = options.escape_bound;
    iopt.escape_center = eq.state();
    iopt.record_stride = options.record_tubes ? options.tube_stride : 0;

    std::vector<Trajectory> trajectories(n);
    const int workers = options.workers > 0 ? options.workers : default_workers();
    parallel_for(n, workers, [&](std::size_t i) {
        const auto& s = roa.seeds_shifted[i];
        const SystemState x0 = unshift({s(0), s(1), s(2), s(3)}, eq);
        trajectories[i] = integrate(reverse_dyn, x0, 0.0, options.horizon, iopt);
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (trajectories[i].terminated_early) {
            roa.escaped_seeds.push_back(i);
            continue;
        }
        roa.boundary_cloud.push_back(trajectories[i].back());
        roa.cloud_seed_index.push_back(i);
        if (options.record_tubes) roa.tubes.push_back(std::move(trajectories[i]));
    }
    if (!roa.escaped_seeds.empty()) {
        std::cerr << "build_tlroa: warning, " << roa.escaped_seeds.size() << " of " << n
                  << " reverse trajectories escaped and were excluded (horizon or level too "
                     "aggressive)\n";
    }

    // forward-consistency audit on a deterministic random subset
    if (options.forward_check_fraction > 0.0 && !roa.boundary_cloud.empty()) {
        std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ull);
        const auto m = roa.boundary_cloud.size();
        std::size_t n_check = static_cast<std::size_t>(
            std::max(1.0, std::floor(options.forward_check_fraction * static_cast<double>(m))));
        n_check = std::min(n_check, m);
        std::vector<std::size_t> idx(m);
        for (std::size_t i = 0; i < m; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(n_check);

        Dynamics forward_dyn = reverse_dyn;
        // same dynamics, forward sign
        forward_dyn = Dynamics(plant, InjectionSchedule::steady(plant), Direction::forward);
        if (options.linearized) {
            std::array<std::array<double, 4>, 4> a{};
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) a[r][c] = lin->a_full(r, c);
            forward_dyn.set_linear(a, eq.state());
        }

        std::vector<double> ratios(n_check, 0.0);
        parallel_for(n_check, workers, [&](std::size_t k) {
            const auto traj = integrate(forward_dyn, roa.boundary_cloud[idx[k]], 0.0,
                                        options.horizon, iopt);
            const SystemState shifted = shift_to_origin(traj.back(), eq);
            const Eigen::Vector4d xs{shifted.x1, shifted.x3, shifted.y1, shifted.y3};
            ratios[k] = e.value(xs) / e.level;
        });
        roa.forward_check_worst = *std::max_element(ratios.begin(), ratios.end());
        if (roa.forward_check_worst > 1.0 + 1e-6) {
            std::cerr << "build_tlroa: warning, forward-consistency audit worst V/level = "
                      << roa.forward_check_worst << " (expected <= 1 + 1e-6)\n";
        }
    }
    return roa;
}

Membership is_member(const SystemState& x, const TlRoa& roa, const PlantModel& plant,
                     const MemberOptions& options,
                     const std::optional<InjectionSchedule>& schedule, double t_start) {
    const double horizon = options.horizon >= 0.0 ? options.horizon : roa.horizon;
    const double level = roa.seed_ellipsoid.level * (1.0 + options.level_slack);

    const auto value_of = [&](const SystemState& s) {
        const SystemState shifted = shift_to_origin(s, roa.equilibrium);
        return roa.seed_ellipsoid.value({shifted.x1, shifted.x3, shifted.y1, shifted.y3});
    };

    Membership result;
    if (value_of(x) <= level) {
        result.inside = true;
        result.crossing_time = 0.0;
        return result;
    }
    if (horizon <= 0.0) return result;

    const InjectionSchedule& sched =
        schedule ? *schedule : InjectionSchedule::steady(plant);
    Dynamics dyn(plant, sched, Direction::forward);

    IntegrateOptions iopt;
    iopt.dt = options.dt;
    iopt.escape_bound = options.escape_bound;
    iopt.escape_center = roa.equilibrium.state();
    iopt.breakpoints = sched.breakpoints();

    SystemState state = x;
    std::string reason;
    std::size_t term_step = 0;
    double crossing = -1.0;
    const bool ok = step_through(dyn, state, t_start, t_start + horizon, iopt, reason, term_step,
                                 [&](double t, const SystemState& s, std::size_t) {
                                     if (value_of(s) <= level) {
                                         crossing = t - t_start;
                                         return false;
                                     }
                                     return true;
                                 });
    if (!ok) {
        result.escaped = true;
        return result;
    }
    if (crossing >= 0.0) {
        result.inside = true;
        result.crossing_time = crossing;
    }
    return result;
}

Eigen::Vector4d visual_point(const SystemState& s, const PlantModel& plant) {
    return {s.x1, saturate(s.x3, plant.wt.x2_max), s.y1, saturate(s.y3, plant.statcom.y2_max)};
}

std::vector<Eigen::Vector4d> visual_cloud(const std::vector<SystemState>& states,
                                          const PlantModel& plant) {
    std::vector<Eigen::Vector4d> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(visual_point(s, plant));
    return out;
}

std::vector<Eigen::Vector4d> slice(const std::vector<Eigen::Vector4d>& cloud,
                                   const Hyperplane& h) {
    h.validate();
    const double norm = h.normal.norm();
    std::vector<Eigen::Vector4d> out;
    for (const auto& p : cloud) {
        const double dist = std::abs(h.normal.dot(p) - h.intercept) / norm;
        if (dist <= h.thickness) out.push_back(p);
    }
    return out;
}

Axis axis_from_name(const std::string& name) {
    if (name == "x1") return Axis::x1;
    if (name == "x2") return Axis::x2;
    if (name == "y1") return Axis::y1;
    if (name == "y2") return Axis::y2;
    throw config_error("axis: must be one of x1, x2, y1, y2 (got '" + name + "')");
}

std::string axis_name(Axis a) {
    switch (a) {
        case Axis::x1: return "x1";
        case Axis::x2: return "x2";
        case Axis::y1: return "y1";
        case Axis::y2: return "y2";
    }
    return "?";
}

std::vector<Eigen::Vector2d> project(const std::vector<Eigen::Vector4d>& points, Axis a, Axis b) {
    if (a == b) throw config_error("project: axes must be distinct");
    std::vector<Eigen::Vector2d> out;
    out.reserve(points.size());
    const int ia = static_cast<int>(a);
    const int ib = static_cast<int>(b);
    for (const auto& p : points) out.emplace_back(p(ia), p(ib));
    return out;
}

}  // namespace wpproa
