#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "wpproa/loadflow.hpp"
#include "wpproa/model.hpp"

namespace wpproa {

// State ordering for all 4x4 linear algebra: (x1, x3, y1, y3) relative to the
// equilibrium. Near the origin the saturated and unsaturated rates coincide.

// Per-converter linearisation at the equilibrium, each taken against its own
// equilibrium bus voltage held stiff. The coupled model's cross-feedback
// through the network is deliberately not represented: the full matrix is
// block diagonal by construction.
struct LinearModel {
    Eigen::Matrix2d a_wt;
    Eigen::Matrix2d a_st;
    Eigen::Matrix4d a_full;
    double gamma_wt{0.0};  // sin of the WT equilibrium angle difference
    double gamma_st{0.0};
};

LinearModel linearize(const PlantModel& plant, const Equilibrium& eq);

// Solves P A + A^T P + Q = 0 for symmetric positive definite P by
// vectorising the symmetric unknown into a dense linear system. Requires A
// Hurwitz and Q symmetric positive definite.
Eigen::Matrix4d solve_lyapunov(const Eigen::Matrix4d& a, const Eigen::Matrix4d& q);

// {x : x^T P x <= level} in shifted coordinates, centred on the equilibrium.
struct Ellipsoid {
    Eigen::Matrix4d p;
    double level{1e-3};

    double value(const Eigen::Vector4d& x) const { return x.dot(p * x); }
};

Ellipsoid build_initial_roa(const Eigen::Matrix4d& p, double level = 1e-3);

enum class SampleStrategy { fibonacci_hypersphere, random_uniform };

// n points on the level surface {x^T P x = level}: unit 3-sphere samples
// mapped through the Cholesky factor. The Fibonacci strategy is a
// deterministic low-discrepancy lattice (seed ignored); the random strategy
// draws Gaussian directions from a seeded generator with a fixed Box-Muller
// transform so output is platform independent.
std::vector<Eigen::Vector4d> sample_boundary(const Ellipsoid& e, int n,
                                             SampleStrategy strategy = SampleStrategy::fibonacci_hypersphere,
                                             std::uint64_t seed = 0);

bool is_hurwitz(const Eigen::Matrix4d& a);

}  // namespace wpproa
