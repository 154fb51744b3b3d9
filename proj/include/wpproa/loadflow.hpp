#pragma once

#include <complex>
#include <vector>

#include "wpproa/model.hpp"

namespace wpproa {

// Steady-state operating point: PLL angles with zero frequency deviation,
// plus the bus voltages (system frame) they balance against.
struct Equilibrium {
    double x1_0{0.0};
    double y1_0{0.0};
    std::complex<double> v_wt{0.0, 0.0};
    std::complex<double> v_st{0.0, 0.0};
    double residual_norm{0.0};
    int iterations{0};
    std::vector<double> residual_history;

    SystemState state() const { return {x1_0, 0.0, y1_0, 0.0}; }
};

struct NewtonOptions {
    double tolerance{1e-10};   // convergence threshold on the max residual
    int max_iterations{50};
    int polish_iterations{2};  // extra steps after convergence to tighten the fixed point
    double fd_step{1e-7};      // central-difference step for the Jacobian
    bool warn_slow_tail{true};
};

// Solves the coupled algebraic equilibrium (bus voltages + converter angles)
// by Newton's method with a finite-difference Jacobian. The initial guess is
// the open-circuit voltage and its angle per bus.
Equilibrium solve_equilibrium(const PlantModel& plant, const NewtonOptions& options = {});

// Angle coordinates relative to the equilibrium; frequency deviations are
// already origin-centred.
SystemState shift_to_origin(const SystemState& state, const Equilibrium& eq);
SystemState unshift(const SystemState& shifted, const Equilibrium& eq);

// Converter-frame setpoints reconstructed from the complex injections at the
// solved angles (consistency diagnostic).
struct ReconstructedCurrents {
    double id, iq, ist_d, ist_q;
};
ReconstructedCurrents reconstruct_currents(const PlantModel& plant, const Equilibrium& eq);

}  // namespace wpproa
