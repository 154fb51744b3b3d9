#include "wpproa/loadflow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace wpproa {

namespace {

using Complex = std::complex<double>;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

struct Residual {
    const PlantModel& plant;

    Complex z11, z12, z21, z22, v0_wt, v0_st;

    explicit Residual(const PlantModel& p) : plant(p) {
        const double w0 = p.grid.omega_0;
        z11 = {p.network.r11, w0 * p.network.l11};
        z12 = {p.network.r12, w0 * p.network.l12};
        z21 = {p.network.r21, w0 * p.network.l21};
        z22 = {p.network.r22, w0 * p.network.l22};
        v0_wt = std::polar(p.grid.v_mag_0[0], p.grid.theta_g0[0]);
        v0_st = std::polar(p.grid.v_mag_0[1], p.grid.theta_g0[1]);
    }

    static double clamped_asin(double arg, const char* which) {
        if (std::abs(arg) > 1.0 + 1e-9) {
            std::ostringstream os;
            os << "loadflow: infeasible operating point, |" << which
               << " angle argument| = " << std::abs(arg) << " > 1";
            throw numeric_error(os.str());
        }
        return std::asin(std::clamp(arg, -1.0, 1.0));
    }

    Vector6 operator()(const Vector6& z) const {
        const Complex v_wt{z(0), z(1)};
        const Complex v_st{z(2), z(3)};
        const double x1 = z(4);
        const double y1 = z(5);

        const Complex i_wt = Complex(plant.wt.id_c, plant.wt.iq_c) * std::polar(1.0, x1);
        const Complex i_st = Complex(0.0, plant.statcom.iq_st) * std::polar(1.0, y1);

        const Complex rv_wt = v_wt - (z11 * i_wt + z12 * i_st + v0_wt);
        const Complex rv_st = v_st - (z21 * i_wt + z22 * i_st + v0_st);

        const double vm_wt = std::abs(v_wt);
        const double vm_st = std::abs(v_st);
        if (vm_wt <= 0.0 || vm_st <= 0.0)
            throw numeric_error("loadflow: bus voltage magnitude collapsed to zero");

        // Angle balance: the converter-side drop across the machine branch
        // against the measured bus voltage. The STATCOM carries reactive
        // current only, so its drop reduces to the resistive term.
        const double arg_wt =
            (plant.wt.r_lg * plant.wt.iq_c + plant.grid.omega_0 * plant.wt.l_g * plant.wt.id_c) /
            vm_wt;
        const double arg_st = (plant.statcom.r_ls * plant.statcom.iq_st) / vm_st;

        Vector6 r;
        r(0) = rv_wt.real();
        r(1) = rv_wt.imag();
        r(2) = rv_st.real();
        r(3) = rv_st.imag();
        r(4) = x1 - std::arg(v_wt) - clamped_asin(arg_wt, "wt");
        r(5) = y1 - std::arg(v_st) - clamped_asin(arg_st, "statcom");
        return r;
    }
};

}  // namespace

Equilibrium solve_equilibrium(const PlantModel& plant, const NewtonOptions& options) {
    plant.validate();
    const Residual residual(plant);

    Vector6 z;
    z(0) = residual.v0_wt.real();
    z(1) = residual.v0_wt.imag();
    z(2) = residual.v0_st.real();
    z(3) = residual.v0_st.imag();
    z(4) = std::arg(residual.v0_wt);
    z(5) = std::arg(residual.v0_st);

    std::vector<double> history;
    int iterations = 0;
    int polish_left = options.polish_iterations;
    double norm = residual(z).lpNorm<Eigen::Infinity>();
    history.push_back(norm);

    while (iterations < options.max_iterations) {
        if (norm < options.tolerance) {
            if (polish_left == 0) break;
            --polish_left;
        }
        Matrix6 jac;
        const double h = options.fd_step;
        for (int j = 0; j < 6; ++j) {
            Vector6 zp = z, zm = z;
            zp(j) += h;
            zm(j) -= h;
            jac.col(j) = (residual(zp) - residual(zm)) / (2.0 * h);
        }
        const Vector6 step = jac.partialPivLu().solve(residual(z));
        z -= step;
        ++iterations;
        const double next = residual(z).lpNorm<Eigen::Infinity>();
        history.push_back(next);
        if (next == norm && norm < options.tolerance) break;  // stagnated at the floor
        norm = next;
    }

    if (norm >= options.tolerance) {
        std::ostringstream os;
        os << "loadflow: Newton did not converge in " << options.max_iterations
           << " iterations; residual history:";
        for (double r : history) os << " " << r;
        throw numeric_error(os.str());
    }

    if (options.warn_slow_tail && history.size() >= 3) {
        // quadratic-tail ratio check over the last meaningful steps
        const std::size_t n = history.size();
        const double r2 = history[n - 2], r1 = history[n - 3];
        if (r1 < 1.0 && r2 > 10.0 * r1 * r1 && r2 > 1e-14) {
            std::cerr << "loadflow: warning, convergence tail slower than quadratic ("
                      << r1 << " -> " << r2 << ")\n";
        }
    }

    Equilibrium eq;
    eq.v_wt = {z(0), z(1)};
    eq.v_st = {z(2), z(3)};
    eq.x1_0 = z(4);
    eq.y1_0 = z(5);
    eq.residual_norm = norm;
    eq.iterations = iterations;
    eq.residual_history = std::move(history);
    return eq;
}

SystemState shift_to_origin(const SystemState& state, const Equilibrium& eq) {
    return {state.x1 - eq.x1_0, state.x3, state.y1 - eq.y1_0, state.y3};
}

SystemState unshift(const SystemState& shifted, const Equilibrium& eq) {
    return {shifted.x1 + eq.x1_0, shifted.x3, shifted.y1 + eq.y1_0, shifted.y3};
}

ReconstructedCurrents reconstruct_currents(const PlantModel& plant, const Equilibrium& eq) {
    const Complex i_wt = Complex(plant.wt.id_c, plant.wt.iq_c) * std::polar(1.0, eq.x1_0);
    const Complex i_st = Complex(0.0, plant.statcom.iq_st) * std::polar(1.0, eq.y1_0);
    const Complex back_wt = i_wt * std::polar(1.0, -eq.x1_0);
    const Complex back_st = i_st * std::polar(1.0, -eq.y1_0);
    return {back_wt.real(), back_wt.imag(), back_st.real(), back_st.imag()};
}

}  // namespace wpproa
