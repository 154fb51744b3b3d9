#include "wpproa/lyapunov.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

namespace wpproa {

namespace {

// Stable 2x2 PLL block for gains scaled by the measured-voltage projection.
// vcos = V cos(angle difference) at the equilibrium.
Eigen::Matrix2d pll_block(double ki, double kp, double vcos, double l_branch, double id,
                          double m) {
    Eigen::Matrix2d a;
    a << 0.0, 1.0, -ki * vcos / m, (ki * l_branch * id - kp * vcos) / m;
    return a;
}

}  // namespace

bool is_hurwitz(const Eigen::Matrix4d& a) {
    const Eigen::EigenSolver<Eigen::Matrix4d> es(a);
    for (int i = 0; i < 4; ++i) {
        if (es.eigenvalues()(i).real() >= 0.0) return false;
    }
    return true;
}

LinearModel linearize(const PlantModel& plant, const Equilibrium& eq) {
    const double v_wt = std::abs(eq.v_wt);
    const double v_st = std::abs(eq.v_st);
    if (v_wt <= 0.0 || v_st <= 0.0)
        throw numeric_error("linearize: equilibrium bus voltage magnitude is zero");

    LinearModel lm;
    const double delta_wt = eq.x1_0 - std::arg(eq.v_wt);
    const double delta_st = eq.y1_0 - std::arg(eq.v_st);
    lm.gamma_wt = std::sin(delta_wt);
    lm.gamma_st = std::sin(delta_st);

    const double m_wt = 1.0 - plant.wt.kp * plant.wt.l_g * plant.wt.id_c;
    if (std::abs(m_wt) < 1e-12) throw numeric_error("linearize: singular equivalent inertia");

    lm.a_wt = pll_block(plant.wt.ki, plant.wt.kp, v_wt * std::cos(delta_wt), plant.wt.l_g,
                        plant.wt.id_c, m_wt);
    lm.a_st = pll_block(plant.statcom.ki, plant.statcom.kp, v_st * std::cos(delta_st), 0.0, 0.0,
                        1.0);

    lm.a_full.setZero();
    lm.a_full.block<2, 2>(0, 0) = lm.a_wt;
    lm.a_full.block<2, 2>(2, 2) = lm.a_st;

    if (!is_hurwitz(lm.a_full))
        throw numeric_error("linearize: linearised dynamics are not Hurwitz, no initial region");
    return lm;
}

Eigen::Matrix4d solve_lyapunov(const Eigen::Matrix4d& a, const Eigen::Matrix4d& q) {
    if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw config_error("solve_lyapunov: q must be symmetric");
    {
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> qe(q);
        if (qe.eigenvalues().minCoeff() <= 0.0)
            throw config_error("solve_lyapunov: q must be positive definite");
    }
    if (!is_hurwitz(a))
        throw numeric_error("solve_lyapunov: a is not Hurwitz, no positive definite solution");

    // vec(P A) = (A^T (x) I) vec(P), vec(A^T P) = (I (x) A^T) vec(P)
    Eigen::Matrix<double, 16, 16> k = Eigen::Matrix<double, 16, 16>::Zero();
    for (int col = 0; col < 4; ++col) {
        for (int row = 0; row < 4; ++row) {
            for (int inner = 0; inner < 4; ++inner) {
                // (A^T (x) I): block (col, inner) scaled by A(inner, col)
                k(col * 4 + row, inner * 4 + row) += a(inner, col);
                // (I (x) A^T): within-block A^T
                k(col * 4 + row, col * 4 + inner) += a(inner, row);
            }
        }
    }
    Eigen::Matrix<double, 16, 1> rhs;
    for (int col = 0; col < 4; ++col)
        for (int row = 0; row < 4; ++row) rhs(col * 4 + row) = -q(row, col);

    const auto lu = k.partialPivLu();
    Eigen::Matrix<double, 16, 1> p_vec = lu.solve(rhs);
    // one step of iterative refinement keeps the residual at the rounding floor
    p_vec += lu.solve(rhs - k * p_vec);

    Eigen::Matrix4d p;
    for (int col = 0; col < 4; ++col)
        for (int row = 0; row < 4; ++row) p(row, col) = p_vec(col * 4 + row);
    p = 0.5 * (p + p.transpose()).eval();

    const double residual = (p * a + a.transpose() * p + q).cwiseAbs().maxCoeff();
    if (residual >= 1e-10) {
        std::ostringstream os;
        os << "solve_lyapunov: residual " << residual << " exceeds 1e-10";
        throw numeric_error(os.str());
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> pe(p);
    if (pe.eigenvalues().minCoeff() <= 0.0)
        throw numeric_error("solve_lyapunov: solution is not positive definite");
    return p;
}

Ellipsoid build_initial_roa(const Eigen::Matrix4d& p, double level) {
    if (!(level > 0.0)) throw config_error("ellipsoid.level: must be > 0");
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw config_error("ellipsoid.p: must be symmetric");
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> pe(p);
    if (pe.eigenvalues().minCoeff() <= 0.0)
        throw config_error("ellipsoid.p: must be positive definite");
    return Ellipsoid{p, level};
}

namespace {

// Inverse CDF of the polar angle on S^3 (density proportional to sin^2).
double polar_angle_from_uniform(double u) {
    double lo = 0.0, hi = kPi;
    double psi = kPi * u;
    for (int it = 0; it < 80; ++it) {
        const double f = (psi - std::sin(psi) * std::cos(psi)) / kPi - u;
        if (f > 0.0)
            hi = psi;
        else
            lo = psi;
        const double df = 2.0 * std::sin(psi) * std::sin(psi) / kPi;
        double next = psi - (df > 1e-14 ? f / df : 0.0);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - psi) < 1e-15) {
            psi = next;
            break;
        }
        psi = next;
    }
    return psi;
}

double frac(double x) { return x - std::floor(x); }

Eigen::Vector4d unit_from_angles(double psi, double theta, double phi) {
    const double sp = std::sin(psi);
    return {std::cos(psi), sp * std::cos(theta), sp * std::sin(theta) * std::cos(phi),
            sp * std::sin(theta) * std::sin(phi)};
}

}  // namespace

std::vector<Eigen::Vector4d> sample_boundary(const Ellipsoid& e, int n, SampleStrategy strategy,
                                             std::uint64_t seed) {
    if (n < 1) throw config_error("sample_boundary: n must be >= 1");

    std::vector<Eigen::Vector4d> units;
    units.reserve(static_cast<std::size_t>(n));

    if (strategy == SampleStrategy::fibonacci_hypersphere) {
        // Stratified polar coordinate plus a Kronecker lattice in the two
        // remaining angles; generalises the 2-sphere Fibonacci spiral and is
        // seed independent.
        constexpr double g = 1.32471795724474602596;  // root of x^3 = x + 1
        const double a1 = 1.0 / g;
        const double a2 = 1.0 / (g * g);
        for (int i = 0; i < n; ++i) {
            const double u1 = (i + 0.5) / n;
            const double u2 = frac(0.5 + a1 * (i + 1));
            const double u3 = frac(0.5 + a2 * (i + 1));
            const double psi = polar_angle_from_uniform(u1);
            const double theta = std::acos(1.0 - 2.0 * u2);
            const double phi = 2.0 * kPi * u3;
            units.push_back(unit_from_angles(psi, theta, phi));
        }
    } else {
        // explicit Box-Muller on mt19937_64 output keeps the draw sequence
        // pinned across standard library implementations
        std::mt19937_64 rng(seed);
        const auto uniform01 = [&rng]() {
            return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
        };
        const auto gaussian_pair = [&](double& g1, double& g2) {
            const double u1 = uniform01();
            const double u2 = uniform01();
            const double r = std::sqrt(-2.0 * std::log(u1));
            g1 = r * std::cos(2.0 * kPi * u2);
            g2 = r * std::sin(2.0 * kPi * u2);
        };
        for (int i = 0; i < n; ++i) {
            Eigen::Vector4d v;
            gaussian_pair(v(0), v(1));
            gaussian_pair(v(2), v(3));
            const double norm = v.norm();
            units.push_back(norm > 0.0 ? Eigen::Vector4d(v / norm)
                                       : Eigen::Vector4d(1.0, 0.0, 0.0, 0.0));
        }
    }

    // Map unit directions onto the level surface: x = sqrt(level) L^{-T} u
    // with P = L L^T, so that x^T P x = level exactly.
    const Eigen::LLT<Eigen::Matrix4d> llt(e.p);
    if (llt.info() != Eigen::Success)
        throw numeric_error("sample_boundary: p is not positive definite");
    const Eigen::Matrix4d l_t = llt.matrixL().transpose();
    const double scale = std::sqrt(e.level);

    std::vector<Eigen::Vector4d> out;
    out.reserve(units.size());
    for (const auto& u : units)
        out.push_back(scale * l_t.triangularView<Eigen::Upper>().solve(u));
    return out;
}

}  // namespace wpproa
