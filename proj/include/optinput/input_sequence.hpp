#ifndef OPTINPUT_INPUT_SEQUENCE_HPP
#define OPTINPUT_INPUT_SEQUENCE_HPP

#include <cmath>
#include <string>

#include "optinput/errors.hpp"
#include "optinput/matrix_core.hpp"

namespace optinput {

/// Input samples u_0..u_{N-1}, treated circularly (u_{-i} = u_{N-i}).
struct InputSequence {
    Vector values;
    double energy = 0.0;
    bool power_constrained = false;

    [[nodiscard]] Eigen::Index size() const noexcept { return values.size(); }

    /// Sequence whose declared energy is its actual sum of squares.
    static InputSequence from_values(Vector u)
    {
        const double e = u.squaredNorm();
        return {std::move(u), e, false};
    }

    /// Scales `u` so that sum(u^2) equals `energy` and marks it power-constrained.
    static InputSequence rescaled(Vector u, double energy)
    {
        if (!(energy > 0.0)) {
            throw ZeroInput("target energy must be > 0");
        }
        const double e = u.squaredNorm();
        if (!(e > 0.0)) {
            throw ZeroInput("cannot rescale an all-zero input");
        }
        u *= std::sqrt(energy / e);
        return {std::move(u), energy, true};
    }

    /// [sqrt(E), 0, ..., 0].
    static InputSequence impulse(Eigen::Index length, double energy)
    {
        Vector u = Vector::Zero(length);
        u(0) = std::sqrt(energy);
        return {std::move(u), energy, true};
    }
};

inline void check_power(const InputSequence& u, double rel_tol = 1e-9)
{
    if (!u.power_constrained) {
        return;
    }
    const double e = u.values.squaredNorm();
    if (std::abs(e - u.energy) > rel_tol * u.energy) {
        throw PreconditionViolated("input energy " + std::to_string(e) + " differs from declared " +
                                   std::to_string(u.energy));
    }
}

} // namespace optinput

#endif // OPTINPUT_INPUT_SEQUENCE_HPP
