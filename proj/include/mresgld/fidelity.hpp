#pragma once

namespace mresgld {

// Accuracy level of a forward model: mesh resolution for the FEM energies,
// collocation density for the PINN energies.
enum class Fidelity { fine, coarse };

}  // namespace mresgld
