#pragma once

namespace photomech {

// Boltzmann constant, J/K (2019 SI exact value).
inline constexpr double k_boltzmann = 1.380649e-23;

inline constexpr double pi = 3.14159265358979323846;

} // namespace photomech
