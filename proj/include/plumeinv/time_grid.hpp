#pragma once

#include <cstdint>
#include <vector>

namespace plumeinv {

// Uniform grid of N_T nodes t_j = t0 + j*dt, j = 0..N_T-1. Node j stands for
// the interval [t_j, t_j + dt) on which the plume state is held constant, so
// the grid covers [t0, t0 + N_T*dt).
struct TimeGrid {
    double t0 = 0.0;  // epoch seconds
    double dt = 0.0;  // s
    int count = 0;    // N_T

    double time(int j) const { return t0 + j * dt; }
    double span() const { return count * dt; }
    double end() const { return t0 + span(); }

    // Throws ValidationError unless dt > 0 and count >= 2.
    void validate() const;
};

// Horizontal wind components sampled on a TimeGrid.
struct WindSeries {
    TimeGrid grid;
    std::vector<double> ux;  // m s^-1, toward +x (east)
    std::vector<double> uy;  // m s^-1, toward +y (north)

    void validate() const;
};

}  // namespace plumeinv
