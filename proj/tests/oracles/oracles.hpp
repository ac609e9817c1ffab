#pragma once

// Reference implementations used only by the tests. They are written
// directly from the model equations with plain loops and share no code with
// the library beyond the plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "divland/neuro.hpp"

namespace oracle {

// Translational flow over a plane, from scaled velocities and plane slopes.
struct TranslationalFlow {
    double u;
    double v;
};

inline TranslationalFlow planar_translational_flow(double theta_x, double theta_y, double theta_z, double slope_x,
                                                   double slope_y, double x, double y)
{
    const double s = 1.0 - slope_x * x - slope_y * y;
    return {(-theta_x + theta_z * x) * s, (-theta_y + theta_z * y) * s};
}

// Brute-force Pareto layering: repeatedly peel off the members that no other
// remaining member dominates.
inline std::vector<std::vector<std::size_t>> peel_fronts(const std::vector<std::vector<double>>& pts)
{
    const std::size_t n = pts.size();
    std::vector<bool> taken(n, false);
    std::vector<std::vector<std::size_t>> fronts;
    std::size_t remaining = n;
    while (remaining > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < n && !dominated; ++j) {
                if (taken[j] || j == i) continue;
                bool no_worse = true;
                bool better = false;
                for (std::size_t k = 0; k < pts[i].size(); ++k) {
                    if (pts[j][k] > pts[i][k]) no_worse = false;
                    if (pts[j][k] < pts[i][k]) better = true;
                }
                dominated = no_worse && better;
            }
            if (!dominated) front.push_back(i);
        }
        for (auto i : front) taken[i] = true;
        remaining -= front.size();
        fronts.push_back(front);
    }
    return fronts;
}

// Scalar network evaluator. Potentials: [0, 1] inputs, [2, 10) hidden, 10 output.
struct Net {
    const divland::neuro::Genome& g;
    double pot[11] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};

    double w(int hidden, int input) const { return g.input_weights[static_cast<std::size_t>(hidden * 2 + input)]; }

    double step(double in0, double in1, double dt)
    {
        using divland::neuro::Architecture;
        if (g.arch == Architecture::ctrnn) {
            double act[10];
            for (int j = 0; j < 10; ++j) act[j] = std::tanh(pot[j] + g.bias[static_cast<std::size_t>(j)]);
            double next[11];
            const double ext[2] = {in0, in1};
            for (int j = 0; j < 2; ++j) {
                next[j] = pot[j] + dt / (dt + g.tau[static_cast<std::size_t>(j)]) * (ext[j] - pot[j]);
            }
            for (int i = 0; i < 8; ++i) {
                const double drive = w(i, 0) * act[0] + w(i, 1) * act[1];
                next[2 + i] = pot[2 + i] + dt / (dt + g.tau[static_cast<std::size_t>(2 + i)]) * (drive - pot[2 + i]);
            }
            double drive = 0.0;
            for (int i = 0; i < 8; ++i) drive += g.output_weights[static_cast<std::size_t>(i)] * act[2 + i];
            next[10] = pot[10] + dt / (dt + g.tau[10]) * (drive - pot[10]);
            std::copy(next, next + 11, pot);
            return pot[10];
        }
        const bool rnn = g.arch == Architecture::rnn;
        pot[0] = in0;
        pot[1] = in1;
        double sum = g.bias[8];
        for (int i = 0; i < 8; ++i) {
            const double a = w(i, 0) * in0 + w(i, 1) * in1;
            const double memory = rnn ? g.recurrent[static_cast<std::size_t>(i)] * pot[2 + i] : 0.0;
            pot[2 + i] = memory + std::max(0.0, a) + g.bias[static_cast<std::size_t>(i)];
            sum += g.output_weights[static_cast<std::size_t>(i)] * pot[2 + i];
        }
        pot[10] = (rnn ? g.recurrent[8] * pot[10] : 0.0) + sum;
        return pot[10];
    }
};

// Standard crowding distance straight from the textbook definition, for
// fronts without duplicate points.
inline std::vector<double> crowding(const std::vector<std::vector<double>>& front)
{
    const std::size_t n = front.size();
    std::vector<double> d(n, 0.0);
    if (n <= 2) {
        std::fill(d.begin(), d.end(), HUGE_VAL);
        return d;
    }
    for (std::size_t k = 0; k < front[0].size(); ++k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return front[a][k] < front[b][k]; });
        const double span = front[idx[n - 1]][k] - front[idx[0]][k];
        if (span <= 0.0) continue;
        d[idx[0]] = HUGE_VAL;
        d[idx[n - 1]] = HUGE_VAL;
        for (std::size_t r = 1; r + 1 < n; ++r) d[idx[r]] += (front[idx[r + 1]][k] - front[idx[r - 1]][k]) / span;
    }
    return d;
}

} // namespace oracle
