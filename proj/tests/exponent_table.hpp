#pragma once

#include <optional>

// Exact values from rational arithmetic on the defining formulas.
struct ExponentRow {
    double p, q;
    int N;
    double p_c, p_sc, q_star, k, q_1;
    std::optional<double> xi, eta, theta;
};

inline const ExponentRow kExponentTable[] = {
    {1.5, 1.0, 2, 4.0 / 3, 6.0 / 5, 5.0 / 6, 3.0 / 8, 2.0 / 3, 1.0, 2.0, std::nullopt},
    {1.5, 0.75, 1, 1.0, 1.0, 1.0, 1.0 / 2, 1.0 / 2, 2.0, 1.0, 2.0 / 3},
    {1.5, 1.2, 1, 1.0, 1.0, 1.0, 1.0 / 2, 1.0 / 2, 5.0 / 7, 1.0, std::nullopt},
    {1.5, 0.6, 1, 1.0, 1.0, 1.0, 1.0 / 2, 1.0 / 2, 5.0, 1.0, 8.0 / 9},
    {1.5, 0.9, 1, 1.0, 1.0, 1.0, 1.0 / 2, 1.0 / 2, 5.0 / 4, 1.0, 1.0 / 3},
    {1.25, 0.5, 2, 4.0 / 3, 6.0 / 5, 7.0 / 12, 3.0 / 16, 2.0 / 3, std::nullopt, std::nullopt, 1.0 / 3},
    {1.4, 1.0, 3, 3.0 / 2, 4.0 / 3, 13.0 / 20, 3.0 / 20, 3.0 / 4, 1.0, std::nullopt, std::nullopt},
    {1.6, 1.2, 2, 4.0 / 3, 6.0 / 5, 14.0 / 15, 1.0 / 3, 2.0 / 3, 5.0 / 8, 5.0 / 4, std::nullopt},
    {1.2, 1.5, 2, 4.0 / 3, 6.0 / 5, 8.0 / 15, 0.0, 2.0 / 3, 2.0 / 5, std::nullopt, std::nullopt},
    {1.8, 0.5, 1, 1.0, 1.0, 13.0 / 10, 1.0 / 5, 4.0 / 5, std::nullopt, 5.0 / 8, 16.0 / 13},
    {1.1, 2.0, 4, 8.0 / 5, 10.0 / 7, 3.0 / 10, -207.0 / 40, 4.0 / 5, 1.0 / 6, std::nullopt, std::nullopt},
    // p = p_c and q = q* = N/(N+1): every optional exponent sits on its threshold
    {4.0 / 3, 2.0 / 3, 2, 4.0 / 3, 6.0 / 5, 2.0 / 3, 1.0 / 3, 2.0 / 3, std::nullopt, std::nullopt, std::nullopt},
};
