#pragma once

#include <doctest.h>

#include <cmath>

// Absolute-tolerance comparisons; doctest::Approx is relative only.
#define CHECK_NEAR(a, b, tol) CHECK_LE(std::abs(static_cast<double>(a) - static_cast<double>(b)), (tol))
#define REQUIRE_NEAR(a, b, tol) REQUIRE_LE(std::abs(static_cast<double>(a) - static_cast<double>(b)), (tol))
