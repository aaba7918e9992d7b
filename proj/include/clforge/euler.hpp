#pragma once

#include <stdexcept>

#include "clforge/equation.hpp"

namespace clf {

class OrderError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// L = v F.
Expr formal_lagrangian(const DifferentialEquation& eq);

/// Euler operator d/du - D_i d/du_i + D_i D_k d/du_ik on jets of `dep`,
/// truncated at second order. Mixed jets are single coordinates, so the
/// symmetric double sum reduces to one term per unordered pair.
Expr variational_derivative(const Expr& e, char dep = 'u');

/// F* = delta(vF)/delta u, returned as an equation in v with the equation's
/// function-symbol relations applied.
DifferentialEquation adjoint_equation(const DifferentialEquation& eq);

}  // namespace clf
