#pragma once

// Desk-scale fixtures shared by the oracle, datagen, learner, and
// acceptance suites: a double-integrator-like plant with one input, one
// tracked output, direct feedthrough, and a 2-d oscillator exosystem.

#include "regdata/oracle.hpp"
#include "regdata/sysmodel.hpp"

namespace regtest {

using regdata::Exosystem;
using regdata::InternalModel;
using regdata::Mat;
using regdata::Plant;
using regdata::Vec;

inline Plant desk_plant() {
  Plant pl;
  pl.A = Mat::Zero(2, 2);
  pl.A(0, 1) = 1.0;
  pl.B = Mat::Zero(2, 1);
  pl.B(1, 0) = 1.0;
  pl.C = Mat::Zero(1, 2);
  pl.C(0, 0) = 1.0;
  pl.D = Mat::Constant(1, 1, 0.2);
  pl.E = Mat::Zero(2, 2);
  pl.E(0, 0) = 0.5;
  pl.E(1, 1) = 1.0;
  pl.F = Mat::Zero(1, 2);
  pl.F(0, 0) = 1.0;
  return pl;
}

inline Exosystem desk_exosystem() {
  Mat s(2, 2);
  s << 0, 1, -1, 0;
  Vec v0(2);
  v0 << 1, 0;
  return {s, v0};
}

inline InternalModel desk_internal_model() {
  return regdata::build_internal_model({1, 0, 1}, 1);
}

// Same plant with the feedthrough removed, for the D = 0 relaxations.
inline Plant desk_plant_d0() {
  Plant pl = desk_plant();
  pl.D = Mat::Zero(1, 1);
  return pl;
}

// Exogenous coupling removed entirely; the augmented state then obeys a
// plain LQR problem.
inline Plant desk_plant_decoupled() {
  Plant pl = desk_plant();
  pl.E = Mat::Zero(2, 2);
  pl.F = Mat::Zero(1, 2);
  return pl;
}

}  // namespace regtest
