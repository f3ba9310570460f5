#pragma once

#include "mcm/eeg.hpp"
#include "mcm/pauli.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace mcm {

// First-order change of an instrument: one 4x4 PTM block per outcome.
struct Deviation {
  std::array<Mat4, 2> l{Mat4::Zero(), Mat4::Zero()};

  Deviation& operator+=(const Deviation& o);
  Deviation operator+(const Deviation& o) const;
  Deviation operator-(const Deviation& o) const;
  Deviation operator*(double s) const;
  double norm() const;
  // max |row0(L0) + row0(L1)|: zero for TP-preserving deviations
  double tp_violation() const;
  bool is_zero(double tol = 1e-12) const;
};

Deviation difference(const Instrument& a, const Instrument& b);
Instrument add(const Instrument& q, const Deviation& d);

// 28 coordinates: all of L0 (row-major) then rows 1..3 of L1.
Vec vec28(const Deviation& d);
// Inverse of vec28; row 0 of L1 is filled in as -row0(L0).
Deviation unvec28(const Vec& v);

void write_csv(std::ostream& os, const Deviation& d);

// Physical qubit = first tensor factor, virtual = second.
struct GadgetFixture {
  Mat cnot;                    // 16x16
  Mat inject;                  // 16x4, I (x) |0>>
  std::array<Mat, 2> project;  // 4x16, I (x) <<c|
};

const GadgetFixture& gadget();

// I_c(E) = (I (x) <<c|) E CNOT (I (x) |0>>)
Instrument crunch(const Mat& e);
// Linearization of crunch around the identity.
Deviation linear_deviation(const Mat& L);
Deviation first_order_deviation(const EegIndex& idx);

// 32x256 map from column-major vec(L) to (vec(L0), vec(L1)), column-major.
const Mat& deviation_map();

// Closed form for one Choi-unit term A rho' B on the post-CNOT joint state,
// with the virtual qubit projected onto |c><c| and traced out.
Deviation unit_term_deviation(const CMat& A, const CMat& B, cplx weight = 1.0);

struct UnitTerm {
  cplx w;
  CMat a, b;
};
// EEG written as a sum of Choi-unit terms (base + trace-preserving correction).
std::vector<UnitTerm> eeg_unit_terms(const EegIndex& idx);
Deviation closed_form_deviation(const EegIndex& idx);

}  // namespace mcm
