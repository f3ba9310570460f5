#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcm {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using Mat4 = Eigen::Matrix4d;
using Vec4 = Eigen::Vector4d;

// Bad user input (shapes, labels, constraint violations). Maps to CLI exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pauli string over {I,X,Y,Z}; first letter is the first tensor factor.
class PauliString {
 public:
  PauliString() = default;
  explicit PauliString(std::string letters);

  const std::string& str() const { return s_; }
  int nqubits() const { return static_cast<int>(s_.size()); }
  bool is_identity() const;
  // Base-4 index in the lexicographic basis order (I=0, X=1, Y=2, Z=3).
  int index() const;
  CMat matrix() const;

  auto operator<=>(const PauliString&) const = default;

 private:
  std::string s_;
};

CMat pauli_matrix(char c);
// Lexicographic basis II, IX, ..., ZZ for n qubits.
std::vector<PauliString> pauli_basis(int n);
// Normalized basis elements sigma_k / sqrt(d), cached.
const std::vector<CMat>& normalized_basis(int n);

int qubits_for_dim(long dim2);

Mat ptm_from_map(const std::function<CMat(const CMat&)>& f, int n);
Mat ptm_from_unitary(const CMat& u);
Mat ptm_from_kraus(const std::vector<CMat>& ks, bool require_tp = false);

// c_k = Tr(sigma_k rho)/sqrt(d); effects use the same coordinates.
Vec vectorize_state(const CMat& rho);
Vec vectorize_effect(const CMat& e);
CMat devectorize(const Vec& v);

// Choi matrix J = sum_ij |i><j| (x) E(|i><j|), input factor first.
CMat ptm_to_choi(const Mat& ptm);
Mat choi_to_ptm(const CMat& choi);
double min_choi_eigenvalue(const Mat& ptm);
bool is_cp(const Mat& ptm, double tol = 1e-10);
bool is_tp(const Mat& ptm, double tol = 1e-10);

// Single-qubit rotation exp(-i theta sigma/2) as a PTM; axis in {'X','Y','Z'}.
Mat4 rotation_ptm(char axis, double theta);
Mat4 amplitude_damping_ptm(double gamma);
// |0> -> |1> with probability p (damping towards |1>).
Mat4 excitation_ptm(double p);
Mat4 depolarizing_ptm(double p);

struct Instrument {
  std::array<Mat4, 2> q{Mat4::Zero(), Mat4::Zero()};
  Mat4 sum() const { return q[0] + q[1]; }
};

// {|0>><<0|, |1>><<1|}
Instrument ideal_instrument();
// Throws ValidationError when an element is not CP or the sum is not TP.
void check_instrument(const Instrument& ins, double tol = 1e-10);

}  // namespace mcm
