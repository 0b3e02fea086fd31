#pragma once
// Crank-Nicolson time stepping of the coupled plant
//   eta_t + w_x + w_xxx + (eta w)_x = 0
//   w_t  + eta_x + eta_xxx + w w_x  = 0     on (0, L)
// with Dirichlet edges and either homogeneous Neumann data (open loop) or
// the kernel-trace feedback (closed loop). The six boundary conditions are
// imposed as replaced rows of the implicit step matrix; in closed loop the
// two Neumann rows absorb the feedback functionals implicitly (a lagged
// explicit coupling is available for comparison but is not stable for the
// dispersive operator at practical step sizes).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kdvb/grid.hpp"
#include "kdvb/kernel.hpp"

namespace kdvb {

enum class Dynamics { linear, nonlinear };
enum class Control { open_loop, closed_loop };
enum class BcVariant { controlled, homogeneous };
enum class FeedbackCoupling { implicit_rows, lagged_explicit };

// One initial field descriptor (applied to eta and/or w).
struct InitialField {
  enum class Kind { sine_mode, gaussian, explicit_values, zero };
  Kind kind = Kind::zero;
  // sine_mode: amplitude * sin(mode * pi * x / L)
  int mode = 1;
  double amplitude = 0.0;
  // gaussian: amplitude * exp(-(x-center)^2 / (2 width^2)), endpoint-tapered
  double center = 0.0;
  double width = 1.0;
  // explicit_values: one value per node
  std::vector<double> values;

  VectorXd evaluate(const Grid1D& g) const;
};

struct InitialData {
  InitialField eta;
  InitialField w;
};

struct SimConfig {
  double L = 1.0;
  int n = 0;
  double dt = 0.0;
  double T = 0.0;
  double lambda = 1.0;  // decay design rate; used only in closed loop
  Dynamics dynamics = Dynamics::linear;
  Control control = Control::open_loop;
  BcVariant bc = BcVariant::homogeneous;
  FeedbackCoupling coupling = FeedbackCoupling::implicit_rows;
  int record_every = 1;
  bool keep_snapshots = false;
  InitialData init;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> energies;      // E = (1/2) int (eta^2 + w^2)
  std::vector<double> controls_f;    // eta_x(0)
  std::vector<double> controls_g;    // w_x(L)
  std::vector<double> x0_norms;      // sqrt(2E)
  std::vector<double> target_norms;  // ||(u,v)||, closed loop only
  std::vector<VectorXd> snapshots;   // [eta; w] stacked, if requested
  double dt_record = 0.0;            // record_every * dt
  Dynamics dynamics = Dynamics::linear;
  Control control = Control::open_loop;
  bool failed = false;
  int fail_step = -1;
  std::string fail_reason;
};

// The linear operator of the stacked state [eta; w]: block off-diagonal
// (d3 + d1) couplings at interior rows; the six boundary rows are replaced
// by the discrete boundary-condition coefficient rows (identical for both
// variants — the controlled and homogeneous cases differ only in the
// right-hand-side values the stepper supplies for the two Neumann rows).
SparseOperator build_linear_operator(const Grid1D& g, BcVariant variant);

// Run the scheme. In closed loop `kp` must be non-null. A magnitude above
// 1e6 (or a non-finite entry) marks the trajectory failed at that step and
// returns the prefix recorded so far.
Trajectory simulate(const SimConfig& cfg, const KernelPair* kp);

// Portable 64-bit linear congruential generator (stable across platforms;
// used for reproducible smooth random states in tests and sweeps).
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : state_(seed) {}
  // Uniform double in [0, 1) with 53 random bits.
  double next() {
    state_ = 6364136223846793005ULL * state_ + 1442695040888963407ULL;
    return static_cast<double>(state_ >> 11) /
           static_cast<double>(1ULL << 53);
  }

 private:
  std::uint64_t state_;
};

// Random five-harmonic state with coefficients in [-1, 1).
VectorXd smooth_random_state(Lcg& rng, const Grid1D& g);

}  // namespace kdvb
