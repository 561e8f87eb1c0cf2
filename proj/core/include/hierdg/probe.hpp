#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hierdg/neural.hpp"
#include "hierdg/records.hpp"
#include "hierdg/siamese.hpp"

namespace hierdg {

struct ProbeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProbeConfig {
  int epochs = 200;
  double lr = 0.1;
};

// One-vs-rest logistic probes, one weight row per target class. Classes whose
// target column is constant are left untrained (zero row) and excluded from
// similarity averages.
struct LinearProbe {
  Matrix weight;  // classes x dim
  std::vector<double> bias;
  std::vector<uint8_t> trained;
};

struct StandardizeResult {
  Matrix x;
  std::size_t zero_variance_dims = 0;  // columns zeroed out
};

// Divides each column by its standard deviation; zero-variance columns are
// zeroed instead, which pins their probe weights at 0.
StandardizeResult standardize_columns(const Matrix& x);

// Full-batch gradient descent from zero weights; deterministic, no RNG.
LinearProbe train_linear_probe(const Matrix& x, const std::vector<std::vector<uint8_t>>& targets,
                               const ProbeConfig& cfg = {});

// Mean |cos| between same-class weight rows (both sides trained).
double mean_abs_cosine_aligned(const LinearProbe& a, const LinearProbe& b);
// Mean |cos| over all trained cross pairs (one row from each probe).
double mean_abs_cosine_cross(const LinearProbe& a, const LinearProbe& b);

// How the decomposition separates concerns, measured by probe-weight
// geometry: label probes on p vs h, domain probes on p vs the removed
// component r_parallel, and label-vs-domain probes both on p.
struct ProbeReport {
  double labels_p_vs_h = 0.0;
  double domains_p_vs_rpar = 0.0;
  double labels_vs_domains_on_p = 0.0;
  std::size_t n_domains = 0;
  std::size_t zero_variance_dims = 0;
  std::size_t skipped_label_classes = 0;
  std::size_t skipped_domain_classes = 0;
};

ProbeReport probe_report(const SiameseModel& model, const Hierarchy& h,
                         const std::vector<PatientRecord>& patients,
                         const ProbeConfig& cfg = {});

}  // namespace hierdg
