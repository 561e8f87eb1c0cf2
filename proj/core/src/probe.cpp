#include "hierdg/probe.hpp"

#include <cmath>

#include "hierdg/embedding_flow.hpp"
#include "hierdg/pruning.hpp"

namespace hierdg {

StandardizeResult standardize_columns(const Matrix& x) {
  StandardizeResult out;
  out.x = x;
  if (x.rows == 0) return out;
  for (std::size_t c = 0; c < x.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) mean += x(r, c);
    mean /= static_cast<double>(x.rows);
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      const double d = x(r, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(x.rows));
    if (sd == 0.0) {
      ++out.zero_variance_dims;
      for (std::size_t r = 0; r < x.rows; ++r) out.x(r, c) = 0.0;
    } else {
      for (std::size_t r = 0; r < x.rows; ++r) out.x(r, c) /= sd;
    }
  }
  return out;
}

LinearProbe train_linear_probe(const Matrix& x, const std::vector<std::vector<uint8_t>>& targets,
                               const ProbeConfig& cfg) {
  if (x.rows == 0 || targets.size() != x.rows)
    throw ProbeError("probe inputs and targets must align");
  const std::size_t n_classes = targets.front().size();
  for (const auto& row : targets)
    if (row.size() != n_classes) throw ProbeError("ragged probe targets");

  LinearProbe probe;
  probe.weight = Matrix(n_classes, x.cols);
  probe.bias.assign(n_classes, 0.0);
  probe.trained.assign(n_classes, 0);

  const double inv_n = 1.0 / static_cast<double>(x.rows);
  std::vector<double> residual(x.rows);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t positives = 0;
    for (std::size_t r = 0; r < x.rows; ++r) positives += targets[r][c];
    if (positives == 0 || positives == x.rows) continue;
    probe.trained[c] = 1;

    for (int e = 0; e < cfg.epochs; ++e) {
      for (std::size_t r = 0; r < x.rows; ++r) {
        double z = probe.bias[c];
        for (std::size_t j = 0; j < x.cols; ++j) z += probe.weight(c, j) * x(r, j);
        residual[r] = sigmoid(z) - static_cast<double>(targets[r][c]);
      }
      double grad_b = 0.0;
      for (std::size_t r = 0; r < x.rows; ++r) grad_b += residual[r];
      probe.bias[c] -= cfg.lr * grad_b * inv_n;
      for (std::size_t j = 0; j < x.cols; ++j) {
        double g = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) g += x(r, j) * residual[r];
        probe.weight(c, j) -= cfg.lr * g * inv_n;
      }
    }
  }
  return probe;
}

namespace {

std::vector<double> weight_row(const LinearProbe& p, std::size_t c) {
  std::vector<double> row(p.weight.cols);
  for (std::size_t j = 0; j < p.weight.cols; ++j) row[j] = p.weight(c, j);
  return row;
}

}  // namespace

double mean_abs_cosine_aligned(const LinearProbe& a, const LinearProbe& b) {
  if (a.weight.rows != b.weight.rows || a.weight.cols != b.weight.cols)
    throw ProbeError("probe shape mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < a.weight.rows; ++c) {
    if (!a.trained[c] || !b.trained[c]) continue;
    sum += std::abs(cosine_sim(weight_row(a, c), weight_row(b, c)));
    ++n;
  }
  if (n == 0) throw ProbeError("no trained class pair to compare");
  return sum / static_cast<double>(n);
}

double mean_abs_cosine_cross(const LinearProbe& a, const LinearProbe& b) {
  if (a.weight.cols != b.weight.cols) throw ProbeError("probe shape mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t ca = 0; ca < a.weight.rows; ++ca) {
    if (!a.trained[ca]) continue;
    const std::vector<double> ra = weight_row(a, ca);
    for (std::size_t cb = 0; cb < b.weight.rows; ++cb) {
      if (!b.trained[cb]) continue;
      sum += std::abs(cosine_sim(ra, weight_row(b, cb)));
      ++n;
    }
  }
  if (n == 0) throw ProbeError("no trained class pair to compare");
  return sum / static_cast<double>(n);
}

ProbeReport probe_report(const SiameseModel& model, const Hierarchy& h,
                         const std::vector<PatientRecord>& patients, const ProbeConfig& cfg) {
  if (patients.empty()) throw ProbeError("probe needs a non-empty patient set");
  if (!model.has_domain_path) throw ProbeError("probe needs a model with the domain pathway");

  const DomainLookupTable table = assign_domains(h, model.vocab, patients);
  const std::size_t n = patients.size();
  const std::size_t dim = model.backbone.out_dim();
  Matrix P(n, dim), H(n, dim), Rpar(n, dim);
  std::vector<std::vector<uint8_t>> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    PathOutputs out = forward_paths(model, patients[i], table.rows[i]);
    for (std::size_t j = 0; j < dim; ++j) {
      P(i, j) = out.p[j];
      H(i, j) = out.h[j];
      Rpar(i, j) = out.r_parallel[j];
    }
    labels[i] = label_row(patients[i], model.label_dim);
  }

  ProbeReport report;
  report.n_domains = model.vocab.nodes.size();

  StandardizeResult sp = standardize_columns(P);
  StandardizeResult sh = standardize_columns(H);
  StandardizeResult sr = standardize_columns(Rpar);
  report.zero_variance_dims =
      sp.zero_variance_dims + sh.zero_variance_dims + sr.zero_variance_dims;

  LinearProbe p_labels = train_linear_probe(sp.x, labels, cfg);
  LinearProbe h_labels = train_linear_probe(sh.x, labels, cfg);
  LinearProbe p_domains = train_linear_probe(sp.x, table.rows, cfg);
  LinearProbe r_domains = train_linear_probe(sr.x, table.rows, cfg);

  for (std::size_t c = 0; c < p_labels.trained.size(); ++c)
    if (!p_labels.trained[c]) ++report.skipped_label_classes;
  for (std::size_t c = 0; c < p_domains.trained.size(); ++c)
    if (!p_domains.trained[c]) ++report.skipped_domain_classes;

  report.labels_p_vs_h = mean_abs_cosine_aligned(p_labels, h_labels);
  report.domains_p_vs_rpar = mean_abs_cosine_aligned(p_domains, r_domains);
  report.labels_vs_domains_on_p = mean_abs_cosine_cross(p_labels, p_domains);
  return report;
}

}  // namespace hierdg
