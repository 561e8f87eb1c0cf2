#include "ami.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace hierdg::cli {

namespace {

std::vector<std::size_t> relabel(const std::vector<std::size_t>& v, std::size_t& n_classes) {
  std::map<std::size_t, std::size_t> ids;
  std::vector<std::size_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto [it, fresh] = ids.emplace(v[i], ids.size());
    (void)fresh;
    out[i] = it->second;
  }
  n_classes = ids.size();
  return out;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts)
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  return h;
}

}  // namespace

double adjusted_mutual_information(const std::vector<std::size_t>& a,
                                   const std::vector<std::size_t>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("labelings must be non-empty and aligned");
  const std::size_t n = a.size();
  std::size_t ka = 0, kb = 0;
  const std::vector<std::size_t> u = relabel(a, ka);
  const std::vector<std::size_t> v = relabel(b, kb);
  if (ka == 1 && kb == 1) return 1.0;

  std::vector<std::vector<double>> cont(ka, std::vector<double>(kb, 0.0));
  std::vector<double> row(ka, 0.0), col(kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    cont[u[i]][v[i]] += 1.0;
    row[u[i]] += 1.0;
    col[v[i]] += 1.0;
  }
  const double dn = static_cast<double>(n);

  double mi = 0.0;
  for (std::size_t i = 0; i < ka; ++i)
    for (std::size_t j = 0; j < kb; ++j) {
      const double nij = cont[i][j];
      if (nij > 0.0) mi += (nij / dn) * std::log(dn * nij / (row[i] * col[j]));
    }

  // E[MI] under random permutations with the marginals held fixed.
  const double lg_n = std::lgamma(dn + 1.0);
  double emi = 0.0;
  for (std::size_t i = 0; i < ka; ++i) {
    for (std::size_t j = 0; j < kb; ++j) {
      const double ai = row[i], bj = col[j];
      const long lo = std::max<long>(1, static_cast<long>(ai + bj - dn));
      const long hi = static_cast<long>(std::min(ai, bj));
      for (long nij = lo; nij <= hi; ++nij) {
        const double x = static_cast<double>(nij);
        const double log_prob = std::lgamma(ai + 1.0) + std::lgamma(bj + 1.0) +
                                std::lgamma(dn - ai + 1.0) + std::lgamma(dn - bj + 1.0) - lg_n -
                                std::lgamma(x + 1.0) - std::lgamma(ai - x + 1.0) -
                                std::lgamma(bj - x + 1.0) - std::lgamma(dn - ai - bj + x + 1.0);
        emi += std::exp(log_prob) * (x / dn) * std::log(dn * x / (ai * bj));
      }
    }
  }

  const double normalizer = 0.5 * (entropy(row, dn) + entropy(col, dn));
  double denom = normalizer - emi;
  constexpr double kEps = 2.220446049250313e-16;
  denom = denom < 0.0 ? std::min(denom, -kEps) : std::max(denom, kEps);
  return (mi - emi) / denom;
}

}  // namespace hierdg::cli
