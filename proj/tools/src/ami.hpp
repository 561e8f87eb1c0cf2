#pragma once

#include <cstddef>
#include <vector>

namespace hierdg::cli {

// Adjusted mutual information between two labelings of the same items, in
// (-1, 1] with 1 for identical partitions. Expected MI comes from the
// hypergeometric model over fixed cluster sizes; normalization is the
// arithmetic mean of the two entropies.
double adjusted_mutual_information(const std::vector<std::size_t>& a,
                                   const std::vector<std::size_t>& b);

}  // namespace hierdg::cli
