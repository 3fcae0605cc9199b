#pragma once

// Dense table helpers shared by the inference engines.

#include <cstddef>
#include <span>
#include <vector>

#include "dpgm/model.hpp"

namespace dpgm {

bool is_subset(const Scope& small, const Scope& big);
Scope scope_intersection(const Scope& a, const Scope& b);

// For each configuration of `from`, the index of its restriction to `to`.
// Requires to ⊆ from.
std::vector<std::size_t> projection_map(const Scope& from, const Scope& to,
                                        const DomainSpec& domain);

double logsumexp(std::span<const double> v);

// dst[map[i]] += src[i]
void marginalize_sum(std::span<const double> src, std::span<const std::size_t> map,
                     std::span<double> dst);

// dst[k] = log sum_{i: map[i] = k} exp(src[i])
void marginalize_logsumexp(std::span<const double> src, std::span<const std::size_t> map,
                           std::span<double> dst);

// Shannon entropy of a probability table with 0 log 0 = 0.
double entropy(std::span<const double> p);

// In-place exp(v - logsumexp(v)); returns the logsumexp.
double normalize_log(std::span<double> v);

}  // namespace dpgm
