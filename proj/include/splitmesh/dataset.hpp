#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splitmesh/tensor.hpp"

namespace splitmesh {

enum class TaskKind { Classification, Regression };

struct Dataset {
    Tensor features;  // [n, per-sample shape]
    Tensor labels;    // [n], 0/1 for classification, continuous target otherwise
    TaskKind task = TaskKind::Classification;
    std::size_t dropped_rows = 0;  // malformed source rows skipped during loading

    std::size_t size() const { return features.shape.empty() ? 0 : features.shape[0]; }
    std::vector<std::size_t> sample_shape() const {
        return {features.shape.begin() + 1, features.shape.end()};
    }
};

struct SplitRatio {
    std::vector<std::uint64_t> parts;  // all >= 1
    std::vector<double> weights() const;
};

// "8:1:1" -> parts [8,1,1]. ParseError on empty, zero, negative or junk parts.
SplitRatio parse_ratio(const std::string& text);
std::string ratio_to_string(const SplitRatio& ratio);

struct PartitionAssignment {
    std::vector<std::vector<std::uint64_t>> shards;  // disjoint index lists covering [0,n)
};

// Exact integer largest-remainder apportionment of `total` proportional to
// `parts`: floor shares first, leftovers to the largest remainders, remainder
// ties to the lower index.
std::vector<std::uint64_t> apportion_largest_remainder(std::uint64_t total,
                                                       const std::vector<std::uint64_t>& parts);

// Shuffles [0,n) with the seed, then hands out contiguous runs sized by the
// largest-remainder rule, in client order.
PartitionAssignment partition(std::uint64_t n, const SplitRatio& ratio, std::uint64_t seed);

// Splits the global batch proportionally to the remaining shard sizes
// (exhausted entries are 0). Every client with rows left gets >= 1 row, topped
// up from the currently largest allocation when rounding left it at zero.
// Requires count(nonzero sizes) <= B <= sum(sizes).
std::vector<std::size_t> batch_allocation(std::size_t B, const std::vector<std::size_t>& shard_sizes);

struct EvalSplit {
    std::vector<std::uint64_t> train;
    std::vector<std::uint64_t> val;  // floor(n/5) entries
};

// Seeded 80/20 split of one shard's rows; both sides keep the shard's original
// relative order.
EvalSplit eval_split(const std::vector<std::uint64_t>& shard_rows, std::uint64_t seed);

// Synthetic stand-in corpora. Classification: labels alternate 0/1 and every
// feature element is N(0,1) shifted by -0.5 (class 0) or +0.5 (class 1).
// Regression: features are N(0,1); target = 10 + sum_j w_j x_j + sigma*N(0,1)
// with w_j = 1.5 for even j, -1.0 for odd j.
Dataset synth(TaskKind task, std::uint64_t n, const std::vector<std::size_t>& sample_shape,
              std::uint64_t seed, double noise_sigma = 1.0);

struct ZScoreStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-8
};

// Per-feature stats over the given rows only (the training rows, so validation
// data never leaks into normalization).
ZScoreStats zscore_fit(const Dataset& d, const std::vector<std::uint64_t>& rows);
void zscore_apply(Dataset& d, const ZScoreStats& stats);

Tensor gather_rows(const Tensor& t, const std::vector<std::uint64_t>& rows);
Dataset gather_dataset(const Dataset& d, const std::vector<std::uint64_t>& rows);

}  // namespace splitmesh
