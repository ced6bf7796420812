#include "splitmesh/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "splitmesh/errors.hpp"
#include "splitmesh/rng.hpp"

namespace splitmesh {

std::vector<double> SplitRatio::weights() const {
    double sum = 0.0;
    for (auto p : parts) sum += static_cast<double>(p);
    std::vector<double> w;
    w.reserve(parts.size());
    for (auto p : parts) w.push_back(static_cast<double>(p) / sum);
    return w;
}

SplitRatio parse_ratio(const std::string& text) {
    if (text.empty()) throw ParseError("ratio: empty string");
    SplitRatio r;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t colon = text.find(':', pos);
        std::string part = text.substr(pos, colon == std::string::npos ? std::string::npos : colon - pos);
        if (part.empty()) throw ParseError("ratio '" + text + "': empty part");
        for (char c : part)
            if (c < '0' || c > '9')
                throw ParseError("ratio '" + text + "': part '" + part + "' is not a positive integer");
        if (part.size() > 9) throw ParseError("ratio '" + text + "': part '" + part + "' too large");
        std::uint64_t v = std::stoull(part);
        if (v == 0) throw ParseError("ratio '" + text + "': parts must be >= 1");
        r.parts.push_back(v);
        if (colon == std::string::npos) break;
        pos = colon + 1;
    }
    return r;
}

std::string ratio_to_string(const SplitRatio& ratio) {
    std::string out;
    for (std::size_t i = 0; i < ratio.parts.size(); ++i) {
        if (i) out += ':';
        out += std::to_string(ratio.parts[i]);
    }
    return out;
}

std::vector<std::uint64_t> apportion_largest_remainder(std::uint64_t total,
                                                       const std::vector<std::uint64_t>& parts) {
    // exact arithmetic: share_i = total*part_i / S with remainder total*part_i % S,
    // so remainder comparisons never touch floating point
    std::uint64_t S = 0;
    for (auto p : parts) S += p;
    if (S == 0) throw ParseError("apportion: ratio parts sum to zero");
    std::vector<std::uint64_t> counts(parts.size());
    std::vector<std::uint64_t> rems(parts.size());
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::uint64_t num = total * parts[i];
        counts[i] = num / S;
        rems[i] = num % S;
        assigned += counts[i];
    }
    std::uint64_t leftover = total - assigned;
    std::vector<std::size_t> order(parts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rems[a] > rems[b]; });
    for (std::uint64_t k = 0; k < leftover; ++k) counts[order[k]] += 1;
    return counts;
}

PartitionAssignment partition(std::uint64_t n, const SplitRatio& ratio, std::uint64_t seed) {
    if (ratio.parts.empty()) throw ParseError("partition: ratio has no parts");
    if (n < ratio.parts.size())
        throw TooFewSamples("partition: " + std::to_string(n) + " samples for " +
                            std::to_string(ratio.parts.size()) + " clients");
    auto counts = apportion_largest_remainder(n, ratio.parts);
    auto idx = shuffled_indices(n, seed);
    PartitionAssignment out;
    out.shards.resize(ratio.parts.size());
    std::size_t off = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        out.shards[c].assign(idx.begin() + static_cast<std::ptrdiff_t>(off),
                             idx.begin() + static_cast<std::ptrdiff_t>(off + counts[c]));
        off += counts[c];
    }
    return out;
}

std::vector<std::size_t> batch_allocation(std::size_t B, const std::vector<std::size_t>& shard_sizes) {
    std::size_t active = 0, total = 0;
    for (auto s : shard_sizes) {
        if (s > 0) ++active;
        total += s;
    }
    if (active == 0) throw BatchTooSmall("batch_allocation: every shard is exhausted");
    if (B < active)
        throw BatchTooSmall("batch " + std::to_string(B) + " smaller than " +
                            std::to_string(active) + " active clients");
    if (B > total)
        throw BatchTooSmall("batch " + std::to_string(B) + " exceeds " + std::to_string(total) +
                            " remaining rows");

    std::vector<std::uint64_t> parts;
    std::vector<std::size_t> map;  // position in shard_sizes per active entry
    for (std::size_t i = 0; i < shard_sizes.size(); ++i)
        if (shard_sizes[i] > 0) {
            parts.push_back(shard_sizes[i]);
            map.push_back(i);
        }
    auto counts = apportion_largest_remainder(B, parts);

    // rounding can starve a tiny shard; feed it one row from the largest share
    for (std::size_t i = 0; i < counts.size(); ++i) {
        while (counts[i] == 0) {
            std::size_t donor = 0;
            for (std::size_t j = 1; j < counts.size(); ++j)
                if (counts[j] > counts[donor]) donor = j;
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    std::vector<std::size_t> out(shard_sizes.size(), 0);
    for (std::size_t i = 0; i < map.size(); ++i) out[map[i]] = counts[i];
    return out;
}

EvalSplit eval_split(const std::vector<std::uint64_t>& shard_rows, std::uint64_t seed) {
    const std::size_t n = shard_rows.size();
    const std::size_t v = n / 5;
    auto perm = shuffled_indices(n, seed);
    std::vector<std::size_t> val_pos(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(v));
    std::vector<std::size_t> train_pos(perm.begin() + static_cast<std::ptrdiff_t>(v), perm.end());
    std::sort(val_pos.begin(), val_pos.end());
    std::sort(train_pos.begin(), train_pos.end());
    EvalSplit out;
    out.val.reserve(v);
    out.train.reserve(n - v);
    for (auto p : val_pos) out.val.push_back(shard_rows[p]);
    for (auto p : train_pos) out.train.push_back(shard_rows[p]);
    return out;
}

Dataset synth(TaskKind task, std::uint64_t n, const std::vector<std::size_t>& sample_shape,
              std::uint64_t seed, double noise_sigma) {
    if (n < 2) throw TooFewSamples("synth needs n >= 2");
    std::size_t per = TensorT<float>::element_count(sample_shape);
    std::vector<std::size_t> fshape{static_cast<std::size_t>(n)};
    fshape.insert(fshape.end(), sample_shape.begin(), sample_shape.end());
    Dataset d;
    d.task = task;
    d.features = Tensor(fshape);
    d.labels = Tensor({static_cast<std::size_t>(n)});
    SplitMix64 rng(seed);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (task == TaskKind::Classification) {
            float label = static_cast<float>(i % 2);
            double shift = label == 1.0f ? 0.5 : -0.5;
            for (std::size_t j = 0; j < per; ++j)
                d.features.data[i * per + j] = static_cast<float>(next_gaussian(rng) + shift);
            d.labels.data[i] = label;
        } else {
            // documented form: target = 10 + sum_j w_j x_j + sigma * noise,
            // w_j = 1.5 for even j, -1.0 for odd j; positive-leaning scale
            // keeps log-based evaluation meaningful
            double target = 10.0;
            for (std::size_t j = 0; j < per; ++j) {
                double x = next_gaussian(rng);
                d.features.data[i * per + j] = static_cast<float>(x);
                target += (j % 2 == 0 ? 1.5 : -1.0) * x;
            }
            target += noise_sigma * next_gaussian(rng);
            d.labels.data[i] = static_cast<float>(target);
        }
    }
    return d;
}

ZScoreStats zscore_fit(const Dataset& d, const std::vector<std::uint64_t>& rows) {
    if (rows.empty()) throw NoUsableRows("zscore_fit over zero rows");
    std::size_t per = d.features.size() / d.features.shape[0];
    ZScoreStats st;
    st.mean.assign(per, 0.0);
    st.stddev.assign(per, 0.0);
    for (auto r : rows)
        for (std::size_t j = 0; j < per; ++j)
            st.mean[j] += static_cast<double>(d.features.data[r * per + j]);
    for (std::size_t j = 0; j < per; ++j) st.mean[j] /= static_cast<double>(rows.size());
    for (auto r : rows)
        for (std::size_t j = 0; j < per; ++j) {
            double dx = static_cast<double>(d.features.data[r * per + j]) - st.mean[j];
            st.stddev[j] += dx * dx;
        }
    for (std::size_t j = 0; j < per; ++j) {
        st.stddev[j] = std::sqrt(st.stddev[j] / static_cast<double>(rows.size()));
        if (st.stddev[j] < 1e-8) st.stddev[j] = 1e-8;
    }
    return st;
}

void zscore_apply(Dataset& d, const ZScoreStats& stats) {
    std::size_t per = d.features.size() / d.features.shape[0];
    if (stats.mean.size() != per)
        throw ShapeMismatch("zscore stats width " + std::to_string(stats.mean.size()) +
                            " != feature width " + std::to_string(per));
    for (std::size_t r = 0; r < d.features.shape[0]; ++r)
        for (std::size_t j = 0; j < per; ++j) {
            double v = static_cast<double>(d.features.data[r * per + j]);
            d.features.data[r * per + j] = static_cast<float>((v - stats.mean[j]) / stats.stddev[j]);
        }
}

Tensor gather_rows(const Tensor& t, const std::vector<std::uint64_t>& rows) {
    if (rows.empty()) throw ShapeMismatch("gather_rows of zero rows");
    std::size_t per = t.size() / t.shape[0];
    std::vector<std::size_t> shape = t.shape;
    shape[0] = rows.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= t.shape[0])
            throw ShapeMismatch("gather_rows: row " + std::to_string(rows[i]) + " out of range " +
                                std::to_string(t.shape[0]));
        std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * per),
                  t.data.begin() + static_cast<std::ptrdiff_t>((rows[i] + 1) * per),
                  out.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return out;
}

Dataset gather_dataset(const Dataset& d, const std::vector<std::uint64_t>& rows) {
    Dataset out;
    out.task = d.task;
    out.features = gather_rows(d.features, rows);
    out.labels = gather_rows(d.labels, rows);
    return out;
}

}  // namespace splitmesh
