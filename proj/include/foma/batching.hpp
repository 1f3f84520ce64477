#pragma once

#include "foma/linalg.hpp"
#include "foma/random.hpp"

#include <string_view>
#include <vector>

namespace foma {

enum class BatchStrategy { random, close };

/// A partition of [0, N) into batches; only the last batch may be short.
struct BatchPlan {
    std::vector<std::vector<Index>> batches;
    BatchStrategy strategy = BatchStrategy::random;
    int batch_size = 1;
};

/// random: shuffle all indices and chunk.
/// close: order samples by label proximity and chunk consecutively (sorted by
/// value for one label column, greedy nearest-neighbor chaining otherwise),
/// then shuffle the order of the batches.
BatchPlan make_batches(const Matrix& y, BatchStrategy strategy, int batch_size, Rng& rng);

/// Permutes the batch order in place; membership is unchanged.
void shuffle_batch_order(BatchPlan& plan, Rng& rng);

/// Copy of the plan without batches smaller than min_rows.
BatchPlan drop_small_batches(const BatchPlan& plan, int min_rows);

/// Consecutive chunks of [0, n) in order (evaluation partition).
BatchPlan sequential_batches(Index n, int batch_size);

/// Mean over batches with at least two rows of the mean pairwise Euclidean
/// distance between their labels.
double within_batch_label_distance(const BatchPlan& plan, const Matrix& y);

std::string_view to_string(BatchStrategy s);
BatchStrategy parse_batch_strategy(std::string_view s);

} // namespace foma
