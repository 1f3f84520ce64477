#include "foma/batching.hpp"

#include "foma/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

namespace foma {

namespace {

std::vector<Index> label_order(const Matrix& y, Rng& rng) {
    const Index n = y.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});

    if (y.cols() == 1) {
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return y(a, 0) < y(b, 0); });
        return order;
    }

    // Greedy chaining: start at a random sample, repeatedly append the nearest
    // unused label.
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    Index current = pick(rng);
    order.clear();
    for (Index step = 0; step < n; ++step) {
        order.push_back(current);
        used[static_cast<std::size_t>(current)] = true;
        double best = std::numeric_limits<double>::infinity();
        Index next = -1;
        for (Index j = 0; j < n; ++j) {
            if (used[static_cast<std::size_t>(j)]) {
                continue;
            }
            const double d = (y.row(current) - y.row(j)).squaredNorm();
            if (d < best) {
                best = d;
                next = j;
            }
        }
        current = next;
    }
    return order;
}

BatchPlan chunk(const std::vector<Index>& order, BatchStrategy strategy, int batch_size) {
    BatchPlan plan;
    plan.strategy = strategy;
    plan.batch_size = batch_size;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        plan.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return plan;
}

} // namespace

BatchPlan make_batches(const Matrix& y, BatchStrategy strategy, int batch_size, Rng& rng) {
    const Index n = y.rows();
    if (n < 1) {
        throw InputError("make_batches: empty dataset");
    }
    if (batch_size < 1 || batch_size > n) {
        throw ConfigError("make_batches: batch_size must lie in [1, " + std::to_string(n) + "]");
    }

    if (strategy == BatchStrategy::random) {
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        return chunk(order, strategy, batch_size);
    }

    BatchPlan plan = chunk(label_order(y, rng), strategy, batch_size);
    shuffle_batch_order(plan, rng);
    return plan;
}

void shuffle_batch_order(BatchPlan& plan, Rng& rng) {
    std::shuffle(plan.batches.begin(), plan.batches.end(), rng);
}

BatchPlan drop_small_batches(const BatchPlan& plan, int min_rows) {
    BatchPlan out;
    out.strategy = plan.strategy;
    out.batch_size = plan.batch_size;
    for (const auto& b : plan.batches) {
        if (static_cast<int>(b.size()) >= min_rows) {
            out.batches.push_back(b);
        }
    }
    return out;
}

BatchPlan sequential_batches(Index n, int batch_size) {
    if (batch_size < 1) {
        throw ConfigError("sequential_batches: batch_size must be positive");
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    return chunk(order, BatchStrategy::random, batch_size);
}

double within_batch_label_distance(const BatchPlan& plan, const Matrix& y) {
    double total = 0.0;
    int counted = 0;
    for (const auto& batch : plan.batches) {
        if (batch.size() < 2) {
            continue;
        }
        double sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            for (std::size_t j = i + 1; j < batch.size(); ++j) {
                sum += (y.row(batch[i]) - y.row(batch[j])).norm();
                ++pairs;
            }
        }
        total += sum / static_cast<double>(pairs);
        ++counted;
    }
    return counted == 0 ? 0.0 : total / counted;
}

std::string_view to_string(BatchStrategy s) {
    return s == BatchStrategy::random ? "random" : "close";
}

BatchStrategy parse_batch_strategy(std::string_view s) {
    if (s == "random") {
        return BatchStrategy::random;
    }
    if (s == "close") {
        return BatchStrategy::close;
    }
    throw ConfigError("unknown batch_strategy '" + std::string(s) + "' (expected random|close)");
}

} // namespace foma
