#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "kadr/bounded_queue.hpp"
#include "kadr/error.hpp"

namespace kadr {

/// One stage of a cascade: `workers` threads each pop an item from the
/// upstream queue, apply `fn`, and push it downstream. `fn` must not throw;
/// stages record failures on the item itself.
template <typename T>
struct StageSpec {
    std::string name;
    std::size_t workers = 1;
    std::function<void(T&)> fn;
};

struct ExecutorStats {
    std::size_t max_in_flight = 0;
    std::vector<std::size_t> queue_high_water;
};

/// Cascaded producer-consumer runner. Stages are thread pools joined by
/// bounded queues of the given capacity (so a full downstream stage
/// back-pressures upstream). Items leave in completion order and are put
/// back in input order before returning.
template <typename T>
class StagedExecutor {
public:
    StagedExecutor(std::vector<StageSpec<T>> stages, std::size_t queue_capacity) : stages_(std::move(stages)), capacity_(queue_capacity) {
        require(!stages_.empty(), "executor needs at least one stage");
        require(capacity_ >= 1, "queue capacity must be >= 1");
        for (const auto& s : stages_) require(s.workers >= 1, "stage '" + s.name + "' needs at least one worker");
    }

    std::vector<T> run(std::vector<T> items) {
        struct Slot {
            std::size_t index;
            T item;
        };
        const std::size_t n_stages = stages_.size();
        std::vector<std::unique_ptr<BoundedQueue<Slot>>> queues;
        for (std::size_t i = 0; i <= n_stages; ++i) queues.push_back(std::make_unique<BoundedQueue<Slot>>(capacity_));

        std::atomic<std::size_t> in_flight{0};
        std::atomic<std::size_t> max_in_flight{0};
        std::vector<std::unique_ptr<std::atomic<std::size_t>>> live(n_stages);
        for (std::size_t s = 0; s < n_stages; ++s) live[s] = std::make_unique<std::atomic<std::size_t>>(stages_[s].workers);

        std::vector<std::jthread> threads;
        for (std::size_t s = 0; s < n_stages; ++s) {
            for (std::size_t w = 0; w < stages_[s].workers; ++w) {
                threads.emplace_back([&, s] {
                    auto& in = *queues[s];
                    auto& out = *queues[s + 1];
                    while (auto slot = in.pop()) {
                        stages_[s].fn(slot->item);
                        out.push(std::move(*slot));
                    }
                    if (live[s]->fetch_sub(1) == 1) out.close();
                });
            }
        }

        std::vector<std::optional<T>> done(items.size());
        std::jthread sink([&] {
            while (auto slot = queues[n_stages]->pop()) {
                done[slot->index] = std::move(slot->item);
                in_flight.fetch_sub(1);
            }
        });

        for (std::size_t i = 0; i < items.size(); ++i) {
            auto now = in_flight.fetch_add(1) + 1;
            auto prev = max_in_flight.load();
            while (now > prev && !max_in_flight.compare_exchange_weak(prev, now)) {
            }
            queues[0]->push(Slot{i, std::move(items[i])});
        }
        queues[0]->close();
        threads.clear();
        sink.join();

        stats_.max_in_flight = max_in_flight.load();
        stats_.queue_high_water.clear();
        for (const auto& q : queues) stats_.queue_high_water.push_back(q->high_water());

        std::vector<T> out;
        out.reserve(done.size());
        for (auto& d : done) {
            if (!d) throw Error(ErrorCode::stage_failure, "staged executor lost an item");
            out.push_back(std::move(*d));
        }
        return out;
    }

    const ExecutorStats& stats() const { return stats_; }

    /// Upper bound on items admitted but not yet collected: one per queue
    /// slot, one per worker, plus the item the sink is storing.
    std::size_t in_flight_bound() const {
        std::size_t workers = 0;
        for (const auto& s : stages_) workers += s.workers;
        return capacity_ * (stages_.size() + 1) + workers + 1;
    }

private:
    std::vector<StageSpec<T>> stages_;
    std::size_t capacity_;
    ExecutorStats stats_;
};

}  // namespace kadr
