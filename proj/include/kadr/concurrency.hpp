#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <map>
#include <span>
#include <vector>

#include "kadr/error.hpp"

namespace kadr {

/// Contiguous slice of a larger sequence, tagged with where it came from.
template <typename T>
struct Shard {
    std::size_t begin = 0;
    std::vector<T> items;
};

/// Splits into exactly `w` contiguous shards whose sizes differ by at most
/// one; the larger shards come first. Shards past the item count are empty.
template <typename T>
std::vector<Shard<T>> split_ordered(std::span<const T> items, std::size_t w) {
    require(w >= 1, "split_ordered needs at least one shard");
    std::vector<Shard<T>> shards(w);
    const std::size_t base = items.size() / w;
    const std::size_t extra = items.size() % w;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < w; ++s) {
        std::size_t len = base + (s < extra ? 1 : 0);
        shards[s].begin = pos;
        shards[s].items.assign(items.begin() + static_cast<std::ptrdiff_t>(pos), items.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    }
    return shards;
}

template <typename T>
std::vector<Shard<T>> split_ordered(const std::vector<T>& items, std::size_t w) {
    return split_ordered(std::span<const T>(items), w);
}

/// Reassembles shards (in any arrival order) into the original sequence.
/// Throws when the shards leave a gap or overlap.
template <typename T>
std::vector<T> join_ordered(std::vector<Shard<T>> shards) {
    std::sort(shards.begin(), shards.end(), [](const Shard<T>& a, const Shard<T>& b) {
        return a.begin != b.begin ? a.begin < b.begin : a.items.size() < b.items.size();
    });
    std::vector<T> out;
    for (auto& s : shards) {
        if (s.begin != out.size()) {
            throw Error(ErrorCode::stage_failure, "join_ordered: shard starting at " + std::to_string(s.begin) +
                                                      " does not continue at " + std::to_string(out.size()));
        }
        for (auto& item : s.items) out.push_back(std::move(item));
    }
    return out;
}

/// Runs `fn` over each shard concurrently (one task per non-empty shard) and
/// joins the results in input order. `fn` maps a std::vector<T> to a
/// std::vector<R> of the same length. With w == 1 it runs inline.
template <typename T, typename Fn>
auto parallel_map_ordered(const std::vector<T>& items, std::size_t w, Fn&& fn) {
    using R = typename std::invoke_result_t<Fn&, const std::vector<T>&>::value_type;
    if (w <= 1 || items.size() <= 1) return std::vector<R>(fn(items));
    auto shards = split_ordered(items, std::min(w, items.size()));
    std::vector<std::future<Shard<R>>> futures;
    futures.reserve(shards.size());
    for (auto& shard : shards) {
        futures.push_back(std::async(std::launch::async, [&fn, &shard]() {
            auto results = fn(shard.items);
            if (results.size() != shard.items.size()) {
                throw Error(ErrorCode::stage_failure, "parallel_map_ordered: worker returned the wrong number of results");
            }
            return Shard<R>{shard.begin, std::move(results)};
        }));
    }
    std::vector<Shard<R>> done;
    std::exception_ptr first_error;
    for (auto& f : futures) {
        try {
            done.push_back(f.get());
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return join_ordered(std::move(done));
}

}  // namespace kadr
