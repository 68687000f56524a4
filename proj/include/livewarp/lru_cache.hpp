// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <functional>
#include <list>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

namespace livewarp {

/// Least-recently-used map. Most recent entries sit at the front of the list.
template <typename Key, typename Value, typename Hash = std::hash<Key>>
class LruCache {
public:
    explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return index_.size(); }

    /// Lookup that refreshes recency. nullptr on miss.
    Value* find(const Key& key) {
        auto it = index_.find(key);
        if (it == index_.end()) return nullptr;
        order_.splice(order_.begin(), order_, it->second);
        return &it->second->second;
    }

    /// Lookup without touching recency.
    const Value* peek(const Key& key) const {
        auto it = index_.find(key);
        return it == index_.end() ? nullptr : &it->second->second;
    }

    bool contains(const Key& key) const { return index_.count(key) != 0; }

    /// Inserts or replaces `key` as most recent. Returns the evicted key, if any.
    std::optional<Key> insert(const Key& key, Value value) {
        if (auto it = index_.find(key); it != index_.end()) {
            it->second->second = std::move(value);
            order_.splice(order_.begin(), order_, it->second);
            return std::nullopt;
        }
        order_.emplace_front(key, std::move(value));
        index_.emplace(key, order_.begin());
        if (index_.size() > capacity_) {
            Key victim = order_.back().first;
            index_.erase(victim);
            order_.pop_back();
            return victim;
        }
        return std::nullopt;
    }

    bool erase(const Key& key) {
        auto it = index_.find(key);
        if (it == index_.end()) return false;
        order_.erase(it->second);
        index_.erase(it);
        return true;
    }

    void clear() {
        order_.clear();
        index_.clear();
    }

    /// Keys from most to least recently used.
    std::vector<Key> keys() const {
        std::vector<Key> out;
        out.reserve(order_.size());
        for (const auto& e : order_) out.push_back(e.first);
        return out;
    }

private:
    using Entry = std::pair<Key, Value>;
    std::size_t capacity_;
    std::list<Entry> order_;
    std::unordered_map<Key, typename std::list<Entry>::iterator, Hash> index_;
};

}  // namespace livewarp
