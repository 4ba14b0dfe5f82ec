#pragma once

// Per-absolute-position ring of recent model-distribution snapshots across
// Jacobi iterations. The decode run owns one store; the drafter reads it,
// the engine pushes fresh snapshots after drafting and erases a position
// the moment its token is accepted or corrected.

#include <deque>
#include <unordered_map>
#include <vector>

#include "specjac/prob.hpp"

namespace specjac {

class HistoryStore {
 public:
  // Capacity is history_len + 2: one slot beyond the EWA window so draft-time
  // growth masks stay exactly recomputable from logs after ring eviction.
  explicit HistoryStore(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("HistoryStore: capacity must be >= 1");
  }

  int capacity() const { return capacity_; }

  void push(long pos, const Distribution& d) {
    auto& buf = buffers_[pos];
    buf.push_back(d);
    if (static_cast<int>(buf.size()) > capacity_) buf.pop_front();
  }

  void erase(long pos) { buffers_.erase(pos); }
  void clear() { buffers_.clear(); }

  int depth(long pos) const {
    auto it = buffers_.find(pos);
    return it == buffers_.end() ? 0 : static_cast<int>(it->second.size());
  }

  const std::deque<Distribution>* snapshots(long pos) const {
    auto it = buffers_.find(pos);
    return it == buffers_.end() ? nullptr : &it->second;
  }

  // Token's probability across the stored snapshots, oldest first.
  std::vector<double> trail(long pos, int token) const {
    std::vector<double> out;
    if (const auto* buf = snapshots(pos)) {
      out.reserve(buf->size());
      for (const auto& d : *buf) out.push_back(d[token]);
    }
    return out;
  }

 private:
  int capacity_;
  std::unordered_map<long, std::deque<Distribution>> buffers_;
};

}  // namespace specjac
