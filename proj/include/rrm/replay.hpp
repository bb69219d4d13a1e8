#pragma once

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rrm/error.hpp"

namespace rrm {

/// One experience tuple (s_t, a_t, r_{t+1}, s_{t+1}) plus bookkeeping.
struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
  std::string agent_id;
  double sim_time = 0.0;

  /// Checks state lengths and reward finiteness; action range is checked
  /// only when action_count is given.
  void validate(std::optional<std::size_t> action_count = std::nullopt) const;

  bool operator==(const Transition&) const = default;
};

/// Ordered experience pool with optional FIFO capacity. The feature
/// dimension is fixed by the first insert.
class ReplayStore {
 public:
  ReplayStore() = default;
  explicit ReplayStore(std::optional<std::size_t> capacity);

  void append(Transition t);

  const std::vector<Transition>& transitions() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::optional<std::size_t> capacity() const { return capacity_; }
  std::optional<std::size_t> feature_dim() const { return feature_dim_; }

  bool operator==(const ReplayStore& other) const { return items_ == other.items_; }

 private:
  std::vector<Transition> items_;
  std::optional<std::size_t> capacity_;
  std::optional<std::size_t> feature_dim_;
};

/// All transitions of both stores ordered by (sim_time, agent_id); entries
/// sharing that key are kept once (first occurrence wins, `a` before `b`).
ReplayStore merge(const ReplayStore& a, const ReplayStore& b);

/// n distinct transitions drawn uniformly without replacement.
std::vector<Transition> sample(const ReplayStore& store, std::size_t n, std::uint64_t seed);

/// JSON-lines persistence: one transition object per line.
std::string transition_to_json_line(const Transition& t);
Transition transition_from_json_line(const std::string& line, std::size_t line_number = 1);
void persist(const ReplayStore& store, std::ostream& out);
std::string persist(const ReplayStore& store);
ReplayStore load(std::istream& in);
ReplayStore load(const std::string& text);
ReplayStore load_file(const std::string& path);
void persist_file(const ReplayStore& store, const std::string& path);

/// Thread-safe append target shared by concurrently running agents.
class ReplaySink {
 public:
  explicit ReplaySink(std::optional<std::size_t> capacity = std::nullopt) : store_(capacity) {}

  void append(Transition t) {
    std::lock_guard lock(mu_);
    store_.append(std::move(t));
  }
  ReplayStore snapshot() const {
    std::lock_guard lock(mu_);
    return store_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return store_.size();
  }

 private:
  mutable std::mutex mu_;
  ReplayStore store_;
};

}  // namespace rrm
