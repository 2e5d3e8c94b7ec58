#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "qflow/dense_array.hpp"
#include "qflow/rng.hpp"

namespace qflow {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

// Column-assembled minibatch, ready for network consumption.
struct TransitionBatch {
  DenseArray states;
  DenseArray actions;
  DenseArray next_states;
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;

  int size() const { return states.rows(); }
};

// Fixed-capacity ring of transitions with uniform with-replacement sampling.
// Sampling is refused until the warmup minimum is met.
class ReplayBuffer {
 public:
  ReplayBuffer(int state_dim, int action_dim, std::size_t capacity, std::size_t warmup_min);

  void push(const Transition& t);
  TransitionBatch sample(int batch_size, Rng& rng) const;

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t write_cursor() const { return write_cursor_; }
  bool warmup_met() const { return storage_.size() >= warmup_min_; }

  // Access to live entries, in storage order (for membership checks).
  const Transition& at(std::size_t i) const { return storage_[i]; }

 private:
  int state_dim_;
  int action_dim_;
  std::size_t capacity_;
  std::size_t warmup_min_;
  std::size_t write_cursor_ = 0;
  std::vector<Transition> storage_;
};

}  // namespace qflow
