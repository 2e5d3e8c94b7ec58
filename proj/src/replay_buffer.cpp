#include "qflow/replay_buffer.hpp"

#include <stdexcept>
#include <string>

#include "qflow/errors.hpp"

namespace qflow {

ReplayBuffer::ReplayBuffer(int state_dim, int action_dim, std::size_t capacity, std::size_t warmup_min)
    : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity), warmup_min_(warmup_min) {
  if (state_dim < 1 || action_dim < 1) throw ConfigError("replay buffer: dims must be positive");
  if (capacity < 1) throw ConfigError("replay buffer: capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (static_cast<int>(t.state.size()) != state_dim_ ||
      static_cast<int>(t.next_state.size()) != state_dim_)
    throw std::invalid_argument("replay push: state length does not match |S|=" +
                                std::to_string(state_dim_));
  if (static_cast<int>(t.action.size()) != action_dim_)
    throw std::invalid_argument("replay push: action length does not match |A|=" +
                                std::to_string(action_dim_));

  if (storage_.size() < capacity_) {
    storage_.push_back(t);
  } else {
    storage_[write_cursor_] = t;
  }
  write_cursor_ = (write_cursor_ + 1) % capacity_;
}

TransitionBatch ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (batch_size < 1) throw std::invalid_argument("replay sample: batch_size must be positive");
  if (!warmup_met())
    throw std::logic_error("replay sample: warmup not met (" + std::to_string(storage_.size()) +
                           " / " + std::to_string(warmup_min_) + " transitions)");

  TransitionBatch batch;
  batch.states = DenseArray(batch_size, state_dim_);
  batch.actions = DenseArray(batch_size, action_dim_);
  batch.next_states = DenseArray(batch_size, state_dim_);
  batch.rewards.resize(batch_size);
  batch.terminal.resize(batch_size);

  for (int i = 0; i < batch_size; ++i) {
    const Transition& t = storage_[rng.uniform_index(storage_.size())];
    std::copy(t.state.begin(), t.state.end(), batch.states.row(i).begin());
    std::copy(t.action.begin(), t.action.end(), batch.actions.row(i).begin());
    std::copy(t.next_state.begin(), t.next_state.end(), batch.next_states.row(i).begin());
    batch.rewards[i] = t.reward;
    batch.terminal[i] = t.terminal ? 1 : 0;
  }
  return batch;
}

}  // namespace qflow
