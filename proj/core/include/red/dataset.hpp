#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "red/nn.hpp"

namespace red {

struct ActionSpace {
  enum class Kind { discrete, continuous };
  Kind kind = Kind::discrete;
  int size = 2;  // number of discrete actions, or continuous action dim

  int encoding_dim() const { return size; }
  bool operator==(const ActionSpace&) const = default;
};

/// Expert state-action pairs, one pair per column. Discrete actions are stored
/// one-hot; the joint scorer input is concat(state, action encoding).
struct ExpertDataset {
  Matrix states;   // state_dim x n
  Matrix actions;  // action encoding dim x n
  ActionSpace action_space;
  std::string source;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return states.cols(); }
  int state_dim() const { return static_cast<int>(states.rows()); }
  int input_dim() const { return static_cast<int>(states.rows() + actions.rows()); }

  /// (state_dim + encoding_dim) x n
  Matrix joint_inputs() const;
  /// Discrete action index of pair i (argmax of the one-hot column).
  int action_index(Eigen::Index i) const;

  /// Throws EmptyDataset / ShapeMismatch when the invariants do not hold.
  void validate() const;
};

Vector one_hot(int index, int size);
Vector joint_input(const Vector& state, const Vector& action_encoding);

/// CSV with header s_0..s_{d-1},a_enc_0..a_enc_{k-1} plus a sidecar
/// `<path>.meta.json` holding {action_space, source, seed}.
void save_dataset(const ExpertDataset& data, const std::filesystem::path& csv_path);
ExpertDataset load_dataset(const std::filesystem::path& csv_path);

std::filesystem::path dataset_meta_path(const std::filesystem::path& csv_path);

}  // namespace red
