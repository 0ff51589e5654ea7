#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "xids/error.hpp"

namespace xids::nn {

XIDS_DEFINE_ERROR(InvalidSpec);

enum class Activation { Linear, Relu, Sigmoid, Tanh };
enum class Padding { Same, Valid };

struct Conv1DSpec {
  int filters = 1;
  int kernel_width = 3;
  int stride = 1;
  Padding padding = Padding::Same;
  Activation activation = Activation::Relu;
};

struct MaxPool1DSpec {
  int window = 2;
  int stride = 2;
};

// Flattens (steps, channels) of its input.
struct DenseSpec {
  int units = 1;
  Activation activation = Activation::Linear;
};

struct LstmSpec {
  int hidden_units = 1;
  bool return_sequences = false;
};

struct DropoutSpec {
  double rate = 0.0;
};

struct SoftmaxSpec {};

using LayerSpec = std::variant<Conv1DSpec, MaxPool1DSpec, DenseSpec, LstmSpec, DropoutSpec, SoftmaxSpec>;

// Custom is for ad-hoc architectures (tests, experiments); CNN and LSTM
// carry the reference-family constraints.
enum class Family { CNN, LSTM, Custom };

struct ModelSpec {
  Family family = Family::Custom;
  std::vector<LayerSpec> layers;
  long input_steps = 41;
  long input_channels = 1;
  int output_classes = 5;

  // Throws InvalidSpec.
  void validate() const;
};

// Conv1D(64,3,relu,same) -> MaxPool(2) -> Conv1D(128,3,relu,same) -> MaxPool(2)
// -> Conv1D(64,3,relu,same) -> Dense(64,relu) -> Dense(5) -> Softmax.
ModelSpec reference_cnn();
// 3 x [LSTM(64) -> Dropout(0.3)] -> Dense(5) -> Softmax, input (1, 41).
ModelSpec reference_lstm();

std::string to_string(Family f);
Family family_from_string(const std::string& s);
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

}  // namespace xids::nn
