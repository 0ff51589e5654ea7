#include "xids/nn/spec.hpp"

#include <type_traits>

namespace xids::nn {

namespace {

std::string padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

Padding padding_from_string(const std::string& s) {
  if (s == "same") return Padding::Same;
  if (s == "valid") return Padding::Valid;
  throw InvalidSpec("unknown padding '" + s + "'");
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::CNN:
      return "cnn";
    case Family::LSTM:
      return "lstm";
    case Family::Custom:
      return "custom";
  }
  return "custom";
}

Family family_from_string(const std::string& s) {
  if (s == "cnn" || s == "CNN") return Family::CNN;
  if (s == "lstm" || s == "LSTM") return Family::LSTM;
  if (s == "custom") return Family::Custom;
  throw InvalidSpec("unknown model family '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear:
      return "linear";
    case Activation::Relu:
      return "relu";
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Tanh:
      return "tanh";
  }
  return "linear";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  throw InvalidSpec("unknown activation '" + s + "'");
}

void ModelSpec::validate() const {
  if (input_steps < 1 || input_channels < 1) throw InvalidSpec("input shape must be positive");
  if (output_classes < 1) throw InvalidSpec("output_classes must be positive");
  if (layers.empty()) throw InvalidSpec("model has no layers");
  int convs = 0;
  int lstms = 0;
  for (const auto& layer : layers) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Conv1DSpec>) {
            if (s.filters < 1 || s.kernel_width < 1 || s.stride < 1) throw InvalidSpec("Conv1D sizes must be >= 1");
            ++convs;
          } else if constexpr (std::is_same_v<T, MaxPool1DSpec>) {
            if (s.window < 1 || s.stride < 1) throw InvalidSpec("MaxPool1D sizes must be >= 1");
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            if (s.units < 1) throw InvalidSpec("Dense units must be >= 1");
          } else if constexpr (std::is_same_v<T, LstmSpec>) {
            if (s.hidden_units < 1) throw InvalidSpec("LSTM hidden_units must be >= 1");
            ++lstms;
          } else if constexpr (std::is_same_v<T, DropoutSpec>) {
            if (!(s.rate >= 0.0 && s.rate < 1.0)) throw InvalidSpec("dropout rate must lie in [0, 1)");
          }
        },
        layer);
  }
  if (family == Family::Custom) return;
  if (!std::holds_alternative<SoftmaxSpec>(layers.back())) throw InvalidSpec("final layer must be Softmax");
  if (output_classes != 5) throw InvalidSpec("reference families classify into 5 classes");
  if (family == Family::CNN && convs != 3) throw InvalidSpec("CNN family needs exactly 3 Conv1D layers");
  if (family == Family::LSTM && lstms != 3) throw InvalidSpec("LSTM family needs exactly 3 LSTM layers");
}

ModelSpec reference_cnn() {
  ModelSpec s;
  s.family = Family::CNN;
  s.input_steps = 41;
  s.input_channels = 1;
  s.layers = {
      Conv1DSpec{64, 3, 1, Padding::Same, Activation::Relu},
      MaxPool1DSpec{2, 2},
      Conv1DSpec{128, 3, 1, Padding::Same, Activation::Relu},
      MaxPool1DSpec{2, 2},
      Conv1DSpec{64, 3, 1, Padding::Same, Activation::Relu},
      DenseSpec{64, Activation::Relu},
      DenseSpec{5, Activation::Linear},
      SoftmaxSpec{},
  };
  return s;
}

ModelSpec reference_lstm() {
  ModelSpec s;
  s.family = Family::LSTM;
  s.input_steps = 1;
  s.input_channels = 41;
  s.layers = {
      LstmSpec{64, true},  DropoutSpec{0.3}, LstmSpec{64, true}, DropoutSpec{0.3},
      LstmSpec{64, false}, DropoutSpec{0.3}, DenseSpec{5, Activation::Linear}, SoftmaxSpec{},
  };
  return s;
}

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : spec.layers) {
    layers.push_back(std::visit(
        [](const auto& s) -> nlohmann::json {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, Conv1DSpec>) {
            return {{"type", "Conv1D"},        {"filters", s.filters},
                    {"kernel_width", s.kernel_width}, {"stride", s.stride},
                    {"padding", padding_name(s.padding)}, {"activation", to_string(s.activation)}};
          } else if constexpr (std::is_same_v<T, MaxPool1DSpec>) {
            return {{"type", "MaxPool1D"}, {"window", s.window}, {"stride", s.stride}};
          } else if constexpr (std::is_same_v<T, DenseSpec>) {
            return {{"type", "Dense"}, {"units", s.units}, {"activation", to_string(s.activation)}};
          } else if constexpr (std::is_same_v<T, LstmSpec>) {
            return {{"type", "LSTM"}, {"hidden_units", s.hidden_units}, {"return_sequences", s.return_sequences}};
          } else if constexpr (std::is_same_v<T, DropoutSpec>) {
            return {{"type", "Dropout"}, {"rate", s.rate}};
          } else {
            return {{"type", "Softmax"}};
          }
        },
        layer));
  }
  return {{"family", to_string(spec.family)},
          {"input_shape", {spec.input_steps, spec.input_channels}},
          {"output_classes", spec.output_classes},
          {"layers", layers}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.family = family_from_string(j.at("family").get<std::string>());
  s.input_steps = j.at("input_shape").at(0).get<long>();
  s.input_channels = j.at("input_shape").at(1).get<long>();
  s.output_classes = j.at("output_classes").get<int>();
  for (const auto& l : j.at("layers")) {
    const auto type = l.at("type").get<std::string>();
    if (type == "Conv1D") {
      s.layers.push_back(Conv1DSpec{l.at("filters").get<int>(), l.at("kernel_width").get<int>(),
                                    l.at("stride").get<int>(), padding_from_string(l.at("padding").get<std::string>()),
                                    activation_from_string(l.at("activation").get<std::string>())});
    } else if (type == "MaxPool1D") {
      s.layers.push_back(MaxPool1DSpec{l.at("window").get<int>(), l.at("stride").get<int>()});
    } else if (type == "Dense") {
      s.layers.push_back(
          DenseSpec{l.at("units").get<int>(), activation_from_string(l.at("activation").get<std::string>())});
    } else if (type == "LSTM") {
      s.layers.push_back(LstmSpec{l.at("hidden_units").get<int>(), l.at("return_sequences").get<bool>()});
    } else if (type == "Dropout") {
      s.layers.push_back(DropoutSpec{l.at("rate").get<double>()});
    } else if (type == "Softmax") {
      s.layers.push_back(SoftmaxSpec{});
    } else {
      throw InvalidSpec("unknown layer type '" + type + "'");
    }
  }
  s.validate();
  return s;
}

}  // namespace xids::nn
