#include "kktleak/model_io.hpp"

#include "kktleak/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace kktleak {

using nlohmann::json;

std::string model_to_json(const NetworkParams& net) {
  json neurons = json::array();
  for (Index j = 0; j < net.width(); ++j) {
    json w = json::array();
    for (Index c = 0; c < net.input_dim(); ++c) w.push_back(net.weights()(j, c));
    neurons.push_back({{"w", w}, {"b", net.biases()(j)}, {"v", net.output_weights()(j)}});
  }
  json doc = {{"format_version", kModelFormatVersion},
              {"input_dim", net.input_dim()},
              {"width", net.width()},
              {"neurons", neurons}};
  return doc.dump(2) + "\n";
}

NetworkParams model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model document is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported model format_version " + std::to_string(version));
    }
    const auto d = doc.at("input_dim").get<Index>();
    const auto k = doc.at("width").get<Index>();
    const json& neurons = doc.at("neurons");
    if (d < 1 || k < 1 || !neurons.is_array() ||
        static_cast<Index>(neurons.size()) != k) {
      throw ParseError("model width/input_dim disagree with the neuron list");
    }
    MatrixXd w(k, d);
    VectorXd b(k), v(k);
    for (Index j = 0; j < k; ++j) {
      const json& n = neurons.at(static_cast<std::size_t>(j));
      const json& wj = n.at("w");
      if (!wj.is_array() || static_cast<Index>(wj.size()) != d) {
        throw ParseError("neuron " + std::to_string(j) + " has a weight vector of the wrong length");
      }
      for (Index c = 0; c < d; ++c) w(j, c) = wj.at(static_cast<std::size_t>(c)).get<double>();
      b(j) = n.at("b").get<double>();
      v(j) = n.at("v").get<double>();
    }
    return NetworkParams(std::move(w), std::move(b), std::move(v));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("invalid model: ") + e.what());
  }
}

void write_model(const std::filesystem::path& path, const NetworkParams& net) {
  write_text_file(path, model_to_json(net));
}

NetworkParams read_model(const std::filesystem::path& path) {
  return model_from_json(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace kktleak
