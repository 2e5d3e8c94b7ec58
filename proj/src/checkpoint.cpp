#include "qflow/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "qflow/errors.hpp"

namespace qflow {

namespace {

using nlohmann::json;

static_assert(sizeof(double) == 8, "checkpoint format requires 64-bit doubles");

std::uint64_t to_little_endian_bits(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  return bits;
}

double from_little_endian_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}

json network_manifest(const MlpNetwork& net) {
  json fragment;
  fragment["input_dim"] = net.input_dim();
  fragment["input_batch_norm"] = net.options().input_batch_norm;
  fragment["bn_decay"] = net.options().bn_decay;
  fragment["bn_epsilon"] = net.options().bn_epsilon;
  json layers = json::array();
  for (const auto& spec : net.layer_specs()) {
    layers.push_back({{"out_dim", spec.out_dim},
                      {"activation", activation_name(spec.activation)},
                      {"batch_norm", spec.batch_norm}});
  }
  fragment["layers"] = layers;
  json arrays = json::array();
  for (const auto& [name, array] : net.named_state())
    arrays.push_back({{"name", name}, {"rows", array->rows()}, {"cols", array->cols()}});
  fragment["arrays"] = arrays;
  return fragment;
}

MlpNetwork network_from_manifest(const std::string& key, const json& fragment) {
  try {
    std::vector<MlpNetwork::LayerSpec> specs;
    for (const auto& layer : fragment.at("layers")) {
      MlpNetwork::LayerSpec spec;
      spec.out_dim = layer.at("out_dim").get<int>();
      spec.activation = activation_from_name(layer.at("activation").get<std::string>());
      spec.batch_norm = layer.at("batch_norm").get<bool>();
      specs.push_back(spec);
    }
    MlpNetwork::Options options;
    options.input_batch_norm = fragment.at("input_batch_norm").get<bool>();
    options.bn_decay = fragment.at("bn_decay").get<double>();
    options.bn_epsilon = fragment.at("bn_epsilon").get<double>();
    Rng scratch_rng(0);  // weights are overwritten from the binary payload
    return MlpNetwork(fragment.at("input_dim").get<int>(), std::move(specs), options, scratch_rng);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint manifest at fragment '" + key + "': " + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::string& dir, long step,
                     const std::vector<std::pair<std::string, const MlpNetwork*>>& fragments,
                     const std::string& config_text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());

  json manifest;
  manifest["format"] = "qflow-checkpoint-1";
  manifest["step"] = step;
  json frag_json;
  json order = json::array();
  for (const auto& [key, net] : fragments) {
    frag_json[key] = network_manifest(*net);
    for (const auto& [name, array] : net->named_state()) order.push_back(key + "/" + name);
  }
  manifest["fragments"] = frag_json;
  manifest["array_order"] = order;

  {
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw IoError("cannot write " + dir + "/manifest.json");
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(dir + "/params.bin", std::ios::binary);
    if (!out) throw IoError("cannot write " + dir + "/params.bin");
    for (const auto& [key, net] : fragments) {
      for (const auto& [name, array] : net->named_state()) {
        for (std::size_t i = 0; i < array->size(); ++i) {
          const std::uint64_t bits = to_little_endian_bits(array->data()[i]);
          out.write(reinterpret_cast<const char*>(&bits), 8);
        }
      }
    }
    if (!out) throw IoError("failed while writing " + dir + "/params.bin");
  }
  {
    std::ofstream out(dir + "/config.txt");
    if (!out) throw IoError("cannot write " + dir + "/config.txt");
    out << config_text;
  }
}

CheckpointContents load_checkpoint(const std::string& dir) {
  json manifest;
  {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw IoError("cannot open checkpoint manifest " + dir + "/manifest.json");
    try {
      in >> manifest;
    } catch (const json::exception& e) {
      throw IoError("corrupt checkpoint manifest " + dir + "/manifest.json: " + e.what());
    }
  }

  CheckpointContents contents;
  try {
    if (manifest.at("format").get<std::string>() != "qflow-checkpoint-1")
      throw IoError("unsupported checkpoint format in " + dir);
    contents.step = manifest.at("step").get<long>();
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint manifest " + dir + ": " + e.what());
  }

  std::ifstream bin(dir + "/params.bin", std::ios::binary);
  if (!bin) throw IoError("cannot open checkpoint payload " + dir + "/params.bin");

  const auto& fragments = manifest.at("fragments");
  // Arrays are stored in array_order; fragments iterate in that same order
  // because json objects preserve nothing -- so drive loading off array_order.
  std::map<std::string, MlpNetwork> nets;
  for (auto it = fragments.begin(); it != fragments.end(); ++it)
    nets.emplace(it.key(), network_from_manifest(it.key(), it.value()));

  for (const auto& entry : manifest.at("array_order")) {
    const std::string full = entry.get<std::string>();
    const auto slash = full.find('/');
    if (slash == std::string::npos) throw IoError("corrupt checkpoint manifest: bad array key '" + full + "'");
    const std::string key = full.substr(0, slash);
    const std::string name = full.substr(slash + 1);
    auto net_it = nets.find(key);
    if (net_it == nets.end()) throw IoError("corrupt checkpoint manifest: unknown fragment '" + key + "'");

    DenseArray* target = nullptr;
    for (auto& [state_name, array] : net_it->second.named_state()) {
      if (state_name == name) {
        target = array;
        break;
      }
    }
    if (!target) throw IoError("corrupt checkpoint manifest: unknown array '" + full + "'");
    // Validate the declared shape against the rebuilt topology.
    bool declared = false;
    for (const auto& decl : fragments.at(key).at("arrays")) {
      if (decl.at("name").get<std::string>() == name) {
        declared = true;
        if (decl.at("rows").get<int>() != target->rows() || decl.at("cols").get<int>() != target->cols())
          throw IoError("checkpoint manifest shape mismatch for array '" + full + "'");
        break;
      }
    }
    if (!declared) throw IoError("checkpoint manifest missing declaration for array '" + full + "'");
    for (std::size_t i = 0; i < target->size(); ++i) {
      std::uint64_t bits;
      bin.read(reinterpret_cast<char*>(&bits), 8);
      if (!bin) throw IoError("checkpoint payload truncated at array '" + full + "'");
      target->data()[i] = from_little_endian_bits(bits);
    }
  }
  contents.fragments = std::move(nets);

  {
    std::ifstream in(dir + "/config.txt");
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      contents.config_text = std::move(text);
    }
  }
  return contents;
}

}  // namespace qflow
